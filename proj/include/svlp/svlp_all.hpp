#pragma once

#include "svlp/config.hpp"
#include "svlp/image.hpp"
#include "svlp/image_io.hpp"
#include "svlp/metrics.hpp"
#include "svlp/parallel.hpp"
#include "svlp/pyramid.hpp"
#include "svlp/svlp.hpp"
#include "svlp/weights.hpp"
