#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include "svlp/image.hpp"
#include "svlp/image_io.hpp"

namespace svlp {

/// Single-channel map in [0,1]; weights the first image of a blend pair.
struct WeightMap {
  ImageF map;

  int width() const noexcept { return map.width(); }
  int height() const noexcept { return map.height(); }
};

inline WeightMap make_weight(ImageF map) {
  if (map.channels() != 1) {
    throw Error(ErrorKind::kFormat, "weight map must be single-channel");
  }
  return {clamp01(std::move(map))};
}

inline WeightMap constant_weight(int width, int height, double value) {
  return make_weight(ImageF(width, height, 1, value));
}

inline WeightMap load_weight(const std::filesystem::path& path, int width,
                             int height) {
  ImageF img = load_image(path);
  if (img.channels() != 1) {
    throw Error(ErrorKind::kFormat,
                path.string() + ": weight map must be grayscale");
  }
  if (img.width() != width || img.height() != height) {
    throw Error(ErrorKind::kDimension,
                path.string() + ": weight map is " + std::to_string(img.width()) +
                    "x" + std::to_string(img.height()) + ", expected " +
                    std::to_string(width) + "x" + std::to_string(height));
  }
  return make_weight(std::move(img));
}

inline constexpr double kWellExposedSigma = 0.2;
inline constexpr double kWeightEpsilon = 1e-12;

inline double well_exposedness(double luma_value) {
  const double d = luma_value - 0.5;
  return std::exp(-(d * d) / (2.0 * kWellExposedSigma * kWellExposedSigma));
}

/// Well-exposedness ratio e_s / (e_s + e_h + eps), computed on luma.
inline WeightMap default_weight(const ImageF& i_s, const ImageF& i_h) {
  if (!i_s.same_dims(i_h)) {
    throw Error(ErrorKind::kDimension, "default_weight: image dims differ");
  }
  const ImageF ls = luma(i_s);
  const ImageF lh = luma(i_h);
  ImageF w(i_s.width(), i_s.height(), 1);
  auto ps = ls.plane(0);
  auto ph = lh.plane(0);
  auto dst = w.plane(0);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double es = well_exposedness(ps[i]);
    const double eh = well_exposedness(ph[i]);
    dst[i] = std::clamp(es / (es + eh + kWeightEpsilon), 0.0, 1.0);
  }
  return {std::move(w)};
}

}  // namespace svlp
