#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "svlp/svlp_all.hpp"

namespace svlp::testing {

inline ImageF random_image(int w, int h, int channels, std::uint32_t seed,
                           double lo = 0.0, double hi = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  ImageF img(w, h, channels);
  for (double& v : img.data()) v = dist(rng);
  return img;
}

inline WeightMap random_weight(int w, int h, std::uint32_t seed) {
  return make_weight(random_image(w, h, 1, seed));
}

// Smooth random field: random image blurred a few times, stretched to [0,1].
inline ImageF smooth_random(int w, int h, int channels, std::uint32_t seed,
                            int passes = 3) {
  ImageF img = random_image(w, h, channels, seed);
  for (int i = 0; i < passes; ++i) img = blur(img);
  double lo = 1e9, hi = -1e9;
  for (double v : img.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double& v : img.data()) v = (v - lo) / std::max(hi - lo, 1e-12);
  return img;
}

// Scene radiance in roughly [0.02, 4]: textured background plus a bright
// disc, and LDR frames exposed at `exposure` with a display gamma.
inline ImageF radiance_scene(int w, int h, std::uint32_t seed) {
  ImageF tex = smooth_random(w, h, 1, seed, 2);
  ImageF r(w, h, 3);
  const double cx = 0.6 * w, cy = 0.4 * h, rad = 0.2 * std::min(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      const double base = 0.05 + 0.6 * tex.at(x, y) + 0.3 * (double(x) / w);
      const double v = d < rad ? 3.0 + 0.8 * tex.at(x, y) : base;
      r.at(x, y, 0) = v;
      r.at(x, y, 1) = 0.9 * v;
      r.at(x, y, 2) = 0.8 * v + 0.02;
    }
  }
  return r;
}

inline ImageF expose(const ImageF& radiance, double exposure) {
  ImageF out = radiance;
  for (double& v : out.data()) {
    v = std::pow(std::clamp(v * exposure, 0.0, 1.0), 1.0 / 2.2);
  }
  return out;
}

inline ExposureStack synthetic_stack(int w, int h, std::uint32_t seed,
                                     std::vector<double> exposures = {0.25, 1.0, 4.0}) {
  const ImageF r = radiance_scene(w, h, seed);
  ExposureStack stack;
  for (double e : exposures) stack.frames.push_back(expose(r, e));
  return stack;
}

// Two-exposure stack with a bright disc that saturates in the long exposure.
struct DiscScene {
  ImageF short_exposure;
  ImageF long_exposure;
  double cx, cy, radius;
};

inline DiscScene disc_scene(int size = 256, double radius = 48.0) {
  DiscScene s{ImageF(size, size, 1), ImageF(size, size, 1), size / 2.0 - 0.5,
              size / 2.0 - 0.5, radius};
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const bool inside = std::hypot(x - s.cx, y - s.cy) < radius;
      s.short_exposure.at(x, y) = inside ? 0.75 : 0.08;
      s.long_exposure.at(x, y) = inside ? 1.0 : 0.45;
    }
  }
  return s;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("svlp_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace svlp::testing
