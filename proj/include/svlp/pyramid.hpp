#pragma once

#include <bit>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "svlp/image.hpp"
#include "svlp/image_io.hpp"
#include "svlp/parallel.hpp"

namespace svlp {

/// Odd-length symmetric smoothing kernel with unit sum.
class Kernel {
 public:
  /// 5-tap binomial [1 4 6 4 1] / 16.
  Kernel() : taps_{1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16} {}

  /// Normalizes `weights` to unit sum. Throws kConfig unless the result is
  /// odd-length, symmetric and has a positive sum.
  static Kernel from_weights(std::vector<double> weights) {
    if (weights.empty() || weights.size() % 2 == 0) {
      throw Error(ErrorKind::kConfig, "kernel must have an odd number of taps");
    }
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(sum > 0.0) || !std::isfinite(sum)) {
      throw Error(ErrorKind::kConfig, "kernel taps must have a positive sum");
    }
    for (double& w : weights) w /= sum;
    for (std::size_t i = 0; i < weights.size() / 2; ++i) {
      if (std::abs(weights[i] - weights[weights.size() - 1 - i]) > 1e-12) {
        throw Error(ErrorKind::kConfig, "kernel must be symmetric");
      }
    }
    Kernel k;
    k.taps_ = std::move(weights);
    return k;
  }

  const std::vector<double>& taps() const noexcept { return taps_; }
  int radius() const noexcept { return static_cast<int>(taps_.size() / 2); }

  friend bool operator==(const Kernel&, const Kernel&) = default;

 private:
  std::vector<double> taps_;
};

/// Reflect-101 (mirror without repeating the edge sample) index mapping.
inline int reflect101(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

namespace detail {

inline ImageF convolve_separable(const ImageF& img, const Kernel& k,
                                 double gain_x = 1.0, double gain_y = 1.0) {
  const int w = img.width();
  const int h = img.height();
  const int r = k.radius();
  std::vector<double> taps_x = k.taps();
  std::vector<double> taps_y = k.taps();
  for (double& t : taps_x) t *= gain_x;
  for (double& t : taps_y) t *= gain_y;

  ImageF tmp(w, h, img.channels());
  parallel_for(0, h * img.channels(), [&](int rc) {
    const int c = rc / h;
    const int y = rc % h;
    auto src = img.row(y, c);
    auto dst = tmp.row(y, c);
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) acc += taps_x[t + r] * src[reflect101(x + t, w)];
      dst[x] = acc;
    }
  });
  ImageF out(w, h, img.channels());
  parallel_for(0, h * img.channels(), [&](int rc) {
    const int c = rc / h;
    const int y = rc % h;
    auto dst = out.row(y, c);
    for (int x = 0; x < w; ++x) dst[x] = 0.0;
    for (int t = -r; t <= r; ++t) {
      auto src = tmp.row(reflect101(y + t, h), c);
      const double tap = taps_y[t + r];
      for (int x = 0; x < w; ++x) dst[x] += tap * src[x];
    }
  });
  return out;
}

}  // namespace detail

/// Separable convolution with reflect-101 borders; same dimensions.
inline ImageF blur(const ImageF& img, const Kernel& k = {}) {
  return detail::convolve_separable(img, k);
}

/// Keeps even (0-based) indices on both axes: ceil(n/2) per axis.
inline ImageF downsample(const ImageF& img) {
  const int w = (img.width() + 1) / 2;
  const int h = (img.height() + 1) / 2;
  ImageF out(w, h, img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      auto src = img.row(2 * y, c);
      auto dst = out.row(y, c);
      for (int x = 0; x < w; ++x) dst[x] = src[2 * x];
    }
  }
  return out;
}

inline bool valid_upsample_extent(int from, int to) noexcept {
  return to >= 1 && to >= 2 * from - 1 && to <= 2 * from + 1;
}

/// Zero-insertion to (target_w, target_h) followed by convolution with 2k
/// per axis. When a target axis is 2n+1 the trailing sample slot has no
/// source; it takes the reflect-101 continuation of the coarse signal so the
/// expansion keeps unit DC gain there too.
inline ImageF upsample_to(const ImageF& img, int target_w, int target_h,
                          const Kernel& k = {}) {
  if (!valid_upsample_extent(img.width(), target_w) ||
      !valid_upsample_extent(img.height(), target_h)) {
    throw Error(ErrorKind::kDimension,
                "upsample target " + std::to_string(target_w) + "x" +
                    std::to_string(target_h) + " is not a doubling of " +
                    std::to_string(img.width()) + "x" +
                    std::to_string(img.height()));
  }
  ImageF sparse(target_w, target_h, img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < target_h; y += 2) {
      auto src = img.row(reflect101(y / 2, img.height()), c);
      auto dst = sparse.row(y, c);
      for (int x = 0; x < target_w; x += 2) {
        dst[x] = src[reflect101(x / 2, img.width())];
      }
    }
  }
  // Zero insertion halves the DC level on every axis that was stretched.
  return detail::convolve_separable(sparse, k, target_w > 1 ? 2.0 : 1.0,
                                    target_h > 1 ? 2.0 : 1.0);
}

enum class PyramidKind { kGaussian, kLaplacian, kGaussBlend, kLapBlend, kRecon };

/// levels[0] is the finest level, levels.back() the coarsest.
struct Pyramid {
  std::vector<ImageF> levels;
  PyramidKind kind = PyramidKind::kGaussian;

  int level_count() const noexcept { return static_cast<int>(levels.size()); }
  const ImageF& operator[](int l) const { return levels.at(l); }
  ImageF& operator[](int l) { return levels.at(l); }
};

/// Largest level count an image of this size supports.
inline int max_levels(int width, int height) {
  const int m = std::min(width, height);
  return m < 1 ? 0 : std::bit_width(static_cast<unsigned>(m));
}

/// min(6, floor(log2(min dim)) - 1), at least 1.
inline int default_levels(int width, int height) {
  return std::max(1, std::min(6, max_levels(width, height) - 2));
}

inline void check_level_count(int levels, int width, int height) {
  const int limit = max_levels(width, height);
  if (levels < 1 || levels > limit) {
    throw Error(ErrorKind::kConfig,
                "level count " + std::to_string(levels) + " outside [1, " +
                    std::to_string(limit) + "] for a " + std::to_string(width) +
                    "x" + std::to_string(height) + " image");
  }
}

inline Pyramid build_gaussian(const ImageF& img, int levels,
                              const Kernel& k = {}) {
  check_level_count(levels, img.width(), img.height());
  Pyramid pyr{{img}, PyramidKind::kGaussian};
  pyr.levels.reserve(levels);
  for (int l = 1; l < levels; ++l) {
    pyr.levels.push_back(downsample(blur(pyr.levels.back(), k)));
  }
  return pyr;
}

/// Expansion of a coarser level onto the grid of the next finer one.
inline ImageF expand(const ImageF& coarse, const ImageF& fine_like,
                     const Kernel& k) {
  return upsample_to(coarse, fine_like.width(), fine_like.height(), k);
}

inline void subtract_in_place(ImageF& a, const ImageF& b) {
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) da[i] -= db[i];
}

inline void add_in_place(ImageF& a, const ImageF& b) {
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) da[i] += db[i];
}

inline Pyramid build_laplacian(const Pyramid& gauss, const Kernel& k = {}) {
  if (gauss.kind != PyramidKind::kGaussian) {
    throw Error(ErrorKind::kConfig, "build_laplacian needs a Gaussian pyramid");
  }
  Pyramid lap{gauss.levels, PyramidKind::kLaplacian};
  const int m = gauss.level_count();
  for (int l = 0; l + 1 < m; ++l) {
    subtract_in_place(lap.levels[l], expand(gauss[l + 1], gauss[l], k));
  }
  return lap;
}

inline void check_same_layout(const Pyramid& a, const Pyramid& b,
                              bool same_channels) {
  if (a.level_count() != b.level_count()) {
    throw Error(ErrorKind::kDimension, "pyramid level counts differ");
  }
  for (int l = 0; l < a.level_count(); ++l) {
    if (!a[l].same_dims(b[l]) ||
        (same_channels && a[l].channels() != b[l].channels())) {
      throw Error(ErrorKind::kDimension,
                  "pyramid level " + std::to_string(l + 1) + " dims differ");
    }
  }
}

/// Per level: a * w + b * (1 - w), with the single-channel w broadcast over
/// channels.
inline Pyramid blend_pyramids(const Pyramid& a, const Pyramid& b,
                              const Pyramid& w) {
  check_same_layout(a, b, true);
  check_same_layout(a, w, false);
  if (a.kind != b.kind ||
      (a.kind != PyramidKind::kGaussian && a.kind != PyramidKind::kLaplacian)) {
    throw Error(ErrorKind::kConfig,
                "blend_pyramids needs two Gaussian or two Laplacian pyramids");
  }
  Pyramid out{{},
              a.kind == PyramidKind::kLaplacian ? PyramidKind::kLapBlend
                                                : PyramidKind::kGaussBlend};
  out.levels.reserve(a.level_count());
  for (int l = 0; l < a.level_count(); ++l) {
    if (w[l].channels() != 1) {
      throw Error(ErrorKind::kDimension, "weight pyramid must be single-channel");
    }
    ImageF level(a[l].width(), a[l].height(), a[l].channels());
    auto wp = w[l].plane(0);
    for (int c = 0; c < a[l].channels(); ++c) {
      auto pa = a[l].plane(c);
      auto pb = b[l].plane(c);
      auto dst = level.plane(c);
      for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = pa[i] * wp[i] + pb[i] * (1.0 - wp[i]);
      }
    }
    out.levels.push_back(std::move(level));
  }
  return out;
}

/// Standard coarse-to-fine collapse; returns the finest reconstructed level.
inline ImageF reconstruct(const Pyramid& lap, const Kernel& k = {}) {
  if (lap.kind != PyramidKind::kLaplacian && lap.kind != PyramidKind::kLapBlend) {
    throw Error(ErrorKind::kConfig, "reconstruct needs a Laplacian pyramid");
  }
  if (lap.levels.empty()) throw Error(ErrorKind::kDimension, "empty pyramid");
  ImageF recon = lap.levels.back();
  for (int l = lap.level_count() - 2; l >= 0; --l) {
    ImageF up = expand(recon, lap[l], k);
    add_in_place(up, lap[l]);
    recon = std::move(up);
  }
  return recon;
}

/// Writes `<dir>/<prefix>_<l>.png` for l = 1..M. Laplacian-type levels are
/// mapped through 0.5 + v/2 before clamping.
inline std::vector<std::filesystem::path> dump_pyramid(
    const Pyramid& pyr, const std::filesystem::path& dir,
    const std::string& prefix, int bit_depth = 8) {
  const bool signed_levels = pyr.kind == PyramidKind::kLaplacian ||
                             pyr.kind == PyramidKind::kLapBlend;
  std::vector<std::filesystem::path> written;
  for (int l = 0; l < pyr.level_count(); ++l) {
    ImageF level = pyr[l];
    if (signed_levels) {
      for (double& v : level.data()) v = 0.5 + v / 2.0;
    }
    auto path = dir / (prefix + "_" + std::to_string(l + 1) + ".png");
    save_image(level, path, bit_depth);
    written.push_back(std::move(path));
  }
  return written;
}

}  // namespace svlp
