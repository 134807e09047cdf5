#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace svlp {

/// Broad error classes; the CLI maps each to a one-line diagnostic.
enum class ErrorKind { kIo, kFormat, kDimension, kConfig };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Planar floating-point image. Samples are nominally in [0,1]; channel c,
/// row y, column x lives at data[(c * height + y) * width + x].
class ImageF {
 public:
  ImageF() = default;

  ImageF(int width, int height, int channels, double fill = 0.0)
      : width_(width), height_(height), channels_(channels) {
    if (width < 1 || height < 1) {
      throw Error(ErrorKind::kDimension, "image dimensions must be >= 1");
    }
    if (channels != 1 && channels != 3) {
      throw Error(ErrorKind::kFormat, "image must have 1 or 3 channels");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(width_) * height_;
  }
  std::size_t size() const noexcept { return data_.size(); }

  double& at(int x, int y, int c = 0) noexcept {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  double at(int x, int y, int c = 0) const noexcept {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  std::span<double> plane(int c) noexcept {
    return {data_.data() + c * plane_size(), plane_size()};
  }
  std::span<const double> plane(int c) const noexcept {
    return {data_.data() + c * plane_size(), plane_size()};
  }
  std::span<double> row(int y, int c = 0) noexcept {
    return {data_.data() + (static_cast<std::size_t>(c) * height_ + y) * width_,
            static_cast<std::size_t>(width_)};
  }
  std::span<const double> row(int y, int c = 0) const noexcept {
    return {data_.data() + (static_cast<std::size_t>(c) * height_ + y) * width_,
            static_cast<std::size_t>(width_)};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const ImageF& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }
  bool same_dims(const ImageF& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_;
  }

  friend bool operator==(const ImageF&, const ImageF&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

inline constexpr double kLumaR = 0.2126;
inline constexpr double kLumaG = 0.7152;
inline constexpr double kLumaB = 0.0722;

/// Rec.709 luma. A single-channel input is returned as a copy.
inline ImageF luma(const ImageF& img) {
  if (img.channels() == 1) return img;
  ImageF out(img.width(), img.height(), 1);
  auto r = img.plane(0);
  auto g = img.plane(1);
  auto b = img.plane(2);
  auto dst = out.plane(0);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
  }
  return out;
}

inline ImageF clamp01(ImageF img) {
  for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

inline double mean(const ImageF& img) {
  double sum = 0.0;
  for (double v : img.data()) sum += v;
  return sum / static_cast<double>(img.size());
}

inline double max_abs_diff(const ImageF& a, const ImageF& b) {
  if (!a.same_shape(b)) {
    throw Error(ErrorKind::kDimension, "max_abs_diff: shape mismatch");
  }
  double m = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    m = std::max(m, std::abs(da[i] - db[i]));
  }
  return m;
}

inline bool all_finite(const ImageF& img) {
  return std::ranges::all_of(img.data(),
                             [](double v) { return std::isfinite(v); });
}

}  // namespace svlp
