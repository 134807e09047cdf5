#pragma once

// MEF-SSIM: no-reference quality of a fused image against its exposure
// stack. Per window, a desired patch is synthesized from the inputs:
// contrast is the largest input contrast, structure is the contrast^p
// weighted mean of the unit input structures. The fused patch is compared
// with it through the SSIM contrast-structure term, averaged over windows,
// and the per-scale means are combined with the multi-scale SSIM exponents.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "svlp/image.hpp"
#include "svlp/parallel.hpp"
#include "svlp/svlp.hpp"

namespace svlp {

struct MefSsimOptions {
  int window = 8;
  int scales = 3;
  double k2 = 0.03;           // C = (k2 * L)^2 / 2 with L = 1
  double structure_power = 4.0;
  std::vector<double> scale_weights{0.0448, 0.2856, 0.3001};
};

struct MefScore {
  double overall = 0.0;
  std::vector<double> per_scale;
  int scales = 0;
};

namespace detail {

// Valid-region box mean with a win x win window.
inline std::vector<double> box_mean(const std::vector<double>& src, int w, int h,
                                    int win) {
  const int ow = w - win + 1;
  const int oh = h - win + 1;
  std::vector<double> horiz(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    const double* row = src.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < win; ++t) s += row[x + t];
      horiz[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  const double norm = 1.0 / (static_cast<double>(win) * win);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < win; ++t) s += horiz[static_cast<std::size_t>(y + t) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s * norm;
    }
  }
  return out;
}

inline std::vector<double> product(const std::vector<double>& a,
                                   const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

// 2x2 average then even-index decimation; the trailing odd row/column is
// averaged with itself.
inline ImageF halve(const ImageF& img) {
  const int w = (img.width() + 1) / 2;
  const int h = (img.height() + 1) / 2;
  ImageF out(w, h, 1);
  for (int y = 0; y < h; ++y) {
    const int y0 = 2 * y;
    const int y1 = std::min(2 * y + 1, img.height() - 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = 2 * x;
      const int x1 = std::min(2 * x + 1, img.width() - 1);
      out.at(x, y) = 0.25 * (img.at(x0, y0) + img.at(x1, y0) + img.at(x0, y1) +
                             img.at(x1, y1));
    }
  }
  return out;
}

inline std::vector<double> to_vector(const ImageF& img) {
  return {img.plane(0).begin(), img.plane(0).end()};
}

}  // namespace detail

/// Mean similarity over all valid windows at one scale, on luma planes.
inline double mef_ssim_single_scale(const std::vector<ImageF>& frames,
                                    const ImageF& fused,
                                    const MefSsimOptions& opt = {}) {
  const int w = fused.width();
  const int h = fused.height();
  const int win = std::max(1, std::min({opt.window, w, h}));
  const int n = static_cast<int>(frames.size());
  const double c = 0.5 * opt.k2 * opt.k2;

  std::vector<std::vector<double>> x;
  for (const auto& f : frames) x.push_back(detail::to_vector(f));
  const std::vector<double> y = detail::to_vector(fused);

  std::vector<std::vector<double>> mu(n);
  for (int k = 0; k < n; ++k) mu[k] = detail::box_mean(x[k], w, h, win);
  const auto mu_y = detail::box_mean(y, w, h, win);
  const auto e_yy = detail::box_mean(detail::product(y, y), w, h, win);
  // cov[j][k] for j <= k, and cov_y[k]
  std::vector<std::vector<std::vector<double>>> e_xx(n);
  std::vector<std::vector<double>> e_xy(n);
  for (int j = 0; j < n; ++j) {
    e_xx[j].resize(n);
    for (int k = j; k < n; ++k) {
      e_xx[j][k] = detail::box_mean(detail::product(x[j], x[k]), w, h, win);
    }
    e_xy[j] = detail::box_mean(detail::product(x[j], y), w, h, win);
  }

  const std::size_t count = mu_y.size();
  std::vector<double> score(count);
  parallel_for(0, static_cast<int>(count), [&](int i) {
    std::vector<double> sigma(n);
    std::vector<double> a(n);
    double sigma_hat = 0.0;
    double wsum = 0.0;
    for (int k = 0; k < n; ++k) {
      const double var = std::max(0.0, e_xx[k][k][i] - mu[k][i] * mu[k][i]);
      sigma[k] = std::sqrt(var);
      sigma_hat = std::max(sigma_hat, sigma[k]);
      wsum += std::pow(sigma[k], opt.structure_power);
    }
    const double var_y = std::max(0.0, e_yy[i] - mu_y[i] * mu_y[i]);
    double cross = 0.0;
    double norm_sq = 0.0;
    if (wsum > 0.0) {
      // structure s_bar = sum_k a_k (x_k - mu_k), a_k = sigma_k^(p-1) / wsum
      for (int k = 0; k < n; ++k) {
        a[k] = std::pow(sigma[k], opt.structure_power - 1.0) / wsum;
      }
      for (int j = 0; j < n; ++j) {
        if (a[j] == 0.0) continue;
        for (int k = 0; k < n; ++k) {
          if (a[k] == 0.0) continue;
          const int lo = std::min(j, k);
          const int hi = std::max(j, k);
          const double cov = e_xx[lo][hi][i] - mu[lo][i] * mu[hi][i];
          norm_sq += a[j] * a[k] * cov;
        }
        cross += a[j] * (e_xy[j][i] - mu[j][i] * mu_y[i]);
      }
    }
    double cov_hat_y = 0.0;
    double var_hat = 0.0;
    if (norm_sq > 0.0) {
      cov_hat_y = sigma_hat * cross / std::sqrt(norm_sq);
      var_hat = sigma_hat * sigma_hat;
    }
    score[i] = (2.0 * cov_hat_y + c) / (var_hat + var_y + c);
  }, 1024);

  double sum = 0.0;
  for (double s : score) sum += s;
  return sum / static_cast<double>(count);
}

/// Multi-scale score; frames and fused image are reduced to luma first.
inline MefScore mef_ssim(const std::vector<ImageF>& stack, const ImageF& fused,
                         const MefSsimOptions& opt = {}) {
  if (stack.size() < 2) throw Error(ErrorKind::kConfig, "need at least 2 inputs");
  for (const auto& f : stack) {
    if (!f.same_dims(fused)) {
      throw Error(ErrorKind::kDimension, "mef_ssim: fused image dims differ from stack");
    }
  }
  if (opt.scales < 1 || static_cast<int>(opt.scale_weights.size()) < opt.scales) {
    throw Error(ErrorKind::kConfig, "mef_ssim: need one weight per scale");
  }
  std::vector<ImageF> frames;
  for (const auto& f : stack) frames.push_back(luma(f));
  ImageF y = luma(fused);

  MefScore result;
  result.scales = opt.scales;
  double weight_total = 0.0;
  for (int s = 0; s < opt.scales; ++s) weight_total += opt.scale_weights[s];
  result.overall = 1.0;
  for (int s = 0; s < opt.scales; ++s) {
    if (s > 0) {
      for (auto& f : frames) f = detail::halve(f);
      y = detail::halve(y);
    }
    const double q = mef_ssim_single_scale(frames, y, opt);
    result.per_scale.push_back(q);
    result.overall *= std::pow(std::max(q, 0.0), opt.scale_weights[s] / weight_total);
  }
  return result;
}

inline MefScore mef_ssim(const ExposureStack& stack, const ImageF& fused,
                         const MefSsimOptions& opt = {}) {
  return mef_ssim(stack.frames, fused, opt);
}

}  // namespace svlp
