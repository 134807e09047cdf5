#pragma once

// Spatially variant Laplacian pyramid blending: per-patch, per-level mixing
// between the collapsed Laplacian blend and the Gaussian blend, steered by
// how much the highlight map of the brighter frame varies inside each patch.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "svlp/config.hpp"
#include "svlp/image.hpp"
#include "svlp/parallel.hpp"
#include "svlp/pyramid.hpp"
#include "svlp/weights.hpp"

namespace svlp {

// ---------------------------------------------------------------------------
// Highlight map and alpha functions

/// exp(-(luma - 1)^2 / (2 sigma^2)); peaks at 1 for saturated pixels.
inline ImageF intensity_map(const ImageF& i_h, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::kConfig, "sigma must be > 0");
  ImageF m = luma(i_h);
  const double denom = 2.0 * sigma * sigma;
  for (double& v : m.data()) {
    const double d = v - 1.0;
    v = std::exp(-(d * d) / denom);
  }
  return m;
}

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

inline ImageF extract_patch(const ImageF& img, const Rect& r) {
  ImageF patch(r.width, r.height, 1);
  for (int y = 0; y < r.height; ++y) {
    auto src = img.row(r.y + y);
    auto dst = patch.row(y);
    std::copy_n(src.begin() + r.x, r.width, dst.begin());
  }
  return patch;
}

/// Mean |5-point Laplacian| over the patch, reflect-101 at the patch edges.
inline double mean_abs_laplacian(const ImageF& patch) {
  const int w = patch.width();
  const int h = patch.height();
  double sum = 0.0;
  for (int y = 0; y < h; ++y) {
    auto up = patch.row(reflect101(y - 1, h));
    auto mid = patch.row(y);
    auto down = patch.row(reflect101(y + 1, h));
    for (int x = 0; x < w; ++x) {
      const double lap = up[x] + down[x] + mid[reflect101(x - 1, w)] +
                         mid[reflect101(x + 1, w)] - 4.0 * mid[x];
      sum += std::abs(lap);
    }
  }
  return sum / static_cast<double>(patch.plane_size());
}

inline double population_variance(const ImageF& patch) {
  // Shifted by the first sample so a constant patch is exactly zero.
  const auto values = patch.plane(0);
  const double shift = values[0];
  double mu = 0.0;
  for (double v : values) mu += v - shift;
  mu /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - shift - mu) * (v - shift - mu);
  return ss / static_cast<double>(values.size());
}

inline double alpha_laplacian_mean(const ImageF& patch, double tau_lap) {
  return std::min(1.0, mean_abs_laplacian(patch) / tau_lap);
}

inline double alpha_variance(const ImageF& patch, double tau_var) {
  return std::min(1.0, population_variance(patch) / tau_var);
}

// ---------------------------------------------------------------------------
// Patch layout and window

/// Patch starts along one axis: stride K/2, the last patch pulled back so it
/// ends at the edge. An axis no longer than K is a single patch.
struct AxisPatches {
  std::vector<int> starts;
  int extent = 0;  // patch length along this axis

  static AxisPatches make(int length, int patch) {
    AxisPatches a;
    if (length <= patch) {
      a.starts = {0};
      a.extent = length;
      return a;
    }
    const int stride = patch / 2;
    for (int s = 0; s + patch < length; s += stride) a.starts.push_back(s);
    a.starts.push_back(length - patch);
    a.extent = patch;
    return a;
  }

  int count() const noexcept { return static_cast<int>(starts.size()); }
};

/// sin^2(pi (t + 1/2) / K), t in [0, K). Shifted by K/2 it is the cosine
/// counterpart, so the two overlapping halves sum to exactly one.
inline std::vector<double> raised_cosine_1d(int k) {
  if (k < 1) throw Error(ErrorKind::kConfig, "window length must be >= 1");
  std::vector<double> s(k);
  for (int t = 0; t < k; ++t) {
    const double v = std::sin(std::numbers::pi * (t + 0.5) / k);
    s[t] = v * v;
  }
  return s;
}

/// K x K separable window, row-major.
inline std::vector<double> raised_cosine_window(int k) {
  if (k < 4 || k % 2 != 0) {
    throw Error(ErrorKind::kConfig, "window size must be even and >= 4");
  }
  const auto s = raised_cosine_1d(k);
  std::vector<double> w(static_cast<std::size_t>(k) * k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) w[static_cast<std::size_t>(i) * k + j] = s[i] * s[j];
  }
  return w;
}

/// Overlapping K x K patches covering a width x height level.
class PatchGrid {
 public:
  PatchGrid() = default;
  PatchGrid(int width, int height, int patch)
      : width_(width),
        height_(height),
        patch_(patch),
        cols_(AxisPatches::make(width, patch)),
        rows_(AxisPatches::make(height, patch)) {
    if (patch < 4 || patch % 2 != 0) {
      throw Error(ErrorKind::kConfig, "patch size must be even and >= 4");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int patch() const noexcept { return patch_; }
  int cols() const noexcept { return cols_.count(); }
  int rows() const noexcept { return rows_.count(); }
  int count() const noexcept { return cols() * rows(); }
  const AxisPatches& col_axis() const noexcept { return cols_; }
  const AxisPatches& row_axis() const noexcept { return rows_; }

  Rect rect(int col, int row) const {
    return {cols_.starts.at(col), rows_.starts.at(row), cols_.extent,
            rows_.extent};
  }

  friend bool operator==(const PatchGrid&, const PatchGrid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int patch_ = 0;
  AxisPatches cols_;
  AxisPatches rows_;
};

namespace detail {

struct Cover {
  int patch;
  double weight;
};

// For each coordinate, the patches covering it and their window weights,
// in ascending patch order.
inline std::vector<std::vector<Cover>> axis_cover(const AxisPatches& axis,
                                                  int length) {
  const auto window = raised_cosine_1d(axis.extent);
  std::vector<std::vector<Cover>> cover(length);
  for (int p = 0; p < axis.count(); ++p) {
    for (int t = 0; t < axis.extent; ++t) {
      cover[axis.starts[p] + t].push_back({p, window[t]});
    }
  }
  return cover;
}

}  // namespace detail

/// Overlap-add of one scalar per patch: sum_p w_p(x) v_p / sum_p w_p(x).
/// The numerator and denominator use the same operation order, so a constant
/// field reproduces its value exactly.
inline ImageF overlap_add(const PatchGrid& grid, std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(grid.count())) {
    throw Error(ErrorKind::kDimension, "overlap_add: one value per patch required");
  }
  const auto cx = detail::axis_cover(grid.col_axis(), grid.width());
  const auto cy = detail::axis_cover(grid.row_axis(), grid.height());
  ImageF out(grid.width(), grid.height(), 1);
  parallel_for(0, grid.height(), [&](int y) {
    if (cy[y].empty()) {
      throw Error(ErrorKind::kDimension, "patch grid leaves a row uncovered");
    }
    auto dst = out.row(y);
    for (int x = 0; x < grid.width(); ++x) {
      if (cx[x].empty()) {
        throw Error(ErrorKind::kDimension, "patch grid leaves a column uncovered");
      }
      double num = 0.0;
      double den = 0.0;
      for (const auto& ry : cy[y]) {
        for (const auto& rx : cx[x]) {
          const double w = ry.weight * rx.weight;
          num += w * values[static_cast<std::size_t>(ry.patch) * grid.cols() + rx.patch];
          den += w;
        }
      }
      dst[x] = num / den;
    }
  });
  return out;
}

/// Raw accumulated window mass sum_p w_p(x), before renormalization.
inline ImageF window_mass(const PatchGrid& grid) {
  const auto cx = detail::axis_cover(grid.col_axis(), grid.width());
  const auto cy = detail::axis_cover(grid.row_axis(), grid.height());
  ImageF out(grid.width(), grid.height(), 1);
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      double den = 0.0;
      for (const auto& ry : cy[y]) {
        for (const auto& rx : cx[x]) den += ry.weight * rx.weight;
      }
      out.at(x, y) = den;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Alpha field

struct AlphaLevel {
  PatchGrid grid;
  std::vector<double> alpha;  // grid.rows() x grid.cols(), row-major

  double at(int col, int row) const {
    return alpha.at(static_cast<std::size_t>(row) * grid.cols() + col);
  }
  /// Per-pixel alpha on this level's grid.
  ImageF raster() const { return overlap_add(grid, alpha); }
};

/// One AlphaLevel per pyramid level except the coarsest (finest first).
struct AlphaField {
  std::vector<AlphaLevel> levels;

  int level_count() const noexcept { return static_cast<int>(levels.size()) + 1; }
};

/// Patch grids for every level but the coarsest of `like`, filled with a
/// constant. Used to force the degenerate branches.
inline AlphaField constant_alpha_field(const Pyramid& like, int patch,
                                       double value) {
  AlphaField field;
  for (int l = 0; l + 1 < like.level_count(); ++l) {
    PatchGrid grid(like[l].width(), like[l].height(), patch);
    field.levels.push_back(
        {grid, std::vector<double>(static_cast<std::size_t>(grid.count()), value)});
  }
  return field;
}

inline AlphaField compute_alpha_field(const Pyramid& m_pyr,
                                      const BlendConfig& cfg) {
  cfg.validate();
  AlphaField field;
  for (int l = 0; l + 1 < m_pyr.level_count(); ++l) {
    const ImageF& level = m_pyr[l];
    if (level.channels() != 1) {
      throw Error(ErrorKind::kDimension, "intensity map must be single-channel");
    }
    AlphaLevel al{PatchGrid(level.width(), level.height(), cfg.patch), {}};
    al.alpha.resize(static_cast<std::size_t>(al.grid.count()));
    parallel_for(0, al.grid.count(), [&](int i) {
      const ImageF patch =
          extract_patch(level, al.grid.rect(i % al.grid.cols(), i / al.grid.cols()));
      al.alpha[i] = cfg.alpha_fn == AlphaFunction::kVariance
                        ? alpha_variance(patch, cfg.tau_var)
                        : alpha_laplacian_mean(patch, cfg.tau_lap);
    }, 64);
    field.levels.push_back(std::move(al));
  }
  return field;
}

// ---------------------------------------------------------------------------
// Reconstruction

/// Coarse-to-fine collapse where every level l < M is mixed per patch with
/// the Gaussian blend: out = (1 - a) (expand(recon) + lap) + a * gauss.
inline ImageF reconstruct_sv(const Pyramid& lap_blend, const Pyramid& gauss_blend,
                             const AlphaField& alpha, const BlendConfig& cfg) {
  check_same_layout(lap_blend, gauss_blend, true);
  const int m = lap_blend.level_count();
  if (m < 1) throw Error(ErrorKind::kDimension, "empty pyramid");
  if (alpha.level_count() != m) {
    throw Error(ErrorKind::kDimension, "alpha field does not match level count");
  }
  ImageF recon = lap_blend.levels.back();
  for (int l = m - 2; l >= 0; --l) {
    const AlphaLevel& al = alpha.levels[l];
    if (al.grid.width() != lap_blend[l].width() ||
        al.grid.height() != lap_blend[l].height()) {
      throw Error(ErrorKind::kDimension,
                  "alpha grid does not cover level " + std::to_string(l + 1));
    }
    ImageF base = expand(recon, lap_blend[l], cfg.kernel);
    add_in_place(base, lap_blend[l]);
    const ImageF a = al.raster();
    const auto ap = a.plane(0);
    for (int c = 0; c < base.channels(); ++c) {
      auto b = base.plane(c);
      auto g = gauss_blend[l].plane(c);
      for (std::size_t i = 0; i < b.size(); ++i) {
        b[i] = (1.0 - ap[i]) * b[i] + ap[i] * g[i];
      }
    }
    recon = std::move(base);
  }
  return recon;
}

enum class Reconstruction { kStandard, kSpatiallyVariant };

struct BlendResult {
  ImageF image;
  AlphaField alpha;  // empty for kStandard
  int levels = 0;
};

/// Two-frame blend; w weights i_s. The output is clamped to [0,1].
inline BlendResult blend_two(const ImageF& i_s, const ImageF& i_h,
                             const WeightMap& w, const BlendConfig& cfg,
                             Reconstruction mode = Reconstruction::kSpatiallyVariant) {
  cfg.validate();
  if (!i_s.same_shape(i_h)) {
    throw Error(ErrorKind::kDimension, "blend_two: input images differ in shape");
  }
  if (w.map.width() != i_s.width() || w.map.height() != i_s.height()) {
    throw Error(ErrorKind::kDimension, "blend_two: weight map dims differ");
  }
  const int m = cfg.resolved_levels(i_s.width(), i_s.height());
  const Kernel& k = cfg.kernel;

  const Pyramid gs = build_gaussian(i_s, m, k);
  const Pyramid gh = build_gaussian(i_h, m, k);
  const Pyramid gw = build_gaussian(w.map, m, k);
  const Pyramid lap_blend =
      blend_pyramids(build_laplacian(gs, k), build_laplacian(gh, k), gw);

  BlendResult result;
  result.levels = m;
  if (mode == Reconstruction::kStandard) {
    result.image = clamp01(reconstruct(lap_blend, k));
    return result;
  }
  const Pyramid gauss_blend = blend_pyramids(gs, gh, gw);
  const Pyramid m_pyr = build_gaussian(intensity_map(i_h, cfg.sigma), m, k);
  result.alpha = compute_alpha_field(m_pyr, cfg);
  result.image = clamp01(reconstruct_sv(lap_blend, gauss_blend, result.alpha, cfg));
  return result;
}

// ---------------------------------------------------------------------------
// Multi-frame fusion

/// Co-registered frames of one scene.
struct ExposureStack {
  std::vector<ImageF> frames;

  int size() const noexcept { return static_cast<int>(frames.size()); }

  void validate() const {
    if (frames.size() < 2) {
      throw Error(ErrorKind::kConfig, "need at least 2 inputs");
    }
    for (const auto& f : frames) {
      if (!f.same_shape(frames.front())) {
        throw Error(ErrorKind::kDimension,
                    "input frames differ in size or channel count");
      }
    }
  }

  /// Frame indices ordered by ascending mean luma; ties keep input order.
  std::vector<int> exposure_order() const {
    std::vector<double> brightness;
    for (const auto& f : frames) brightness.push_back(mean(luma(f)));
    std::vector<int> order(frames.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::ranges::stable_sort(order, [&](int a, int b) {
      return brightness[a] < brightness[b];
    });
    return order;
  }
};

struct FuseResult {
  ImageF image;
  std::vector<AlphaField> alphas;  // one per pass
  std::vector<int> order;          // frame indices in blending order
  int levels = 0;
};

/// Sequential fusion: out_1 = darkest frame, out_i = blend(out_{i-1},
/// frame_i, W_{i-1}). Supplied weights apply to the passes in that sorted
/// order; missing weights fall back to default_weight.
inline FuseResult fuse_stack(const ExposureStack& stack,
                             const std::optional<std::vector<WeightMap>>& weights,
                             const BlendConfig& cfg,
                             Reconstruction mode = Reconstruction::kSpatiallyVariant) {
  stack.validate();
  cfg.validate();
  if (weights && static_cast<int>(weights->size()) != stack.size() - 1) {
    throw Error(ErrorKind::kConfig,
                "expected " + std::to_string(stack.size() - 1) +
                    " weight maps, got " + std::to_string(weights->size()));
  }
  FuseResult result;
  result.order = stack.exposure_order();
  ImageF acc = stack.frames[result.order[0]];
  for (int i = 1; i < stack.size(); ++i) {
    const ImageF& next = stack.frames[result.order[i]];
    const WeightMap w = weights ? (*weights)[i - 1] : default_weight(acc, next);
    BlendResult pass = blend_two(acc, next, w, cfg, mode);
    acc = std::move(pass.image);
    result.levels = pass.levels;
    if (mode == Reconstruction::kSpatiallyVariant) {
      result.alphas.push_back(std::move(pass.alpha));
    }
  }
  result.image = std::move(acc);
  return result;
}

// ---------------------------------------------------------------------------
// Equivalent-level visualization

/// E(x) = 1 + sum_{l=1}^{M-1} prod_{j<=l} (1 - alpha_j(x)), with each level's
/// alpha rasterized by overlap-add and expanded to the output grid.
inline ImageF level_map(const AlphaField& alpha, int out_w, int out_h, int levels,
                        const Kernel& k = {}) {
  if (alpha.level_count() != levels) {
    throw Error(ErrorKind::kDimension, "alpha field does not match level count");
  }
  std::vector<std::pair<int, int>> dims{{out_w, out_h}};
  for (int l = 1; l < levels; ++l) {
    dims.emplace_back((dims.back().first + 1) / 2, (dims.back().second + 1) / 2);
  }
  ImageF equivalent(out_w, out_h, 1, 1.0);
  ImageF survive(out_w, out_h, 1, 1.0);
  for (int l = 0; l + 1 < levels; ++l) {
    const AlphaLevel& al = alpha.levels[l];
    if (al.grid.width() != dims[l].first || al.grid.height() != dims[l].second) {
      throw Error(ErrorKind::kDimension,
                  "alpha grid of level " + std::to_string(l + 1) +
                      " does not match the output size");
    }
    ImageF a = al.raster();
    for (int j = l - 1; j >= 0; --j) {
      a = upsample_to(a, dims[j].first, dims[j].second, k);
    }
    auto ap = a.plane(0);
    auto sp = survive.plane(0);
    auto ep = equivalent.plane(0);
    for (std::size_t i = 0; i < ep.size(); ++i) {
      sp[i] *= 1.0 - std::clamp(ap[i], 0.0, 1.0);
      ep[i] += sp[i];
    }
  }
  return equivalent;
}

/// (E - 1) / (M - 1), the scaling used when the map is stored as an image.
inline ImageF level_map_image(const ImageF& equivalent, int levels) {
  ImageF out = equivalent;
  for (double& v : out.data()) {
    v = levels > 1 ? (v - 1.0) / (levels - 1) : 0.0;
  }
  return out;
}

/// One pixel per patch.
inline ImageF alpha_level_image(const AlphaLevel& level) {
  ImageF out(level.grid.cols(), level.grid.rows(), 1);
  std::copy(level.alpha.begin(), level.alpha.end(), out.data().begin());
  return out;
}

}  // namespace svlp
