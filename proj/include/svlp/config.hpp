#pragma once

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "svlp/image.hpp"
#include "svlp/pyramid.hpp"

namespace svlp {

enum class AlphaFunction { kLaplacianMean, kVariance };

inline std::string to_string(AlphaFunction fn) {
  return fn == AlphaFunction::kLaplacianMean ? "lap" : "var";
}

inline AlphaFunction parse_alpha_function(std::string_view s) {
  if (s == "lap" || s == "laplacian") return AlphaFunction::kLaplacianMean;
  if (s == "var" || s == "variance") return AlphaFunction::kVariance;
  throw Error(ErrorKind::kConfig, "unknown alpha function '" + std::string(s) +
                                      "' (expected lap or var)");
}

/// Every tunable of the blend. levels == 0 selects default_levels() for the
/// image at hand.
struct BlendConfig {
  int levels = 0;
  int patch = 16;
  double sigma = 0.3;
  AlphaFunction alpha_fn = AlphaFunction::kVariance;
  double tau_lap = 0.05;
  double tau_var = 0.01;
  Kernel kernel;

  void validate() const {
    if (levels < 0) throw Error(ErrorKind::kConfig, "levels must be >= 1");
    if (patch < 4 || patch % 2 != 0) {
      throw Error(ErrorKind::kConfig, "patch size must be even and >= 4");
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw Error(ErrorKind::kConfig, "sigma must be > 0");
    }
    if (!(tau_lap > 0.0) || !(tau_var > 0.0) || !std::isfinite(tau_lap) ||
        !std::isfinite(tau_var)) {
      throw Error(ErrorKind::kConfig, "alpha thresholds must be > 0");
    }
  }

  int resolved_levels(int width, int height) const {
    const int m = levels == 0 ? default_levels(width, height) : levels;
    check_level_count(m, width, height);
    return m;
  }

  friend bool operator==(const BlendConfig&, const BlendConfig&) = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(v)) {
    throw Error(ErrorKind::kConfig, "bad value for " + key + ": '" + value + "'");
  }
  return v;
}

inline int parse_int(const std::string& key, const std::string& value) {
  int v = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorKind::kConfig, "bad value for " + key + ": '" + value + "'");
  }
  return v;
}

}  // namespace detail

/// Comma-separated tap weights, normalized to unit sum.
inline Kernel parse_kernel(const std::string& text) {
  std::vector<double> taps;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    taps.push_back(detail::parse_double("kernel", detail::trim(item)));
  }
  return Kernel::from_weights(std::move(taps));
}

inline std::string kernel_to_string(const Kernel& k) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < k.taps().size(); ++i) {
    if (i) out << ',';
    out << k.taps()[i];
  }
  return out.str();
}

inline void apply_config_entry(BlendConfig& cfg, const std::string& key,
                               const std::string& value) {
  if (key == "levels") {
    cfg.levels = detail::parse_int(key, value);
  } else if (key == "patch") {
    cfg.patch = detail::parse_int(key, value);
  } else if (key == "sigma") {
    cfg.sigma = detail::parse_double(key, value);
  } else if (key == "alpha_fn") {
    cfg.alpha_fn = parse_alpha_function(value);
  } else if (key == "tau_lap") {
    cfg.tau_lap = detail::parse_double(key, value);
  } else if (key == "tau_var") {
    cfg.tau_var = detail::parse_double(key, value);
  } else if (key == "kernel") {
    cfg.kernel = parse_kernel(value);
  } else {
    throw Error(ErrorKind::kConfig, "unknown config key '" + key + "'");
  }
}

// Run-manifest bookkeeping keys; accepted and ignored so a manifest can be
// fed back as a config file.
inline bool is_manifest_key(std::string_view key) {
  return key == "tool_version" || key == "command" || key == "inputs" ||
         key == "weights" || key == "output" || key == "bit_depth" ||
         key == "duration_s";
}

inline std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string stripped = detail::trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kConfig,
                  "line " + std::to_string(lineno) + ": expected key=value");
    }
    entries[detail::trim(stripped.substr(0, eq))] =
        detail::trim(stripped.substr(eq + 1));
  }
  return entries;
}

/// Flat key=value text; '#' starts a comment.
inline BlendConfig parse_config(std::istream& in, BlendConfig cfg = {}) {
  for (const auto& [key, value] : parse_key_values(in)) {
    if (!is_manifest_key(key)) apply_config_entry(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

inline BlendConfig load_config(const std::filesystem::path& path,
                               BlendConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read config " + path.string());
  return parse_config(in, std::move(cfg));
}

inline std::string config_to_text(const BlendConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "levels=" << cfg.levels << '\n'
      << "patch=" << cfg.patch << '\n'
      << "sigma=" << cfg.sigma << '\n'
      << "alpha_fn=" << to_string(cfg.alpha_fn) << '\n'
      << "tau_lap=" << cfg.tau_lap << '\n'
      << "tau_var=" << cfg.tau_var << '\n'
      << "kernel=" << kernel_to_string(cfg.kernel) << '\n';
  return out.str();
}

}  // namespace svlp
