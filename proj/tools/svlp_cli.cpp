// svlp: exposure fusion with spatially variant Laplacian pyramids.
//
//   svlp fuse a.png b.png c.png -o out.png [--diagnostics]
//   svlp blend2 a.png b.png [-w w.png] -o out.png
//   svlp levelmap a.png b.png [-w w.png] -o lm.png
//   svlp dump-pyramids a.png --levels 4 -o dir/
//   svlp eval dataset/ -o scores.csv [--methods standard,svlp-lap,svlp-var]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "svlp/svlp_all.hpp"

#ifndef SVLP_VERSION
#define SVLP_VERSION "dev"
#endif

namespace fs = std::filesystem;

namespace {

using svlp::BlendConfig;
using svlp::Error;
using svlp::ErrorKind;
using svlp::ImageF;

struct BlendFlags {
  std::string config_path;
  int levels = 0;
  int patch = 0;
  double sigma = 0.0;
  std::string alpha_fn;
  double tau_lap = 0.0;
  double tau_var = 0.0;
  std::string kernel;
  std::map<std::string, CLI::Option*> options;
};

void add_blend_flags(CLI::App* cmd, BlendFlags& f) {
  f.options["config"] =
      cmd->add_option("--config", f.config_path, "key=value config file");
  f.options["levels"] = cmd->add_option("--levels", f.levels, "pyramid levels M");
  f.options["patch"] = cmd->add_option("--patch", f.patch, "patch side K (even, >= 4)");
  f.options["sigma"] = cmd->add_option("--sigma", f.sigma, "highlight map width");
  f.options["alpha_fn"] =
      cmd->add_option("--alpha-fn", f.alpha_fn, "alpha function: lap | var");
  f.options["tau_lap"] = cmd->add_option("--tau-lap", f.tau_lap, "gain threshold (lap)");
  f.options["tau_var"] = cmd->add_option("--tau-var", f.tau_var, "gain threshold (var)");
  f.options["kernel"] =
      cmd->add_option("--kernel", f.kernel, "comma-separated smoothing taps");
}

// Defaults, then the config file, then explicit flags.
BlendConfig resolve_config(const BlendFlags& f) {
  BlendConfig cfg;
  if (f.options.at("config")->count()) cfg = svlp::load_config(f.config_path);
  const auto given = [&](const char* key) { return f.options.at(key)->count() > 0; };
  if (given("levels")) cfg.levels = f.levels;
  if (given("patch")) cfg.patch = f.patch;
  if (given("sigma")) cfg.sigma = f.sigma;
  if (given("alpha_fn")) cfg.alpha_fn = svlp::parse_alpha_function(f.alpha_fn);
  if (given("tau_lap")) cfg.tau_lap = f.tau_lap;
  if (given("tau_var")) cfg.tau_var = f.tau_var;
  if (given("kernel")) cfg.kernel = svlp::parse_kernel(f.kernel);
  if (given("levels") && cfg.levels < 1) {
    throw Error(ErrorKind::kConfig, "levels must be >= 1");
  }
  cfg.validate();
  return cfg;
}

fs::path sibling(const fs::path& out, const std::string& suffix) {
  return out.parent_path() / (out.stem().string() + suffix);
}

// Writes through a temporary next to the target so a failed run leaves
// nothing behind under the final name.
template <typename WriteFn>
void write_atomically(const fs::path& target, WriteFn&& write) {
  const fs::path tmp =
      target.parent_path() /
      (target.stem().string() + ".partial" + target.extension().string());
  try {
    write(tmp);
    fs::rename(tmp, target);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

void save_image_atomic(const ImageF& img, const fs::path& path, int depth) {
  write_atomically(path, [&](const fs::path& tmp) { svlp::save_image(img, tmp, depth); });
}

void save_text_atomic(const std::string& text, const fs::path& path) {
  write_atomically(path, [&](const fs::path& tmp) {
    std::ofstream out(tmp);
    out << text;
    out.close();
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  });
}

void check_output_dir(const fs::path& out) {
  const fs::path dir = out.parent_path();
  if (!dir.empty() && !fs::is_directory(dir)) {
    throw Error(ErrorKind::kIo, "output directory does not exist: " + dir.string());
  }
}

struct LoadedStack {
  svlp::ExposureStack stack;
  int bit_depth = 8;
};

LoadedStack load_stack(const std::vector<std::string>& paths) {
  LoadedStack loaded;
  for (const auto& p : paths) {
    svlp::ImageFile file = svlp::read_image(p);
    loaded.bit_depth = std::max(loaded.bit_depth, file.bit_depth);
    loaded.stack.frames.push_back(std::move(file.image));
  }
  return loaded;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

std::string params_text(const BlendConfig& cfg, int levels) {
  BlendConfig snapshot = cfg;
  snapshot.levels = levels;
  return svlp::config_to_text(snapshot);
}

std::string manifest_text(const std::string& command,
                          const std::vector<std::string>& inputs,
                          const std::vector<std::string>& weights,
                          const fs::path& output, int depth, const BlendConfig& cfg,
                          int levels, double seconds) {
  std::ostringstream out;
  out << "tool_version=" << SVLP_VERSION << '\n'
      << "command=" << command << '\n'
      << "inputs=" << join(inputs) << '\n'
      << "weights=" << join(weights) << '\n'
      << "output=" << output.string() << '\n'
      << "bit_depth=" << depth << '\n'
      << params_text(cfg, levels);
  out.precision(6);
  out << "duration_s=" << std::fixed << seconds << '\n';
  return out.str();
}

double elapsed_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

svlp::Reconstruction parse_method(const std::string& method) {
  if (method == "svlp") return svlp::Reconstruction::kSpatiallyVariant;
  if (method == "standard") return svlp::Reconstruction::kStandard;
  throw Error(ErrorKind::kConfig, "unknown method '" + method + "'");
}

// --- fuse -------------------------------------------------------------------

struct FuseArgs {
  std::vector<std::string> inputs;
  std::vector<std::string> weights;
  std::string out;
  std::string method = "svlp";
  int depth = 0;
  bool diagnostics = false;
  BlendFlags flags;
};

void write_diagnostics(const svlp::FuseResult& fused, const BlendConfig& cfg,
                       const fs::path& out) {
  for (std::size_t pass = 0; pass < fused.alphas.size(); ++pass) {
    const auto& field = fused.alphas[pass];
    const std::string tag = ".pass" + std::to_string(pass + 1);
    for (std::size_t l = 0; l < field.levels.size(); ++l) {
      save_image_atomic(svlp::alpha_level_image(field.levels[l]),
                        sibling(out, tag + ".alpha" + std::to_string(l + 1) + ".png"),
                        16);
    }
    const ImageF equivalent = svlp::level_map(field, fused.image.width(),
                                              fused.image.height(), fused.levels,
                                              cfg.kernel);
    save_image_atomic(svlp::level_map_image(equivalent, fused.levels),
                      sibling(out, tag + ".levelmap.png"), 16);
  }
  save_text_atomic(params_text(cfg, fused.levels), sibling(out, ".params.txt"));
}

int run_fuse(const FuseArgs& args) {
  const auto start = std::chrono::steady_clock::now();
  if (args.inputs.size() < 2) throw Error(ErrorKind::kConfig, "need at least 2 inputs");
  const BlendConfig cfg = resolve_config(args.flags);
  const auto mode = parse_method(args.method);
  const fs::path out(args.out);
  check_output_dir(out);
  LoadedStack loaded = load_stack(args.inputs);
  loaded.stack.validate();
  std::optional<std::vector<svlp::WeightMap>> weights;
  if (!args.weights.empty()) {
    weights.emplace();
    const ImageF& ref = loaded.stack.frames.front();
    for (const auto& w : args.weights) {
      weights->push_back(svlp::load_weight(w, ref.width(), ref.height()));
    }
  }
  const svlp::FuseResult fused = svlp::fuse_stack(loaded.stack, weights, cfg, mode);
  const int depth = args.depth ? args.depth : loaded.bit_depth;

  save_image_atomic(fused.image, out, depth);
  if (args.diagnostics) write_diagnostics(fused, cfg, out);
  save_text_atomic(manifest_text("fuse", args.inputs, args.weights, out, depth, cfg,
                                 fused.levels, elapsed_since(start)),
                   sibling(out, ".manifest.txt"));
  return 0;
}

// --- blend2 / levelmap -----------------------------------------------------

struct PairArgs {
  std::string first;
  std::string second;
  std::string weight;
  std::string out;
  std::string method = "svlp";
  int depth = 0;
  BlendFlags flags;
};

struct PairRun {
  svlp::BlendResult result;
  int bit_depth = 8;
  BlendConfig cfg;
};

PairRun run_pair(const PairArgs& args, svlp::Reconstruction mode) {
  PairRun run;
  run.cfg = resolve_config(args.flags);
  check_output_dir(args.out);
  LoadedStack loaded = load_stack({args.first, args.second});
  loaded.stack.validate();
  const ImageF& a = loaded.stack.frames[0];
  const ImageF& b = loaded.stack.frames[1];
  const svlp::WeightMap w = args.weight.empty()
                                ? svlp::default_weight(a, b)
                                : svlp::load_weight(args.weight, a.width(), a.height());
  run.result = svlp::blend_two(a, b, w, run.cfg, mode);
  run.bit_depth = loaded.bit_depth;
  return run;
}

std::vector<std::string> optional_list(const std::string& item) {
  return item.empty() ? std::vector<std::string>{} : std::vector<std::string>{item};
}

int run_blend2(const PairArgs& args) {
  const auto start = std::chrono::steady_clock::now();
  const PairRun run = run_pair(args, parse_method(args.method));
  const int depth = args.depth ? args.depth : run.bit_depth;
  const fs::path out(args.out);
  save_image_atomic(run.result.image, out, depth);
  save_text_atomic(manifest_text("blend2", {args.first, args.second},
                                 optional_list(args.weight), out, depth, run.cfg,
                                 run.result.levels, elapsed_since(start)),
                   sibling(out, ".manifest.txt"));
  return 0;
}

int run_levelmap(const PairArgs& args) {
  const PairRun run = run_pair(args, svlp::Reconstruction::kSpatiallyVariant);
  const ImageF& img = run.result.image;
  const ImageF equivalent = svlp::level_map(run.result.alpha, img.width(), img.height(),
                                            run.result.levels, run.cfg.kernel);
  const fs::path out(args.out);
  save_image_atomic(svlp::level_map_image(equivalent, run.result.levels), out,
                    args.depth ? args.depth : 16);
  save_text_atomic(params_text(run.cfg, run.result.levels),
                   sibling(out, ".params.txt"));
  return 0;
}

// --- dump-pyramids ---------------------------------------------------------

struct DumpArgs {
  std::string input;
  std::string out_dir;
  int levels = 0;
  int depth = 8;
  std::string kernel;
};

int run_dump(const DumpArgs& args) {
  const ImageF img = svlp::load_image(args.input);
  const svlp::Kernel k = args.kernel.empty() ? svlp::Kernel{} : svlp::parse_kernel(args.kernel);
  const int m = args.levels ? args.levels : svlp::default_levels(img.width(), img.height());
  const svlp::Pyramid gauss = svlp::build_gaussian(img, m, k);
  const svlp::Pyramid lap = svlp::build_laplacian(gauss, k);
  const fs::path dir(args.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) {
    throw Error(ErrorKind::kIo, "cannot create directory " + dir.string());
  }
  svlp::dump_pyramid(gauss, dir, "gauss", args.depth);
  svlp::dump_pyramid(lap, dir, "lap", args.depth);
  return 0;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string dataset;
  std::string methods = "standard,svlp-lap,svlp-var";
  std::string out;
  BlendFlags flags;
};

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::ranges::transform(ext, ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

int run_eval(const EvalArgs& args) {
  const BlendConfig base = resolve_config(args.flags);
  const std::vector<std::string> methods = split_list(args.methods);
  if (methods.empty()) throw Error(ErrorKind::kConfig, "no methods given");
  for (const auto& m : methods) {
    if (m != "standard" && m != "svlp-lap" && m != "svlp-var") {
      throw Error(ErrorKind::kConfig, "unknown method '" + m + "'");
    }
  }
  const fs::path root(args.dataset);
  if (!fs::is_directory(root)) {
    throw Error(ErrorKind::kIo, "dataset directory not found: " + root.string());
  }
  check_output_dir(args.out);

  std::vector<fs::path> scenes;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) scenes.push_back(entry.path());
  }
  std::ranges::sort(scenes);
  if (scenes.empty()) throw Error(ErrorKind::kIo, "dataset is empty: " + root.string());

  std::ostringstream csv;
  csv << "scene,method,mef_ssim,scale1,scale2,scale3\n";
  csv.setf(std::ios::fixed);
  csv.precision(6);
  std::map<std::string, std::vector<double>> sums;
  for (const auto& scene : scenes) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(scene)) {
      if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    std::ranges::sort(files);
    std::vector<std::string> paths;
    for (const auto& f : files) paths.push_back(f.string());
    LoadedStack loaded;
    try {
      loaded = load_stack(paths);
      loaded.stack.validate();
    } catch (const Error& e) {
      throw Error(e.kind(), "scene " + scene.filename().string() + ": " + e.what());
    }
    for (const auto& method : methods) {
      BlendConfig cfg = base;
      auto mode = svlp::Reconstruction::kSpatiallyVariant;
      if (method == "standard") mode = svlp::Reconstruction::kStandard;
      if (method == "svlp-lap") cfg.alpha_fn = svlp::AlphaFunction::kLaplacianMean;
      if (method == "svlp-var") cfg.alpha_fn = svlp::AlphaFunction::kVariance;
      const auto fused = svlp::fuse_stack(loaded.stack, std::nullopt, cfg, mode);
      const svlp::MefScore score = svlp::mef_ssim(loaded.stack, fused.image);
      csv << scene.filename().string() << ',' << method << ',' << score.overall;
      auto& acc = sums[method];
      acc.resize(1 + score.per_scale.size(), 0.0);
      acc[0] += score.overall;
      for (std::size_t s = 0; s < score.per_scale.size(); ++s) {
        csv << ',' << score.per_scale[s];
        acc[s + 1] += score.per_scale[s];
      }
      csv << '\n';
    }
  }
  for (const auto& method : methods) {
    csv << "mean," << method;
    for (double v : sums[method]) csv << ',' << v / static_cast<double>(scenes.size());
    csv << '\n';
  }
  save_text_atomic(csv.str(), args.out);
  return 0;
}

std::string one_line(std::string msg) {
  std::ranges::replace(msg, '\n', ' ');
  while (!msg.empty() && msg.back() == ' ') msg.pop_back();
  return msg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exposure fusion with spatially variant Laplacian pyramids"};
  app.set_version_flag("--version", SVLP_VERSION);
  app.require_subcommand(1);

  FuseArgs fuse;
  auto* fuse_cmd = app.add_subcommand("fuse", "fuse an exposure stack");
  fuse_cmd->add_option("inputs", fuse.inputs, "input frames")->required();
  fuse_cmd->add_option("-w,--weights", fuse.weights, "one weight map per blend pass");
  fuse_cmd->add_option("-o,--out", fuse.out, "output PNG")->required();
  fuse_cmd->add_option("--method", fuse.method, "svlp | standard");
  fuse_cmd->add_option("--depth", fuse.depth, "output bit depth (8 or 16)");
  fuse_cmd->add_flag("--diagnostics", fuse.diagnostics,
                     "also write alpha fields and level maps");
  add_blend_flags(fuse_cmd, fuse.flags);

  PairArgs blend2;
  auto* blend2_cmd = app.add_subcommand("blend2", "blend two frames");
  blend2_cmd->add_option("first", blend2.first, "frame weighted by W")->required();
  blend2_cmd->add_option("second", blend2.second, "brighter frame")->required();
  blend2_cmd->add_option("-w,--weights", blend2.weight, "weight map");
  blend2_cmd->add_option("-o,--out", blend2.out, "output PNG")->required();
  blend2_cmd->add_option("--method", blend2.method, "svlp | standard");
  blend2_cmd->add_option("--depth", blend2.depth, "output bit depth (8 or 16)");
  add_blend_flags(blend2_cmd, blend2.flags);

  PairArgs levelmap;
  auto* levelmap_cmd =
      app.add_subcommand("levelmap", "equivalent-level map of a two-frame blend");
  levelmap_cmd->add_option("first", levelmap.first, "frame weighted by W")->required();
  levelmap_cmd->add_option("second", levelmap.second, "brighter frame")->required();
  levelmap_cmd->add_option("-w,--weights", levelmap.weight, "weight map");
  levelmap_cmd->add_option("-o,--out", levelmap.out, "output PNG")->required();
  levelmap_cmd->add_option("--depth", levelmap.depth, "output bit depth (default 16)");
  add_blend_flags(levelmap_cmd, levelmap.flags);

  DumpArgs dump;
  auto* dump_cmd =
      app.add_subcommand("dump-pyramids", "write Gaussian and Laplacian levels");
  dump_cmd->add_option("input", dump.input, "input image")->required();
  dump_cmd->add_option("-o,--out", dump.out_dir, "output directory")->required();
  dump_cmd->add_option("--levels", dump.levels, "pyramid levels M");
  dump_cmd->add_option("--depth", dump.depth, "bit depth (8 or 16)");
  dump_cmd->add_option("--kernel", dump.kernel, "comma-separated smoothing taps");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "score methods over a dataset with MEF-SSIM");
  eval_cmd->add_option("dataset", eval.dataset, "directory of scene subdirectories")
      ->required();
  eval_cmd->add_option("--methods", eval.methods, "comma list of standard,svlp-lap,svlp-var");
  eval_cmd->add_option("-o,--out", eval.out, "output CSV")->required();
  add_blend_flags(eval_cmd, eval.flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << one_line(e.what()) << '\n';
    return 1;
  }

  try {
    if (fuse_cmd->parsed()) return run_fuse(fuse);
    if (blend2_cmd->parsed()) return run_blend2(blend2);
    if (levelmap_cmd->parsed()) return run_levelmap(levelmap);
    if (dump_cmd->parsed()) return run_dump(dump);
    if (eval_cmd->parsed()) return run_eval(eval);
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 1;
}
