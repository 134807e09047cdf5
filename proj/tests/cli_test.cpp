#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "test_support.hpp"

namespace svlp {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

struct RunResult {
  int status = -1;
  std::string err;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

RunResult run_cli(const std::string& args, const TempDir& dir,
                  const std::string& env = "") {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = env + " " + quote(SVLP_CLI_PATH) + " " + args + " 2>" +
                          quote(err.string()) + " >/dev/null";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& s) {
  return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

// Writes a three-frame synthetic stack as 16-bit PNGs and returns the paths
// in the order given on the command line.
std::vector<std::string> write_stack(const TempDir& dir, const ExposureStack& stack,
                                     const std::string& tag = "f") {
  std::vector<std::string> paths;
  for (std::size_t i = 0; i < stack.frames.size(); ++i) {
    const fs::path p = dir / (tag + std::to_string(i) + ".png");
    save_image(stack.frames[i], p, 16);
    paths.push_back(p.string());
  }
  return paths;
}

std::string join_quoted(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += quote(s) + " ";
  return out;
}

TEST(Cli, FuseWritesImageAndManifest) {
  TempDir dir("cli_fuse");
  const auto paths = write_stack(dir, testing::synthetic_stack(64, 48, 1));
  const fs::path out = dir / "out.png";
  const RunResult r = run_cli("fuse " + join_quoted(paths) + "-o " + quote(out), dir);
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_TRUE(r.err.empty());
  const ImageFile f = read_image(out);
  EXPECT_EQ(f.bit_depth, 16);
  EXPECT_EQ(f.image.width(), 64);
  const std::string manifest = read_file(dir / "out.manifest.txt");
  EXPECT_NE(manifest.find("command=fuse"), std::string::npos);
  EXPECT_NE(manifest.find("levels=4"), std::string::npos);
  EXPECT_NE(manifest.find("alpha_fn=var"), std::string::npos);
  EXPECT_NE(manifest.find("duration_s="), std::string::npos);
  // A manifest is a valid config file.
  EXPECT_EQ(load_config(dir / "out.manifest.txt").levels, 4);
  for (const auto& entry : fs::directory_iterator(dir.path())) {
    EXPECT_EQ(entry.path().string().find(".partial"), std::string::npos);
  }
}

TEST(Cli, SingleInputRejected) {
  TempDir dir("cli_one");
  const auto paths = write_stack(dir, testing::synthetic_stack(32, 32, 1, {1.0}));
  const RunResult r =
      run_cli("fuse " + quote(paths[0]) + " -o " + quote(dir / "out.png"), dir);
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(count_lines(r.err), 1);
  EXPECT_NE(r.err.find("need at least 2 inputs"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "out.png"));
}

TEST(Cli, FuseMatchesLibraryBitExactly) {
  TempDir dir("cli_lib");
  const auto stack = testing::synthetic_stack(80, 72, 3);
  const auto paths = write_stack(dir, stack);
  const WeightMap w1 = testing::random_weight(80, 72, 5);
  const WeightMap w2 = testing::random_weight(80, 72, 6);
  save_image(w1.map, dir / "w1.png", 16);
  save_image(w2.map, dir / "w2.png", 16);
  const fs::path out = dir / "out.png";
  const RunResult r = run_cli("fuse " + join_quoted(paths) + "-w " +
                                  quote(dir / "w1.png") + " " + quote(dir / "w2.png") +
                                  " --alpha-fn var --levels 4 --patch 16 --depth 16 -o " +
                                  quote(out),
                              dir);
  ASSERT_EQ(r.status, 0) << r.err;

  ExposureStack loaded;
  for (const auto& p : paths) loaded.frames.push_back(load_image(p));
  const std::vector<WeightMap> weights = {load_weight(dir / "w1.png", 80, 72),
                                          load_weight(dir / "w2.png", 80, 72)};
  BlendConfig cfg;
  cfg.levels = 4;
  save_image(fuse_stack(loaded, weights, cfg).image, dir / "lib.png", 16);
  EXPECT_EQ(read_file(out), read_file(dir / "lib.png"));
}

TEST(Cli, Blend2MatchesFirstFusePass) {
  TempDir dir("cli_b2");
  const auto stack = testing::synthetic_stack(64, 64, 4, {0.3, 3.0});
  const auto paths = write_stack(dir, stack);
  ASSERT_EQ(run_cli("blend2 " + join_quoted(paths) + "-o " + quote(dir / "b.png"), dir)
                .status,
            0);
  ASSERT_EQ(run_cli("fuse " + join_quoted(paths) + "-o " + quote(dir / "f.png"), dir)
                .status,
            0);
  EXPECT_EQ(read_file(dir / "b.png"), read_file(dir / "f.png"));
  EXPECT_TRUE(fs::exists(dir / "b.manifest.txt"));
}

TEST(Cli, LevelmapIsSixteenBitInUnitRange) {
  TempDir dir("cli_lm");
  const auto scene = testing::disc_scene(128, 30);
  save_image(scene.short_exposure, dir / "s.png", 8);
  save_image(scene.long_exposure, dir / "l.png", 8);
  const fs::path out = dir / "lm.png";
  ASSERT_EQ(run_cli("levelmap " + quote(dir / "s.png") + " " + quote(dir / "l.png") +
                        " --levels 5 -o " + quote(out),
                    dir)
                .status,
            0);
  const ImageFile f = read_image(out);
  EXPECT_EQ(f.bit_depth, 16);
  EXPECT_EQ(f.image.channels(), 1);
  EXPECT_LT(f.image.at(64 + 30, 64), f.image.at(2, 2));
  EXPECT_TRUE(fs::exists(dir / "lm.params.txt"));
}

TEST(Cli, DiagnosticsWritten) {
  TempDir dir("cli_diag");
  const auto paths = write_stack(dir, testing::synthetic_stack(64, 48, 2));
  ASSERT_EQ(run_cli("fuse " + join_quoted(paths) + "--levels 3 --diagnostics -o " +
                        quote(dir / "o.png"),
                    dir)
                .status,
            0);
  for (const char* name : {"o.pass1.alpha1.png", "o.pass1.alpha2.png", "o.pass2.alpha2.png",
                           "o.pass1.levelmap.png", "o.pass2.levelmap.png", "o.params.txt"}) {
    EXPECT_TRUE(fs::exists(dir / name)) << name;
  }
  EXPECT_FALSE(fs::exists(dir / "o.pass1.alpha3.png"));
}

TEST(Cli, DumpPyramids) {
  TempDir dir("cli_dump");
  save_image(testing::random_image(40, 30, 3, 1), dir / "in.png", 8);
  ASSERT_EQ(run_cli("dump-pyramids " + quote(dir / "in.png") + " --levels 4 -o " +
                        quote(dir / "pyr"),
                    dir)
                .status,
            0);
  int files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "pyr")) ++files;
  EXPECT_EQ(files, 8);
  EXPECT_EQ(load_image(dir / "pyr/gauss_4.png").width(), 5);
  EXPECT_EQ(load_image(dir / "pyr/lap_1.png").width(), 40);
}

TEST(Cli, EvalWritesRowsDeterministically) {
  TempDir dir("cli_eval");
  fs::create_directories(dir / "data/sceneA");
  fs::create_directories(dir / "data/sceneB");
  write_stack(dir, testing::synthetic_stack(48, 40, 1), "data/sceneA/f");
  write_stack(dir, testing::synthetic_stack(48, 40, 2, {0.5, 2.0}), "data/sceneB/f");
  const std::string args = "eval " + quote(dir / "data") + " -o ";
  ASSERT_EQ(run_cli(args + quote(dir / "a.csv"), dir).status, 0);
  ASSERT_EQ(run_cli(args + quote(dir / "b.csv"), dir).status, 0);
  const std::string csv = read_file(dir / "a.csv");
  EXPECT_EQ(csv, read_file(dir / "b.csv"));
  // header + 2 scenes x 3 methods + one mean row per method
  EXPECT_EQ(count_lines(csv), 1 + 6 + 3);
  EXPECT_EQ(csv.rfind("scene,method,mef_ssim,scale1,scale2,scale3\n", 0), 0u);
  EXPECT_NE(csv.find("sceneB,svlp-var,"), std::string::npos);
  EXPECT_NE(csv.find("mean,standard,"), std::string::npos);

  ASSERT_EQ(run_cli(args + quote(dir / "c.csv") + " --methods svlp-var", dir).status, 0);
  EXPECT_EQ(count_lines(read_file(dir / "c.csv")), 1 + 2 + 1);
}

TEST(Cli, Errors) {
  TempDir dir("cli_err");
  const auto paths = write_stack(dir, testing::synthetic_stack(32, 32, 1, {0.5, 2.0}));
  save_image(ImageF(30, 32, 3, 0.5), dir / "odd.png", 8);
  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "patch=9\n";
  }
  const std::vector<std::string> cases = {
      "fuse " + quote(dir / "missing.png") + " " + quote(paths[0]) + " -o " +
          quote(dir / "o.png"),
      "fuse " + quote(paths[0]) + " " + quote(dir / "odd.png") + " -o " +
          quote(dir / "o.png"),
      "fuse " + join_quoted(paths) + "--config " + quote(dir / "bad.cfg") + " -o " +
          quote(dir / "o.png"),
      "fuse " + join_quoted(paths) + "--levels 9 -o " + quote(dir / "o.png"),
      "fuse " + join_quoted(paths) + "--method median -o " + quote(dir / "o.png"),
      "fuse " + join_quoted(paths) + "-o " + quote(dir / "nodir/o.png"),
      "blend2 " + join_quoted(paths) + "-w " + quote(dir / "odd.png") + " -o " +
          quote(dir / "o.png"),
      "fuse " + join_quoted(paths) + "--bogus -o " + quote(dir / "o.png"),
  };
  for (const auto& args : cases) {
    const RunResult r = run_cli(args, dir);
    EXPECT_EQ(r.status, 1) << args;
    EXPECT_EQ(count_lines(r.err), 1) << args << "\n" << r.err;
    EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << r.err;
    EXPECT_FALSE(fs::exists(dir / "o.png")) << args;
  }
}

TEST(Cli, FlagsOverrideConfigFile) {
  TempDir dir("cli_prec");
  const auto paths = write_stack(dir, testing::synthetic_stack(64, 64, 3, {0.5, 2.0}));
  {
    std::ofstream cfg(dir / "c.cfg");
    cfg << "levels=3\npatch=8\n";
  }
  ASSERT_EQ(run_cli("fuse " + join_quoted(paths) + "--config " + quote(dir / "c.cfg") +
                        " --patch 32 -o " + quote(dir / "o.png"),
                    dir)
                .status,
            0);
  const BlendConfig used = load_config(dir / "o.manifest.txt");
  EXPECT_EQ(used.levels, 3);
  EXPECT_EQ(used.patch, 32);
}

}  // namespace
}  // namespace svlp
