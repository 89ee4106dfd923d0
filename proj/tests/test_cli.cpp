#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sasinr/config.hpp"
#include "sasinr/io.hpp"

using namespace sasinr;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           (std::string("sasinr_cli_") + info->name() + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Small geometry that keeps every stage well under a second.
  static json small_config() {
    return {{"geometry", {{"num_transducers", 90}, {"grid_size", 33}, {"scene_extent", 0.05}}},
            {"deconv",
             {{"iterations", 250},
              {"learning_rate", 1e-3},
              {"num_features", 16},
              {"hidden_width", 16}}},
            {"seed", 3}};
  }

  fs::path write_config(const json& doc, const std::string& name = "run.json") const {
    const auto p = dir_ / name;
    std::ofstream(p) << doc.dump(2);
    return p;
  }

  fs::path write_delta_scene(std::size_t n, const std::string& name = "scene.sasg") const {
    RealGrid g(n, n, 0.0);
    g((n - 1) / 2, (n - 1) / 2) = 1.0;
    io::write_grid(dir_ / name, g);
    return dir_ / name;
  }

  RunResult run(const std::string& args) const {
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = std::string("\"") + SASINR_CLI_PATH + "\" " + args + " >\"" +
                            out.string() + "\" 2>\"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp_text(out);
    r.err = slurp_text(err);
    return r;
  }

  RunResult run_stage(const fs::path& config, const std::string& stage,
                      const std::string& extra = "") const {
    return run("--config \"" + config.string() + "\" --out \"" + (dir_ / "out").string() +
               "\" " + extra + " " + stage);
  }

  fs::path out(const std::string& name) const { return dir_ / "out" / name; }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, UnknownConfigKeyIsConfigError) {
  auto doc = small_config();
  doc["psf_mode"] = "fast";
  const auto r = run_stage(write_config(doc), "psf");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("psf_mode"), std::string::npos) << r.err;
}

TEST_F(CliTest, UnknownNestedKeyNamesSection) {
  auto doc = small_config();
  doc["deconv"]["learningrate"] = 1.0;
  const auto r = run_stage(write_config(doc), "psf");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("deconv.learningrate"), std::string::npos) << r.err;
}

TEST_F(CliTest, WrongValueTypeIsConfigError) {
  auto doc = small_config();
  doc["geometry"]["grid_size"] = "33";
  const auto r = run_stage(write_config(doc), "psf");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("geometry.grid_size"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingSceneIsIoErrorNamingPath) {
  auto doc = small_config();
  doc["paths"] = {{"scene", "no_such_scene.png"}};
  const auto r = run_stage(write_config(doc), "simulate");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("no_such_scene.png"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingConfigFileIsIoError) {
  const auto r = run_stage(dir_ / "absent.json", "psf");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("absent.json"), std::string::npos) << r.err;
}

TEST_F(CliTest, MalformedJsonIsConfigError) {
  std::ofstream(dir_ / "bad.json") << "{\"seed\": ";
  EXPECT_EQ(run_stage(dir_ / "bad.json", "psf").code, 2);
}

TEST_F(CliTest, CommandLineMisuseIsConfigError) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("--threads abc psf").code, 2);
}

TEST_F(CliTest, EvenGridPsfIsConfigError) {
  auto doc = small_config();
  doc["geometry"]["grid_size"] = 32;
  const auto r = run_stage(write_config(doc), "psf");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("odd"), std::string::npos) << r.err;
}

TEST_F(CliTest, PsfIsDeterministicAndReportsMetadata) {
  const auto cfg = write_config(small_config());
  ASSERT_EQ(run_stage(cfg, "psf").code, 0);
  const auto first = slurp_text(out("psf.sasg"));
  const auto first_png = slurp_text(out("psf.png"));
  ASSERT_EQ(run_stage(cfg, "psf").code, 0);
  EXPECT_EQ(slurp_text(out("psf.sasg")), first);
  EXPECT_EQ(slurp_text(out("psf.png")), first_png);

  const auto meta = json::parse(slurp_text(out("psf.json")));
  EXPECT_EQ(meta["grid_size"], 33);
  EXPECT_EQ(meta["peak_index"], json::array({16, 16}));
  EXPECT_DOUBLE_EQ(meta["support_threshold"].get<double>(), 0.05);
  EXPECT_GT(meta["support_radius_px"].get<double>(), 0.0);
}

TEST_F(CliTest, DefaultGeometryDeltaSceneFocusesAtCenter) {
  json doc = {{"paths", {{"scene", write_delta_scene(129).string()}}}};
  ASSERT_EQ(run_stage(write_config(doc), "simulate").code, 0);
  const auto lambda = io::read_complex_grid(out("lambda.sasg"));
  ASSERT_EQ(lambda.height(), 129u);
  const auto stats = grid_stats(lambda);
  EXPECT_EQ(stats.argmax, (PixelIndex{64, 64}));
  EXPECT_NEAR(stats.max_magnitude, 1.0, 1e-12);
  EXPECT_TRUE(fs::exists(out("lambda.png")));
}

TEST_F(CliTest, BeamformReproducesSimulateImage) {
  auto doc = small_config();
  doc["paths"] = {{"scene", write_delta_scene(33).string()}};
  const auto cfg = write_config(doc);
  ASSERT_EQ(run_stage(cfg, "simulate").code, 0);
  const auto from_simulate = slurp_text(out("lambda.sasg"));
  fs::remove(out("lambda.sasg"));
  ASSERT_EQ(run_stage(cfg, "beamform").code, 0);
  EXPECT_EQ(slurp_text(out("lambda.sasg")), from_simulate);
}

TEST_F(CliTest, StagesComposeThroughFiles) {
  auto doc = small_config();
  doc["paths"] = {{"scene", write_delta_scene(33).string()}};
  const auto cfg = write_config(doc);
  ASSERT_EQ(run_stage(cfg, "simulate").code, 0);
  ASSERT_EQ(run_stage(cfg, "psf").code, 0);
  const auto r = run_stage(cfg, "deconv");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"sigma_hat.sasg", "b_estimated.sasg", "checkpoint.sasc", "sigma_hat.png",
                        "panel.png", "loss.csv", "deconv_status.json", "metrics.json"})
    EXPECT_TRUE(fs::exists(out(f))) << f;

  const auto status = json::parse(slurp_text(out("deconv_status.json")));
  EXPECT_TRUE(status["status"] == "converged" || status["status"] == "iteration_limit");
  EXPECT_GE(status["iterations"].get<int>(), 1);

  // Panel is three 33-wide images with two 2-pixel gutters.
  const auto panel = io::read_png_gray(out("panel.png"));
  EXPECT_EQ(panel.height(), 33u);
  EXPECT_EQ(panel.width(), 3u * 33u + 4u);

  std::istringstream log(slurp_text(out("loss.csv")));
  std::string line;
  std::getline(log, line);
  EXPECT_EQ(line, "iteration,loss");
  std::size_t rows = 0;
  while (std::getline(log, line)) ++rows;
  EXPECT_EQ(rows, status["iterations"].get<std::size_t>());

  fs::remove(out("metrics.json"));
  ASSERT_EQ(run_stage(cfg, "metrics").code, 0);
  const auto metrics = json::parse(slurp_text(out("metrics.json")));
  EXPECT_TRUE(metrics.contains("psnr_db"));
  EXPECT_TRUE(metrics.contains("mse"));
  EXPECT_EQ(metrics["localization_errors_px"].size(), 1u);

  ASSERT_EQ(run_stage(cfg, "invfilter").code, 0);
  ASSERT_EQ(run_stage(cfg, "wiener").code, 0);
  EXPECT_TRUE(fs::exists(out("invfilter.sasg")));
  EXPECT_TRUE(fs::exists(out("wiener.sasg")));
}

TEST_F(CliTest, InverseFilterOfPsfIsDelta) {
  // lambda == PSF exactly, so the spectral inverse returns the unit impulse.
  const auto cfg = write_config(small_config());
  ASSERT_EQ(run_stage(cfg, "psf").code, 0);
  fs::copy_file(out("psf.sasg"), out("lambda.sasg"));
  ASSERT_EQ(run_stage(cfg, "invfilter").code, 0);
  const auto img = io::read_complex_grid(out("invfilter.sasg"));
  for (std::size_t r = 0; r < 33; ++r)
    for (std::size_t c = 0; c < 33; ++c)
      EXPECT_NEAR(std::abs(img(r, c)), (r == 16 && c == 16) ? 1.0 : 0.0, 1e-9);
}

TEST_F(CliTest, DeconvWithoutInputsIsIoError) {
  const auto r = run_stage(write_config(small_config()), "deconv");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("lambda.sasg"), std::string::npos) << r.err;
}

TEST_F(CliTest, SnapshotsFollowInterval) {
  auto doc = small_config();
  doc["deconv"]["snapshot_every"] = 100;
  doc["deconv"]["convergence_window"] = 1000;
  doc["paths"] = {{"scene", write_delta_scene(33).string()}};
  const auto cfg = write_config(doc);
  ASSERT_EQ(run_stage(cfg, "simulate").code, 0);
  ASSERT_EQ(run_stage(cfg, "psf").code, 0);
  ASSERT_EQ(run_stage(cfg, "deconv").code, 0);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(out("snapshots")))
    names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  EXPECT_EQ(names, (std::vector<std::string>{"snapshot_000100.png", "snapshot_000200.png"}));
}

TEST_F(CliTest, SeedChangesLossLog) {
  auto doc = small_config();
  doc["paths"] = {{"scene", write_delta_scene(33).string()}};
  const auto cfg = write_config(doc);
  ASSERT_EQ(run_stage(cfg, "simulate").code, 0);
  ASSERT_EQ(run_stage(cfg, "psf").code, 0);
  ASSERT_EQ(run_stage(cfg, "deconv", "--seed 1").code, 0);
  const auto a = slurp_text(out("loss.csv"));
  ASSERT_EQ(run_stage(cfg, "deconv", "--seed 1").code, 0);
  EXPECT_EQ(slurp_text(out("loss.csv")), a);
  ASSERT_EQ(run_stage(cfg, "deconv", "--seed 2").code, 0);
  EXPECT_NE(slurp_text(out("loss.csv")), a);
}

TEST_F(CliTest, ThreadCountDoesNotChangeResult) {
  auto doc = small_config();
  doc["paths"] = {{"scene", write_delta_scene(33).string()}};
  const auto cfg = write_config(doc);
  ASSERT_EQ(run_stage(cfg, "simulate", "--threads 1").code, 0);
  ASSERT_EQ(run_stage(cfg, "psf", "--threads 1").code, 0);
  const auto lambda = slurp_text(out("lambda.sasg"));
  ASSERT_EQ(run_stage(cfg, "deconv", "--threads 1").code, 0);
  const auto one = slurp_text(out("sigma_hat.sasg"));
  ASSERT_EQ(run_stage(cfg, "simulate", "--threads 3").code, 0);
  EXPECT_EQ(slurp_text(out("lambda.sasg")), lambda);
  ASSERT_EQ(run_stage(cfg, "deconv", "--threads 3").code, 0);
  EXPECT_EQ(slurp_text(out("sigma_hat.sasg")), one);
}

TEST_F(CliTest, NonFiniteLossExitsWithIteration) {
  const auto cfg = write_config(small_config());
  ASSERT_EQ(run_stage(cfg, "psf").code, 0);
  ComplexGrid lambda(33, 33);
  lambda(16, 16) = 1.0;
  lambda(3, 3) = std::numeric_limits<double>::quiet_NaN();
  io::write_grid(out("lambda.sasg"), lambda);
  const auto r = run_stage(cfg, "deconv");
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("iteration 1"), std::string::npos) << r.err;
  const auto status = json::parse(slurp_text(out("deconv_status.json")));
  EXPECT_EQ(status["status"], "non_finite_loss");
  EXPECT_EQ(status["abort_iteration"], 1);
}

TEST_F(CliTest, PngSceneIsAccepted) {
  auto doc = small_config();
  RealGrid g(33, 33, 0.0);
  g(10, 20) = 1.0;
  io::write_png(dir_ / "scene.png", g);
  doc["paths"] = {{"scene", "scene.png"}};
  ASSERT_EQ(run_stage(write_config(doc), "simulate").code, 0);
  EXPECT_EQ(grid_stats(io::read_complex_grid(out("lambda.sasg"))).argmax, (PixelIndex{10, 20}));
}

TEST(CliConfigs, ShippedConfigsParse) {
  for (const auto& e : fs::directory_iterator(SASINR_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_run_config(e.path())) << e.path();
    EXPECT_TRUE(fs::exists(load_run_config(e.path()).paths.scene)) << e.path();
  }
}
