#pragma once

// Pipeline subcommands behind the sasinr executable. Every stage reads and
// writes files only, so stages compose across processes.
//
// Exit codes: 0 ok, 1 unexpected failure, 2 configuration error, 3 I/O error,
// 4 numeric failure (non-finite loss, degenerate PSF).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sasinr/array_sim.hpp"
#include "sasinr/baselines.hpp"
#include "sasinr/beamformer.hpp"
#include "sasinr/config.hpp"
#include "sasinr/deconv_pipeline.hpp"
#include "sasinr/error.hpp"
#include "sasinr/io.hpp"
#include "sasinr/parallel.hpp"
#include "sasinr/psf_conv.hpp"

namespace sasinr::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kConfigFailure = 2,
  kIoFailure = 3,
  kNumericFailure = 4,
};

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"simulate", "beamform", "psf",    "deconv",
                                              "invfilter", "wiener",  "metrics"};
  return names;
}

struct Options {
  std::string command;
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  int threads = 0;  // 0: SASINR_THREADS or 1
};

/// Support radius threshold written to the PSF metadata.
inline constexpr double kPsfSupportThreshold = 0.05;

namespace detail {

struct Context {
  RunConfig cfg;
  fs::path out;
  std::ostream& log;

  fs::path or_default(const fs::path& p, const char* name) const {
    return p.empty() ? out / name : p;
  }
  fs::path measurements() const { return or_default(cfg.paths.measurements, "measurements.sasm"); }
  fs::path lambda() const { return or_default(cfg.paths.lambda, "lambda.sasg"); }
  fs::path psf() const { return or_default(cfg.paths.psf, "psf.sasg"); }
  fs::path estimate() const { return or_default(cfg.paths.estimate, "sigma_hat.sasg"); }
  /// Ground truth: paths.truth, else the simulation scene, else none.
  fs::path truth() const { return cfg.paths.truth.empty() ? cfg.paths.scene : cfg.paths.truth; }
};

inline void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw IoError(std::string(what) + " not found: " + p.string());
}

inline void write_json(const fs::path& path, const nlohmann::json& doc) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << doc.dump(2) << '\n';
  if (!f) throw IoError("write failed for " + path.string());
}

// Shortest text that parses back to the same double.
inline std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline nlohmann::json metrics_json(const Metrics& m) {
  nlohmann::json peaks = nlohmann::json::array();
  for (const auto& p : m.recovered_peaks) peaks.push_back({p.row, p.col});
  return {{"mse", m.mse},
          {"psnr_db", m.psnr},
          {"localization_errors_px", m.localization_errors},
          {"mean_localization_error_px", m.mean_localization_error()},
          {"max_localization_error_px", m.max_localization_error()},
          {"recovered_peaks", peaks}};
}

/// Real grids are compared as-is; complex images by peak-normalized magnitude.
inline RealGrid comparable(const io::AnyGrid& g) {
  if (const auto* real = std::get_if<RealGrid>(&g)) return *real;
  return magnitude(normalize_peak(std::get<ComplexGrid>(g)));
}

inline RealGrid load_truth(const Context& ctx) {
  const auto path = ctx.truth();
  if (path.empty()) throw ConfigError("paths.truth (or paths.scene) is required");
  return io::read_scene(path);
}

inline Psf load_psf(const Context& ctx) {
  require_file(ctx.psf(), "PSF file");
  return Psf::from_grid(io::read_complex_grid(ctx.psf()));
}

inline ComplexGrid load_lambda(const Context& ctx) {
  require_file(ctx.lambda(), "beamformed image");
  return io::read_complex_grid(ctx.lambda());
}

inline void write_lambda(const Context& ctx, const MeasurementSet& m) {
  const auto lambda = normalize_peak(beamform(m, ctx.cfg.beamform));
  io::write_grid(ctx.lambda(), lambda);
  io::write_png(ctx.out / "lambda.png", lambda);
  const auto stats = grid_stats(lambda);
  ctx.log << "wrote " << ctx.lambda().string() << " (peak at " << stats.argmax.row << ", "
          << stats.argmax.col << ")\n";
}

inline int cmd_simulate(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (cfg.paths.scene.empty()) throw ConfigError("paths.scene is required for simulate");
  const RealGrid scene = io::read_scene(cfg.paths.scene);
  auto m = simulate(scene, cfg.geometry, cfg.waveform, cfg.simulation.options);
  if (cfg.simulation.noise_level > 0.0)
    add_noise(m, cfg.simulation.noise_level * peak_amplitude(m), cfg.seed);
  io::write_measurements(ctx.measurements(), m);
  ctx.log << "wrote " << ctx.measurements().string() << " (" << m.signals.size() << " records of "
          << m.record_length() << " samples)\n";
  write_lambda(ctx, m);
  return kOk;
}

inline int cmd_beamform(const Context& ctx) {
  require_file(ctx.measurements(), "measurement file");
  write_lambda(ctx, io::read_measurements(ctx.measurements()));
  return kOk;
}

inline int cmd_psf(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const Psf psf = build_psf(cfg.geometry, cfg.waveform, cfg.beamform);
  io::write_grid(ctx.psf(), psf.grid);
  io::write_png(ctx.out / "psf.png", psf.grid);
  const double radius = support_radius(psf, kPsfSupportThreshold);
  write_json(ctx.out / "psf.json", {{"grid_size", cfg.geometry.grid_size},
                                    {"pixel_spacing_m", cfg.geometry.pixel_spacing()},
                                    {"peak_index", {psf.peak_index.row, psf.peak_index.col}},
                                    {"support_threshold", kPsfSupportThreshold},
                                    {"support_radius_px", radius}});
  ctx.log << "wrote " << ctx.psf().string() << " (support radius " << radius << " px at |PSF| >= "
          << kPsfSupportThreshold << ")\n";
  return kOk;
}

inline int cmd_deconv(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const ComplexGrid lambda = normalize_peak(load_lambda(ctx));
  const Psf psf = load_psf(ctx);

  const fs::path log_path = ctx.out / "loss.csv";
  std::ofstream loss_log(log_path);
  if (!loss_log) throw IoError("cannot open " + log_path.string() + " for writing");
  loss_log << "iteration,loss\n";
  double last_loss = std::numeric_limits<double>::quiet_NaN();
  const auto on_iteration = [&](std::size_t it, double loss) {
    loss_log << it << ',' << exact(loss) << '\n';
    last_loss = loss;
  };

  SnapshotFn on_snapshot;
  if (cfg.deconv.snapshot_every > 0) {
    fs::create_directories(ctx.out / "snapshots");
    on_snapshot = [&](std::size_t it, const RealGrid& sigma) {
      std::ostringstream name;
      name << "snapshot_" << std::setw(6) << std::setfill('0') << it << ".png";
      io::write_png(ctx.out / "snapshots" / name.str(), sigma);
    };
  }

  DeconvResult result;
  try {
    result = run_deconv(lambda, psf, cfg.deconv, on_snapshot, on_iteration);
  } catch (const NonFiniteLossError& e) {
    loss_log.flush();
    write_json(ctx.out / "deconv_status.json", {{"status", "non_finite_loss"},
                                                {"abort_iteration", e.iteration()},
                                                {"abort_loss", exact(e.loss())},
                                                {"last_logged_loss", exact(last_loss)}});
    throw;
  }
  loss_log.flush();
  if (!loss_log) throw IoError("write failed for " + log_path.string());

  io::write_grid(ctx.out / "sigma_hat.sasg", result.sigma_hat);
  io::write_grid(ctx.out / "b_estimated.sasg", result.b_estimated);
  io::write_checkpoint(ctx.out / "checkpoint.sasc", result.model);
  io::write_png(ctx.out / "sigma_hat.png", result.sigma_hat);
  io::write_png_panel(ctx.out / "panel.png",
                      {to_complex(result.sigma_hat), result.b_estimated, lambda});
  const std::string status = result.converged ? "converged" : "iteration_limit";
  write_json(ctx.out / "deconv_status.json",
             {{"status", status},
              {"iterations", result.loss_history.size()},
              {"final_loss", exact(result.loss_history.back())}});
  ctx.log << status << " after " << result.loss_history.size() << " iterations, final loss "
          << result.loss_history.back() << '\n';

  if (const auto truth_path = ctx.truth(); !truth_path.empty()) {
    const RealGrid truth = io::read_scene(truth_path);
    const auto ours = evaluate_against_truth(result.sigma_hat, truth);
    const auto beamformed = evaluate_against_truth(magnitude(lambda), truth);
    write_json(ctx.out / "metrics.json",
               {{"sigma_hat", metrics_json(ours)}, {"lambda_magnitude", metrics_json(beamformed)}});
    ctx.log << "PSNR sigma_hat " << ours.psnr << " dB, |lambda| " << beamformed.psnr << " dB\n";
  }
  return kOk;
}

inline int cmd_invfilter(const Context& ctx) {
  const auto result = inverse_filter(load_lambda(ctx), load_psf(ctx));
  if (result.floored_bins > 0)
    ctx.log << "warning: " << result.floored_bins << " spectral bins raised to the floor\n";
  io::write_grid(ctx.out / "invfilter.sasg", result.image);
  io::write_png(ctx.out / "invfilter.png", result.image);
  ctx.log << "wrote " << (ctx.out / "invfilter.sasg").string() << '\n';
  return kOk;
}

inline int cmd_wiener(const Context& ctx) {
  const auto image = wiener_filter(load_lambda(ctx), load_psf(ctx), ctx.cfg.wiener);
  io::write_grid(ctx.out / "wiener.sasg", image);
  io::write_png(ctx.out / "wiener.png", image);
  ctx.log << "wrote " << (ctx.out / "wiener.sasg").string() << '\n';
  return kOk;
}

inline int cmd_metrics(const Context& ctx) {
  require_file(ctx.estimate(), "estimate");
  const RealGrid estimate = comparable(io::read_grid(ctx.estimate()));
  const auto m = evaluate_against_truth(estimate, load_truth(ctx));
  auto doc = metrics_json(m);
  doc["estimate"] = ctx.estimate().string();
  write_json(ctx.out / "metrics.json", doc);
  ctx.log << "MSE " << m.mse << ", PSNR " << m.psnr << " dB";
  if (!m.localization_errors.empty())
    ctx.log << ", max localization error " << m.max_localization_error() << " px";
  ctx.log << '\n';
  return kOk;
}

}  // namespace detail

/// Runs one subcommand. Errors are reported on err and mapped to exit codes.
inline int run(const Options& opts, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  try {
    if (opts.threads < 0) throw ConfigError("--threads must be >= 0");
    set_num_threads(opts.threads);
    RunConfig cfg = opts.config ? load_run_config(*opts.config) : parse_run_config(nlohmann::json::object());
    if (opts.seed) cfg.seed = cfg.deconv.seed = *opts.seed;
    detail::Context ctx{cfg, opts.out ? *opts.out : cfg.output_dir, log};
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec) throw IoError("cannot create output directory " + ctx.out.string() + ": " + ec.message());

    const auto& c = opts.command;
    if (c == "simulate") return detail::cmd_simulate(ctx);
    if (c == "beamform") return detail::cmd_beamform(ctx);
    if (c == "psf") return detail::cmd_psf(ctx);
    if (c == "deconv") return detail::cmd_deconv(ctx);
    if (c == "invfilter") return detail::cmd_invfilter(ctx);
    if (c == "wiener") return detail::cmd_wiener(ctx);
    if (c == "metrics") return detail::cmd_metrics(ctx);
    throw ConfigError("unknown subcommand \"" + c + "\"");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUnexpected;
  }
}

/// Parses argv and dispatches to run().
inline int main(int argc, char** argv) {
  CLI::App app{"Circular SAS simulation, beamforming, and neural deconvolution"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opts;
  std::string config, out;
  std::uint64_t seed = 0;
  app.add_option("--config", config, "JSON run configuration");
  auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--out", out, "Output directory (overrides output_dir)");
  app.add_option("--threads", opts.threads,
                 std::string("Worker threads (default: $") + kThreadsEnvVar + " or 1)");
  for (const auto& name : subcommands()) app.add_subcommand(name);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigFailure;
  }
  opts.command = app.get_subcommands().front()->get_name();
  if (!config.empty()) opts.config = config;
  if (!out.empty()) opts.out = out;
  if (*seed_opt) opts.seed = seed;
  return run(opts);
}

}  // namespace sasinr::cli
