#pragma once

// JSON run configuration shared by every CLI subcommand. Every field is
// optional; missing fields keep the library defaults. Unknown keys are
// rejected at every nesting level.
//
//   {
//     "geometry":   {"num_transducers", "ring_radius", "ring_height",
//                    "scene_extent", "grid_size", "sound_speed"},
//     "waveform":   {"f_start", "f_stop", "duration", "sample_rate",
//                    "taper_fraction"},
//     "simulation": {"noise_level", "offset": [x, y], "record_window",
//                    "chirp_oversample"},
//     "beamform":   {"interpolation": "linear"|"nearest", "upsample"},
//     "deconv":     {"iterations", "learning_rate", "kappa",
//                    "loss_smoothing_eps", "snapshot_every",
//                    "convergence_threshold", "convergence_window",
//                    "num_features", "hidden_width",
//                    "loss": "complex"|"magnitude"},
//     "wiener":     {"noise_to_signal"},
//     "seed": 0,
//     "output_dir": "out",
//     "paths":      {"scene", "measurements", "lambda", "psf",
//                    "estimate", "truth"}
//   }
//
// Relative paths inside "paths" resolve against the config file's directory.
// Unset paths default to standard file names inside output_dir.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>

#include "sasinr/array_sim.hpp"
#include "sasinr/baselines.hpp"
#include "sasinr/beamformer.hpp"
#include "sasinr/deconv_pipeline.hpp"
#include "sasinr/error.hpp"
#include "sasinr/scene_grid.hpp"
#include "sasinr/waveform.hpp"

namespace sasinr {

struct SimulationConfig {
  /// Standard deviation of additive Gaussian noise, as a fraction of the
  /// clean measurement peak.
  double noise_level = 0.0;
  SimulationOptions options;
};

struct RunPaths {
  std::filesystem::path scene;
  std::filesystem::path measurements;
  std::filesystem::path lambda;
  std::filesystem::path psf;
  std::filesystem::path estimate;
  std::filesystem::path truth;
};

struct RunConfig {
  ArrayGeometry geometry;
  WaveformSpec waveform;
  SimulationConfig simulation;
  BeamformOptions beamform;
  DeconvConfig deconv;
  WienerConfig wiener;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  RunPaths paths;

  void validate() const {
    geometry.validate();
    waveform.validate();
    deconv.validate();
    wiener.validate();
    if (!(simulation.noise_level >= 0.0)) throw ConfigError("simulation.noise_level must be >= 0");
    if (simulation.options.chirp_oversample < 1)
      throw ConfigError("simulation.chirp_oversample must be >= 1");
    if (beamform.upsample < 1) throw ConfigError("beamform.upsample must be >= 1");
  }
};

namespace detail {

using Json = nlohmann::json;

inline void reject_unknown(const Json& obj, std::string_view where,
                           std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object())
    throw ConfigError(std::string(where.empty() ? "config" : where) + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known)
      throw ConfigError("unknown config key \"" + (where.empty() ? "" : std::string(where) + ".") +
                        key + "\"");
  }
}

template <typename T>
void read_field(const Json& obj, std::string_view where, const char* key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!it->is_number_unsigned())
        throw ConfigError("expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError("expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError("expected a string");
    }
    out = it->get<T>();
  } catch (const std::exception& e) {
    const std::string name = where.empty() ? key : std::string(where) + "." + key;
    throw ConfigError("config key \"" + name + "\": " + e.what());
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& doc,
                                  const std::filesystem::path& base_dir = {}) {
  using detail::read_field;
  using detail::reject_unknown;
  RunConfig cfg;
  reject_unknown(doc, "",
                 {"geometry", "waveform", "simulation", "beamform", "deconv", "wiener", "seed",
                  "output_dir", "paths"});

  if (auto it = doc.find("geometry"); it != doc.end()) {
    reject_unknown(*it, "geometry",
                   {"num_transducers", "ring_radius", "ring_height", "scene_extent", "grid_size",
                    "sound_speed"});
    auto& g = cfg.geometry;
    read_field(*it, "geometry", "num_transducers", g.num_transducers);
    read_field(*it, "geometry", "ring_radius", g.ring_radius);
    read_field(*it, "geometry", "ring_height", g.ring_height);
    read_field(*it, "geometry", "scene_extent", g.scene_extent);
    read_field(*it, "geometry", "grid_size", g.grid_size);
    read_field(*it, "geometry", "sound_speed", g.sound_speed);
  }
  if (auto it = doc.find("waveform"); it != doc.end()) {
    reject_unknown(*it, "waveform",
                   {"f_start", "f_stop", "duration", "sample_rate", "taper_fraction"});
    auto& w = cfg.waveform;
    read_field(*it, "waveform", "f_start", w.f_start);
    read_field(*it, "waveform", "f_stop", w.f_stop);
    read_field(*it, "waveform", "duration", w.duration);
    read_field(*it, "waveform", "sample_rate", w.sample_rate);
    read_field(*it, "waveform", "taper_fraction", w.taper_fraction);
  }
  if (auto it = doc.find("simulation"); it != doc.end()) {
    reject_unknown(*it, "simulation",
                   {"noise_level", "offset", "record_window", "chirp_oversample"});
    auto& s = cfg.simulation;
    read_field(*it, "simulation", "noise_level", s.noise_level);
    read_field(*it, "simulation", "record_window", s.options.record_window);
    read_field(*it, "simulation", "chirp_oversample", s.options.chirp_oversample);
    if (auto off = it->find("offset"); off != it->end()) {
      if (!off->is_array() || off->size() != 2 || !(*off)[0].is_number() ||
          !(*off)[1].is_number())
        throw ConfigError("config key \"simulation.offset\": expected [x, y] in meters");
      s.options.offset = {(*off)[0].get<double>(), (*off)[1].get<double>()};
    }
  }
  if (auto it = doc.find("beamform"); it != doc.end()) {
    reject_unknown(*it, "beamform", {"interpolation", "upsample"});
    read_field(*it, "beamform", "upsample", cfg.beamform.upsample);
    std::string mode;
    read_field(*it, "beamform", "interpolation", mode);
    if (mode == "nearest")
      cfg.beamform.interpolation = Interpolation::nearest;
    else if (mode == "linear" || mode.empty())
      cfg.beamform.interpolation = Interpolation::linear;
    else
      throw ConfigError("config key \"beamform.interpolation\": unknown mode \"" + mode + "\"");
  }
  if (auto it = doc.find("deconv"); it != doc.end()) {
    reject_unknown(*it, "deconv",
                   {"iterations", "learning_rate", "kappa", "loss_smoothing_eps",
                    "snapshot_every", "convergence_threshold", "convergence_window",
                    "num_features", "hidden_width", "loss"});
    auto& d = cfg.deconv;
    read_field(*it, "deconv", "iterations", d.iterations);
    read_field(*it, "deconv", "learning_rate", d.learning_rate);
    read_field(*it, "deconv", "kappa", d.kappa);
    read_field(*it, "deconv", "loss_smoothing_eps", d.loss_smoothing_eps);
    read_field(*it, "deconv", "snapshot_every", d.snapshot_every);
    read_field(*it, "deconv", "convergence_threshold", d.convergence_threshold);
    read_field(*it, "deconv", "convergence_window", d.convergence_window);
    read_field(*it, "deconv", "num_features", d.num_features);
    read_field(*it, "deconv", "hidden_width", d.hidden_width);
    std::string loss;
    read_field(*it, "deconv", "loss", loss);
    if (loss == "magnitude")
      d.loss = LossMode::magnitude;
    else if (loss == "complex" || loss.empty())
      d.loss = LossMode::complex;
    else
      throw ConfigError("config key \"deconv.loss\": unknown mode \"" + loss + "\"");
  }
  if (auto it = doc.find("wiener"); it != doc.end()) {
    reject_unknown(*it, "wiener", {"noise_to_signal"});
    read_field(*it, "wiener", "noise_to_signal", cfg.wiener.noise_to_signal);
  }
  read_field(doc, "", "seed", cfg.seed);
  std::string out_dir;
  read_field(doc, "", "output_dir", out_dir);
  cfg.output_dir =
      (base_dir / (out_dir.empty() ? cfg.output_dir : std::filesystem::path(out_dir))).lexically_normal();
  if (auto it = doc.find("paths"); it != doc.end()) {
    reject_unknown(*it, "paths", {"scene", "measurements", "lambda", "psf", "estimate", "truth"});
    auto path_field = [&](const char* key, std::filesystem::path& out) {
      std::string s;
      read_field(*it, "paths", key, s);
      if (!s.empty()) out = (base_dir / s).lexically_normal();
    };
    path_field("scene", cfg.paths.scene);
    path_field("measurements", cfg.paths.measurements);
    path_field("lambda", cfg.paths.lambda);
    path_field("psf", cfg.paths.psf);
    path_field("estimate", cfg.paths.estimate);
    path_field("truth", cfg.paths.truth);
  }
  cfg.deconv.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

/// Reads and parses a config file. A missing or unreadable file is an
/// IoError; malformed JSON or bad values are ConfigErrors.
inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(doc, path.parent_path());
}

}  // namespace sasinr
