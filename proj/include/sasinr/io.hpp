#pragma once

// Binary containers (grids, measurement sets, network checkpoints) and PNG
// import/export. All multi-byte fields are little-endian.
//
// GridFile layout:
//   "SASG" | u16 version | u8 kind (0 real, 1 complex) | u32 height | u32 width
//   | f64 payload, row-major, interleaved (re, im) when complex

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "sasinr/array_sim.hpp"
#include "sasinr/error.hpp"
#include "sasinr/inr_engine.hpp"
#include "sasinr/scene_grid.hpp"

namespace sasinr::io {

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

inline constexpr std::uint16_t kGridVersion = 1;
inline constexpr std::uint16_t kMeasurementVersion = 1;
inline constexpr std::uint16_t kCheckpointVersion = 1;

enum class GridKind : std::uint8_t { real = 0, complex = 1 };

namespace detail {

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  }
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }
  void doubles(std::span<const double> v) { bytes(v.data(), v.size() * sizeof(double)); }
  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open " + path.string());
  }
  template <typename T>
  T get() {
    T value{};
    bytes(&value, sizeof(T));
    return value;
  }
  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n))
      throw IoError("unexpected end of file in " + path_.string());
  }
  void doubles(std::span<double> v) { bytes(v.data(), v.size() * sizeof(double)); }
  void expect_magic(const char (&magic)[5]) {
    char got[4];
    bytes(got, 4);
    if (std::memcmp(got, magic, 4) != 0)
      throw IoError(path_.string() + " is not a " + std::string(magic, 4) + " file");
  }
  void expect_end() {
    in_.peek();
    if (!in_.eof()) throw IoError("trailing bytes in " + path_.string());
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw ConfigError(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace detail

using AnyGrid = std::variant<RealGrid, ComplexGrid>;

inline void write_grid(const std::filesystem::path& path, const RealGrid& g) {
  detail::Writer w(path);
  w.bytes("SASG", 4);
  w.put(kGridVersion);
  w.put(static_cast<std::uint8_t>(GridKind::real));
  w.put(detail::checked_u32(g.height(), "grid height"));
  w.put(detail::checked_u32(g.width(), "grid width"));
  w.doubles(g.values());
  w.finish();
}

inline void write_grid(const std::filesystem::path& path, const ComplexGrid& g) {
  detail::Writer w(path);
  w.bytes("SASG", 4);
  w.put(kGridVersion);
  w.put(static_cast<std::uint8_t>(GridKind::complex));
  w.put(detail::checked_u32(g.height(), "grid height"));
  w.put(detail::checked_u32(g.width(), "grid width"));
  w.bytes(g.values().data(), g.size() * sizeof(cplx));
  w.finish();
}

inline AnyGrid read_grid(const std::filesystem::path& path) {
  detail::Reader r(path);
  r.expect_magic("SASG");
  if (const auto v = r.get<std::uint16_t>(); v != kGridVersion)
    throw IoError(path.string() + ": unsupported grid version " + std::to_string(v));
  const auto kind = r.get<std::uint8_t>();
  const std::size_t h = r.get<std::uint32_t>();
  const std::size_t w = r.get<std::uint32_t>();
  AnyGrid out;
  if (kind == static_cast<std::uint8_t>(GridKind::real)) {
    RealGrid g(h, w);
    r.doubles(g.values());
    out = std::move(g);
  } else if (kind == static_cast<std::uint8_t>(GridKind::complex)) {
    ComplexGrid g(h, w);
    r.bytes(g.values().data(), g.size() * sizeof(cplx));
    out = std::move(g);
  } else {
    throw IoError(path.string() + ": unknown grid kind " + std::to_string(kind));
  }
  r.expect_end();
  return out;
}

inline RealGrid read_real_grid(const std::filesystem::path& path) {
  auto g = read_grid(path);
  if (auto* real = std::get_if<RealGrid>(&g)) return std::move(*real);
  throw IoError(path.string() + ": expected a real grid");
}

/// Complex grids load as-is; real grids are promoted with zero imaginary part.
inline ComplexGrid read_complex_grid(const std::filesystem::path& path) {
  auto g = read_grid(path);
  if (auto* c = std::get_if<ComplexGrid>(&g)) return std::move(*c);
  return to_complex(std::get<RealGrid>(g));
}

// Measurement container:
//   "SASM" | u16 version | geometry | waveform | f64 record_window
//   | u32 count | u32 length | per record: f64 sample_rate, f64 start_time,
//   f64 samples[length]
inline void write_measurements(const std::filesystem::path& path, const MeasurementSet& m) {
  detail::Writer w(path);
  w.bytes("SASM", 4);
  w.put(kMeasurementVersion);
  w.put(detail::checked_u32(m.geom.num_transducers, "num_transducers"));
  w.put(m.geom.ring_radius);
  w.put(m.geom.ring_height);
  w.put(m.geom.scene_extent);
  w.put(detail::checked_u32(m.geom.grid_size, "grid_size"));
  w.put(m.geom.sound_speed);
  w.put(m.spec.f_start);
  w.put(m.spec.f_stop);
  w.put(m.spec.duration);
  w.put(m.spec.sample_rate);
  w.put(m.spec.taper_fraction);
  w.put(m.record_window);
  w.put(detail::checked_u32(m.signals.size(), "record count"));
  w.put(detail::checked_u32(m.record_length(), "record length"));
  for (const auto& s : m.signals) {
    if (s.size() != m.record_length()) throw ConfigError("measurement records differ in length");
    w.put(s.sample_rate);
    w.put(s.start_time);
    w.doubles(s.samples);
  }
  w.finish();
}

inline MeasurementSet read_measurements(const std::filesystem::path& path) {
  detail::Reader r(path);
  r.expect_magic("SASM");
  if (const auto v = r.get<std::uint16_t>(); v != kMeasurementVersion)
    throw IoError(path.string() + ": unsupported measurement version " + std::to_string(v));
  MeasurementSet m;
  m.geom.num_transducers = r.get<std::uint32_t>();
  m.geom.ring_radius = r.get<double>();
  m.geom.ring_height = r.get<double>();
  m.geom.scene_extent = r.get<double>();
  m.geom.grid_size = r.get<std::uint32_t>();
  m.geom.sound_speed = r.get<double>();
  m.spec.f_start = r.get<double>();
  m.spec.f_stop = r.get<double>();
  m.spec.duration = r.get<double>();
  m.spec.sample_rate = r.get<double>();
  m.spec.taper_fraction = r.get<double>();
  m.record_window = r.get<double>();
  const std::size_t count = r.get<std::uint32_t>();
  const std::size_t length = r.get<std::uint32_t>();
  m.signals.resize(count);
  for (auto& s : m.signals) {
    s.sample_rate = r.get<double>();
    s.start_time = r.get<double>();
    s.samples.resize(length);
    r.doubles(s.samples);
  }
  r.expect_end();
  try {
    m.geom.validate();
    m.spec.validate();
  } catch (const ConfigError& e) {
    throw IoError(path.string() + ": invalid header: " + e.what());
  }
  return m;
}

// Checkpoint container:
//   "SASC" | u16 version | u64 seed | f64 kappa | u32 m | u32 h
//   | B (m x 2, row-major) | per layer: weight, bias (Eigen storage order)
//   | u64 adam step | f64 lr, beta1, beta2, epsilon | first moments | second moments
inline void write_checkpoint(const std::filesystem::path& path, const InrModel& model) {
  detail::Writer w(path);
  w.bytes("SASC", 4);
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint64_t>(model.seed));
  w.put(model.encoder.kappa);
  const auto m = static_cast<std::size_t>(model.encoder.num_features());
  const auto h = static_cast<std::size_t>(model.net.hidden_width());
  w.put(detail::checked_u32(m, "feature count"));
  w.put(detail::checked_u32(h, "hidden width"));
  for (std::size_t i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) w.put(model.encoder.b_matrix(static_cast<Eigen::Index>(i), j));
  for (const auto& p : model.net.parameters()) w.doubles(p);
  w.put(static_cast<std::uint64_t>(model.adam.step));
  w.put(model.adam.learning_rate);
  w.put(model.adam.beta1);
  w.put(model.adam.beta2);
  w.put(model.adam.epsilon);
  for (const auto& p : model.adam.first_moment.parameters()) w.doubles(p);
  for (const auto& p : model.adam.second_moment.parameters()) w.doubles(p);
  w.finish();
}

inline InrModel read_checkpoint(const std::filesystem::path& path) {
  detail::Reader r(path);
  r.expect_magic("SASC");
  if (const auto v = r.get<std::uint16_t>(); v != kCheckpointVersion)
    throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(v));
  const auto seed = r.get<std::uint64_t>();
  const auto kappa = r.get<double>();
  const std::size_t m = r.get<std::uint32_t>();
  const std::size_t h = r.get<std::uint32_t>();
  if (m == 0 || h == 0) throw IoError(path.string() + ": empty network");
  // Shapes come from a seeded init; every value is then overwritten.
  InrModel model = init_seeded(seed, m, h, kappa);
  for (std::size_t i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < 2; ++j)
      model.encoder.b_matrix(static_cast<Eigen::Index>(i), j) = r.get<double>();
  for (auto p : model.net.parameters()) r.doubles(p);
  model.adam.step = r.get<std::uint64_t>();
  model.adam.learning_rate = r.get<double>();
  model.adam.beta1 = r.get<double>();
  model.adam.beta2 = r.get<double>();
  model.adam.epsilon = r.get<double>();
  for (auto p : model.adam.first_moment.parameters()) r.doubles(p);
  for (auto p : model.adam.second_moment.parameters()) r.doubles(p);
  r.expect_end();
  return model;
}

/// Linear 8-bit gray level for magnitude v given the panel maximum.
inline std::uint8_t gray_level(double v, double max_value) {
  if (!(max_value > 0.0)) return 0;
  const double scaled = std::floor(255.0 * std::clamp(v / max_value, 0.0, 1.0) + 0.5);
  return static_cast<std::uint8_t>(scaled);
}

namespace detail {

struct PngFile {
  std::FILE* fp = nullptr;
  ~PngFile() {
    if (fp) std::fclose(fp);
  }
};

inline void write_png_gray(const std::filesystem::path& path, std::size_t height,
                           std::size_t width, const std::vector<std::uint8_t>& pixels) {
  PngFile f{std::fopen(path.string().c_str(), "wb")};
  if (!f.fp) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG " + path.string());
  }
  png_init_io(png, f.fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < height; ++r)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + r * width));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace detail

/// Grayscale PNG of |g| mapped linearly from [0, max|g|] to [0, 255].
template <typename Grid>
void write_png(const std::filesystem::path& path, const Grid& g) {
  double peak = 0.0;
  for (const auto& v : g.values()) peak = std::max(peak, std::abs(v));
  std::vector<std::uint8_t> px(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) px[i] = gray_level(std::abs(g[i]), peak);
  detail::write_png_gray(path, g.height(), g.width(), px);
}

/// Equal-height magnitude panels side by side with one shared linear scale
/// and a 2-pixel black gutter.
inline void write_png_panel(const std::filesystem::path& path,
                            const std::vector<ComplexGrid>& panels) {
  if (panels.empty()) throw ConfigError("write_png_panel: no panels");
  const std::size_t h = panels.front().height();
  double peak = 0.0;
  std::size_t width = 0;
  for (const auto& p : panels) {
    if (p.height() != h) throw ConfigError("write_png_panel: panel heights differ");
    for (const auto& v : p.values()) peak = std::max(peak, std::abs(v));
    width += p.width();
  }
  constexpr std::size_t gutter = 2;
  width += gutter * (panels.size() - 1);
  std::vector<std::uint8_t> px(h * width, 0);
  std::size_t x0 = 0;
  for (const auto& p : panels) {
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < p.width(); ++c)
        px[r * width + x0 + c] = gray_level(std::abs(p(r, c)), peak);
    x0 += p.width() + gutter;
  }
  detail::write_png_gray(path, h, width, px);
}

/// 8-bit PNG (any color type) converted to gray and mapped to [0, 1].
inline RealGrid read_png_gray(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  RealGrid g(image.height, image.width);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = px[i] / 255.0;
  return g;
}

/// Scene loader: PNG by extension, GridFile otherwise.
inline RealGrid read_scene(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("scene file not found: " + path.string());
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return read_png_gray(path);
  return read_real_grid(path);
}

}  // namespace sasinr::io
