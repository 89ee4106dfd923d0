#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "sasinr/beamformer.hpp"
#include "sasinr/io.hpp"
#include "sasinr/scene_grid.hpp"

using namespace sasinr;

TEST(PixelCenters, DefaultEndpointsAndSpacing) {
  ArrayGeometry g;
  const auto pts = pixel_centers(g);
  ASSERT_EQ(pts.size(), 129u * 129u);
  EXPECT_EQ(pts.front().x, -0.2);
  EXPECT_EQ(pts.front().y, -0.2);
  EXPECT_EQ(pts.back().x, 0.2);
  EXPECT_EQ(pts.back().y, 0.2);
  EXPECT_DOUBLE_EQ(g.pixel_spacing(), 3.125e-3);
  EXPECT_NEAR(pts[1].x - pts[0].x, 3.125e-3, 1e-15);
}

TEST(PixelCenters, ThreePixelAxis) {
  ArrayGeometry g;
  g.grid_size = 3;
  g.scene_extent = 2.0;
  const auto pts = pixel_centers(g);
  EXPECT_EQ(pts[0].x, -1.0);
  EXPECT_EQ(pts[1].x, 0.0);
  EXPECT_EQ(pts[2].x, 1.0);
}

TEST(PixelCenters, CenterPixelIsOrigin) {
  const auto pts = pixel_centers(ArrayGeometry{});
  const auto& c = pts[64 * 129 + 64];
  EXPECT_EQ(c.x, 0.0);
  EXPECT_EQ(c.y, 0.0);
}

TEST(PixelCenters, RowMajorXFromColumnYFromRow) {
  ArrayGeometry g;
  g.grid_size = 5;
  g.scene_extent = 4.0;
  const auto pts = pixel_centers(g);
  EXPECT_EQ(pts[1 * 5 + 3].x, 1.0);
  EXPECT_EQ(pts[1 * 5 + 3].y, -1.0);
}

TEST(PixelCenters, UniformSpacing) {
  const auto pts = pixel_centers(ArrayGeometry{});
  const double ref = pts[1].x - pts[0].x;
  for (std::size_t c = 1; c < 129; ++c)
    EXPECT_LT(std::abs((pts[c].x - pts[c - 1].x) - ref) / ref, 1e-12);
}

TEST(TransducerPositions, FirstAndQuarterTurn) {
  const auto t = transducer_positions(ArrayGeometry{});
  ASSERT_EQ(t.size(), 360u);
  EXPECT_EQ(t[0].x, 0.85);
  EXPECT_EQ(t[0].y, 0.0);
  EXPECT_EQ(t[0].z, 0.2);
  EXPECT_NEAR(t[90].x, 0.0, 1e-12);
  EXPECT_NEAR(t[90].y, 0.85, 1e-12);
  EXPECT_EQ(t[90].z, 0.2);
}

TEST(TransducerPositions, AllOnRing) {
  ArrayGeometry g;
  g.num_transducers = 37;
  for (const auto& p : transducer_positions(g)) {
    EXPECT_NEAR(std::hypot(p.x, p.y), g.ring_radius, 1e-12);
    EXPECT_EQ(p.z, g.ring_height);
  }
}

TEST(TransducerPositions, IncreasingAngle) {
  ArrayGeometry g;
  g.num_transducers = 12;
  const auto t = transducer_positions(g);
  double prev = -1.0;
  for (const auto& p : t) {
    double a = std::atan2(p.y, p.x);
    if (a < -1e-12) a += 2.0 * std::numbers::pi;
    EXPECT_GT(a, prev);
    prev = a;
  }
}

TEST(ArrayGeometryValidation, RejectsBadValues) {
  ArrayGeometry g;
  g.num_transducers = 0;
  EXPECT_THROW(g.validate(), ConfigError);
  g = {};
  g.grid_size = 1;
  EXPECT_THROW(g.validate(), ConfigError);
  g = {};
  g.sound_speed = 0.0;
  EXPECT_THROW(g.validate(), ConfigError);
  g = {};
  g.scene_extent = -1.0;
  EXPECT_THROW(g.validate(), ConfigError);
  g = {};
  g.ring_radius = 0.0;
  EXPECT_THROW(g.validate(), ConfigError);
}

TEST(GridStats, AllZero) {
  const auto s = grid_stats(ComplexGrid(4, 4));
  EXPECT_EQ(s.max_magnitude, 0.0);
  EXPECT_EQ(s.argmax, (PixelIndex{0, 0}));
}

TEST(GridStats, SinglePixel) {
  ComplexGrid g(4, 4);
  g(2, 1) = {3.0, 4.0};
  const auto s = grid_stats(g);
  EXPECT_EQ(s.max_magnitude, 5.0);
  EXPECT_EQ(s.argmax, (PixelIndex{2, 1}));
}

TEST(GridStats, FirstMaximumWins) {
  ComplexGrid g(3, 3);
  g(1, 2) = 2.0;
  g(2, 0) = 2.0;
  EXPECT_EQ(grid_stats(g).argmax, (PixelIndex{1, 2}));
}

TEST(GridStats, EmptyGridThrows) { EXPECT_THROW(grid_stats(ComplexGrid{}), ConfigError); }

TEST(GridStats, BeamformedCenteredScattererPeaksAtCenter) {
  ArrayGeometry g;
  RealGrid sigma(129, 129, 0.0);
  sigma(64, 64) = 1.0;
  const auto lambda = beamform(simulate(sigma, g, WaveformSpec{}));
  EXPECT_EQ(grid_stats(lambda).argmax, (PixelIndex{64, 64}));
}

TEST(Grid, DataLengthMustMatch) {
  EXPECT_THROW(RealGrid(2, 3, std::vector<double>(5)), ConfigError);
  EXPECT_NO_THROW(ComplexGrid(2, 3, std::vector<cplx>(6)));
}

TEST(Grid, ComplexStorageIsInterleaved) {
  ComplexGrid g(1, 2);
  g[0] = {1.0, 2.0};
  g[1] = {3.0, 4.0};
  const auto* raw = reinterpret_cast<const double*>(g.values().data());
  EXPECT_EQ(raw[0], 1.0);
  EXPECT_EQ(raw[1], 2.0);
  EXPECT_EQ(raw[2], 3.0);
  EXPECT_EQ(raw[3], 4.0);
}

TEST(Grid, ComplexRoundTripsThroughGridFile) {
  ComplexGrid g(3, 5);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = {std::sin(1.0 + i), -1.0 / (i + 3.0)};
  const auto path = std::filesystem::temp_directory_path() / "sasinr_scene_grid_rt.sasg";
  io::write_grid(path, g);
  EXPECT_EQ(io::read_complex_grid(path), g);
  std::filesystem::remove(path);
}
