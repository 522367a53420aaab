#include "dpcc/error.hpp"
#include "dpcc/io.hpp"
#include "dpcc/slim_conv.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <set>

using namespace dpcc;

namespace {

Frame random_frame(uint64_t seed, size_t n, bool integer) {
  nn::SplitMix rng(seed);
  Frame f;
  f.bit_depth = integer ? 10 : 0;
  for (size_t i = 0; i < n; ++i) {
    if (integer)
      f.points.push_back({double(rng.next() % 1024), double(rng.next() % 1024), double(rng.next() % 1024)});
    else
      f.points.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0, 1e-3)});
  }
  return f;
}

std::set<std::array<int, 3>> as_set(const Frame& f) {
  std::set<std::array<int, 3>> s;
  for (const auto& p : f.points) s.insert({int(p[0]), int(p[1]), int(p[2])});
  return s;
}

}  // namespace

TEST(Ply, RoundTripBothFormats) {
  for (bool integer : {true, false})
    for (auto fmt : {PlyFormat::Ascii, PlyFormat::BinaryLittleEndian}) {
      const auto f = random_frame(integer ? 1 : 2, 1000, integer);
      const auto g = parse_ply(format_ply(f, fmt));
      ASSERT_EQ(g.points.size(), 1000u);
      EXPECT_EQ(g.points, f.points);
      EXPECT_EQ(g.bit_depth, f.bit_depth);
    }
}

TEST(Ply, FileRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "dpcc_io_test.ply").string();
  const auto f = random_frame(3, 200, true);
  write_ply(f, path);
  EXPECT_EQ(read_ply(path).points, f.points);
  std::remove(path.c_str());
  EXPECT_THROW(read_ply(path), Error);
}

TEST(Ply, EmptyVertexElement) {
  const std::string text =
      "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  EXPECT_TRUE(parse_ply(text).points.empty());
}

TEST(Ply, IgnoresExtraProperties) {
  const std::string text =
      "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 2\nproperty float x\nproperty uchar red\n"
      "property float y\nproperty float z\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n"
      "1 255 2 3\n4 0 5 6\n";
  const auto f = parse_ply(text);
  ASSERT_EQ(f.points.size(), 2u);
  EXPECT_EQ(f.points[1], (Point3{4, 5, 6}));
}

TEST(Ply, HeaderErrors) {
  try {
    parse_ply("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MalformedHeader);
  }
  try {
    parse_ply("ply\nformat binary_big_endian 1.0\nelement vertex 0\nproperty float x\nproperty float y\n"
              "property float z\nend_header\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnsupportedFormat);
  }
  EXPECT_THROW(parse_ply("not a ply"), Error);
}

TEST(Voxelize, IdentityOnIntegerInput) {
  Frame f;
  f.bit_depth = 6;
  f.points = {{1, 2, 3}, {63, 0, 5}, {1, 2, 3}};
  const auto v = voxelize(f, 6);
  EXPECT_EQ(v.points.size(), 2u);
  EXPECT_EQ(as_set(v), (std::set<std::array<int, 3>>{{1, 2, 3}, {63, 0, 5}}));
}

TEST(Voxelize, DepthReductionFloorsHalf) {
  Frame f;
  f.bit_depth = 11;
  f.points = {{2047, 1, 6}, {2046, 0, 7}, {100, 33, 2}};
  const auto v = voxelize(f, 10);
  EXPECT_EQ(v.bit_depth, 10);
  EXPECT_EQ(as_set(v), (std::set<std::array<int, 3>>{{1023, 0, 3}, {50, 16, 1}}));
}

TEST(Voxelize, RawFitsCubeAndIsDeterministic) {
  const auto f = random_frame(5, 3000, false);
  const auto a = voxelize(f, 6), b = voxelize(f, 6);
  EXPECT_EQ(a.points, b.points);
  for (const auto& p : a.points)
    for (double c : p) {
      EXPECT_GE(c, 0);
      EXPECT_LT(c, 64);
    }
  EXPECT_LT(a.points.size(), f.points.size());
}

TEST(Voxelize, SequenceSharesOneFit) {
  Frame a, b;
  a.points = {{0, 0, 0}, {10, 10, 10}};
  b.points = {{5, 0, 0}, {15, 10, 10}};
  const auto v = voxelize_sequence({a, b}, 4);
  // Common extent 15 maps onto 15 voxels.
  EXPECT_EQ(as_set(v[0]), (std::set<std::array<int, 3>>{{0, 0, 0}, {10, 10, 10}}));
  EXPECT_EQ(as_set(v[1]), (std::set<std::array<int, 3>>{{5, 0, 0}, {15, 10, 10}}));
}

TEST(Voxelize, Errors) {
  Frame f;
  f.points = {{1, 1, 1}, {1, 1, 1}};
  EXPECT_THROW(voxelize(f, 6), Error);
  EXPECT_THROW(voxelize(random_frame(1, 10, true), 0), Error);
  EXPECT_THROW(voxelize(random_frame(1, 10, true), 17), Error);
}

TEST(Synth, ZeroMotionGivesIdenticalFrames) {
  SynthSpec s;
  s.points = 1500;
  s.frames = 4;
  const auto seq = synth_sequence(s);
  ASSERT_EQ(seq.frames.size(), 4u);
  for (const auto& f : seq.frames) EXPECT_EQ(f.points, seq.frames[0].points);
}

TEST(Synth, TranslationShiftsByTwoPerFrame) {
  for (auto shape : {SynthShape::Sphere, SynthShape::Cube, SynthShape::TwoBlob}) {
    SynthSpec s;
    s.shape = shape;
    s.points = 1500;
    s.frames = 4;
    s.translation = {2, 0, 0};
    const auto seq = synth_sequence(s);
    const auto first = as_set(seq.frames[0]);
    for (int t = 1; t < 4; ++t) {
      size_t matched = 0;
      for (const auto& p : seq.frames[static_cast<size_t>(t)].points) {
        EXPECT_TRUE(first.count({int(p[0]) - 2 * t, int(p[1]), int(p[2])})) << t;
        ++matched;
      }
      EXPECT_GT(matched, first.size() * 8 / 10);
      EXPECT_EQ(seq.translations[static_cast<size_t>(t)], (Point3{2, 0, 0}));
      EXPECT_EQ(seq.rotations_deg[static_cast<size_t>(t)], 0.0);
    }
  }
}

TEST(Synth, ReproducibleFromSeed) {
  SynthSpec s;
  s.points = 800;
  s.frames = 3;
  s.translation = {0.7, -0.3, 0.2};
  s.rotation_deg = 2.0;
  s.seed = 42;
  const auto a = synth_sequence(s), b = synth_sequence(s);
  for (size_t t = 0; t < 3; ++t) EXPECT_EQ(a.frames[t].points, b.frames[t].points);
  s.seed = 43;
  EXPECT_NE(synth_sequence(s).frames[0].points, a.frames[0].points);
}

TEST(Synth, BadSpecAndShapes) {
  SynthSpec s;
  s.frames = 0;
  EXPECT_THROW(synth_sequence(s), Error);
  EXPECT_EQ(parse_shape("two-blob"), SynthShape::TwoBlob);
  EXPECT_EQ(parse_shape("cube"), SynthShape::Cube);
  EXPECT_THROW(parse_shape("torus"), Error);
}

TEST(Frames, CoordsRoundTrip) {
  Frame f;
  f.bit_depth = 6;
  f.points = {{3, 2, 1}, {0, 0, 0}};
  const auto c = to_coords(f);
  EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(as_set(from_coords(c, 6)), as_set(f));
}
