#pragma once

#include "dpcc/sparse_tensor.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace dpcc {

using Point3 = std::array<double, 3>;

struct Frame {
  std::vector<Point3> points;
  int bit_depth = 0;  // 0 for raw (unquantized) coordinates
  int sequence_id = 0;
  int index = 0;
};

enum class PlyFormat { Ascii, BinaryLittleEndian };

// Reads x, y, z of the vertex element; other properties and elements are
// ignored.
Frame read_ply(const std::string& path);
Frame parse_ply(const std::string& text_or_bytes);
// Integer-valued frames (bit_depth > 0) are written with int properties,
// others with double.
void write_ply(const Frame& frame, const std::string& path, PlyFormat format = PlyFormat::BinaryLittleEndian);
std::string format_ply(const Frame& frame, PlyFormat format);

// Quantizes to [0, 2^depth)^3 and removes duplicates. Frames of known
// precision b are rescaled by 2^(depth - b); raw frames are fitted to the cube
// by their bounding box.
Frame voxelize(const Frame& frame, int depth);
// Raw frames share one bounding-box fit so motion survives quantization.
std::vector<Frame> voxelize_sequence(const std::vector<Frame>& frames, int depth);

CoordSet to_coords(const Frame& voxelized);
Frame from_coords(const CoordSet& c, int bit_depth);

enum class SynthShape { Sphere, Cube, TwoBlob };

struct SynthSpec {
  SynthShape shape = SynthShape::TwoBlob;
  int points = 4000;  // surface samples per frame before voxelization
  int frames = 8;
  Point3 translation{0, 0, 0};  // voxels per frame
  double rotation_deg = 0.0;    // degrees per frame about the z axis through the cube centre
  int depth = 6;
  uint64_t seed = 0;
};

struct SynthSequence {
  std::vector<Frame> frames;
  // Per-frame rigid motion applied from frame t-1 to t (frame 0 has none).
  std::vector<Point3> translations;
  std::vector<double> rotations_deg;
};

SynthShape parse_shape(const std::string& name);
SynthSequence synth_sequence(const SynthSpec& spec);

}  // namespace dpcc
