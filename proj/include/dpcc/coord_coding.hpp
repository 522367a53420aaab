#pragma once

// Lossless octree coding of a voxel coordinate set. Coordinates are divided
// by the set stride; the result must lie in [0, 2^depth)^3.

#include "dpcc/sparse_tensor.hpp"

#include <cstdint>
#include <vector>

namespace dpcc {

std::vector<uint8_t> code_coords(const CoordSet& c, int depth);
CoordSet decode_coords(std::span<const uint8_t> bytes);

// Occupancy bytes in traversal order (depth first, children 0..7 with child
// index x<<2 | y<<1 | z).
std::vector<uint8_t> occupancy_codes(const CoordSet& c, int depth);

}  // namespace dpcc
