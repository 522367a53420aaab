#pragma once

#include "dpcc/nn.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dpcc::nn {

// Named tensors plus the route width table.
//
// Layout (little-endian): "DPCK", u32 version, u32 K, K x u32 route widths,
// K x f64 lambdas, u32 tensor count, then per tensor: varint name length,
// name bytes, u32 rows, u32 cols, rows*cols f64 in row-major order.
struct Checkpoint {
  static constexpr uint32_t kVersion = 1;

  std::vector<int> route_widths;
  std::vector<double> lambdas;
  std::map<std::string, Mat> tensors;
};

std::vector<uint8_t> serialize_checkpoint(const Checkpoint& ck);
Checkpoint parse_checkpoint(std::span<const uint8_t> bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dpcc::nn
