#pragma once

// Container format:
//   "VXFL" u8 version u8 bit_depth varint gof_size varint frame_count
//   per frame: u8 (type | route << 1) varint count_s2 varint count_s1
//              section coords, [section motion if P], section hyper, section latent
// Sections are varint length prefixed.

#include <cstdint>
#include <span>
#include <vector>

namespace dpcc {

enum class FrameType : uint8_t { I = 0, P = 1 };

struct StreamHeader {
  static constexpr uint8_t kVersion = 1;
  uint8_t version = kVersion;
  uint8_t bit_depth = 0;
  uint32_t gof_size = 0;
  uint32_t frame_count = 0;
};

struct FramePayload {
  FrameType type = FrameType::I;
  int route = 0;
  uint32_t count_s2 = 0;  // occupied voxels at stride 2
  uint32_t count_s1 = 0;  // occupied voxels at stride 1
  std::vector<uint8_t> coords;
  std::vector<uint8_t> motion;
  std::vector<uint8_t> hyper;
  std::vector<uint8_t> latent;

  // Serialized size, including the frame header and length prefixes.
  size_t byte_size() const;
};

struct Bitstream {
  StreamHeader header;
  std::vector<FramePayload> frames;
};

std::vector<uint8_t> serialize_header(const StreamHeader& h);
std::vector<uint8_t> serialize_frame(const FramePayload& f);
std::vector<uint8_t> serialize_bitstream(const Bitstream& b);
Bitstream parse_bitstream(std::span<const uint8_t> bytes);

}  // namespace dpcc
