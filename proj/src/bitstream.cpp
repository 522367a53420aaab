#include "dpcc/bitstream.hpp"

#include "dpcc/bytes.hpp"
#include "dpcc/error.hpp"

#include <cstring>

namespace dpcc {

namespace {
constexpr char kMagic[4] = {'V', 'X', 'F', 'L'};
}

size_t FramePayload::byte_size() const { return serialize_frame(*this).size(); }

std::vector<uint8_t> serialize_header(const StreamHeader& h) {
  ByteWriter w;
  w.bytes({reinterpret_cast<const uint8_t*>(kMagic), 4});
  w.u8(h.version);
  w.u8(h.bit_depth);
  w.varint(h.gof_size);
  w.varint(h.frame_count);
  return w.take();
}

std::vector<uint8_t> serialize_frame(const FramePayload& f) {
  if (f.route < 0 || f.route > 127) throw Error(Errc::UnknownRoute, "route id does not fit the frame header");
  ByteWriter w;
  w.u8(static_cast<uint8_t>(static_cast<uint8_t>(f.type) | (f.route << 1)));
  w.varint(f.count_s2);
  w.varint(f.count_s1);
  w.section(f.coords);
  if (f.type == FrameType::P) w.section(f.motion);
  w.section(f.hyper);
  w.section(f.latent);
  return w.take();
}

std::vector<uint8_t> serialize_bitstream(const Bitstream& b) {
  StreamHeader h = b.header;
  h.frame_count = static_cast<uint32_t>(b.frames.size());
  auto out = serialize_header(h);
  for (const auto& f : b.frames) {
    const auto bytes = serialize_frame(f);
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

Bitstream parse_bitstream(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  Bitstream b;
  const auto magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw Error(Errc::CorruptStream, "bad magic");
  b.header.version = r.u8();
  if (b.header.version != StreamHeader::kVersion) throw Error(Errc::CorruptStream, "unsupported stream version");
  b.header.bit_depth = r.u8();
  b.header.gof_size = static_cast<uint32_t>(r.varint());
  b.header.frame_count = static_cast<uint32_t>(r.varint());
  auto copy = [](std::span<const uint8_t> s) { return std::vector<uint8_t>(s.begin(), s.end()); };
  for (uint32_t i = 0; i < b.header.frame_count; ++i) {
    FramePayload f;
    const uint8_t tag = r.u8();
    f.type = static_cast<FrameType>(tag & 1);
    f.route = tag >> 1;
    f.count_s2 = static_cast<uint32_t>(r.varint());
    f.count_s1 = static_cast<uint32_t>(r.varint());
    f.coords = copy(r.section());
    if (f.type == FrameType::P) f.motion = copy(r.section());
    f.hyper = copy(r.section());
    f.latent = copy(r.section());
    b.frames.push_back(std::move(f));
  }
  if (!r.done()) throw Error(Errc::CorruptStream, "trailing bytes after the last frame");
  return b;
}

}  // namespace dpcc
