#include "dpcc/coord_coding.hpp"

#include "dpcc/error.hpp"
#include "dpcc/range_coder.hpp"

#include <algorithm>
#include <bit>

namespace dpcc {

namespace {

constexpr int kMaxDepth = 20;

// Adaptive order-0 model over occupancy bytes 1..255.
class OccupancyModel {
 public:
  OccupancyModel() : counts_(255, 1) { rebuild(); }

  const Cdf& cdf() const { return cdf_; }

  void update(uint8_t code) {
    counts_[code - 1] += 24;
    total_ += 24;
    if (total_ > 8192) {
      total_ = 0;
      for (auto& c : counts_) {
        c = (c + 1) / 2;
        total_ += c;
      }
    }
    rebuild();
  }

 private:
  void rebuild() { cdf_ = cdf_from_counts(counts_); }

  std::vector<uint64_t> counts_;
  uint64_t total_ = 255;
  Cdf cdf_;
};

uint64_t morton(const Coord& c, int depth) {
  uint64_t key = 0;
  for (int b = depth - 1; b >= 0; --b) {
    key = (key << 3) | (static_cast<uint64_t>((c.x >> b) & 1) << 2) | (static_cast<uint64_t>((c.y >> b) & 1) << 1) |
          static_cast<uint64_t>((c.z >> b) & 1);
  }
  return key;
}

std::vector<uint64_t> sorted_keys(const CoordSet& c, int depth) {
  if (depth < 0 || depth > kMaxDepth) throw Error(Errc::OutOfRange, "octree depth out of range");
  const int32_t limit = int32_t{1} << depth;
  std::vector<uint64_t> keys;
  keys.reserve(c.size());
  for (const Coord& p : c.coords()) {
    const Coord q{p.x / c.stride(), p.y / c.stride(), p.z / c.stride()};
    if (p.x < 0 || p.y < 0 || p.z < 0 || q.x >= limit || q.y >= limit || q.z >= limit)
      throw Error(Errc::OutOfRange, "coordinate outside the octree cube");
    keys.push_back(morton(q, depth));
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

template <typename Emit>
void traverse(const std::vector<uint64_t>& keys, size_t begin, size_t end, int level, Emit& emit) {
  if (level == 0) return;
  const int shift = 3 * (level - 1);
  size_t bounds[9];
  uint8_t code = 0;
  size_t i = begin;
  for (int child = 0; child < 8; ++child) {
    bounds[child] = i;
    while (i < end && static_cast<int>((keys[i] >> shift) & 7) == child) ++i;
    if (i > bounds[child]) code |= static_cast<uint8_t>(1u << (7 - child));
  }
  bounds[8] = end;
  emit(code);
  for (int child = 0; child < 8; ++child)
    if (bounds[child + 1] > bounds[child]) traverse(keys, bounds[child], bounds[child + 1], level - 1, emit);
}

void decode_node(RangeDecoder& dec, OccupancyModel& model, int level, Coord origin, std::vector<Coord>& out) {
  if (level == 0) {
    out.push_back(origin);
    return;
  }
  const auto code = static_cast<uint8_t>(dec.decode(model.cdf()) + 1);
  model.update(code);
  const int32_t half = int32_t{1} << (level - 1);
  for (int child = 0; child < 8; ++child) {
    if (!(code & (1u << (7 - child)))) continue;
    const Coord o{origin.x + ((child >> 2) & 1) * half, origin.y + ((child >> 1) & 1) * half,
                  origin.z + (child & 1) * half};
    decode_node(dec, model, level - 1, o, out);
  }
}

}  // namespace

std::vector<uint8_t> occupancy_codes(const CoordSet& c, int depth) {
  const auto keys = sorted_keys(c, depth);
  std::vector<uint8_t> codes;
  if (keys.empty()) return codes;
  auto emit = [&](uint8_t code) { codes.push_back(code); };
  traverse(keys, 0, keys.size(), depth, emit);
  return codes;
}

std::vector<uint8_t> code_coords(const CoordSet& c, int depth) {
  const auto codes = occupancy_codes(c, depth);
  std::vector<uint8_t> out;
  out.push_back(static_cast<uint8_t>(depth | (c.empty() ? 0x80 : 0)));
  out.push_back(static_cast<uint8_t>(std::countr_zero(static_cast<unsigned>(c.stride()))));
  if (c.empty()) return out;
  RangeEncoder enc;
  OccupancyModel model;
  for (uint8_t code : codes) {
    enc.encode(code - 1u, model.cdf());
    model.update(code);
  }
  const auto body = enc.finish();
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

CoordSet decode_coords(std::span<const uint8_t> bytes) {
  if (bytes.size() < 2) throw Error(Errc::CorruptStream, "coordinate section shorter than its header");
  const int depth = bytes[0] & 0x7F;
  const bool empty = (bytes[0] & 0x80) != 0;
  const int log_stride = bytes[1];
  if (depth > kMaxDepth || log_stride > 16) throw Error(Errc::CorruptStream, "bad coordinate section header");
  const int stride = 1 << log_stride;
  if (empty) return CoordSet::from_coords({}, stride);
  RangeDecoder dec(bytes.subspan(2));
  OccupancyModel model;
  std::vector<Coord> out;
  decode_node(dec, model, depth, Coord{0, 0, 0}, out);
  for (auto& p : out) p = p * stride;
  return CoordSet::from_coords(std::move(out), stride);
}

}  // namespace dpcc
