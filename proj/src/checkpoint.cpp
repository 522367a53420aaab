#include "dpcc/checkpoint.hpp"

#include "dpcc/bytes.hpp"
#include "dpcc/error.hpp"

namespace dpcc::nn {

namespace {
constexpr uint8_t kMagic[4] = {'D', 'P', 'C', 'K'};
}

std::vector<uint8_t> serialize_checkpoint(const Checkpoint& ck) {
  if (ck.lambdas.size() != ck.route_widths.size())
    throw Error(Errc::BadCheckpoint, "lambda list and width table differ in length");
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(Checkpoint::kVersion);
  w.u32(static_cast<uint32_t>(ck.route_widths.size()));
  for (int width : ck.route_widths) w.u32(static_cast<uint32_t>(width));
  for (double l : ck.lambdas) w.f64(l);
  w.u32(static_cast<uint32_t>(ck.tensors.size()));
  for (const auto& [name, m] : ck.tensors) {
    w.str(name);
    w.u32(static_cast<uint32_t>(m.rows()));
    w.u32(static_cast<uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) w.f64(m.data()[i]);
  }
  return w.take();
}

Checkpoint parse_checkpoint(std::span<const uint8_t> bytes) {
  try {
    ByteReader r(bytes);
    auto magic = r.bytes(4);
    if (!std::equal(magic.begin(), magic.end(), kMagic)) throw Error(Errc::BadCheckpoint, "bad magic");
    const uint32_t version = r.u32();
    if (version != Checkpoint::kVersion)
      throw Error(Errc::BadCheckpoint, "unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    const uint32_t k = r.u32();
    if (k > 64) throw Error(Errc::BadCheckpoint, "implausible route count");
    for (uint32_t i = 0; i < k; ++i) ck.route_widths.push_back(static_cast<int>(r.u32()));
    for (uint32_t i = 0; i < k; ++i) ck.lambdas.push_back(r.f64());
    const uint32_t count = r.u32();
    for (uint32_t t = 0; t < count; ++t) {
      std::string name = r.str();
      const uint32_t rows = r.u32();
      const uint32_t cols = r.u32();
      if (static_cast<uint64_t>(rows) * cols * 8 > bytes.size()) throw Error(Errc::BadCheckpoint, name + " too large");
      Mat m(rows, cols);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
      ck.tensors.emplace(std::move(name), std::move(m));
    }
    if (!r.done()) throw Error(Errc::BadCheckpoint, "trailing bytes");
    return ck;
  } catch (const Error& e) {
    if (e.code() == Errc::CorruptStream) throw Error(Errc::BadCheckpoint, e.what());
    throw;
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) { write_file(path, serialize_checkpoint(ck)); }

Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(read_file(path)); }

}  // namespace dpcc::nn
