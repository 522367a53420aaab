#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dpcc {

// Little-endian writer over a growable byte buffer.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u32(uint32_t v);
  void u64(uint64_t v);
  void f64(double v);
  void varint(uint64_t v);
  void bytes(std::span<const uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  // Length-prefixed (varint) section.
  void section(std::span<const uint8_t> b) {
    varint(b.size());
    bytes(b);
  }
  void str(const std::string& s);

  const std::vector<uint8_t>& data() const { return buf_; }
  std::vector<uint8_t> take() { return std::move(buf_); }
  size_t size() const { return buf_.size(); }

 private:
  std::vector<uint8_t> buf_;
};

// Reader that throws CorruptStream on truncation.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t u8();
  uint32_t u32();
  uint64_t u64();
  double f64();
  uint64_t varint();
  std::span<const uint8_t> bytes(size_t n);
  std::span<const uint8_t> section() { return bytes(static_cast<size_t>(varint())); }
  std::string str();

  size_t pos() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const uint8_t> data);

}  // namespace dpcc
