#pragma once

// Byte-oriented range coder with carry propagation and 16-bit cumulative
// frequency tables. Interval splits use the exact product range*cdf >> 16
// (rather than (range >> 16) * cdf), so the coding loss per symbol is bounded
// by 2^-24 of the range.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace dpcc {

constexpr int kCdfPrecision = 16;
constexpr uint32_t kCdfTotal = 1u << kCdfPrecision;

// n+1 cumulative counts: cdf[0] = 0, cdf[n] = kCdfTotal, strictly increasing.
using Cdf = std::vector<uint32_t>;

// Throws CdfMismatch unless `cdf` is a valid table.
void validate_cdf(std::span<const uint32_t> cdf);

// Valid table from non-negative counts; every symbol gets at least one unit of
// kCdfTotal. Integer-only, so encoder and decoder agree bit-for-bit.
Cdf cdf_from_counts(std::span<const uint64_t> counts);
// Valid table from probabilities (quantized to 2^-30, then cdf_from_counts).
Cdf cdf_from_pmf(std::span<const double> pmf);

// -log2 of the coded probability of `symbol` under `cdf`.
double cdf_bits(std::span<const uint32_t> cdf, uint32_t symbol);

class RangeEncoder {
 public:
  void encode(uint32_t symbol, std::span<const uint32_t> cdf);
  // Equiprobable bits, up to 16 per call.
  void encode_bits(uint32_t value, int nbits);
  // Elias-gamma code of v >= 1 through equiprobable bits.
  void encode_gamma(uint32_t v);
  std::vector<uint8_t> finish();

 private:
  void encode_range(uint32_t lo, uint32_t hi);
  void shift_low();

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  bool first_ = true;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const uint8_t> data);

  uint32_t decode(std::span<const uint32_t> cdf);
  uint32_t decode_bits(int nbits);
  uint32_t decode_gamma();

 private:
  uint8_t next_byte();
  void consume(uint32_t lo, uint32_t hi);

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
};

// Fills the table for symbol position i.
using CdfProvider = std::function<void(size_t position, Cdf& cdf)>;

std::vector<uint8_t> range_encode(std::span<const uint32_t> symbols, const CdfProvider& provider);
std::vector<uint32_t> range_decode(std::span<const uint8_t> bytes, size_t count, const CdfProvider& provider);

}  // namespace dpcc
