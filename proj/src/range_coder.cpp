#include "dpcc/range_coder.hpp"

#include "dpcc/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dpcc {

namespace {
constexpr uint32_t kTop = 1u << 24;

inline uint32_t split(uint32_t range, uint32_t cum) {
  return static_cast<uint32_t>((static_cast<uint64_t>(range) * cum) >> kCdfPrecision);
}
}  // namespace

void validate_cdf(std::span<const uint32_t> cdf) {
  if (cdf.size() < 2) throw Error(Errc::CdfMismatch, "table needs at least one symbol");
  if (cdf.front() != 0 || cdf.back() != kCdfTotal)
    throw Error(Errc::CdfMismatch, "table must span [0, 2^16]");
  for (size_t i = 1; i < cdf.size(); ++i)
    if (cdf[i] <= cdf[i - 1]) throw Error(Errc::CdfMismatch, "table not strictly increasing at " + std::to_string(i));
}

Cdf cdf_from_counts(std::span<const uint64_t> counts) {
  const uint64_t n = counts.size();
  if (n == 0 || n > kCdfTotal) throw Error(Errc::CdfMismatch, "alphabet size out of range");
  uint64_t total = 0;
  for (auto c : counts) total += c;
  std::vector<uint64_t> freq(n, 1);
  uint64_t used = n;
  if (total > 0) {
    const uint64_t spare = kCdfTotal - n;
    for (size_t i = 0; i < n; ++i) {
      const uint64_t extra = static_cast<uint64_t>((static_cast<unsigned __int128>(counts[i]) * spare) / total);
      freq[i] += extra;
      used += extra;
    }
  }
  const size_t biggest = static_cast<size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  freq[biggest] += kCdfTotal - used;
  Cdf cdf(n + 1, 0);
  for (size_t i = 0; i < n; ++i) cdf[i + 1] = cdf[i] + static_cast<uint32_t>(freq[i]);
  return cdf;
}

Cdf cdf_from_pmf(std::span<const double> pmf) {
  std::vector<uint64_t> counts(pmf.size());
  for (size_t i = 0; i < pmf.size(); ++i) {
    const double p = std::isfinite(pmf[i]) ? std::clamp(pmf[i], 0.0, 1.0) : 0.0;
    counts[i] = static_cast<uint64_t>(std::floor(p * 1073741824.0));
  }
  return cdf_from_counts(counts);
}

double cdf_bits(std::span<const uint32_t> cdf, uint32_t symbol) {
  return -std::log2(static_cast<double>(cdf[symbol + 1] - cdf[symbol]) / kCdfTotal);
}

void RangeEncoder::encode_range(uint32_t lo, uint32_t hi) {
  const uint32_t lo_off = split(range_, lo);
  const uint32_t hi_off = split(range_, hi);
  low_ += lo_off;
  range_ = hi_off - lo_off;
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::shift_low() {
  if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<uint8_t>(low_ >> 32);
    uint8_t temp = cache_;
    do {
      // The leading byte is always zero; the decoder assumes it.
      if (!first_) out_.push_back(static_cast<uint8_t>(temp + carry));
      first_ = false;
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

void RangeEncoder::encode(uint32_t symbol, std::span<const uint32_t> cdf) {
  validate_cdf(cdf);
  if (symbol + 1 >= cdf.size()) throw Error(Errc::CdfMismatch, "symbol outside alphabet");
  encode_range(cdf[symbol], cdf[symbol + 1]);
}

void RangeEncoder::encode_bits(uint32_t value, int nbits) {
  if (nbits < 1 || nbits > 16) throw Error(Errc::CdfMismatch, "bypass width must be 1..16");
  value &= (1u << nbits) - 1;
  const int shift = kCdfPrecision - nbits;
  encode_range(value << shift, (value + 1) << shift);
}

void RangeEncoder::encode_gamma(uint32_t v) {
  if (v == 0) throw Error(Errc::OutOfRange, "gamma code needs v >= 1");
  int nbits = 0;
  while ((v >> nbits) > 1) ++nbits;
  // nbits zeros, then the nbits+1 significant bits.
  for (int i = 0; i < nbits; ++i) encode_bits(0, 1);
  for (int i = nbits; i >= 0; --i) encode_bits((v >> i) & 1u, 1);
}

std::vector<uint8_t> RangeEncoder::finish() {
  // Pick the value in [low, low + range) with the most trailing zero bits so
  // the flushed tail trims to as few bytes as possible.
  for (int b = 32; b > 0; --b) {
    const uint64_t mask = (uint64_t{1} << b) - 1;
    const uint64_t v = (low_ + mask) & ~mask;
    if (v <= low_ + range_ - 1) {
      low_ = v;
      break;
    }
  }
  for (int i = 0; i < 5; ++i) shift_low();
  // Trailing zero bytes are implied by the decoder.
  while (!out_.empty() && out_.back() == 0) out_.pop_back();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> data) : data_(data) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

uint8_t RangeDecoder::next_byte() {
  // Bytes past the end are the zeros trimmed by the encoder.
  if (pos_ < data_.size()) return data_[pos_++];
  return 0;
}

void RangeDecoder::consume(uint32_t lo, uint32_t hi) {
  const uint32_t lo_off = split(range_, lo);
  const uint32_t hi_off = split(range_, hi);
  code_ -= lo_off;
  range_ = hi_off - lo_off;
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

uint32_t RangeDecoder::decode(std::span<const uint32_t> cdf) {
  validate_cdf(cdf);
  if (code_ >= range_) throw Error(Errc::CorruptStream, "code value outside current range");
  // Largest s with split(range, cdf[s]) <= code.
  size_t lo = 0, hi = cdf.size() - 1;
  while (hi - lo > 1) {
    const size_t mid = (lo + hi) / 2;
    if (split(range_, cdf[mid]) <= code_)
      lo = mid;
    else
      hi = mid;
  }
  consume(cdf[lo], cdf[lo + 1]);
  return static_cast<uint32_t>(lo);
}

uint32_t RangeDecoder::decode_bits(int nbits) {
  if (nbits < 1 || nbits > 16) throw Error(Errc::CdfMismatch, "bypass width must be 1..16");
  if (code_ >= range_) throw Error(Errc::CorruptStream, "code value outside current range");
  const int shift = kCdfPrecision - nbits;
  uint32_t lo = 0, hi = 1u << nbits;
  while (hi - lo > 1) {
    const uint32_t mid = (lo + hi) / 2;
    if (split(range_, mid << shift) <= code_)
      lo = mid;
    else
      hi = mid;
  }
  consume(lo << shift, (lo + 1) << shift);
  return lo;
}

uint32_t RangeDecoder::decode_gamma() {
  int nbits = 0;
  while (decode_bits(1) == 0) {
    if (++nbits > 31) throw Error(Errc::CorruptStream, "gamma prefix too long");
  }
  uint32_t v = 1;
  for (int i = 0; i < nbits; ++i) v = (v << 1) | decode_bits(1);
  return v;
}

std::vector<uint8_t> range_encode(std::span<const uint32_t> symbols, const CdfProvider& provider) {
  RangeEncoder enc;
  Cdf cdf;
  for (size_t i = 0; i < symbols.size(); ++i) {
    provider(i, cdf);
    enc.encode(symbols[i], cdf);
  }
  return enc.finish();
}

std::vector<uint32_t> range_decode(std::span<const uint8_t> bytes, size_t count, const CdfProvider& provider) {
  RangeDecoder dec(bytes);
  std::vector<uint32_t> out(count);
  Cdf cdf;
  for (size_t i = 0; i < count; ++i) {
    provider(i, cdf);
    out[i] = dec.decode(cdf);
  }
  return out;
}

}  // namespace dpcc
