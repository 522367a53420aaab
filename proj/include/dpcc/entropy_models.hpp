#pragma once

#include "dpcc/nn.hpp"
#include "dpcc/range_coder.hpp"
#include "dpcc/slim_conv.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dpcc {

constexpr double kProbFloor = 1.0 / 65536.0;
constexpr double kSigmaMin = 1e-4;
constexpr int32_t kSymbolMin = -(1 << 15);
constexpr int32_t kSymbolMax = (1 << 15) - 1;

// Train-time additive noise u ~ U(-1/2, 1/2), drawn from a seeded generator.
nn::Mat uniform_noise(nn::SplitMix& rng, Eigen::Index rows, Eigen::Index cols);
nn::Var quantize_train(const nn::Var& values, nn::SplitMix& rng);
// Round half away from zero.
double quantize_infer(double v);
nn::Mat quantize_infer(const nn::Mat& values);

double normal_cdf(double x);

// Probability of the unit bin centred on `s` under N(mu, sigma^2), floored at
// 2^-16.
double gaussian_bin_prob(double s, double mu, double sigma);

// Idealized bit count of integer symbols under per-element Gaussians.
double gaussian_bits(const nn::Mat& symbols, const nn::Mat& mu, const nn::Mat& sigma);
// Differentiable version (noisy symbols during training).
nn::Var gaussian_bits(const nn::Var& symbols, const nn::Var& mu, const nn::Var& sigma);

// Coded table for one Gaussian-distributed symbol: a window of unit bins
// around round(mu) plus one escape bin on each side.
struct GaussianTable {
  int32_t centre = 0;
  int32_t half_width = 0;
  Cdf cdf;
};
GaussianTable gaussian_table(double mu, double sigma);

void encode_gaussian(RangeEncoder& enc, int32_t symbol, double mu, double sigma);
int32_t decode_gaussian(RangeDecoder& dec, double mu, double sigma);

// Learned factorized prior: per channel, a monotone CDF given by a mixture of
// logistics. Bin mass is CDF(v + 1/2) - CDF(v - 1/2), floored at 2^-16.
class FactorizedModel {
 public:
  static constexpr int kComponents = 3;
  static constexpr int32_t kSupport = 32;  // coded window [-32, 32] plus escapes

  FactorizedModel() = default;
  // Component means start at (j-1)·spread, scales at `scale`.
  FactorizedModel(std::string name, int channels, uint64_t seed, double spread = 1.5, double scale = 1.0);

  int channels() const { return static_cast<int>(logits_.value.rows()); }
  std::vector<nn::Parameter*> parameters() { return {&logits_, &means_, &log_scales_}; }

  double cdf(int channel, double x) const;
  double bin_prob(int channel, double v) const;

  // Total bits of `values`; column j of `values` uses channel `channel_of[j]`.
  nn::Var bits(const nn::Var& values, std::span<const int> channel_of);
  double bits(const nn::Mat& values, std::span<const int> channel_of) const;

  // Coded tables, rebuilt whenever parameters change.
  void refresh_tables();
  void encode(RangeEncoder& enc, int channel, int32_t symbol) const;
  int32_t decode(RangeDecoder& dec, int channel) const;

 private:
  nn::Parameter logits_;
  nn::Parameter means_;
  nn::Parameter log_scales_;
  std::vector<Cdf> tables_;
};

}  // namespace dpcc
