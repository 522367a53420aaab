#include "dpcc/entropy_models.hpp"

#include "dpcc/error.hpp"

#include <algorithm>
#include <cmath>

namespace dpcc {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kLn2 = 0.69314718055994530942;

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

// Φ(u) - Φ(l) for u > l, evaluated on the tail that avoids cancellation.
double normal_interval(double l, double u) {
  if (l >= 0.0) return 0.5 * (std::erfc(l * kInvSqrt2) - std::erfc(u * kInvSqrt2));
  if (u <= 0.0) return 0.5 * (std::erfc(-u * kInvSqrt2) - std::erfc(-l * kInvSqrt2));
  return 1.0 - 0.5 * std::erfc(u * kInvSqrt2) - 0.5 * std::erfc(-l * kInvSqrt2);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// sigmoid(u) - sigmoid(l) for u > l without cancellation in the upper tail.
double sigmoid_interval(double l, double u) {
  if (l > 0.0) return sigmoid(-l) - sigmoid(-u);
  return sigmoid(u) - sigmoid(l);
}

double dsigmoid(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}

int32_t clamp_symbol(double v) {
  return static_cast<int32_t>(std::clamp(v, static_cast<double>(kSymbolMin), static_cast<double>(kSymbolMax)));
}

}  // namespace

nn::Mat uniform_noise(nn::SplitMix& rng, Eigen::Index rows, Eigen::Index cols) {
  nn::Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() - 0.5;
  return m;
}

nn::Var quantize_train(const nn::Var& values, nn::SplitMix& rng) {
  return nn::add_const(values, uniform_noise(rng, values.rows(), values.cols()));
}

double quantize_infer(double v) { return std::round(v); }

nn::Mat quantize_infer(const nn::Mat& values) {
  return values.unaryExpr([](double v) { return static_cast<double>(clamp_symbol(std::round(v))); });
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double gaussian_bin_prob(double s, double mu, double sigma) {
  sigma = std::max(sigma, kSigmaMin);
  const double d = s - mu;
  return std::max(kProbFloor, normal_interval((d - 0.5) / sigma, (d + 0.5) / sigma));
}

double gaussian_bits(const nn::Mat& symbols, const nn::Mat& mu, const nn::Mat& sigma) {
  if (symbols.rows() != mu.rows() || symbols.cols() != mu.cols() || sigma.rows() != mu.rows() ||
      sigma.cols() != mu.cols())
    throw Error(Errc::ShapeMismatch, "gaussian_bits operands differ in shape");
  double bits = 0.0;
  for (Eigen::Index i = 0; i < symbols.size(); ++i)
    bits -= std::log2(gaussian_bin_prob(symbols.data()[i], mu.data()[i], sigma.data()[i]));
  return bits;
}

nn::Var gaussian_bits(const nn::Var& symbols, const nn::Var& mu, const nn::Var& sigma) {
  const nn::Mat& s = symbols.value();
  const nn::Mat& m = mu.value();
  const nn::Mat& sg = sigma.value();
  nn::Mat out(1, 1);
  out(0, 0) = gaussian_bits(s, m, sg);
  const int is = symbols.id(), im = mu.id(), isg = sigma.id();
  const bool rg = symbols.requires_grad() || mu.requires_grad() || sigma.requires_grad();
  return symbols.tape()->record(std::move(out), rg, [is, im, isg](nn::Tape& t, const nn::Mat& g) {
    const nn::Mat& s = t.value(is);
    const nn::Mat& m = t.value(im);
    const nn::Mat& sg = t.value(isg);
    nn::Mat ds = nn::Mat::Zero(s.rows(), s.cols());
    nn::Mat dsg = nn::Mat::Zero(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const double sigma = std::max(sg.data()[i], kSigmaMin);
      const double d = s.data()[i] - m.data()[i];
      const double u = (d + 0.5) / sigma, l = (d - 0.5) / sigma;
      const double p = normal_interval(l, u);
      if (p <= kProbFloor) continue;
      const double dbits_dp = -1.0 / (p * kLn2);
      const double pu = normal_pdf(u), pl = normal_pdf(l);
      ds.data()[i] = g(0, 0) * dbits_dp * (pu - pl) / sigma;
      if (sg.data()[i] > kSigmaMin) dsg.data()[i] = g(0, 0) * dbits_dp * -(u * pu - l * pl) / sigma;
    }
    t.accumulate(is, ds);
    t.accumulate(im, -ds);
    t.accumulate(isg, dsg);
  });
}

GaussianTable gaussian_table(double mu, double sigma) {
  sigma = std::max(sigma, kSigmaMin);
  GaussianTable tab;
  tab.centre = clamp_symbol(std::round(mu));
  tab.half_width = static_cast<int32_t>(std::clamp(std::ceil(6.0 * sigma) + 1.0, 1.0, 64.0));
  const int32_t lo = tab.centre - tab.half_width, hi = tab.centre + tab.half_width;
  std::vector<double> pmf;
  pmf.reserve(static_cast<size_t>(hi - lo + 3));
  pmf.push_back(normal_cdf((lo - 0.5 - mu) / sigma));
  for (int32_t v = lo; v <= hi; ++v) pmf.push_back(normal_interval((v - 0.5 - mu) / sigma, (v + 0.5 - mu) / sigma));
  pmf.push_back(normal_cdf(-(hi + 0.5 - mu) / sigma));
  tab.cdf = cdf_from_pmf(pmf);
  return tab;
}

void encode_gaussian(RangeEncoder& enc, int32_t symbol, double mu, double sigma) {
  const auto tab = gaussian_table(mu, sigma);
  const int32_t lo = tab.centre - tab.half_width, hi = tab.centre + tab.half_width;
  const auto last = static_cast<uint32_t>(tab.cdf.size() - 2);
  if (symbol < lo) {
    enc.encode(0, tab.cdf);
    enc.encode_gamma(static_cast<uint32_t>(lo - symbol));
  } else if (symbol > hi) {
    enc.encode(last, tab.cdf);
    enc.encode_gamma(static_cast<uint32_t>(symbol - hi));
  } else {
    enc.encode(static_cast<uint32_t>(symbol - lo + 1), tab.cdf);
  }
}

int32_t decode_gaussian(RangeDecoder& dec, double mu, double sigma) {
  const auto tab = gaussian_table(mu, sigma);
  const int32_t lo = tab.centre - tab.half_width;
  const auto last = static_cast<uint32_t>(tab.cdf.size() - 2);
  const uint32_t bin = dec.decode(tab.cdf);
  if (bin == 0) return lo - static_cast<int32_t>(dec.decode_gamma());
  if (bin == last) return tab.centre + tab.half_width + static_cast<int32_t>(dec.decode_gamma());
  return lo + static_cast<int32_t>(bin) - 1;
}

FactorizedModel::FactorizedModel(std::string name, int channels, uint64_t seed, double spread, double scale) {
  nn::SplitMix rng(seed);
  nn::Mat logits = nn::Mat::Zero(channels, kComponents);
  nn::Mat means(channels, kComponents);
  nn::Mat scales = nn::Mat::Constant(channels, kComponents, std::log(scale));
  for (int c = 0; c < channels; ++c)
    for (int j = 0; j < kComponents; ++j) means(c, j) = (j - 1) * spread + rng.uniform(-0.1, 0.1) * spread;
  logits_ = nn::Parameter(name + ".logits", logits);
  means_ = nn::Parameter(name + ".means", means);
  log_scales_ = nn::Parameter(name + ".log_scales", scales);
  refresh_tables();
}

double FactorizedModel::cdf(int channel, double x) const {
  const auto w = logits_.value.row(channel);
  const double mx = w.maxCoeff();
  double norm = 0.0, acc = 0.0;
  for (int j = 0; j < kComponents; ++j) {
    const double a = std::exp(w(j) - mx);
    norm += a;
    acc += a * sigmoid((x - means_.value(channel, j)) * std::exp(-log_scales_.value(channel, j)));
  }
  return acc / norm;
}

double FactorizedModel::bin_prob(int channel, double v) const {
  const auto w = logits_.value.row(channel);
  const double mx = w.maxCoeff();
  double norm = 0.0, acc = 0.0;
  for (int j = 0; j < kComponents; ++j) {
    const double a = std::exp(w(j) - mx);
    const double inv = std::exp(-log_scales_.value(channel, j));
    const double m = means_.value(channel, j);
    norm += a;
    acc += a * sigmoid_interval((v - 0.5 - m) * inv, (v + 0.5 - m) * inv);
  }
  return std::max(kProbFloor, acc / norm);
}

double FactorizedModel::bits(const nn::Mat& values, std::span<const int> channel_of) const {
  if (static_cast<Eigen::Index>(channel_of.size()) != values.cols())
    throw Error(Errc::ShapeMismatch, "channel map width differs from values");
  double bits = 0.0;
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (Eigen::Index c = 0; c < values.cols(); ++c) bits -= std::log2(bin_prob(channel_of[c], values(r, c)));
  return bits;
}

nn::Var FactorizedModel::bits(const nn::Var& values, std::span<const int> channel_of) {
  nn::Mat out(1, 1);
  out(0, 0) = bits(values.value(), channel_of);
  const int iv = values.id();
  std::vector<int> chan(channel_of.begin(), channel_of.end());
  return values.tape()->record(std::move(out), true, [this, iv, chan](nn::Tape& t, const nn::Mat& g) {
    const nn::Mat& v = t.value(iv);
    nn::Mat dv = nn::Mat::Zero(v.rows(), v.cols());
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      for (Eigen::Index col = 0; col < v.cols(); ++col) {
        const int c = chan[col];
        const auto w = logits_.value.row(c);
        const double mx = w.maxCoeff();
        double a[kComponents], d[kComponents], norm = 0.0, p = 0.0;
        for (int j = 0; j < kComponents; ++j) {
          a[j] = std::exp(w(j) - mx);
          norm += a[j];
        }
        for (int j = 0; j < kComponents; ++j) {
          a[j] /= norm;
          const double inv = std::exp(-log_scales_.value(c, j));
          const double m = means_.value(c, j);
          d[j] = sigmoid_interval((v(r, col) - 0.5 - m) * inv, (v(r, col) + 0.5 - m) * inv);
          p += a[j] * d[j];
        }
        if (p <= kProbFloor) continue;
        const double gb = g(0, 0) * -1.0 / (p * kLn2);
        for (int j = 0; j < kComponents; ++j) {
          const double inv = std::exp(-log_scales_.value(c, j));
          const double m = means_.value(c, j);
          const double tu = (v(r, col) + 0.5 - m) * inv, tl = (v(r, col) - 0.5 - m) * inv;
          const double su = dsigmoid(tu), sl = dsigmoid(tl);
          dv(r, col) += gb * a[j] * (su - sl) * inv;
          means_.grad(c, j) -= gb * a[j] * (su - sl) * inv;
          log_scales_.grad(c, j) -= gb * a[j] * (su * tu - sl * tl);
          logits_.grad(c, j) += gb * a[j] * (d[j] - p);
        }
      }
    }
    t.accumulate(iv, dv);
  });
}

void FactorizedModel::refresh_tables() {
  tables_.clear();
  for (int c = 0; c < channels(); ++c) {
    std::vector<double> pmf;
    pmf.push_back(cdf(c, -kSupport - 0.5));
    for (int32_t v = -kSupport; v <= kSupport; ++v) pmf.push_back(bin_prob(c, v));
    pmf.push_back(1.0 - cdf(c, kSupport + 0.5));
    tables_.push_back(cdf_from_pmf(pmf));
  }
}

void FactorizedModel::encode(RangeEncoder& enc, int channel, int32_t symbol) const {
  const Cdf& cdf = tables_.at(static_cast<size_t>(channel));
  const auto last = static_cast<uint32_t>(cdf.size() - 2);
  if (symbol < -kSupport) {
    enc.encode(0, cdf);
    enc.encode_gamma(static_cast<uint32_t>(-kSupport - symbol));
  } else if (symbol > kSupport) {
    enc.encode(last, cdf);
    enc.encode_gamma(static_cast<uint32_t>(symbol - kSupport));
  } else {
    enc.encode(static_cast<uint32_t>(symbol + kSupport + 1), cdf);
  }
}

int32_t FactorizedModel::decode(RangeDecoder& dec, int channel) const {
  const Cdf& cdf = tables_.at(static_cast<size_t>(channel));
  const auto last = static_cast<uint32_t>(cdf.size() - 2);
  const uint32_t bin = dec.decode(cdf);
  if (bin == 0) return -kSupport - static_cast<int32_t>(dec.decode_gamma());
  if (bin == last) return kSupport + static_cast<int32_t>(dec.decode_gamma());
  return static_cast<int32_t>(bin) - kSupport - 1;
}

}  // namespace dpcc
