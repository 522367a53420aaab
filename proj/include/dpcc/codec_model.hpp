#pragma once

// Slimmable analysis/synthesis transforms, hyperprior and entropy-parameter
// network. Route k uses channel width widths[k] in every hidden layer and for
// the latent.

#include "dpcc/checkpoint.hpp"
#include "dpcc/entropy_models.hpp"
#include "dpcc/inter_prediction.hpp"
#include "dpcc/slim_conv.hpp"

#include <string>
#include <utility>
#include <vector>

namespace dpcc {

struct ModelConfig {
  std::vector<int> widths{8, 16, 24, 32};
  std::vector<double> lambdas{3, 7, 10, 20};
  int hyper_width = 8;
  uint64_t seed = 0;

  int routes() const { return static_cast<int>(widths.size()); }
  // Throws BadSpec on inconsistent tables.
  void validate() const;
};

// Occupied voxel counts at stride 2 and stride 1, sent in each frame header.
struct ScaleCounts {
  uint32_t s2 = 0;
  uint32_t s1 = 0;
};
ScaleCounts scale_counts(const CoordSet& x);

struct GaussianParams {
  nn::Mat mu;
  nn::Mat sigma;
};

// Occupancy logits of one upsampling stage with ground-truth labels.
struct OccupancyLogits {
  CoordSetPtr candidates;
  nn::Var logits;
  std::vector<uint8_t> labels;
};

// Top-`count` rows by logit, ties to the earlier row; returned in row order.
std::vector<int> top_k_rows(const nn::Mat& logits, size_t count);

class CodecModel {
 public:
  explicit CodecModel(ModelConfig cfg = {});

  const ModelConfig& config() const { return cfg_; }
  int routes() const { return cfg_.routes(); }
  int latent_width(int route) const;
  void check_route(int route) const;

  // Differentiable building blocks.
  nn::SparseVar analysis(const nn::SparseVar& x, int route);
  // Decoder pruned to the ground-truth sets (training).
  std::vector<OccupancyLogits> synthesis_train(const nn::SparseVar& y, int route, const CoordSet& gt_s2,
                                               const CoordSet& gt_s1);
  // Decoder pruned by top-k on logits (inference).
  CoordSetPtr synthesis_infer(const nn::SparseVar& y, int route, ScaleCounts counts);
  nn::SparseVar hyper_analysis(const nn::SparseVar& y, int route);
  nn::SparseVar hyper_synthesis(const nn::SparseVar& z, const CoordSetPtr& latent_coords, int route);
  // (mu, sigma) on the rows of Φ; Θ is gathered onto Φ's coordinates.
  std::pair<nn::Var, nn::Var> entropy_parameters(const nn::SparseVar& theta, const nn::SparseVar& phi, int route);

  // Tensor-level operations.
  SparseTensor encode_route(const SparseTensor& x, int route);
  SparseTensor decode_route(const SparseTensor& y, int route, ScaleCounts counts);
  SparseTensor hyper_encode(const SparseTensor& y, int route);
  SparseTensor hyper_decode(const SparseTensor& z, const CoordSetPtr& latent_coords, int route);
  GaussianParams entropy_params(const SparseTensor& theta, const SparseTensor& phi, int route);

  std::vector<nn::SlimConv*> layers();
  std::vector<nn::Parameter*> parameters();
  void zero_grad();
  // Rebuild coded tables of the factorized models after a parameter update.
  void refresh_tables();

  nn::Checkpoint to_checkpoint();
  static CodecModel from_checkpoint(const nn::Checkpoint& ck);
  void save(const std::string& path);
  static CodecModel load(const std::string& path);

  // Encoder.
  nn::SlimConv enc1, enc2, enc3, enc4;
  // Decoder.
  nn::SlimConv dec1, dec2, head1, dec3, dec4, head2;
  // Hyperprior.
  nn::SlimConv ha1, ha2, hs1, hs2;
  // Entropy parameters g_ep.
  nn::SlimConv ep1, ep2, ep_mu, ep_sigma;
  // Pointwise path from Θ to the mean; starts as the identity so the
  // temporal prediction is used from the first step.
  nn::SlimConv ep_theta;

  InterPredictor inter;
  // Per-route factorized priors for ẑ and the motion symbols.
  std::vector<FactorizedModel> z_models;
  std::vector<FactorizedModel> m_models;
  // Rate estimator base coefficients: rows 0..K-1 intra, K..2K-1 inter;
  // columns (bias, N, coarse count, IoU). Empty until calibrated.
  nn::Mat rate_coeffs;

 private:
  ModelConfig cfg_;
};

}  // namespace dpcc
