#pragma once

#include "dpcc/codec_model.hpp"
#include "dpcc/io.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace dpcc {

// Balanced binary cross-entropy in bits: mean loss over occupied candidates
// and over empty candidates, averaged. Throws NoCandidates on empty input.
nn::Var balanced_bce(const nn::Var& logits, const std::vector<uint8_t>& labels);

// Mean over scales of balanced_bce.
nn::Var distortion(const std::vector<OccupancyLogits>& scales);

struct FramePair {
  CoordSet current;
  CoordSet reference;  // empty when the pair has no reference frame
};

struct LossBreakdown {
  nn::Var R_m, R_z, R_y, D, L;
  double lambda = 0.0;

  double rm() const { return R_m.value()(0, 0); }
  double rz() const { return R_z.value()(0, 0); }
  double ry() const { return R_y.value()(0, 0); }
  double d() const { return D.value()(0, 0); }
  double l() const { return L.value()(0, 0); }
};

// Rate-distortion loss R_m + R_z + R_y + λ·D of route `route` on one pair, training mode (additive noise).
// Rates are in bits per input point. `intra` forces Θ = 0 and drops R_m.
LossBreakdown rd_loss(CodecModel& model, nn::Tape& tape, const FramePair& pair, int route, double lambda, bool intra,
                      nn::SplitMix& rng);

struct TrainConfig {
  static constexpr int kVersion = 1;

  int pretrain_iters = 400;
  int joint_iters = 600;
  int posttrain_iters = 150;
  double lr = 2e-3;
  // Post-train learning rate; 0 keeps `lr`. Route 0's slice is shared by every
  // route, so a smaller rate limits the drift of the wider routes.
  double posttrain_lr = 0.0;
  uint64_t seed = 0;
  int batch = 1;
  double intra_fraction = 0.2;
  // Post-train: λ_0 ← max(λ_0 · decay, floor) every `lambda0_every` steps.
  double lambda0_decay = 0.7;
  int lambda0_every = 50;
  double lambda0_floor = 1.0;
  bool joint_includes_top = false;

  // Dataset: synthetic two-blob sequences.
  int sequences = 6;
  int frames = 8;
  int points = 4000;
  int depth = 6;
  double max_translation = 1.5;
  double max_rotation_deg = 3.0;

  // Model.
  std::vector<int> widths{8, 16, 24, 32};
  std::vector<double> lambdas{3, 7, 10, 20};
  int hyper_width = 8;

  std::string log_path;  // line-delimited metrics; empty disables

  ModelConfig model_config() const;
};

// key = value lines, '#' comments. Unknown keys throw BadSpec.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::string& path);
std::string format_train_config(const TrainConfig& cfg);

// Training pairs (current, previous) from synthetic sequences; the first
// frame of each sequence forms a pair without reference.
std::vector<FramePair> make_training_pairs(const TrainConfig& cfg, uint64_t seed_offset = 0);
std::vector<SynthSequence> make_sequences(const TrainConfig& cfg, uint64_t seed_offset);

struct TrainRecord {
  int iter = 0;
  int phase = 0;
  int route = 0;
  double lambda = 0.0;
  double R_m = 0.0, R_z = 0.0, R_y = 0.0, D = 0.0, L = 0.0;
};

std::string format_record(const TrainRecord& r);

using TrainObserver = std::function<void(const TrainRecord&)>;

// Supernet pre-training at λ_{K-1}, joint accumulation of L_{K-2} .. L_0
// (plus L_{K-1} with joint_includes_top) with one update per batch, then
// route-0 training with a decreasing λ_0.
void joint_train(CodecModel& model, const TrainConfig& cfg, const std::vector<FramePair>& data,
                 const TrainObserver& observer = {});

}  // namespace dpcc
