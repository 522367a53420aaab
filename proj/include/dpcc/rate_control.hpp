#pragma once

// Frame-level rate control: per-route rate estimation, sliding-window
// target allocation and route selection.

#include "dpcc/bitstream.hpp"
#include "dpcc/sparse_tensor.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace dpcc {

struct FrameStats {
  double points = 0.0;
  double coarse = 0.0;  // occupied voxels at stride 4
  double iou = 0.0;     // stride-4 IoU against the reference frame, 0 without one
};

FrameStats frame_stats(const CoordSet& x, const CoordSet* reference);

// Feature row (1, N/1000, coarse/1000, IoU) of the affine base model.
Eigen::RowVector4d rate_features(const FrameStats& s);

struct RateSample {
  int route = 0;
  FrameType type = FrameType::I;
  FrameStats stats;
  double bpp = 0.0;
};

// Least-squares fit of the base coefficients; rows 0..K-1 intra, K..2K-1
// inter. Routes/types without samples get a constant model from the other
// type (or zero).
Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor> fit_rate_model(const std::vector<RateSample>& samples,
                                                                         int routes);

class RateEstimator {
 public:
  using Coeffs = Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>;

  RateEstimator() = default;
  RateEstimator(Coeffs coeffs, double decay = 0.8);

  int routes() const { return static_cast<int>(coeffs_.rows() / 2); }
  double base(int route, FrameType type, const FrameStats& s) const;
  // R_est^i = base_i · corr_i. Throws ColdStart before the first observation.
  std::vector<double> estimate(FrameType type, const FrameStats& s) const;
  void observe(int route, FrameType type, const FrameStats& s, double realized_bpp);
  double correction(int route) const { return corr_[static_cast<size_t>(route)]; }
  int observations() const { return observations_; }

 private:
  Coeffs coeffs_;
  std::vector<double> corr_;
  double decay_ = 0.8;
  int observations_ = 0;
};

struct RateControlState {
  double r_tar = 0.0;  // target bpp
  int n_c = 0;         // frames coded
  double r_c = 0.0;    // Σ per-frame bpp
  int sw = 4;
  double i_boost = 2.0;
  int gof = 32;
};

// Sliding-window frame target: r_tar plus the budget surplus (r_tar·n_c - r_c)
// spread over the next `sw` frames.
double allocate_target(const RateControlState& s);
// Under budget: the route with the nearest estimate strictly above t_tar;
// over budget: the nearest strictly below. Falls back to the highest- or
// lowest-rate route. Exact balance counts as under budget.
int select_route(const std::vector<double>& est, double t_tar, const RateControlState& s);
// Target for a frame at position `index_in_gof`: boosted for the I frame.
double plan_gof(const RateControlState& s, int index_in_gof);
void commit_frame(RateControlState& s, double realized_bpp);

struct TraceRecord {
  int frame = 0;
  FrameType type = FrameType::I;
  double t_tar = 0.0;
  std::vector<double> estimates;  // empty on a cold start
  int route = 0;
  double realized_bpp = 0.0;
  double cumulative_error = 0.0;  // ΔR (%) of the running mean
};

std::string format_trace(const TraceRecord& r);

class RateController {
 public:
  RateController(RateControlState state, RateEstimator estimator);

  // Route for the next frame; records the pending trace entry.
  int choose(int frame_index, const FrameStats& stats, FrameType type);
  // Books the realized bpp of the frame chosen last.
  TraceRecord commit(double realized_bpp);

  const RateControlState& state() const { return state_; }
  const RateEstimator& estimator() const { return est_; }

 private:
  RateControlState state_;
  RateEstimator est_;
  TraceRecord pending_;
  FrameStats pending_stats_;
};

}  // namespace dpcc
