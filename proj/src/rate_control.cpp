#include "dpcc/rate_control.hpp"

#include "dpcc/error.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace dpcc {

FrameStats frame_stats(const CoordSet& x, const CoordSet* reference) {
  FrameStats s;
  s.points = static_cast<double>(x.size());
  const auto c = downsample_coords(downsample_coords(x, 2), 2);
  s.coarse = static_cast<double>(c.size());
  if (reference != nullptr && !reference->empty()) {
    const auto r = downsample_coords(downsample_coords(*reference, 2), 2);
    size_t inter = 0;
    for (const auto& p : c.coords()) inter += r.contains(p) ? 1 : 0;
    const size_t uni = c.size() + r.size() - inter;
    s.iou = uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
  }
  return s;
}

Eigen::RowVector4d rate_features(const FrameStats& s) {
  return {1.0, s.points / 1000.0, s.coarse / 1000.0, s.iou};
}

RateEstimator::Coeffs fit_rate_model(const std::vector<RateSample>& samples, int routes) {
  RateEstimator::Coeffs out = RateEstimator::Coeffs::Zero(2 * routes, 4);
  for (int type = 0; type < 2; ++type) {
    for (int k = 0; k < routes; ++k) {
      std::vector<const RateSample*> rows;
      for (const auto& s : samples)
        if (s.route == k && static_cast<int>(s.type) == type) rows.push_back(&s);
      if (rows.empty()) continue;
      Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), 4);
      Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
      double mean = 0.0;
      for (size_t i = 0; i < rows.size(); ++i) {
        A.row(static_cast<Eigen::Index>(i)) = rate_features(rows[i]->stats);
        b(static_cast<Eigen::Index>(i)) = rows[i]->bpp;
        mean += rows[i]->bpp;
      }
      mean /= static_cast<double>(rows.size());
      // Ridge keeps collinear features (constant IoU for intra frames) stable;
      // the intercept is not penalized.
      Eigen::Matrix4d reg = Eigen::Matrix4d::Identity() * 1e-6 * static_cast<double>(rows.size());
      reg(0, 0) = 0.0;
      Eigen::Vector4d w = (A.transpose() * A + reg).ldlt().solve(A.transpose() * b);
      if (!w.allFinite()) w = Eigen::Vector4d(mean, 0, 0, 0);
      out.row(type * routes + k) = w.transpose();
    }
  }
  // Fill missing types from the other type of the same route.
  for (int k = 0; k < routes; ++k) {
    if (out.row(k).isZero() && !out.row(routes + k).isZero()) out.row(k) = out.row(routes + k);
    if (out.row(routes + k).isZero() && !out.row(k).isZero()) out.row(routes + k) = out.row(k);
  }
  return out;
}

RateEstimator::RateEstimator(Coeffs coeffs, double decay)
    : coeffs_(std::move(coeffs)), corr_(static_cast<size_t>(coeffs_.rows() / 2), 1.0), decay_(decay) {
  if (coeffs_.rows() < 2 || coeffs_.rows() % 2 != 0) throw Error(Errc::BadSpec, "rate model needs 2K rows");
  if (!(decay_ >= 0.0 && decay_ < 1.0)) throw Error(Errc::BadSpec, "corrector decay must be in [0, 1)");
}

double RateEstimator::base(int route, FrameType type, const FrameStats& s) const {
  if (route < 0 || route >= routes()) throw Error(Errc::UnknownRoute, "route outside the rate model");
  const int row = (type == FrameType::I ? 0 : routes()) + route;
  // Rates are positive; a fit that extrapolates below zero is clamped.
  return std::max(1e-3, coeffs_.row(row).dot(rate_features(s)));
}

std::vector<double> RateEstimator::estimate(FrameType type, const FrameStats& s) const {
  if (observations_ == 0) throw Error(Errc::ColdStart, "no frame has been coded yet");
  std::vector<double> est(static_cast<size_t>(routes()));
  for (int k = 0; k < routes(); ++k) est[static_cast<size_t>(k)] = base(k, type, s) * corr_[static_cast<size_t>(k)];
  return est;
}

void RateEstimator::observe(int route, FrameType type, const FrameStats& s, double realized_bpp) {
  const double ratio = realized_bpp / base(route, type, s);
  double& c = corr_[static_cast<size_t>(route)];
  c = decay_ * c + (1.0 - decay_) * std::max(ratio, 1e-3);
  ++observations_;
}

double allocate_target(const RateControlState& s) {
  if (s.sw < 1) throw Error(Errc::BadSpec, "sliding window must be at least 1");
  return (s.r_tar * (s.n_c + s.sw) - s.r_c) / s.sw;
}

int select_route(const std::vector<double>& est, double t_tar, const RateControlState& s) {
  if (est.empty()) throw Error(Errc::BadSpec, "no route estimates");
  const bool under = s.r_tar * s.n_c >= s.r_c;
  int best = -1;
  double gap = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < est.size(); ++i) {
    const double d = under ? est[i] - t_tar : t_tar - est[i];
    if (d > 0.0 && d < gap) {
      gap = d;
      best = static_cast<int>(i);
    }
  }
  if (best >= 0) return best;
  // Highest-rate route when under budget, lowest-rate route otherwise.
  size_t pick = 0;
  for (size_t i = 1; i < est.size(); ++i)
    if (under ? est[i] > est[pick] : est[i] < est[pick]) pick = i;
  return static_cast<int>(pick);
}

double plan_gof(const RateControlState& s, int index_in_gof) {
  if (index_in_gof == 0) return s.i_boost * s.r_tar;
  return allocate_target(s);
}

void commit_frame(RateControlState& s, double realized_bpp) {
  if (!(realized_bpp >= 0.0)) throw Error(Errc::OutOfRange, "realized bpp must be non-negative");
  s.n_c += 1;
  s.r_c += realized_bpp;
}

std::string format_trace(const TraceRecord& r) {
  nlohmann::json j{{"frame", r.frame},
                   {"type", r.type == FrameType::I ? "I" : "P"},
                   {"T_tar", r.t_tar},
                   {"estimates", r.estimates},
                   {"route", r.route},
                   {"realized_bpp", r.realized_bpp},
                   {"cumulative_error", r.cumulative_error}};
  return j.dump();
}

RateController::RateController(RateControlState state, RateEstimator estimator)
    : state_(state), est_(std::move(estimator)) {
  if (state_.r_tar <= 0.0) throw Error(Errc::ZeroTarget, "target bpp must be positive");
  if (state_.gof < 1) throw Error(Errc::BadSpec, "GoF size must be at least 1");
  allocate_target(state_);
}

int RateController::choose(int frame_index, const FrameStats& stats, FrameType type) {
  pending_ = TraceRecord{};
  pending_.frame = frame_index;
  pending_.type = type;
  pending_.t_tar = plan_gof(state_, frame_index % state_.gof);
  pending_stats_ = stats;
  try {
    pending_.estimates = est_.estimate(type, stats);
    pending_.route = select_route(pending_.estimates, pending_.t_tar, state_);
  } catch (const Error& e) {
    if (e.code() != Errc::ColdStart) throw;
    pending_.route = est_.routes() / 2;
  }
  return pending_.route;
}

TraceRecord RateController::commit(double realized_bpp) {
  commit_frame(state_, realized_bpp);
  est_.observe(pending_.route, pending_.type, pending_stats_, realized_bpp);
  pending_.realized_bpp = realized_bpp;
  pending_.cumulative_error = std::abs(state_.r_c / state_.n_c - state_.r_tar) / state_.r_tar * 100.0;
  return pending_;
}

}  // namespace dpcc
