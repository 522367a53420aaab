#include "dpcc/error.hpp"
#include "dpcc/rate_control.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace dpcc;

namespace {

// Written directly from the allocation and selection rules, independently of
// the library.
double oracle_target(double r_tar, int n_c, double r_c, int sw) { return (r_tar * (n_c + sw) - r_c) / sw; }

int oracle_select(const std::vector<double>& est, double t, double r_tar, int n_c, double r_c) {
  const bool under = !(r_tar * n_c < r_c);
  std::vector<int> cand;
  for (int i = 0; i < static_cast<int>(est.size()); ++i)
    if (under ? est[i] > t : est[i] < t) cand.push_back(i);
  if (cand.empty()) {
    int best = 0;
    for (int i = 0; i < static_cast<int>(est.size()); ++i)
      if (under ? est[i] > est[best] : est[i] < est[best]) best = i;
    return best;
  }
  int best = cand[0];
  for (int i : cand) {
    const double gi = std::abs(est[i] - t), gb = std::abs(est[best] - t);
    if (gi < gb) best = i;
  }
  return best;
}

// Per-route bpp for frame t: a fixed ladder modulated by content.
std::vector<double> profile(int t, bool intra) {
  const double content = 1.0 + 0.15 * std::sin(0.37 * t) + 0.05 * std::cos(1.3 * t);
  const double boost = intra ? 1.6 : 1.0;
  return {0.09 * content * boost, 0.16 * content * boost, 0.24 * content * boost, 0.34 * content * boost};
}

}  // namespace

TEST(RateControl, AllocationMatchesExamples) {
  RateControlState s;
  s.r_tar = 0.2;
  s.sw = 4;
  s.n_c = 10;
  s.r_c = 1.9;
  EXPECT_NEAR(allocate_target(s), 0.225, 1e-12);
  s.r_c = 2.3;
  EXPECT_NEAR(allocate_target(s), 0.125, 1e-12);
  s.n_c = 0;
  s.r_c = 0.0;
  EXPECT_DOUBLE_EQ(allocate_target(s), 0.2);
  s.sw = 0;
  EXPECT_THROW(allocate_target(s), Error);
}

TEST(RateControl, SelectionExamples) {
  RateControlState s;
  s.r_tar = 0.2;
  s.n_c = 10;
  s.r_c = 1.9;  // under budget
  EXPECT_EQ(select_route({0.1, 0.2, 0.3}, 0.25, s), 2);
  s.r_c = 2.1;  // over budget
  EXPECT_EQ(select_route({0.1, 0.2, 0.3}, 0.15, s), 0);
}

TEST(RateControl, SelectionFallbacksAndBalance) {
  RateControlState s;
  s.r_tar = 0.2;
  s.n_c = 4;
  s.r_c = 0.4;  // under budget, no estimate above the target
  EXPECT_EQ(select_route({0.1, 0.3, 0.2}, 0.5, s), 1);
  s.r_c = 1.2;  // over budget, no estimate below the target
  EXPECT_EQ(select_route({0.3, 0.1, 0.2}, 0.05, s), 1);
  // Exact balance counts as under budget.
  s.r_c = 0.8;
  EXPECT_EQ(select_route({0.1, 0.2, 0.3}, 0.25, s), 2);
  EXPECT_THROW(select_route({}, 0.1, s), Error);
}

TEST(RateControl, SelectionMatchesBruteForceOnGrid) {
  const std::vector<std::vector<double>> profiles{{0.1, 0.2, 0.3, 0.4}, {0.4, 0.1, 0.3, 0.2}, {0.15, 0.15, 0.3, 0.3}};
  int checked = 0;
  for (const auto& est : profiles)
    for (int ti = 0; ti <= 50; ++ti)
      for (int rc = 0; rc <= 20; ++rc) {
        RateControlState s;
        s.r_tar = 0.25;
        s.n_c = 8;
        s.r_c = 0.1 * rc;
        const double t = 0.01 * ti;
        ASSERT_EQ(select_route(est, t, s), oracle_select(est, t, s.r_tar, s.n_c, s.r_c)) << t << " " << s.r_c;
        ++checked;
      }
  EXPECT_EQ(checked, 3 * 51 * 21);
}

TEST(RateControl, TargetSweepMatchesBruteForce) {
  for (int step = 0; step <= 7; ++step) {
    const double target = 0.15 + 0.02 * step;
    RateControlState s;
    s.r_tar = target;
    s.sw = 4;
    s.gof = 32;
    int n_c = 0;
    double r_c = 0.0;
    for (int t = 0; t < 64; ++t) {
      const bool intra = t % 32 == 0;
      const auto est = profile(t, intra);
      const double t_lib = plan_gof(s, t % 32);
      const double t_ref = intra ? 2.0 * target : oracle_target(target, n_c, r_c, 4);
      ASSERT_DOUBLE_EQ(t_lib, t_ref);
      const int i_lib = select_route(est, t_lib, s);
      const int i_ref = oracle_select(est, t_ref, target, n_c, r_c);
      ASSERT_EQ(i_lib, i_ref) << "target " << target << " frame " << t;
      commit_frame(s, est[static_cast<size_t>(i_lib)]);
      ++n_c;
      r_c += est[static_cast<size_t>(i_ref)];
      ASSERT_EQ(s.n_c, n_c);
      ASSERT_DOUBLE_EQ(s.r_c, r_c);
    }
  }
}

TEST(RateControl, PerfectOracleSimulationWithinOnePercent) {
  // Hull of the P-frame ladder: [0.09, 0.34] before content modulation.
  for (double target = 0.12; target <= 0.30 + 1e-9; target += 0.01) {
    RateControlState s;
    s.r_tar = target;
    s.sw = 4;
    s.gof = 32;
    for (int t = 0; t < 64; ++t) {
      const auto est = profile(t, t % 32 == 0);
      const int i = select_route(est, plan_gof(s, t % 32), s);
      commit_frame(s, est[static_cast<size_t>(i)]);
    }
    const double dr = std::abs(s.r_c / s.n_c - target) / target;
    EXPECT_LE(dr, 0.01) << "target " << target;
  }
}

TEST(RateControl, ControllerWithExactEstimator) {
  // Base rates depend only on the coarse-count feature, so an exact base and
  // corrector 1 reproduce the profile.
  RateEstimator::Coeffs c = RateEstimator::Coeffs::Zero(8, 4);
  const std::vector<double> ladder{0.09, 0.16, 0.24, 0.34};
  for (int k = 0; k < 4; ++k) {
    c(k, 2) = 1.6 * ladder[k];
    c(4 + k, 2) = ladder[k];
  }
  RateControlState s;
  s.r_tar = 0.2;
  RateController rc(s, RateEstimator(c));
  std::vector<int> routes;
  for (int t = 0; t < 64; ++t) {
    const bool intra = t % 32 == 0;
    FrameStats st;
    st.points = 2000;
    st.coarse = 1000.0 * (1.0 + 0.15 * std::sin(0.37 * t) + 0.05 * std::cos(1.3 * t));
    const int k = rc.choose(t, st, intra ? FrameType::I : FrameType::P);
    if (t == 0) EXPECT_EQ(k, 2);  // cold start uses the middle route
    const auto truth = profile(t, intra);
    const auto rec = rc.commit(truth[static_cast<size_t>(k)]);
    EXPECT_EQ(rec.frame, t);
    if (t > 0) {
      ASSERT_EQ(rec.estimates.size(), 4u);
      for (int i = 0; i < 4; ++i) EXPECT_NEAR(rec.estimates[i], truth[static_cast<size_t>(i)], 1e-12);
    }
  }
  const double dr = std::abs(rc.state().r_c / rc.state().n_c - 0.2) / 0.2;
  EXPECT_LE(dr, 0.01);
}

TEST(RateControl, EstimatorColdStartAndCorrector) {
  RateEstimator::Coeffs c = RateEstimator::Coeffs::Zero(4, 4);
  c.col(0).setConstant(0.2);
  RateEstimator e(c, 0.8);
  FrameStats st;
  EXPECT_THROW(e.estimate(FrameType::P, st), Error);
  e.observe(1, FrameType::P, st, 0.3);  // ratio 1.5
  EXPECT_NEAR(e.correction(1), 0.8 + 0.2 * 1.5, 1e-12);
  EXPECT_NEAR(e.correction(0), 1.0, 1e-12);
  const auto est = e.estimate(FrameType::P, st);
  EXPECT_NEAR(est[1], 0.2 * 1.1, 1e-12);
  // Repeated observations converge toward the realized ratio.
  for (int i = 0; i < 100; ++i) e.observe(1, FrameType::P, st, 0.3);
  EXPECT_NEAR(e.correction(1), 1.5, 1e-8);
  EXPECT_THROW(RateEstimator(RateEstimator::Coeffs::Zero(3, 4)), Error);
}

TEST(RateControl, FitRecoversAffineModel) {
  std::vector<RateSample> samples;
  for (int i = 0; i < 40; ++i) {
    for (int k = 0; k < 2; ++k) {
      RateSample s;
      s.route = k;
      s.type = i % 2 ? FrameType::P : FrameType::I;
      s.stats.points = 1000 + 37 * i;
      s.stats.coarse = 100 + 11 * ((i * 7) % 13);
      s.stats.iou = s.type == FrameType::P ? 0.5 + 0.01 * ((i * 3) % 17) : 0.0;
      const auto f = rate_features(s.stats);
      s.bpp = (k + 1) * (0.1 + 0.05 * f(1) + 0.3 * f(2)) - (s.type == FrameType::P ? 0.2 * f(3) : 0.0);
      samples.push_back(s);
    }
  }
  const auto c = fit_rate_model(samples, 2);
  for (const auto& s : samples) {
    const int row = (s.type == FrameType::I ? 0 : 2) + s.route;
    EXPECT_NEAR(c.row(row).dot(rate_features(s.stats)), s.bpp, 1e-4);
  }
}

TEST(RateControl, TraceRecordIsJsonLine) {
  TraceRecord r;
  r.frame = 3;
  r.type = FrameType::P;
  r.t_tar = 0.25;
  r.estimates = {0.1, 0.3};
  r.route = 1;
  r.realized_bpp = 0.28;
  r.cumulative_error = 2.5;
  const auto line = format_trace(r);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_NE(line.find("\"route\":1"), std::string::npos);
  EXPECT_NE(line.find("\"T_tar\":0.25"), std::string::npos);
}

TEST(RateControl, FrameStatsIoU) {
  const auto a = CoordSet::from_coords({{0, 0, 0}, {4, 0, 0}}, 1);
  const auto b = CoordSet::from_coords({{1, 1, 1}, {8, 0, 0}}, 1);
  const auto s = frame_stats(a, &b);
  EXPECT_EQ(s.points, 2.0);
  EXPECT_EQ(s.coarse, 2.0);
  EXPECT_NEAR(s.iou, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(frame_stats(a, nullptr).iou, 0.0);
}
