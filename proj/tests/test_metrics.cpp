#include "dpcc/error.hpp"
#include "dpcc/metrics.hpp"
#include "dpcc/slim_conv.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace dpcc;

namespace {

double sq(const Point3& a, const Point3& b) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

size_t brute_nearest(const std::vector<Point3>& pts, const Point3& q) {
  size_t best = 0;
  for (size_t i = 1; i < pts.size(); ++i)
    if (sq(pts[i], q) < sq(pts[best], q)) best = i;
  return best;
}

std::vector<Point3> random_cloud(nn::SplitMix& rng, size_t n, double side) {
  std::vector<Point3> p(n);
  for (auto& x : p) x = {rng.uniform(0, side), rng.uniform(0, side), rng.uniform(0, side)};
  return p;
}

RDCurve smooth_curve() {
  return {{0.05, 58.0}, {0.1, 61.2}, {0.2, 64.1}, {0.4, 66.8}, {0.8, 69.0}};
}

}  // namespace

TEST(Metrics, BppExamples) {
  EXPECT_DOUBLE_EQ(bpp(1000, 5000), 0.2);
  EXPECT_DOUBLE_EQ(bpp(0, 5000), 0.0);
  EXPECT_THROW(bpp(10, 0), Error);
}

TEST(Metrics, D1TwoPointOracle) {
  const std::vector<Point3> a{{0, 0, 0}}, b{{1, 0, 0}};
  const double expected = 10.0 * std::log10(3.0 * 1023.0 * 1023.0 / 1.0);
  EXPECT_NEAR(d1_psnr(a, b, 10), expected, 1e-9);
  EXPECT_NEAR(expected, 64.97, 5e-3);
  EXPECT_DOUBLE_EQ(d1_psnr(a, a, 10), kPsnrCap);
}

TEST(Metrics, D1IsSymmetricAndUsesWorseDirection) {
  nn::SplitMix rng(4);
  const auto a = random_cloud(rng, 300, 50.0);
  auto b = random_cloud(rng, 200, 50.0);
  EXPECT_NEAR(d1_psnr(a, b, 6), d1_psnr(b, a, 6), 1e-12);
  // Brute-force both directions.
  auto mse = [](const std::vector<Point3>& x, const std::vector<Point3>& y) {
    double s = 0.0;
    for (const auto& p : x) s += sq(y[brute_nearest(y, p)], p);
    return s / static_cast<double>(x.size());
  };
  const double peak = 3.0 * 63.0 * 63.0;
  EXPECT_NEAR(d1_psnr(a, b, 6), 10.0 * std::log10(peak / std::max(mse(a, b), mse(b, a))), 1e-9);
}

TEST(Metrics, D2CapAndOrthogonalDisplacement) {
  // A flat 5x5 patch in z = 0 shifted inside its own plane.
  std::vector<Point3> a, b;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      a.push_back({double(i), double(j), 0.0});
      b.push_back({i + 0.3, j + 0.2, 0.0});
    }
  EXPECT_DOUBLE_EQ(d2_psnr(a, a, 6), kPsnrCap);
  EXPECT_DOUBLE_EQ(d2_psnr(a, b, 6), kPsnrCap);
  const std::vector<Point3> up(a.size(), Point3{0, 0, 1});
  EXPECT_DOUBLE_EQ(d2_psnr(a, b, 6, up, up), kPsnrCap);
}

TEST(Metrics, D2AtLeastD1OnRandomClouds) {
  nn::SplitMix rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = random_cloud(rng, 400, 30.0);
    auto b = a;
    for (auto& p : b)
      for (auto& v : p) v += rng.uniform(-0.7, 0.7);
    EXPECT_GE(d2_psnr(a, b, 6) + 1e-9, d1_psnr(a, b, 6));
  }
}

TEST(Metrics, NormalsOfPlaneAreAxis) {
  std::vector<Point3> a;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) a.push_back({double(i), 2.0, double(j)});
  for (const auto& n : estimate_normals(a)) EXPECT_NEAR(std::abs(n[1]), 1.0, 1e-9);
  EXPECT_THROW(estimate_normals({{0, 0, 0}, {1, 1, 1}}), Error);
}

TEST(Metrics, NearestNeighbourMatchesBruteForce) {
  nn::SplitMix rng(1);
  for (size_t n : {1u, 7u, 2000u}) {
    auto pts = random_cloud(rng, n, 100.0);
    // Integer lattice copies create exact ties.
    for (size_t i = 0; i < n / 4; ++i) pts[i] = {std::floor(pts[i][0]), std::floor(pts[i][1]), 5.0};
    KdTree tree(pts);
    for (int q = 0; q < 2000; ++q) {
      const Point3 p{std::floor(rng.uniform(0, 100)), std::floor(rng.uniform(0, 100)), q % 2 ? 5.0 : rng.uniform(0, 100)};
      const size_t got = tree.nearest(p);
      const size_t want = brute_nearest(pts, p);
      ASSERT_EQ(sq(pts[got], p), sq(pts[want], p));
      ASSERT_EQ(got, want);
    }
  }
}

TEST(Metrics, KnnMatchesSortedDistances) {
  nn::SplitMix rng(2);
  const auto pts = random_cloud(rng, 500, 10.0);
  KdTree tree(pts);
  const Point3 q{5, 5, 5};
  const auto idx = tree.knn(q, 9);
  std::vector<double> d;
  for (const auto& p : pts) d.push_back(sq(p, q));
  std::sort(d.begin(), d.end());
  ASSERT_EQ(idx.size(), 9u);
  for (size_t i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(sq(pts[idx[i]], q), d[i]);
}

TEST(Metrics, BdIdenticalCurvesAreZero) {
  const auto c = smooth_curve();
  EXPECT_EQ(bd_rate(c, c), 0.0);
  EXPECT_EQ(bd_psnr(c, c), 0.0);
}

TEST(Metrics, BdDoubledRateIsPlus100) {
  const auto ref = smooth_curve();
  auto test = ref;
  for (auto& p : test) p.rate *= 2.0;
  EXPECT_NEAR(bd_rate(ref, test), 100.0, 0.5);
  EXPECT_NEAR(bd_rate_closed_form(ref, test), 100.0, 1e-6);
}

TEST(Metrics, BdPsnrConstantOffset) {
  const auto ref = smooth_curve();
  auto test = ref;
  for (auto& p : test) p.psnr += 1.0;
  EXPECT_NEAR(bd_psnr(ref, test), 1.0, 1e-9);
  EXPECT_NEAR(bd_psnr_closed_form(ref, test), 1.0, 1e-9);
}

TEST(Metrics, BdTrapezoidAgreesWithClosedForm) {
  const auto ref = smooth_curve();
  const RDCurve test{{0.045, 58.3}, {0.094, 61.6}, {0.19, 64.3}, {0.37, 67.2}, {0.77, 69.1}};
  EXPECT_NEAR(bd_rate(ref, test), bd_rate_closed_form(ref, test), 1e-3);
  EXPECT_NEAR(bd_psnr(ref, test), bd_psnr_closed_form(ref, test), 1e-5);
}

TEST(Metrics, BdRateNearlyAntisymmetricForCloseCurves) {
  const auto ref = smooth_curve();
  const RDCurve test{{0.051, 58.05}, {0.103, 61.2}, {0.205, 64.12}, {0.41, 66.78}, {0.83, 69.02}};
  EXPECT_NEAR(bd_rate(ref, test), -bd_rate(test, ref), 0.5);
}

TEST(Metrics, BdErrors) {
  const auto ref = smooth_curve();
  const RDCurve few{{0.1, 60}, {0.2, 62}, {0.3, 63}};
  EXPECT_THROW(bd_rate(ref, few), Error);
  const RDCurve far{{10, 90}, {20, 91}, {40, 92}, {80, 93}};
  EXPECT_THROW(bd_rate(ref, far), Error);
}

TEST(Metrics, BitrateErrorExamples) {
  EXPECT_DOUBLE_EQ(bitrate_error(0.2, 0.2), 0.0);
  EXPECT_NEAR(bitrate_error(0.202, 0.2), 1.0, 1e-9);
  EXPECT_THROW(bitrate_error(0.1, 0.0), Error);
}

TEST(Metrics, RdCsvRoundTrip) {
  const auto c = smooth_curve();
  const auto text = format_rd_csv(c);
  EXPECT_EQ(text.substr(0, text.find('\n')), "rate_bpp,psnr_db");
  const auto back = parse_rd_csv(text);
  ASSERT_EQ(back.size(), c.size());
  for (size_t i = 0; i < c.size(); ++i) {
    EXPECT_DOUBLE_EQ(back[i].rate, c[i].rate);
    EXPECT_DOUBLE_EQ(back[i].psnr, c[i].psnr);
  }
  EXPECT_THROW(parse_rd_csv("rate,psnr\n1,2\n"), Error);
}
