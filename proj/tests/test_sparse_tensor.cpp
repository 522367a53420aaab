#include "dpcc/error.hpp"
#include "dpcc/slim_conv.hpp"
#include "dpcc/sparse_tensor.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace dpcc;

namespace {

FeatureMatrix col(std::initializer_list<double> v) {
  FeatureMatrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

std::vector<Coord> random_coords(nn::SplitMix& rng, int n, int extent, int stride) {
  std::set<Coord> s;
  for (int i = 0; i < n; ++i) {
    auto r = [&] { return static_cast<int>(rng.next() % static_cast<uint64_t>(extent)) * stride; };
    s.insert({r(), r(), r()});
  }
  return {s.begin(), s.end()};
}

template <class F>
void expect_errc(Errc code, F&& f) {
  try {
    f();
    FAIL() << "expected " << errc_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(SparseTensor, BuildBasic) {
  auto t = SparseTensor::build({{2, 0, 0}, {0, 0, 0}}, col({2, 1}), 2);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.width(), 1);
  // Canonical order carries features along.
  EXPECT_EQ(t.coord_set()[0], (Coord{0, 0, 0}));
  EXPECT_EQ(t.features()(0, 0), 1.0);
  EXPECT_EQ(t.coord_set().find({2, 0, 0}), 1);
}

TEST(SparseTensor, BuildErrors) {
  expect_errc(Errc::StrideViolation, [] { SparseTensor::build({{1, 0, 0}}, col({1}), 2); });
  expect_errc(Errc::DuplicateCoordinate, [] { SparseTensor::build({{0, 0, 0}, {0, 0, 0}}, col({1, 1}), 1); });
  expect_errc(Errc::ShapeMismatch, [] { SparseTensor::build({{0, 0, 0}}, col({1, 2}), 1); });
}

TEST(SparseTensor, IndexConsistent) {
  nn::SplitMix rng(7);
  auto c = CoordSet::from_coords(random_coords(rng, 200, 16, 2), 2);
  for (size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c.find(c[i]), static_cast<int>(i));
  EXPECT_TRUE(std::is_sorted(c.coords().begin(), c.coords().end()));
}

TEST(UnionCoords, Examples) {
  auto a = CoordSet::from_coords({{0, 0, 0}}, 2);
  auto b = CoordSet::from_coords({{2, 0, 0}}, 2);
  EXPECT_EQ(union_coords(a, a), a);
  EXPECT_EQ(union_coords(a, b).coords(), (std::vector<Coord>{{0, 0, 0}, {2, 0, 0}}));
  expect_errc(Errc::StrideMismatch, [&] { union_coords(a, CoordSet::from_coords({}, 1)); });
}

TEST(UnionCoords, CommutativeAgainstBruteForce) {
  nn::SplitMix rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    auto ca = random_coords(rng, 1 + static_cast<int>(rng.next() % 40), 6, 1);
    auto cb = random_coords(rng, 1 + static_cast<int>(rng.next() % 40), 6, 1);
    auto a = CoordSet::from_coords(ca, 1);
    auto b = CoordSet::from_coords(cb, 1);
    std::set<Coord> oracle(ca.begin(), ca.end());
    oracle.insert(cb.begin(), cb.end());
    auto ab = union_coords(a, b);
    EXPECT_EQ(ab, union_coords(b, a));
    EXPECT_EQ(ab.coords(), std::vector<Coord>(oracle.begin(), oracle.end()));
    EXPECT_LE(ab.size(), a.size() + b.size());
  }
}

TEST(ConcatFeatures, SharedAndZeroFill) {
  auto a = SparseTensor::build({{0, 0, 0}}, col({1}), 2);
  auto b = SparseTensor::build({{0, 0, 0}}, col({5}), 2);
  auto ab = concat_features(a, b);
  ASSERT_EQ(ab.size(), 1u);
  EXPECT_EQ(ab.features()(0, 0), 1.0);
  EXPECT_EQ(ab.features()(0, 1), 5.0);

  auto c = SparseTensor::build({{2, 0, 0}}, col({5}), 2);
  auto ac = concat_features(a, c);
  ASSERT_EQ(ac.size(), 2u);
  FeatureMatrix expect(2, 2);
  expect << 1, 0, 0, 5;
  EXPECT_EQ(ac.features(), expect);
}

TEST(ConcatFeatures, MatchesRowwiseOracle) {
  nn::SplitMix rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto ca = random_coords(rng, 30, 5, 4);
    auto cb = random_coords(rng, 30, 5, 4);
    const int da = 1 + static_cast<int>(rng.next() % 3), db = 1 + static_cast<int>(rng.next() % 3);
    FeatureMatrix fa = FeatureMatrix::Random(static_cast<Eigen::Index>(ca.size()), da);
    FeatureMatrix fb = FeatureMatrix::Random(static_cast<Eigen::Index>(cb.size()), db);
    auto a = SparseTensor::build(ca, fa, 4);
    auto b = SparseTensor::build(cb, fb, 4);
    auto ab = concat_features(a, b);
    EXPECT_EQ(ab.width(), da + db);
    EXPECT_EQ(ab.coord_set(), union_coords(a.coord_set(), b.coord_set()));
    for (size_t r = 0; r < ab.size(); ++r) {
      const Coord& m = ab.coord_set()[r];
      const int ia = a.coord_set().find(m), ib = b.coord_set().find(m);
      for (int j = 0; j < da; ++j)
        EXPECT_EQ(ab.features()(r, j), ia >= 0 ? a.features()(ia, j) : 0.0);
      for (int j = 0; j < db; ++j)
        EXPECT_EQ(ab.features()(r, da + j), ib >= 0 ? b.features()(ib, j) : 0.0);
    }
  }
}

TEST(Prune, IdentityEmptyAndOracle) {
  nn::SplitMix rng(5);
  auto cs = random_coords(rng, 60, 8, 1);
  FeatureMatrix f = FeatureMatrix::Random(static_cast<Eigen::Index>(cs.size()), 2);
  auto t = SparseTensor::build(cs, f, 1);
  auto same = prune(t, t.coord_set());
  EXPECT_EQ(same.coord_set(), t.coord_set());
  EXPECT_EQ(same.features(), t.features());
  EXPECT_EQ(prune(t, CoordSet::from_coords({}, 1)).size(), 0u);

  for (int trial = 0; trial < 100; ++trial) {
    auto keep = CoordSet::from_coords(random_coords(rng, 40, 8, 1), 1);
    auto p = prune(t, keep);
    std::vector<Coord> oracle;
    for (const auto& c : t.coord_set().coords())
      if (std::find(keep.coords().begin(), keep.coords().end(), c) != keep.coords().end()) oracle.push_back(c);
    EXPECT_EQ(p.coord_set().coords(), oracle);
    auto pp = prune(p, keep);
    EXPECT_EQ(pp.coord_set(), p.coord_set());
    EXPECT_EQ(pp.features(), p.features());
  }
}

TEST(Downsample, Examples) {
  auto c = CoordSet::from_coords({{0, 0, 0}, {1, 1, 1}}, 1);
  auto d = downsample_coords(c, 2);
  EXPECT_EQ(d.stride(), 2);
  EXPECT_EQ(d.coords(), (std::vector<Coord>{{0, 0, 0}}));
  auto e = downsample_coords(CoordSet::from_coords({{2, 2, 2}}, 2), 2);
  EXPECT_EQ(e.coords(), (std::vector<Coord>{{0, 0, 0}}));
  auto f = downsample_coords(CoordSet::from_coords({{2, 2, 2}}, 1), 2);
  EXPECT_EQ(f.coords(), (std::vector<Coord>{{2, 2, 2}}));
  auto neg = downsample_coords(CoordSet::from_coords({{-1, 0, 0}}, 1), 2);
  EXPECT_EQ(neg.coords(), (std::vector<Coord>{{-2, 0, 0}}));
  expect_errc(Errc::BadFactor, [&] { downsample_coords(c, 3); });
}

TEST(Downsample, NeverGrows) {
  nn::SplitMix rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = CoordSet::from_coords(random_coords(rng, 1 + static_cast<int>(rng.next() % 100), 12, 1), 1);
    auto d = downsample_coords(c, 2);
    EXPECT_LE(d.size(), c.size());
    for (const auto& v : d.coords()) EXPECT_EQ(v.x % 2, 0);
  }
}

TEST(Warp, ZeroTranslationCollision) {
  auto c = CoordSet::from_coords({{0, 0, 0}, {2, 0, 0}}, 2);
  std::vector<Coord> zero(2);
  auto w0 = warp(c, zero);
  EXPECT_EQ(*w0.coords, c);
  EXPECT_EQ(w0.row_to_warped, (std::vector<int>{0, 1}));

  auto single = CoordSet::from_coords({{0, 0, 0}}, 2);
  std::vector<Coord> m{{2, 0, 0}};
  auto w1 = warp(single, m);
  EXPECT_EQ(w1.coords->coords(), (std::vector<Coord>{{2, 0, 0}}));

  std::vector<Coord> collide{{2, 0, 0}, {0, 0, 0}};
  auto w2 = warp(c, collide);
  ASSERT_EQ(w2.coords->size(), 1u);
  EXPECT_EQ(w2.sources_of(0), (std::vector<int>{0, 1}));

  std::vector<Coord> bad(3);
  expect_errc(Errc::ShapeMismatch, [&] { warp(c, bad); });
}

TEST(SparseTensor, DeterministicOrdering) {
  nn::SplitMix rng(1);
  auto cs = random_coords(rng, 50, 8, 1);
  FeatureMatrix f = FeatureMatrix::Random(static_cast<Eigen::Index>(cs.size()), 1);
  auto t1 = SparseTensor::build(cs, f, 1);
  std::vector<Coord> rev(cs.rbegin(), cs.rend());
  FeatureMatrix frev = f.colwise().reverse();
  auto t2 = SparseTensor::build(rev, frev, 1);
  EXPECT_EQ(t1.coord_set(), t2.coord_set());
  EXPECT_EQ(t1.features(), t2.features());
}
