#include "dpcc/sparse_tensor.hpp"

#include "dpcc/error.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace dpcc {

namespace {

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

std::string to_string(const Coord& c) {
  return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + "," + std::to_string(c.z) + ")";
}

void check_same_stride(int a, int b) {
  if (a != b)
    throw Error(Errc::StrideMismatch, "strides " + std::to_string(a) + " and " + std::to_string(b));
}

}  // namespace

CoordSet CoordSet::from_coords(std::vector<Coord> coords, int stride) {
  if (!is_pow2(stride))
    throw Error(Errc::StrideViolation, "stride must be a positive power of two, got " + std::to_string(stride));
  for (const auto& c : coords) {
    if (c.x % stride != 0 || c.y % stride != 0 || c.z % stride != 0)
      throw Error(Errc::StrideViolation, to_string(c) + " is not on stride " + std::to_string(stride));
  }
  std::sort(coords.begin(), coords.end());
  auto dup = std::adjacent_find(coords.begin(), coords.end());
  if (dup != coords.end()) throw Error(Errc::DuplicateCoordinate, to_string(*dup));

  CoordSet out;
  out.stride_ = stride;
  out.coords_ = std::move(coords);
  out.index_.reserve(out.coords_.size() * 2);
  for (size_t i = 0; i < out.coords_.size(); ++i) out.index_.emplace(out.coords_[i], static_cast<int32_t>(i));
  return out;
}

SparseTensor::SparseTensor(CoordSetPtr coords, FeatureMatrix features)
    : coords_(std::move(coords)), features_(std::move(features)) {
  if (static_cast<size_t>(features_.rows()) != coords_->size())
    throw Error(Errc::ShapeMismatch, "feature rows " + std::to_string(features_.rows()) + " vs " +
                                         std::to_string(coords_->size()) + " coordinates");
  if (features_.cols() < 1) throw Error(Errc::ShapeMismatch, "feature width must be at least 1");
}

SparseTensor SparseTensor::build(std::vector<Coord> coords, const FeatureMatrix& features, int stride) {
  if (static_cast<size_t>(features.rows()) != coords.size())
    throw Error(Errc::ShapeMismatch, "feature rows " + std::to_string(features.rows()) + " vs " +
                                         std::to_string(coords.size()) + " coordinates");
  std::vector<int> order(coords.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return coords[a] < coords[b]; });

  auto set = std::make_shared<const CoordSet>(CoordSet::from_coords(coords, stride));
  FeatureMatrix sorted(features.rows(), features.cols());
  for (size_t i = 0; i < order.size(); ++i) sorted.row(static_cast<Eigen::Index>(i)) = features.row(order[i]);
  return SparseTensor(std::move(set), std::move(sorted));
}

SparseTensor SparseTensor::ones(CoordSetPtr coords) {
  const auto n = static_cast<Eigen::Index>(coords->size());
  return SparseTensor(std::move(coords), FeatureMatrix::Ones(n, 1));
}

UnionMap union_with_maps(const CoordSet& a, const CoordSet& b) {
  check_same_stride(a.stride(), b.stride());
  std::vector<Coord> merged;
  std::vector<int> fa, fb;
  merged.reserve(a.size() + b.size());
  size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i] < b[j])) {
      merged.push_back(a[i]);
      fa.push_back(static_cast<int>(i++));
      fb.push_back(-1);
    } else if (i == a.size() || b[j] < a[i]) {
      merged.push_back(b[j]);
      fa.push_back(-1);
      fb.push_back(static_cast<int>(j++));
    } else {
      merged.push_back(a[i]);
      fa.push_back(static_cast<int>(i++));
      fb.push_back(static_cast<int>(j++));
    }
  }
  UnionMap out;
  out.coords = std::make_shared<const CoordSet>(CoordSet::from_coords(std::move(merged), a.stride()));
  out.from_a = std::move(fa);
  out.from_b = std::move(fb);
  return out;
}

CoordSet union_coords(const CoordSet& a, const CoordSet& b) { return *union_with_maps(a, b).coords; }

SparseTensor concat_features(const SparseTensor& a, const SparseTensor& b) {
  auto u = union_with_maps(a.coord_set(), b.coord_set());
  const int da = a.width();
  const int db = b.width();
  FeatureMatrix f = FeatureMatrix::Zero(static_cast<Eigen::Index>(u.coords->size()), da + db);
  for (size_t r = 0; r < u.coords->size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    if (u.from_a[r] >= 0) f.row(row).head(da) = a.features().row(u.from_a[r]);
    if (u.from_b[r] >= 0) f.row(row).tail(db) = b.features().row(u.from_b[r]);
  }
  return SparseTensor(u.coords, std::move(f));
}

std::vector<int> prune_rows(const CoordSet& coords, const CoordSet& keep) {
  check_same_stride(coords.stride(), keep.stride());
  std::vector<int> rows;
  for (size_t i = 0; i < coords.size(); ++i)
    if (keep.contains(coords[i])) rows.push_back(static_cast<int>(i));
  return rows;
}

SparseTensor prune(const SparseTensor& t, const CoordSet& keep) {
  const auto rows = prune_rows(t.coord_set(), keep);
  std::vector<Coord> kept;
  kept.reserve(rows.size());
  FeatureMatrix f(static_cast<Eigen::Index>(rows.size()), t.width());
  for (size_t i = 0; i < rows.size(); ++i) {
    kept.push_back(t.coord_set()[rows[i]]);
    f.row(static_cast<Eigen::Index>(i)) = t.features().row(rows[i]);
  }
  auto set = std::make_shared<const CoordSet>(CoordSet::from_coords(std::move(kept), t.stride()));
  return SparseTensor(std::move(set), std::move(f));
}

CoordSet downsample_coords(const CoordSet& c, int factor) {
  if (factor != 2) throw Error(Errc::BadFactor, "only factor 2 is supported, got " + std::to_string(factor));
  const int s = c.stride() * factor;
  std::vector<Coord> out;
  out.reserve(c.size());
  for (const auto& v : c.coords())
    out.push_back({floor_div(v.x, s) * s, floor_div(v.y, s) * s, floor_div(v.z, s) * s});
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return CoordSet::from_coords(std::move(out), s);
}

std::vector<int> WarpResult::sources_of(int warped_row) const {
  std::vector<int> src;
  for (size_t i = 0; i < row_to_warped.size(); ++i)
    if (row_to_warped[i] == warped_row) src.push_back(static_cast<int>(i));
  return src;
}

WarpResult warp(const CoordSet& c, std::span<const Coord> motion) {
  if (motion.size() != c.size())
    throw Error(Errc::ShapeMismatch, std::to_string(motion.size()) + " motion rows for " +
                                         std::to_string(c.size()) + " coordinates");
  std::vector<Coord> moved(c.size());
  for (size_t i = 0; i < c.size(); ++i) moved[i] = c[i] + motion[i];
  std::vector<Coord> uniq = moved;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  WarpResult out;
  auto set = std::make_shared<const CoordSet>(CoordSet::from_coords(std::move(uniq), c.stride()));
  out.row_to_warped.resize(c.size());
  for (size_t i = 0; i < c.size(); ++i) out.row_to_warped[i] = set->find(moved[i]);
  out.coords = std::move(set);
  return out;
}

std::vector<int> rows_in(const CoordSet& sub, const CoordSet& super) {
  check_same_stride(sub.stride(), super.stride());
  std::vector<int> rows(sub.size());
  for (size_t i = 0; i < sub.size(); ++i) {
    rows[i] = super.find(sub[i]);
    if (rows[i] < 0) throw Error(Errc::CoordMisalignment, to_string(sub[i]) + " missing from target set");
  }
  return rows;
}

}  // namespace dpcc
