#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

namespace dpcc {

struct Coord {
  int32_t x = 0;
  int32_t y = 0;
  int32_t z = 0;

  auto operator<=>(const Coord&) const = default;

  Coord operator+(const Coord& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Coord operator-(const Coord& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Coord operator*(int32_t s) const { return {x * s, y * s, z * s}; }
};

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Floor division that rounds toward negative infinity for negative operands.
inline int32_t floor_div(int32_t v, int32_t d) {
  int32_t q = v / d;
  if ((v % d != 0) && ((v < 0) != (d < 0))) --q;
  return q;
}

struct CoordHash {
  size_t operator()(const Coord& c) const noexcept {
    uint64_t h = static_cast<uint32_t>(c.x) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<uint32_t>(c.y) * 0xC2B2AE3D27D4EB4Full + (h << 6) + (h >> 2);
    h ^= static_cast<uint32_t>(c.z) * 0x165667B19E3779F9ull + (h << 6) + (h >> 2);
    return static_cast<size_t>(h ^ (h >> 31));
  }
};

// A set of unique voxel coordinates on a lattice of spacing `stride`, stored
// in canonical lexicographic (x, y, z) order.
class CoordSet {
 public:
  CoordSet() = default;

  // Sorts the input; rejects duplicates and coordinates off the lattice.
  static CoordSet from_coords(std::vector<Coord> coords, int stride);

  int stride() const { return stride_; }
  size_t size() const { return coords_.size(); }
  bool empty() const { return coords_.empty(); }
  const std::vector<Coord>& coords() const { return coords_; }
  const Coord& operator[](size_t i) const { return coords_[i]; }

  // Row of `c`, or -1 when absent.
  int find(const Coord& c) const {
    auto it = index_.find(c);
    return it == index_.end() ? -1 : it->second;
  }
  bool contains(const Coord& c) const { return index_.count(c) != 0; }

  bool operator==(const CoordSet& o) const { return stride_ == o.stride_ && coords_ == o.coords_; }

 private:
  std::vector<Coord> coords_;
  int stride_ = 1;
  std::unordered_map<Coord, int32_t, CoordHash> index_;
};

using CoordSetPtr = std::shared_ptr<const CoordSet>;

// Occupied voxels with one feature row per voxel. Immutable after construction.
class SparseTensor {
 public:
  SparseTensor() = default;
  SparseTensor(CoordSetPtr coords, FeatureMatrix features);

  // Builds from unordered rows: rows are permuted into canonical order together
  // with their features.
  static SparseTensor build(std::vector<Coord> coords, const FeatureMatrix& features, int stride);

  // Occupancy tensor with all-one features of width 1.
  static SparseTensor ones(CoordSetPtr coords);

  const CoordSet& coord_set() const { return *coords_; }
  const CoordSetPtr& coords_ptr() const { return coords_; }
  const FeatureMatrix& features() const { return features_; }
  int stride() const { return coords_->stride(); }
  size_t size() const { return coords_->size(); }
  int width() const { return static_cast<int>(features_.cols()); }

 private:
  CoordSetPtr coords_ = std::make_shared<CoordSet>();
  FeatureMatrix features_ = FeatureMatrix::Zero(0, 1);
};

// Union of two coordinate sets plus, for each output row, the source row in
// `a` and in `b` (-1 when absent).
struct UnionMap {
  CoordSetPtr coords;
  std::vector<int> from_a;
  std::vector<int> from_b;
};

UnionMap union_with_maps(const CoordSet& a, const CoordSet& b);
CoordSet union_coords(const CoordSet& a, const CoordSet& b);

// Channel-wise concatenation on the coordinate union, zero-filling the half
// that is missing at a coordinate.
SparseTensor concat_features(const SparseTensor& a, const SparseTensor& b);

// Rows of `coords` that are members of `keep`, in canonical order.
std::vector<int> prune_rows(const CoordSet& coords, const CoordSet& keep);
SparseTensor prune(const SparseTensor& t, const CoordSet& keep);

CoordSet downsample_coords(const CoordSet& c, int factor);

// Warped coordinates with their provenance. `row_to_warped[i]` is the row of
// the warped position of source row i; several sources may share a row.
struct WarpResult {
  CoordSetPtr coords;
  std::vector<int> row_to_warped;

  std::vector<int> sources_of(int warped_row) const;
};

WarpResult warp(const CoordSet& c, std::span<const Coord> motion);

// Indices of each row of `sub` inside `super`; throws CoordMisalignment when
// a row is missing.
std::vector<int> rows_in(const CoordSet& sub, const CoordSet& super);

}  // namespace dpcc
