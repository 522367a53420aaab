#pragma once

#include "dpcc/nn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dpcc::nn {

enum class ConvMode { Normal, Transposed };

// Kernel offsets in canonical order: {-1,0,1}^3 lexicographic for size 3,
// the single origin offset for size 1.
std::vector<Coord> kernel_offsets(int kernel_size);

// Input/output row pairs per kernel offset. For a normal conv the input of
// output `o` under offset `d` is at o + d*step; for a transposed conv it is at
// o - d*step.
struct KernelMap {
  std::vector<std::vector<int>> in_rows;
  std::vector<std::vector<int>> out_rows;
  size_t pairs() const;
};

KernelMap build_kernel_map(const CoordSet& in, const CoordSet& out, int kernel_size, ConvMode mode, int step);

// Voxels at stride/2 reachable from an input voxel by a kernel offset.
CoordSet transposed_candidates(const CoordSet& in, int kernel_size);

// Output coordinates of a conv layer for the given input set.
CoordSetPtr conv_output_coords(const CoordSetPtr& in, int stride, ConvMode mode, int kernel_size);

// A sparse convolution whose channels can be sliced per route. The input may
// be split into column groups (a concatenated input); group g contributes
// columns [Σ_{h<g} in(h,k), +in(g,k)) of the route-k input. Route k reads
// and writes only W[:, :in(g,k), :out(k)] and bias[:out(k)].
class SlimConv {
 public:
  SlimConv() = default;
  SlimConv(std::string name, std::vector<std::vector<int>> in_widths, std::vector<int> out_widths,
           int stride = 1, ConvMode mode = ConvMode::Normal, int kernel_size = 3);

  const std::string& name() const { return name_; }
  int routes() const { return static_cast<int>(out_widths_.size()); }
  int groups() const { return static_cast<int>(in_widths_.size()); }
  int in_width(int route) const;
  int group_width(int group, int route) const;
  int out_width(int route) const;
  int stride() const { return stride_; }
  ConvMode mode() const { return mode_; }
  int kernel_size() const { return kernel_size_; }
  int kernel_volume() const { return kernel_size_ * kernel_size_ * kernel_size_; }
  int in_max(int group) const { return in_widths_[group].back(); }
  int out_max() const { return out_widths_.back(); }

  Parameter& weight(int group) { return weights_[group]; }
  const Parameter& weight(int group) const { return weights_[group]; }
  Parameter& bias() { return bias_; }
  const Parameter& bias() const { return bias_; }
  std::vector<Parameter*> parameters();

  // W[offset][:in(g,k), :out(k)] for one group and offset.
  Eigen::Block<const Mat> weight_block(int group, int offset, int route) const;
  Eigen::Block<const Mat> bias_block(int route) const;

  void init_uniform(uint64_t seed, double gain = 1.0);
  // Centre tap identity, all other taps and the bias zero.
  void init_identity();
  void init_zero();

  Var forward(Var input, const KernelMap& map, size_t out_rows, int route);
  SparseVar forward(const SparseVar& in, int route);
  // Explicit output set (pruned candidate lists, reused maps).
  SparseVar forward(const SparseVar& in, CoordSetPtr out, int route);

 private:
  void check_route(int route) const;

  std::string name_;
  std::vector<std::vector<int>> in_widths_;
  std::vector<int> out_widths_;
  int stride_ = 1;
  ConvMode mode_ = ConvMode::Normal;
  int kernel_size_ = 3;
  std::vector<Parameter> weights_;
  Parameter bias_;
};

// Effective weights of one route, for inspection.
struct SlimSlice {
  int route = 0;
  int in_width = 0;
  int out_width = 0;
  std::vector<Mat> weights;  // per group, (kernel volume * in(g,k)) x out(k)
  Mat bias;
};

SlimSlice slim_slice(const SlimConv& conv, int route);

// Route width table helper: the same per-route widths for every layer input.
std::vector<int> constant_widths(int routes, int width);

// Deterministic uniform doubles in [0, 1) independent of the standard library.
class SplitMix {
 public:
  explicit SplitMix(uint64_t seed) : state_(seed) {}
  uint64_t next() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller.
  double normal();

 private:
  uint64_t state_;
};

}  // namespace dpcc::nn
