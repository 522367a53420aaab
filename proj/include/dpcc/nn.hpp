#pragma once

// Reverse-mode differentiation over dense feature matrices. A Tape records
// every operation in creation order; backward() walks it in reverse, so each
// node is visited exactly once and gradients accumulate additively.

#include "dpcc/sparse_tensor.hpp"

#include <functional>
#include <string>
#include <vector>

namespace dpcc::nn {

using Mat = FeatureMatrix;

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  Parameter() = default;
  Parameter(std::string n, Mat v) : name(std::move(n)), value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const;
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Mat& grad_out)>;

  Var constant(Mat value);
  // A leaf whose gradient is retained (inputs under gradient checks).
  Var leaf(Mat value);
  Var record(Mat value, bool requires_grad, Backward backward);

  const Mat& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  // Gradient of a node after backward(); zeros when nothing reached it.
  Mat grad(const Var& v) const;

  void accumulate(int id, const Mat& g);
  // Adds `g` into rows of a node's gradient; idx -1 entries are skipped.
  void accumulate_rows(int id, const std::vector<int>& idx, const Mat& g);
  Mat& grad_buffer(int id);

  void backward(const Var& loss);
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

Var relu(const Var& a);
Var add(const Var& a, const Var& b);
Var add_const(const Var& a, const Mat& c);
Var scale(const Var& a, double s);
Var softplus(const Var& a);
// max(a, floor); gradient passes only where a > floor.
Var clamp_min(const Var& a, double floor);
Var sum(const Var& a);
Var mean(const Var& a);
// Row gather; -1 yields a zero row.
Var gather_rows(const Var& a, std::vector<int> idx);
Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& a, int offset, int count);
// Sum of 1x1 scalars.
Var add_scalars(const std::vector<Var>& terms);

// A feature tensor on a coordinate set, carried through the tape.
struct SparseVar {
  CoordSetPtr coords;
  Var feat;

  size_t size() const { return coords->size(); }
  int stride() const { return coords->stride(); }
  int width() const { return static_cast<int>(feat.cols()); }
  SparseTensor detach() const { return SparseTensor(coords, feat.value()); }
};

SparseVar constant(Tape& tape, const SparseTensor& t);
SparseVar gather_to(const SparseVar& t, CoordSetPtr target);
SparseVar concat_features(const SparseVar& a, const SparseVar& b);
SparseVar prune(const SparseVar& t, const CoordSet& keep);

}  // namespace dpcc::nn
