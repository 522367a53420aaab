#include "dpcc/nn.hpp"

#include "dpcc/error.hpp"

#include <cmath>

namespace dpcc::nn {

const Mat& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Mat value) { return record(std::move(value), false, nullptr); }

Var Tape::leaf(Mat value) { return record(std::move(value), true, nullptr); }

Var Tape::record(Mat value, bool requires_grad, Backward backward) {
  nodes_.push_back(Node{std::move(value), Mat(), requires_grad, std::move(backward)});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Mat Tape::grad(const Var& v) const {
  const auto& n = nodes_[v.id()];
  if (n.grad.size() == 0 && n.value.size() != 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Mat& Tape::grad_buffer(int id) {
  auto& n = nodes_[id];
  if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols())
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(int id, const Mat& g) {
  if (!nodes_[id].requires_grad) return;
  grad_buffer(id) += g;
}

void Tape::accumulate_rows(int id, const std::vector<int>& idx, const Mat& g) {
  if (!nodes_[id].requires_grad) return;
  Mat& buf = grad_buffer(id);
  for (size_t r = 0; r < idx.size(); ++r)
    if (idx[r] >= 0) buf.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
}

void Tape::backward(const Var& loss) {
  const int root = loss.id();
  if (nodes_[root].value.size() != 1) throw Error(Errc::ShapeMismatch, "backward needs a scalar loss");
  if (!nodes_[root].requires_grad)
    throw Error(Errc::DisconnectedGraph, "loss does not depend on any trainable quantity");
  grad_buffer(root).setOnes();
  for (int i = root; i >= 0; --i) {
    auto& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, n.grad);
  }
}

Var relu(const Var& a) {
  Mat out = a.value().cwiseMax(0.0);
  const int ia = a.id();
  return a.tape()->record(std::move(out), a.requires_grad(), [ia](Tape& t, const Mat& g) {
    t.accumulate(ia, (t.value(ia).array() > 0.0).select(g, 0.0));
  });
}

Var add(const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(Errc::ShapeMismatch, "add operands differ in shape");
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(a.value() + b.value(), a.requires_grad() || b.requires_grad(),
                          [ia, ib](Tape& t, const Mat& g) {
                            t.accumulate(ia, g);
                            t.accumulate(ib, g);
                          });
}

Var add_const(const Var& a, const Mat& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) throw Error(Errc::ShapeMismatch, "add_const shape");
  const int ia = a.id();
  return a.tape()->record(a.value() + c, a.requires_grad(), [ia](Tape& t, const Mat& g) { t.accumulate(ia, g); });
}

Var scale(const Var& a, double s) {
  const int ia = a.id();
  return a.tape()->record(a.value() * s, a.requires_grad(), [ia, s](Tape& t, const Mat& g) { t.accumulate(ia, g * s); });
}

Var softplus(const Var& a) {
  Mat out = a.value().unaryExpr([](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); });
  const int ia = a.id();
  return a.tape()->record(std::move(out), a.requires_grad(), [ia](Tape& t, const Mat& g) {
    Mat sig = t.value(ia).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    t.accumulate(ia, g.cwiseProduct(sig));
  });
}

Var clamp_min(const Var& a, double floor) {
  const int ia = a.id();
  return a.tape()->record(a.value().cwiseMax(floor), a.requires_grad(), [ia, floor](Tape& t, const Mat& g) {
    t.accumulate(ia, (t.value(ia).array() > floor).select(g, 0.0));
  });
}

Var sum(const Var& a) {
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  const int ia = a.id();
  return a.tape()->record(std::move(out), a.requires_grad(), [ia](Tape& t, const Mat& g) {
    const auto& v = t.value(ia);
    t.accumulate(ia, Mat::Constant(v.rows(), v.cols(), g(0, 0)));
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), n > 0 ? 1.0 / n : 0.0);
}

Var gather_rows(const Var& a, std::vector<int> idx) {
  const auto& v = a.value();
  Mat out = Mat::Zero(static_cast<Eigen::Index>(idx.size()), v.cols());
  for (size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= v.rows()) throw Error(Errc::ShapeMismatch, "gather index out of range");
    if (idx[r] >= 0) out.row(static_cast<Eigen::Index>(r)) = v.row(idx[r]);
  }
  const int ia = a.id();
  return a.tape()->record(std::move(out), a.requires_grad(),
                          [ia, idx = std::move(idx)](Tape& t, const Mat& g) { t.accumulate_rows(ia, idx, g); });
}

Var concat_cols(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) throw Error(Errc::ShapeMismatch, "concat_cols row mismatch");
  Mat out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const int ia = a.id(), ib = b.id();
  const auto ca = a.cols(), cb = b.cols();
  return a.tape()->record(std::move(out), a.requires_grad() || b.requires_grad(),
                          [ia, ib, ca, cb](Tape& t, const Mat& g) {
                            t.accumulate(ia, g.leftCols(ca));
                            t.accumulate(ib, g.rightCols(cb));
                          });
}

Var slice_cols(const Var& a, int offset, int count) {
  if (offset < 0 || count < 0 || offset + count > a.cols()) throw Error(Errc::ShapeMismatch, "slice_cols range");
  const int ia = a.id();
  return a.tape()->record(a.value().middleCols(offset, count), a.requires_grad(),
                          [ia, offset, count](Tape& t, const Mat& g) {
                            if (!t.requires_grad(ia)) return;
                            t.grad_buffer(ia).middleCols(offset, count) += g;
                          });
}

Var add_scalars(const std::vector<Var>& terms) {
  if (terms.empty()) throw Error(Errc::ShapeMismatch, "add_scalars needs at least one term");
  Var acc = terms.front();
  for (size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return acc;
}

SparseVar constant(Tape& tape, const SparseTensor& t) { return {t.coords_ptr(), tape.constant(t.features())}; }

SparseVar gather_to(const SparseVar& t, CoordSetPtr target) {
  if (target->stride() != t.stride()) throw Error(Errc::StrideMismatch, "gather_to across strides");
  std::vector<int> idx(target->size());
  for (size_t i = 0; i < target->size(); ++i) idx[i] = t.coords->find((*target)[i]);
  return {std::move(target), gather_rows(t.feat, std::move(idx))};
}

SparseVar concat_features(const SparseVar& a, const SparseVar& b) {
  auto u = union_with_maps(*a.coords, *b.coords);
  Var fa = gather_rows(a.feat, u.from_a);
  Var fb = gather_rows(b.feat, u.from_b);
  return {u.coords, concat_cols(fa, fb)};
}

SparseVar prune(const SparseVar& t, const CoordSet& keep) {
  auto rows = prune_rows(*t.coords, keep);
  std::vector<Coord> kept;
  kept.reserve(rows.size());
  for (int r : rows) kept.push_back((*t.coords)[r]);
  auto set = std::make_shared<const CoordSet>(CoordSet::from_coords(std::move(kept), t.stride()));
  return {std::move(set), gather_rows(t.feat, std::move(rows))};
}

}  // namespace dpcc::nn
