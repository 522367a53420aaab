#pragma once

// Central finite-difference gradient oracle shared by the unit and acceptance
// suites. It only re-evaluates the forward function, so it is independent of
// every backward rule it checks.

#include "dpcc/nn.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace dpcc::gradcheck {

struct GradCheckResult {
  double max_rel_error = 0.0;
  size_t checked = 0;
};

// Relative error with a denominator floor so entries whose true gradient is
// near zero are compared on an absolute scale.
inline double rel_error(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// `loss` builds a fresh tape from the current values of `params` and `inputs`
// (leaves) and returns the scalar loss. Every entry of every parameter and
// input is perturbed by ±eps.
inline GradCheckResult grad_check(const std::function<nn::Var(nn::Tape&, std::vector<nn::Var>&)>& loss,
                                  std::vector<nn::Parameter*> params, std::vector<nn::Mat*> inputs,
                                  double eps = 1e-4) {
  auto eval = [&]() {
    nn::Tape t;
    std::vector<nn::Var> leaves;
    for (auto* m : inputs) leaves.push_back(t.leaf(*m));
    return loss(t, leaves).value()(0, 0);
  };

  for (auto* p : params) p->zero_grad();
  nn::Tape tape;
  std::vector<nn::Var> leaves;
  for (auto* m : inputs) leaves.push_back(tape.leaf(*m));
  tape.backward(loss(tape, leaves));

  GradCheckResult res;
  auto probe = [&](nn::Mat& value, const nn::Mat& analytic) {
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double orig = value.data()[i];
      value.data()[i] = orig + eps;
      const double up = eval();
      value.data()[i] = orig - eps;
      const double down = eval();
      value.data()[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      res.max_rel_error = std::max(res.max_rel_error, rel_error(analytic.data()[i], numeric));
      ++res.checked;
    }
  };
  for (auto* p : params) {
    const nn::Mat analytic = p->grad;
    probe(p->value, analytic);
  }
  for (size_t k = 0; k < inputs.size(); ++k) probe(*inputs[k], tape.grad(leaves[k]));
  return res;
}

}  // namespace dpcc::gradcheck
