#include "dpcc/optim.hpp"

#include "dpcc/error.hpp"

#include <cmath>

namespace dpcc::nn {

Adam::Adam(std::vector<Parameter*> params, AdamOptions options) : params_(std::move(params)), options_(options) {
  for (auto* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  for (auto* p : params_)
    if (!p->grad.allFinite()) throw Error(Errc::NonFiniteGradient, p->name);
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& g = params_[i]->grad;
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    params_[i]->value.array() -=
        options_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + options_.eps);
  }
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

}  // namespace dpcc::nn
