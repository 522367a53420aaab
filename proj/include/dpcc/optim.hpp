#pragma once

#include "dpcc/nn.hpp"

#include <vector>

namespace dpcc::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias-corrected first and second moments. Moment state starts at
// zero; step() refuses non-finite gradients before touching any parameter.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options = {});

  void step();
  void zero_grad();
  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  long steps() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  AdamOptions options_;
  long t_ = 0;
};

}  // namespace dpcc::nn
