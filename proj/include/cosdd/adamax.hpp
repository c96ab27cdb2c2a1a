#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

namespace cosdd {

// Adam with the infinity norm: u = max(beta2 * u, |g| + eps),
// p -= lr / (1 - beta1^t) * m / u.
class Adamax {
 public:
  Adamax(std::vector<torch::Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void zero_grad();
  void step();

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  std::int64_t steps() const { return steps_; }
  const std::vector<torch::Tensor>& params() const { return params_; }

  void save(torch::serialize::OutputArchive& archive, const std::string& prefix) const;
  void load(torch::serialize::InputArchive& archive, const std::string& prefix);

 private:
  std::vector<torch::Tensor> params_;
  std::vector<torch::Tensor> exp_avg_, exp_inf_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t steps_ = 0;
};

// Rescales gradients so their joint L2 norm is at most max_norm; returns the
// norm before clipping.
double clip_grad_norm(const std::vector<torch::Tensor>& params, double max_norm);

}  // namespace cosdd
