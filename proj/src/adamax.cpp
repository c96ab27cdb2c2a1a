#include "cosdd/adamax.hpp"

#include <cmath>

#include "cosdd/error.hpp"

namespace cosdd {

Adamax::Adamax(std::vector<torch::Tensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    exp_avg_.push_back(torch::zeros_like(p));
    exp_inf_.push_back(torch::zeros_like(p));
  }
}

void Adamax::zero_grad() {
  for (auto& p : params_) {
    if (p.grad().defined()) p.mutable_grad().zero_();
  }
}

void Adamax::step() {
  torch::NoGradGuard no_grad;
  ++steps_;
  const double step_size = lr_ / (1.0 - std::pow(beta1_, static_cast<double>(steps_)));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.grad().defined()) continue;
    const auto& g = p.grad();
    exp_avg_[i].mul_(beta1_).add_(g, 1.0 - beta1_);
    exp_inf_[i] = torch::maximum(exp_inf_[i].mul_(beta2_), g.abs().add_(eps_));
    p.addcdiv_(exp_avg_[i], exp_inf_[i], -step_size);
  }
}

void Adamax::save(torch::serialize::OutputArchive& archive, const std::string& prefix) const {
  archive.write(prefix + ".steps", torch::tensor(steps_));
  archive.write(prefix + ".lr", torch::tensor(lr_, torch::kFloat64));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    archive.write(prefix + ".exp_avg." + std::to_string(i), exp_avg_[i], /*is_buffer=*/true);
    archive.write(prefix + ".exp_inf." + std::to_string(i), exp_inf_[i], /*is_buffer=*/true);
  }
}

void Adamax::load(torch::serialize::InputArchive& archive, const std::string& prefix) {
  torch::Tensor t;
  archive.read(prefix + ".steps", t);
  steps_ = t.item<std::int64_t>();
  archive.read(prefix + ".lr", t);
  lr_ = t.item<double>();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    torch::Tensor m, u;
    archive.read(prefix + ".exp_avg." + std::to_string(i), m, /*is_buffer=*/true);
    archive.read(prefix + ".exp_inf." + std::to_string(i), u, /*is_buffer=*/true);
    if (!m.sizes().equals(params_[i].sizes()) || !u.sizes().equals(params_[i].sizes())) {
      fail(ErrorCode::CorruptFile, "optimizer state does not match the model");
    }
    exp_avg_[i] = m.to(params_[i].dtype());
    exp_inf_[i] = u.to(params_[i].dtype());
  }
}

double clip_grad_norm(const std::vector<torch::Tensor>& params, double max_norm) {
  return torch::nn::utils::clip_grad_norm_(params, max_norm);
}

}  // namespace cosdd
