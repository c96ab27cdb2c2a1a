#include "cosdd/layers.hpp"

#include <cmath>

namespace cosdd {

GroupedBatchNorm2dImpl::GroupedBatchNorm2dImpl(std::int64_t channels, double momentum, double eps)
    : momentum_(momentum), eps_(eps) {
  weight_ = register_parameter("weight", torch::ones({channels}));
  bias_ = register_parameter("bias", torch::zeros({channels}));
  running_mean_ = register_buffer("running_mean", torch::zeros({channels}));
  running_var_ = register_buffer("running_var", torch::ones({channels}));
}

torch::Tensor GroupedBatchNorm2dImpl::forward(const torch::Tensor& x) {
  const auto channels = x.size(1);
  const auto shape = std::vector<std::int64_t>{1, channels, 1, 1};
  if (!is_training()) {
    return (x - running_mean_.view(shape)) * torch::rsqrt(running_var_.view(shape) + eps_) * weight_.view(shape) +
           bias_.view(shape);
  }
  const auto batch = x.size(0);
  const std::int64_t group = (group_size_ > 0 && batch > group_size_ && batch % group_size_ == 0) ? group_size_ : batch;
  const auto n_groups = batch / group;
  const auto grouped = x.view({n_groups, group, channels, x.size(2), x.size(3)});
  const auto mean = grouped.mean({1, 3, 4}, /*keepdim=*/true);
  const auto var = (grouped - mean).pow(2).mean({1, 3, 4}, /*keepdim=*/true);
  auto normed = ((grouped - mean) * torch::rsqrt(var + eps_)).view_as(x);

  {
    torch::NoGradGuard no_grad;
    const double n = static_cast<double>(group * x.size(2) * x.size(3));
    const double unbias = n > 1 ? n / (n - 1) : 1.0;
    const auto means = mean.view({n_groups, channels});
    const auto vars = var.view({n_groups, channels});
    for (std::int64_t g = 0; g < n_groups; ++g) {
      running_mean_.mul_(1 - momentum_).add_(means[g].to(running_mean_.dtype()), momentum_);
      running_var_.mul_(1 - momentum_).add_(vars[g].to(running_var_.dtype()) * unbias, momentum_);
    }
  }
  return normed * weight_.view(shape) + bias_.view(shape);
}

torch::nn::Conv2d make_conv(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride) {
  torch::nn::Conv2d conv(torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2));
  init_fan_in(conv);
  return conv;
}

void init_fan_in(torch::nn::Conv2d& conv, double gain) {
  torch::NoGradGuard no_grad;
  const auto& w = conv->weight;
  const double fan_in = static_cast<double>(w.size(1) * w.size(2) * w.size(3));
  w.normal_(0.0, gain / std::sqrt(fan_in));
  if (conv->bias.defined()) conv->bias.zero_();
}

void init_zero(torch::nn::Conv2d& conv) {
  torch::NoGradGuard no_grad;
  conv->weight.zero_();
  if (conv->bias.defined()) conv->bias.zero_();
}

GatedBlockImpl::GatedBlockImpl(std::int64_t channels) {
  conv_ = register_module("conv", make_conv(channels, 2 * channels, 3));
}

torch::Tensor GatedBlockImpl::forward(const torch::Tensor& x) {
  const auto parts = conv_(x).chunk(2, 1);
  return parts[0] * torch::sigmoid(parts[1]);
}

ResidualBlockImpl::ResidualBlockImpl(std::int64_t channels, bool batch_norm) : batch_norm_(batch_norm) {
  conv1_ = register_module("conv1", make_conv(channels, channels, 3));
  conv2_ = register_module("conv2", make_conv(channels, channels, 3));
  if (batch_norm_) {
    bn1_ = register_module("bn1", GroupedBatchNorm2d(channels));
    bn2_ = register_module("bn2", GroupedBatchNorm2d(channels));
  }
  gate_ = register_module("gate", GatedBlock(channels));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  auto y = conv1_(x);
  if (batch_norm_) y = bn1_(y);
  y = torch::mish(y);
  y = conv2_(y);
  if (batch_norm_) y = bn2_(y);
  y = torch::mish(y);
  return x + gate_(y);
}

void set_batch_norm_group_size(torch::nn::Module& module, std::int64_t group_size) {
  for (auto& child : module.modules(/*include_self=*/true)) {
    if (auto* bn = child->as<GroupedBatchNorm2dImpl>()) bn->set_group_size(group_size);
  }
}

}  // namespace cosdd
