#pragma once

#include <torch/torch.h>

namespace cosdd {

// Batch normalisation whose training-mode statistics are taken over groups of
// `group_size` samples (0 = the whole batch). Running averages are updated
// once per group, in order, so a batch processed in one pass behaves exactly
// like the same batch fed as consecutive sub-batches of `group_size`.
class GroupedBatchNorm2dImpl : public torch::nn::Module {
 public:
  explicit GroupedBatchNorm2dImpl(std::int64_t channels, double momentum = 0.1, double eps = 1e-5);

  torch::Tensor forward(const torch::Tensor& x);

  void set_group_size(std::int64_t group_size) { group_size_ = group_size; }
  std::int64_t group_size() const { return group_size_; }

 private:
  double momentum_;
  double eps_;
  std::int64_t group_size_ = 0;
  torch::Tensor weight_, bias_, running_mean_, running_var_;
};
TORCH_MODULE(GroupedBatchNorm2d);

// a * sigmoid(g), with (a, g) produced by one 3x3 convolution.
class GatedBlockImpl : public torch::nn::Module {
 public:
  explicit GatedBlockImpl(std::int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv_{nullptr};
};
TORCH_MODULE(GatedBlock);

// x + gate(mish(bn(conv(mish(bn(conv(x))))))).
class ResidualBlockImpl : public torch::nn::Module {
 public:
  ResidualBlockImpl(std::int64_t channels, bool batch_norm);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
  GroupedBatchNorm2d bn1_{nullptr}, bn2_{nullptr};
  GatedBlock gate_{nullptr};
  bool batch_norm_;
};
TORCH_MODULE(ResidualBlock);

torch::nn::Conv2d make_conv(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride = 1);

// N(0, gain^2 / fan_in) weights, zero bias.
void init_fan_in(torch::nn::Conv2d& conv, double gain = 1.0);
void init_zero(torch::nn::Conv2d& conv);

// Applies set_group_size to every GroupedBatchNorm2d below `module`.
void set_batch_norm_group_size(torch::nn::Module& module, std::int64_t group_size);

}  // namespace cosdd
