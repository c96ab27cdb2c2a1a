#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <torch/torch.h>

#include "cosdd/image.hpp"

namespace cosdd {

// Stacks equally shaped images into a [B, 1, H, W] tensor.
torch::Tensor to_tensor(std::span<const Image> images, torch::Dtype dtype = torch::kFloat32);
torch::Tensor to_tensor(const Image& image, torch::Dtype dtype = torch::kFloat32);

// Accepts [B, 1, H, W]; returns one image per batch element.
std::vector<Image> to_images(const torch::Tensor& tensor);
// Accepts [H, W] or a single-element batch.
Image to_image(const torch::Tensor& tensor);

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

// One intra-op thread and deterministic kernels, so repeated runs match bitwise.
void set_deterministic_mode(bool enabled);

// One generator per batch element, so the random numbers a sample sees do
// not depend on how the batch is split or which other samples it shares a
// batch with.
class RngStreams {
 public:
  RngStreams() = default;
  static RngStreams for_batch(std::uint64_t seed, std::int64_t first_index, std::int64_t count);

  std::int64_t size() const noexcept { return static_cast<std::int64_t>(generators_.size()); }
  // Shares generator state with the parent.
  RngStreams slice(std::int64_t begin, std::int64_t end) const;

  // Returns [size(), per_sample_shape...] with each slice drawn from its own stream.
  torch::Tensor normal(at::IntArrayRef per_sample_shape, const torch::TensorOptions& options);
  torch::Tensor uniform(at::IntArrayRef per_sample_shape, const torch::TensorOptions& options);

 private:
  std::vector<at::Generator> generators_;
};

}  // namespace cosdd
