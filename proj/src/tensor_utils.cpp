#include "cosdd/tensor_utils.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include "cosdd/error.hpp"

namespace cosdd {

torch::Tensor to_tensor(std::span<const Image> images, torch::Dtype dtype) {
  if (images.empty()) fail(ErrorCode::TooFewImages, "cannot build a tensor from zero images");
  const auto rows = images.front().rows();
  const auto cols = images.front().cols();
  auto out = torch::empty({static_cast<std::int64_t>(images.size()), 1, rows, cols}, torch::kFloat64);
  auto* dst = out.data_ptr<double>();
  for (const auto& image : images) {
    if (image.rows() != rows || image.cols() != cols) fail(ErrorCode::ShapeMismatch, "images differ in shape");
    std::copy(image.pixels().begin(), image.pixels().end(), dst);
    dst += image.size();
  }
  return out.to(dtype);
}

torch::Tensor to_tensor(const Image& image, torch::Dtype dtype) {
  return to_tensor(std::span<const Image>(&image, 1), dtype);
}

std::vector<Image> to_images(const torch::Tensor& tensor) {
  if (tensor.dim() != 4 || tensor.size(1) != 1) fail(ErrorCode::ShapeMismatch, "expected a [B, 1, H, W] tensor");
  const auto t = tensor.detach().to(torch::kCPU, torch::kFloat64).contiguous();
  const auto rows = t.size(2);
  const auto cols = t.size(3);
  const double* src = t.data_ptr<double>();
  std::vector<Image> out;
  for (std::int64_t b = 0; b < t.size(0); ++b) {
    out.emplace_back(rows, cols, std::vector<double>(src + b * rows * cols, src + (b + 1) * rows * cols));
  }
  return out;
}

Image to_image(const torch::Tensor& tensor) {
  if (tensor.dim() == 2) return to_images(tensor.unsqueeze(0).unsqueeze(0)).front();
  if (tensor.dim() == 4 && tensor.size(0) == 1) return to_images(tensor).front();
  fail(ErrorCode::ShapeMismatch, "expected [H, W] or [1, 1, H, W]");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finaliser over the combined value
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RngStreams RngStreams::for_batch(std::uint64_t seed, std::int64_t first_index, std::int64_t count) {
  RngStreams streams;
  for (std::int64_t k = 0; k < count; ++k) {
    streams.generators_.push_back(
        at::make_generator<at::CPUGeneratorImpl>(mix_seed(seed, static_cast<std::uint64_t>(first_index + k))));
  }
  return streams;
}

RngStreams RngStreams::slice(std::int64_t begin, std::int64_t end) const {
  if (begin < 0 || end > size() || begin > end) fail(ErrorCode::IndexOutOfRange, "rng stream slice out of range");
  RngStreams out;
  out.generators_.assign(generators_.begin() + begin, generators_.begin() + end);
  return out;
}

torch::Tensor RngStreams::normal(at::IntArrayRef per_sample_shape, const torch::TensorOptions& options) {
  std::vector<torch::Tensor> draws;
  draws.reserve(generators_.size());
  const auto cpu = options.device(torch::kCPU);
  for (auto& gen : generators_) draws.push_back(at::randn(per_sample_shape, gen, cpu));
  return torch::stack(draws).to(options.device());
}

torch::Tensor RngStreams::uniform(at::IntArrayRef per_sample_shape, const torch::TensorOptions& options) {
  std::vector<torch::Tensor> draws;
  draws.reserve(generators_.size());
  const auto cpu = options.device(torch::kCPU);
  for (auto& gen : generators_) draws.push_back(at::rand(per_sample_shape, gen, cpu));
  return torch::stack(draws).to(options.device());
}

void set_deterministic_mode(bool enabled) {
  if (enabled) torch::set_num_threads(1);
  at::globalContext().setDeterministicAlgorithms(enabled, /*warn_only=*/false);
}

}  // namespace cosdd
