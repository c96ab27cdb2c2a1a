#include "cosdd/ar_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <ATen/CPUGeneratorImpl.h>

#include "cosdd/error.hpp"
#include "cosdd/layers.hpp"

namespace cosdd {

namespace F = torch::nn::functional;
using torch::indexing::Slice;

namespace {

constexpr std::int64_t kFullFirstKernel = 7;

void check_pixel(PixelIndex pixel, std::int64_t rows, std::int64_t cols) {
  if (pixel.first < 0 || pixel.first >= rows || pixel.second < 0 || pixel.second >= cols) {
    fail(ErrorCode::IndexOutOfRange, "pixel (" + std::to_string(pixel.first) + ", " + std::to_string(pixel.second) +
                                         ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

// PixelCNN-style raster mask; type A excludes the centre tap.
torch::Tensor raster_mask(std::int64_t kernel, bool include_centre) {
  auto mask = torch::zeros({1, 1, kernel, kernel});
  const auto c = kernel / 2;
  mask.index_put_({0, 0, Slice(0, c), Slice()}, 1.0);
  mask.index_put_({0, 0, c, Slice(0, include_centre ? c + 1 : c)}, 1.0);
  return mask;
}

torch::nn::Conv2d fan_in_conv(std::int64_t in, std::int64_t out, std::int64_t kh, std::int64_t kw,
                              torch::ExpandingArray<2> dilation = 1, torch::ExpandingArray<2> padding = 0) {
  torch::nn::Conv2d conv(torch::nn::Conv2dOptions(in, out, {kh, kw}).dilation(dilation).padding(padding));
  init_fan_in(conv);
  return conv;
}

torch::Tensor column_at(const torch::Tensor& t, std::int64_t j) { return t.narrow(3, j, 1); }

}  // namespace

std::vector<PixelIndex> causal_context(const ReceptiveFieldSpec& spec, PixelIndex pixel, std::int64_t rows,
                                       std::int64_t cols) {
  check_pixel(pixel, rows, cols);
  const auto [i, j] = pixel;
  std::vector<PixelIndex> out;
  switch (spec.orientation) {
    case Orientation::Row:
      for (auto v = std::max<std::int64_t>(0, j - spec.length); v < j; ++v) out.emplace_back(i, v);
      break;
    case Orientation::Column:
      for (auto u = std::max<std::int64_t>(0, i - spec.length); u < i; ++u) out.emplace_back(u, j);
      break;
    case Orientation::Full:
      for (std::int64_t k = 0; k < i * cols + j; ++k) out.emplace_back(k / cols, k % cols);
      break;
  }
  return out;
}

std::int64_t RfPlan::extent() const {
  std::int64_t total = first_width;
  for (auto d : dilations) total += d;
  return total;
}

RfPlan plan_receptive_field(std::int64_t length, int n_blocks) {
  if (length < 1) fail(ErrorCode::InvalidValue, "receptive field length must be at least 1");
  if (n_blocks < 0) fail(ErrorCode::InvalidValue, "n_blocks must be non-negative");
  RfPlan plan;
  const auto blocks = static_cast<std::int64_t>(n_blocks);
  if (length - 1 < blocks) {
    plan.first_width = length;
    plan.dilations.assign(static_cast<std::size_t>(n_blocks), 0);
    return plan;
  }
  plan.dilations.assign(static_cast<std::size_t>(n_blocks), 1);
  std::int64_t spare = length - 1 - blocks;
  std::int64_t target = 2;
  for (std::size_t b = 1; b < plan.dilations.size(); b += 2, target *= 2) {
    const auto extra = std::min(target - 1, spare);
    plan.dilations[b] += extra;
    spare -= extra;
  }
  plan.first_width = 1 + spare;
  return plan;
}

LogProb gmm_log_prob(const MixtureField& field, const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != 1) fail(ErrorCode::ShapeMismatch, "gmm_log_prob expects x as [B, 1, H, W]");
  const auto& s = field.means.sizes();
  if (!field.logits.sizes().equals(s) || !field.log_scales.sizes().equals(s) || s.size() != 4 || s[0] != x.size(0) ||
      s[2] != x.size(2) || s[3] != x.size(3)) {
    fail(ErrorCode::ShapeMismatch, "mixture field and image shapes disagree");
  }
  const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const auto z = (x - field.means) * torch::exp(-field.log_scales);
  const auto component = -0.5 * z * z - field.log_scales - half_log_two_pi;
  const auto per_pixel = torch::logsumexp(torch::log_softmax(field.logits, 1) + component, 1);
  return {per_pixel, per_pixel.sum()};
}

ARDecoderImpl::ARDecoderImpl(ARDecoderConfig config, std::int64_t cond_channels) : config_(std::move(config)) {
  const auto f = static_cast<std::int64_t>(config_.filters);
  const auto k = static_cast<std::int64_t>(config_.n_components);
  const bool full = config_.rf.orientation == Orientation::Full;

  if (full) {
    plan_.first_width = kFullFirstKernel;
    std::int64_t target = 2;
    for (int b = 0; b < config_.n_blocks; ++b) {
      plan_.dilations.push_back(b % 2 == 1 ? target : 1);
      if (b % 2 == 1) target *= 2;
    }
    first_ = register_module("first", fan_in_conv(1, f, kFullFirstKernel, kFullFirstKernel, 1, kFullFirstKernel / 2));
    mask_first_ = register_buffer("mask_first", raster_mask(kFullFirstKernel, false));
    mask_block_ = register_buffer("mask_block", raster_mask(3, true));
  } else {
    plan_ = plan_receptive_field(config_.rf.length, config_.n_blocks);
    first_ = register_module("first", fan_in_conv(1, f, 1, plan_.first_width));
  }
  first_cond_ = register_module("first_cond", fan_in_conv(cond_channels, f, 1, 1));

  block_convs_ = register_module("block_convs", torch::nn::ModuleList());
  block_conds_ = register_module("block_conds", torch::nn::ModuleList());
  block_outs_ = register_module("block_outs", torch::nn::ModuleList());
  for (auto d : plan_.dilations) {
    if (full) block_convs_->push_back(fan_in_conv(f, f, 3, 3, d, d));
    else if (d > 0) block_convs_->push_back(fan_in_conv(f, f, 1, 2, {1, d}));
    else block_convs_->push_back(fan_in_conv(f, f, 1, 1));
    block_conds_->push_back(fan_in_conv(cond_channels, f, 1, 1));
    block_outs_->push_back(fan_in_conv(f, f, 1, 1));
  }
  head1_ = register_module("head1", fan_in_conv(f, f, 1, 1));
  head2_ = register_module("head2", fan_in_conv(f, 3 * k, 1, 1));
}

torch::Tensor ARDecoderImpl::trunk(const torch::Tensor& x, const torch::Tensor& decoded) {
  const bool full = config_.rf.orientation == Orientation::Full;
  const auto width = x.size(3);
  torch::Tensor h;
  if (full) {
    h = F::conv2d(x, first_->weight * mask_first_,
                  F::Conv2dFuncOptions().bias(first_->bias).padding(kFullFirstKernel / 2));
  } else {
    h = first_(F::pad(x, F::PadFuncOptions({plan_.first_width, 0, 0, 0}))).narrow(3, 0, width);
  }
  h = h + first_cond_(decoded);

  for (std::size_t b = 0; b < plan_.dilations.size(); ++b) {
    auto* conv = block_convs_[b]->as<torch::nn::Conv2dImpl>();
    const auto d = plan_.dilations[b];
    const auto a = torch::relu(h);
    torch::Tensor c;
    if (full) {
      c = F::conv2d(a, conv->weight * mask_block_,
                    F::Conv2dFuncOptions().bias(conv->bias).padding(d).dilation(d));
    } else if (d > 0) {
      c = conv->forward(F::pad(a, F::PadFuncOptions({d, 0, 0, 0})));
    } else {
      c = conv->forward(a);
    }
    c = c + block_conds_[b]->as<torch::nn::Conv2dImpl>()->forward(decoded);
    h = h + block_outs_[b]->as<torch::nn::Conv2dImpl>()->forward(torch::relu(c));
  }
  return h;
}

MixtureField ARDecoderImpl::head(const torch::Tensor& h) {
  const auto out = head2_->forward(torch::relu(head1_->forward(torch::relu(h))));
  const auto parts = out.chunk(3, 1);
  return {parts[0], parts[1], parts[2].clamp(-kLogScaleLimit, kLogScaleLimit)};
}

MixtureField ARDecoderImpl::forward(const torch::Tensor& x, const torch::Tensor& decoded) {
  if (x.dim() != 4 || x.size(1) != 1 || decoded.dim() != 4 || decoded.size(0) != x.size(0) ||
      decoded.size(2) != x.size(2) || decoded.size(3) != x.size(3)) {
    fail(ErrorCode::ShapeMismatch, "AR decoder needs x [B, 1, H, W] and a conditioning map of the same size");
  }
  if (config_.rf.orientation != Orientation::Column) return head(trunk(x, decoded));
  auto field = head(trunk(x.transpose(2, 3), decoded.transpose(2, 3)));
  return {field.logits.transpose(2, 3), field.means.transpose(2, 3), field.log_scales.transpose(2, 3)};
}

torch::Tensor ARDecoderImpl::draw(const MixtureField& field, RngStreams& rng, const SampleOptions& options) const {
  const auto h = field.means.size(2);
  const auto w = field.means.size(3);
  const auto opts = field.means.options();
  const auto u = rng.uniform({1, h, w}, opts);
  const auto eps = rng.normal({1, h, w}, opts);
  const auto cdf = torch::softmax(field.logits, 1).cumsum(1);
  const auto index = (cdf < u).sum(1, /*keepdim=*/true).clamp_max(field.components() - 1);
  const auto mean = field.means.gather(1, index);
  auto log_scale = field.log_scales.gather(1, index);
  if (options.force_log_scale) log_scale = torch::full_like(log_scale, *options.force_log_scale);
  return mean + torch::exp(log_scale) * eps;
}

torch::Tensor ARDecoderImpl::sample(const torch::Tensor& decoded, RngStreams& rng, const SampleOptions& options) {
  if (decoded.dim() != 4) fail(ErrorCode::ShapeMismatch, "conditioning map must be [B, C, H, W]");
  if (rng.size() != decoded.size(0)) fail(ErrorCode::ShapeMismatch, "need one rng stream per batch element");
  torch::NoGradGuard no_grad;
  torch::Tensor x;
  switch (config_.rf.orientation) {
    case Orientation::Row: x = sample_line(decoded, rng, options); break;
    case Orientation::Column: x = sample_line(decoded.transpose(2, 3), rng, options).transpose(2, 3); break;
    case Orientation::Full: x = sample_full(decoded, rng, options); break;
  }
  if (!torch::isfinite(x).all().item<bool>()) fail(ErrorCode::NonFiniteValues, "AR sampling produced non-finite pixels");
  return x.contiguous();
}

// Generates one column at a time across all rows, re-running each layer only
// on the taps it needs from cached lower-layer activations.
torch::Tensor ARDecoderImpl::sample_line(const torch::Tensor& decoded, RngStreams& rng, const SampleOptions& options) {
  const auto batch = decoded.size(0);
  const auto rows = decoded.size(2);
  const auto cols = decoded.size(3);
  const auto f = static_cast<std::int64_t>(config_.filters);
  const auto opts = decoded.options();
  const auto a = plan_.first_width;
  std::int64_t pad = 0;
  for (auto d : plan_.dilations) pad = std::max(pad, d);

  const auto cond0 = first_cond_(decoded);
  std::vector<torch::Tensor> conds;
  std::vector<torch::Tensor> inputs;  // each block's input activation, left-padded by `pad`
  for (std::size_t b = 0; b < plan_.dilations.size(); ++b) {
    conds.push_back(block_conds_[b]->as<torch::nn::Conv2dImpl>()->forward(decoded));
    inputs.push_back(torch::zeros({batch, f, rows, cols + pad}, opts));
  }
  auto x_pad = torch::zeros({batch, 1, rows, cols + a}, opts);

  for (std::int64_t j = 0; j < cols; ++j) {
    auto h = first_(x_pad.narrow(3, j, a)) + column_at(cond0, j);
    for (std::size_t b = 0; b < plan_.dilations.size(); ++b) {
      auto* conv = block_convs_[b]->as<torch::nn::Conv2dImpl>();
      const auto d = plan_.dilations[b];
      column_at(inputs[b], pad + j).copy_(h);
      torch::Tensor c;
      if (d > 0) {
        const auto taps = torch::relu(torch::cat({column_at(inputs[b], pad + j - d), column_at(inputs[b], pad + j)}, 3));
        c = F::conv2d(taps, conv->weight, F::Conv2dFuncOptions().bias(conv->bias));
      } else {
        c = conv->forward(torch::relu(h));
      }
      c = c + column_at(conds[b], j);
      h = h + block_outs_[b]->as<torch::nn::Conv2dImpl>()->forward(torch::relu(c));
    }
    column_at(x_pad, a + j).copy_(draw(head(h), rng, options));
  }
  return x_pad.narrow(3, a, cols);
}

torch::Tensor ARDecoderImpl::sample_full(const torch::Tensor& decoded, RngStreams& rng, const SampleOptions& options) {
  const auto rows = decoded.size(2);
  const auto cols = decoded.size(3);
  auto x = torch::zeros({decoded.size(0), 1, rows, cols}, decoded.options());
  for (std::int64_t i = 0; i < rows; ++i) {
    for (std::int64_t j = 0; j < cols; ++j) {
      const auto field = head(trunk(x, decoded));
      const auto at = [&](const torch::Tensor& t) { return t.narrow(2, i, 1).narrow(3, j, 1); };
      const MixtureField pixel{at(field.logits), at(field.means), at(field.log_scales)};
      at(x).copy_(draw(pixel, rng, options));
    }
  }
  return x;
}

torch::Tensor verify_receptive_field(ARDecoderImpl& decoder, PixelIndex pixel, std::int64_t rows, std::int64_t cols,
                                     std::uint64_t seed) {
  check_pixel(pixel, rows, cols);
  const auto weight = decoder.parameters().front();
  const auto opts = weight.options();
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  const auto cond_channels = decoder.named_parameters()["first_cond.weight"].size(1);
  auto x = at::randn({1, 1, rows, cols}, gen, opts).requires_grad_(true);
  const auto decoded = at::randn({1, cond_channels, rows, cols}, gen, opts);
  const auto field = decoder.forward(x, decoded);

  auto mask = torch::zeros({rows, cols}, torch::kBool);
  const auto [i, j] = pixel;
  for (const auto* t : {&field.logits, &field.means, &field.log_scales}) {
    for (std::int64_t k = 0; k < t->size(1); ++k) {
      const auto grads = torch::autograd::grad({(*t)[0][k][i][j]}, {x}, {}, /*retain_graph=*/true,
                                               /*create_graph=*/false, /*allow_unused=*/true);
      if (grads[0].defined()) mask |= grads[0][0][0].abs().gt(1e-8);
    }
  }
  return mask;
}

}  // namespace cosdd
