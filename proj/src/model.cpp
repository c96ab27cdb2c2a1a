#include "cosdd/model.hpp"

#include "cosdd/error.hpp"
#include "cosdd/layers.hpp"

namespace cosdd {

SignalDecoderImpl::SignalDecoderImpl(SignalDecoderConfig config, std::int64_t in_channels) {
  body_ = torch::nn::Sequential();
  auto channels = in_channels;
  for (int l = 0; l < config.n_layers; ++l) {
    body_->push_back(make_conv(channels, config.filters, 3));
    body_->push_back(torch::nn::ReLU());
    channels = config.filters;
  }
  body_->push_back(make_conv(channels, 1, 1));
  body_ = register_module("body", body_);
}

torch::Tensor SignalDecoderImpl::forward(const torch::Tensor& decoded) { return body_->forward(decoded); }

torch::Tensor signal_loss(const torch::Tensor& estimate, const torch::Tensor& x) {
  if (!estimate.sizes().equals(x.sizes())) fail(ErrorCode::ShapeMismatch, "signal estimate and image shapes differ");
  return (estimate - x).pow(2).mean();
}

DenoiserImpl::DenoiserImpl(ModelConfig config) : config_(std::move(config)) {
  validate(config_);
  const auto hidden = static_cast<std::int64_t>(config_.hierarchy.hidden_channels);
  vae_ = register_module("vae", LadderVae(config_.hierarchy));
  ar_ = register_module("ar", ARDecoder(config_.ar, hidden));
  signal_ = register_module("signal", SignalDecoder(config_.signal, hidden));
}

std::vector<torch::Tensor> DenoiserImpl::vae_parameters() const {
  auto params = vae_->parameters();
  for (auto& p : ar_->parameters()) params.push_back(p);
  return params;
}

std::vector<torch::Tensor> DenoiserImpl::signal_parameters() const { return signal_->parameters(); }

torch::Tensor DenoiserImpl::predict_signal(const LatentHierarchy& z) { return signal_(z.decoded.detach()); }

LatentHierarchy DenoiserImpl::encode(const torch::Tensor& x, RngStreams& rng, const TopDownOptions& options) {
  return vae_->sample_posterior(vae_->encode_bottom_up(x), rng, options);
}

std::int64_t signal_context_radius(const ModelConfig& config) {
  constexpr std::int64_t block = 3;  // three 3x3 convs per residual block
  const auto& h = config.hierarchy;
  std::vector<std::int64_t> scale(static_cast<std::size_t>(h.n_levels));
  std::int64_t r = 2 + block;  // 5x5 stem
  std::int64_t s = 1;
  for (int l = 0; l < h.n_levels; ++l) {
    if (h.downsamples_at(l)) {
      r += 2 * s;  // strided conv plus grid alignment
      s *= 2;
    }
    r += block * s;
    scale[static_cast<std::size_t>(l)] = s;
  }
  for (int l = h.n_levels - 1; l >= 0; --l) {
    const auto sl = scale[static_cast<std::size_t>(l)];
    if (l != h.n_levels - 1) {
      r += block * scale[static_cast<std::size_t>(l + 1)];
      if (h.downsamples_at(l + 1)) r += 2 * sl;
    }
    r += sl + block * sl;  // latent statistics conv, residual block
  }
  if (h.downsamples_at(0)) r += 2;
  return r + block + config.signal.n_layers;
}

}  // namespace cosdd
