#pragma once

#include <vector>

#include <torch/torch.h>

#include "cosdd/ar_decoder.hpp"
#include "cosdd/config.hpp"
#include "cosdd/ladder_vae.hpp"

namespace cosdd {

// n_layers x (3x3 conv + ReLU), then a 1x1 projection to one channel.
class SignalDecoderImpl : public torch::nn::Module {
 public:
  SignalDecoderImpl(SignalDecoderConfig config, std::int64_t in_channels);
  torch::Tensor forward(const torch::Tensor& decoded);

 private:
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(SignalDecoder);

// Mean squared error over every pixel.
torch::Tensor signal_loss(const torch::Tensor& estimate, const torch::Tensor& x);

// Encoder + AR noise decoder + signal decoder.
class DenoiserImpl : public torch::nn::Module {
 public:
  explicit DenoiserImpl(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  LadderVae& vae() { return vae_; }
  ARDecoder& ar() { return ar_; }
  SignalDecoder& signal() { return signal_; }

  // Encoder and AR decoder parameters, trained by the ELBO.
  std::vector<torch::Tensor> vae_parameters() const;
  std::vector<torch::Tensor> signal_parameters() const;

  // Reads only the detached latent feature map, so no gradient reaches the
  // encoder through the signal estimate.
  torch::Tensor predict_signal(const LatentHierarchy& z);

  LatentHierarchy encode(const torch::Tensor& x, RngStreams& rng, const TopDownOptions& options = {});

 private:
  ModelConfig config_;
  LadderVae vae_{nullptr};
  ARDecoder ar_{nullptr};
  SignalDecoder signal_{nullptr};
};
TORCH_MODULE(Denoiser);

// Distance in pixels beyond which input pixels cannot affect a signal
// estimate, bounded by walking every convolution on the encoder-to-signal path.
std::int64_t signal_context_radius(const ModelConfig& config);

}  // namespace cosdd
