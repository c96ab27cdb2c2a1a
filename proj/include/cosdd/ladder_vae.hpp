#pragma once

#include <optional>
#include <span>
#include <vector>

#include <torch/torch.h>

#include "cosdd/config.hpp"
#include "cosdd/layers.hpp"
#include "cosdd/tensor_utils.hpp"

namespace cosdd {

inline constexpr double kLogVarLimit = 14.0;

// Diagonal Gaussian; log_var is kept within [-14, 14].
struct GaussianStats {
  torch::Tensor mean;
  torch::Tensor log_var;

  static GaussianStats from_conv_output(const torch::Tensor& stats);  // splits channels in half
};

// Elementwise KL(q || p) for diagonal Gaussians, in nats.
torch::Tensor kl_gaussian_elementwise(const GaussianStats& q, const GaussianStats& p);
// Summed over every element.
torch::Tensor kl_gaussian(const GaussianStats& q, const GaussianStats& p);

struct LatentLevel {
  torch::Tensor z;
  std::optional<GaussianStats> posterior;  // empty when sampled from the prior
  GaussianStats prior;
  std::optional<torch::Tensor> kl;         // per-sample [B] nats; empty when sampled from the prior
};

struct LatentHierarchy {
  std::vector<LatentLevel> levels;  // index 0 is the bottom (finest) level
  torch::Tensor decoded;            // top-down state at image resolution, [B, C, H, W]

  bool has_kl() const;
  // Per-sample sum of every level's KL, [B].
  torch::Tensor total_kl() const;
};

// Shape of one latent level for a given image size: {channels, rows, cols}.
std::vector<std::vector<std::int64_t>> latent_shapes(const HierarchyConfig& config, std::int64_t rows,
                                                      std::int64_t cols);

// Per-level standard-normal draws shaped like latent_shapes, [B, C_l, H_l, W_l].
std::vector<torch::Tensor> draw_latent_noise(const HierarchyConfig& config, std::int64_t rows, std::int64_t cols,
                                             RngStreams& rng, const torch::TensorOptions& options);

struct TopDownOptions {
  // Test harness hooks.
  std::optional<double> force_log_var;   // overrides both posterior and prior log-variances
  bool posterior_equals_prior = false;   // replaces posterior stats with prior stats
};

class LadderVaeImpl : public torch::nn::Module {
 public:
  explicit LadderVaeImpl(HierarchyConfig config);

  const HierarchyConfig& config() const { return config_; }

  // One feature map per level; level l is at 1 / 2^(downsamplings up to l) of the input.
  std::vector<torch::Tensor> encode_bottom_up(const torch::Tensor& x);

  LatentHierarchy sample_posterior(const std::vector<torch::Tensor>& features, std::span<const torch::Tensor> noise,
                                   const TopDownOptions& options = {});
  LatentHierarchy sample_posterior(const std::vector<torch::Tensor>& features, RngStreams& rng,
                                   const TopDownOptions& options = {});

  LatentHierarchy sample_prior(std::int64_t rows, std::int64_t cols, std::span<const torch::Tensor> noise);
  LatentHierarchy sample_prior(std::int64_t batch, std::int64_t rows, std::int64_t cols, RngStreams& rng);

  void check_divisible(std::int64_t rows, std::int64_t cols) const;

 private:
  LatentHierarchy top_down(const std::vector<torch::Tensor>* features, std::int64_t rows, std::int64_t cols,
                           std::span<const torch::Tensor> noise, const TopDownOptions& options);

  HierarchyConfig config_;
  torch::nn::Conv2d stem_{nullptr};
  ResidualBlock stem_block_{nullptr};
  torch::nn::ModuleList bu_down_, bu_blocks_;
  torch::nn::ModuleList td_pre_, td_upsample_, td_prior_, td_posterior_, td_merge_, td_post_;
  torch::nn::Conv2d final_upsample_{nullptr};
  ResidualBlock final_block_{nullptr};
};
TORCH_MODULE(LadderVae);

}  // namespace cosdd
