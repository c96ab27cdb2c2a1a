#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "cosdd/config.hpp"
#include "cosdd/tensor_utils.hpp"

namespace cosdd {

inline constexpr double kLogScaleLimit = 7.0;

using PixelIndex = std::pair<std::int64_t, std::int64_t>;

// Pixels the decoder may condition on when predicting (i, j), in row-major order.
std::vector<PixelIndex> causal_context(const ReceptiveFieldSpec& spec, PixelIndex pixel, std::int64_t rows,
                                       std::int64_t cols);

// Layout of the 1-D causal stack: a first layer reading offsets -1..-first_width,
// then one two-tap block {0, -d} per dilation (d = 0 means a pointwise block).
// The offsets add up to exactly the requested length.
struct RfPlan {
  std::int64_t first_width = 1;
  std::vector<std::int64_t> dilations;

  std::int64_t extent() const;
};
RfPlan plan_receptive_field(std::int64_t length, int n_blocks);

// Per-pixel Gaussian mixture, each [B, K, H, W].
struct MixtureField {
  torch::Tensor logits;
  torch::Tensor means;
  torch::Tensor log_scales;

  std::int64_t components() const { return logits.size(1); }
};

struct LogProb {
  torch::Tensor per_pixel;  // [B, H, W]
  torch::Tensor total;      // scalar sum
};
LogProb gmm_log_prob(const MixtureField& field, const torch::Tensor& x);

struct SampleOptions {
  std::optional<double> force_log_scale;  // replaces every predicted log-scale
};

class ARDecoderImpl : public torch::nn::Module {
 public:
  ARDecoderImpl(ARDecoderConfig config, std::int64_t cond_channels);

  const ARDecoderConfig& config() const { return config_; }
  const RfPlan& plan() const { return plan_; }

  // Teacher-forced pass. x is [B, 1, H, W]; decoded is [B, C, H, W].
  MixtureField forward(const torch::Tensor& x, const torch::Tensor& decoded);

  // Draws one image per batch element, pixel by pixel along the AR axis.
  torch::Tensor sample(const torch::Tensor& decoded, RngStreams& rng, const SampleOptions& options = {});

 private:
  torch::Tensor trunk(const torch::Tensor& x, const torch::Tensor& decoded);
  MixtureField head(const torch::Tensor& h);
  torch::Tensor sample_line(const torch::Tensor& decoded, RngStreams& rng, const SampleOptions& options);
  torch::Tensor sample_full(const torch::Tensor& decoded, RngStreams& rng, const SampleOptions& options);
  torch::Tensor draw(const MixtureField& field, RngStreams& rng, const SampleOptions& options) const;

  ARDecoderConfig config_;
  RfPlan plan_;
  torch::nn::Conv2d first_{nullptr}, first_cond_{nullptr};
  torch::nn::ModuleList block_convs_, block_conds_, block_outs_;
  torch::nn::Conv2d head1_{nullptr}, head2_{nullptr};
  torch::Tensor mask_first_, mask_block_;  // full orientation only
};
TORCH_MODULE(ARDecoder);

// mask[u, v] is true when some mixture parameter at `pixel` has a gradient above
// 1e-8 with respect to x[u, v]. Uses random x and a random conditioning map.
torch::Tensor verify_receptive_field(ARDecoderImpl& decoder, PixelIndex pixel, std::int64_t rows, std::int64_t cols,
                                     std::uint64_t seed = 0);

}  // namespace cosdd
