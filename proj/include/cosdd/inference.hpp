#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <torch/torch.h>

#include "cosdd/data_pipeline.hpp"
#include "cosdd/image.hpp"
#include "cosdd/model.hpp"

namespace cosdd {

inline constexpr int kDefaultSamples = 100;

// Tiles agree with whole-image inference exactly once overlap reaches
// signal_context_radius; the error decays quickly below that.
struct TileSpec {
  std::int64_t size = 256;    // core size, a multiple of the downsampling factor
  std::int64_t overlap = 40;  // context on each side, at least the AR receptive-field length
};

struct DenoiseRequest {
  int n_samples = kDefaultSamples;
  std::uint64_t seed = 0;
  std::optional<TileSpec> tile;
  int batch = 10;  // posterior samples evaluated together
  bool clip_to_input_range = false;
};

// Posterior signal estimates for one normalized image [1, 1, H, W] with H and W
// divisible by the downsampling factor. Sample k always uses rng stream k of
// `seed`, so results do not depend on batching. Returns [count, 1, H, W].
torch::Tensor posterior_signal_samples(DenoiserImpl& model, const torch::Tensor& x, std::uint64_t seed,
                                       std::int64_t first, std::int64_t count,
                                       const std::optional<TileSpec>& tile = std::nullopt);

// Mean of n_samples posterior signal estimates, in the input's units.
Image denoise(DenoiserImpl& model, const NormStats& norm, const Image& image, const DenoiseRequest& request = {});

// n independent posterior signal estimates, in the input's units.
std::vector<Image> sample_solutions(DenoiserImpl& model, const NormStats& norm, const Image& image, int n,
                                    std::uint64_t seed, int batch = 10);

// Draws z from the posterior and then a fresh noisy image from the AR decoder.
Image resample_noisy(DenoiserImpl& model, const NormStats& norm, const Image& image, std::uint64_t seed);

// One posterior draw for `image`; the decoded feature map conditions both decoders.
LatentHierarchy posterior_draw(DenoiserImpl& model, const NormStats& norm, const Image& image, std::uint64_t seed);

// Mean of L AR decoder samples given a fixed decoded feature map [1, C, H, W].
// Normalized units.
torch::Tensor ar_mean_signal(DenoiserImpl& model, const torch::Tensor& decoded, int L, std::uint64_t seed,
                             int batch = 50);

}  // namespace cosdd
