#include "cosdd/inference.hpp"

#include <algorithm>

#include "cosdd/error.hpp"
#include "cosdd/tensor_utils.hpp"

namespace cosdd {

namespace F = torch::nn::functional;

namespace {

std::int64_t round_up(std::int64_t v, std::int64_t m) { return (v + m - 1) / m * m; }

struct Padded {
  torch::Tensor x;  // normalized, replicate-padded to a multiple of the downsampling factor
  std::int64_t rows, cols;
};

Padded prepare(DenoiserImpl& model, const NormStats& norm, const Image& image) {
  if (image.empty()) fail(ErrorCode::ShapeMismatch, "cannot denoise an empty image");
  if (!all_finite(image)) fail(ErrorCode::NonFiniteValues, "input image has non-finite pixels");
  const auto factor = static_cast<std::int64_t>(model.config().hierarchy.total_downsampling());
  auto x = to_tensor(norm.normalize(image));
  const auto pad_rows = round_up(image.rows(), factor) - image.rows();
  const auto pad_cols = round_up(image.cols(), factor) - image.cols();
  if (pad_rows > 0 || pad_cols > 0) {
    x = F::pad(x, F::PadFuncOptions({0, pad_cols, 0, pad_rows}).mode(torch::kReplicate));
  }
  return {x, image.rows(), image.cols()};
}

Image finish(const torch::Tensor& estimate, const Padded& p, const NormStats& norm, const Image& image, bool clip) {
  auto out = norm.denormalize(to_image(estimate.narrow(2, 0, p.rows).narrow(3, 0, p.cols)));
  if (clip) {
    const double lo = min_value(image), hi = max_value(image);
    for (auto& v : out.pixels()) v = std::clamp(v, lo, hi);
  }
  return out;
}

// Signal estimates for a window of the padded image using the matching slice of
// full-image latent noise.
torch::Tensor estimate_window(DenoiserImpl& model, const torch::Tensor& x, const std::vector<torch::Tensor>& noise) {
  const auto count = noise.front().size(0);
  auto features = model.vae()->encode_bottom_up(x);
  for (auto& f : features) f = f.expand({count, -1, -1, -1});
  const auto z = model.vae()->sample_posterior(features, noise);
  return model.predict_signal(z);
}

}  // namespace

torch::Tensor posterior_signal_samples(DenoiserImpl& model, const torch::Tensor& x, std::uint64_t seed,
                                       std::int64_t first, std::int64_t count, const std::optional<TileSpec>& tile) {
  if (x.dim() != 4 || x.size(0) != 1 || x.size(1) != 1) fail(ErrorCode::ShapeMismatch, "expected one [1, 1, H, W] image");
  const auto& hierarchy = model.config().hierarchy;
  const auto rows = x.size(2), cols = x.size(3);
  model.vae()->check_divisible(rows, cols);
  model.eval();
  torch::NoGradGuard no_grad;

  auto rng = RngStreams::for_batch(seed, first, count);
  const auto noise = draw_latent_noise(hierarchy, rows, cols, rng, x.options());
  if (!tile) return estimate_window(model, x, noise);

  const auto factor = static_cast<std::int64_t>(hierarchy.total_downsampling());
  if (tile->size < factor || tile->size % factor != 0) {
    fail(ErrorCode::InvalidValue, "tile size must be a positive multiple of " + std::to_string(factor));
  }
  const auto& rf = model.config().ar.rf;
  const std::int64_t min_overlap = rf.orientation == Orientation::Full ? 0 : rf.length;
  if (tile->overlap < min_overlap) {
    fail(ErrorCode::InvalidValue, "tile overlap must be at least the receptive-field length " + std::to_string(min_overlap));
  }
  std::vector<std::int64_t> scale;
  for (const auto& shape : latent_shapes(hierarchy, rows, cols)) scale.push_back(rows / shape[1]);

  auto out = torch::empty({count, 1, rows, cols}, x.options());
  for (std::int64_t r0 = 0; r0 < rows; r0 += tile->size) {
    for (std::int64_t c0 = 0; c0 < cols; c0 += tile->size) {
      const auto r1 = std::min(rows, r0 + tile->size), c1 = std::min(cols, c0 + tile->size);
      const auto wr0 = std::max<std::int64_t>(0, r0 - tile->overlap) / factor * factor;
      const auto wc0 = std::max<std::int64_t>(0, c0 - tile->overlap) / factor * factor;
      const auto wr1 = std::min(rows, round_up(r1 + tile->overlap, factor));
      const auto wc1 = std::min(cols, round_up(c1 + tile->overlap, factor));
      std::vector<torch::Tensor> window_noise;
      for (std::size_t l = 0; l < noise.size(); ++l) {
        const auto s = scale[l];
        window_noise.push_back(noise[l].narrow(2, wr0 / s, (wr1 - wr0) / s).narrow(3, wc0 / s, (wc1 - wc0) / s));
      }
      const auto window = x.narrow(2, wr0, wr1 - wr0).narrow(3, wc0, wc1 - wc0);
      const auto est = estimate_window(model, window, window_noise);
      out.narrow(2, r0, r1 - r0).narrow(3, c0, c1 - c0).copy_(est.narrow(2, r0 - wr0, r1 - r0).narrow(3, c0 - wc0, c1 - c0));
    }
  }
  return out;
}

Image denoise(DenoiserImpl& model, const NormStats& norm, const Image& image, const DenoiseRequest& request) {
  if (request.n_samples < 1) fail(ErrorCode::InvalidValue, "n_samples must be >= 1");
  const auto p = prepare(model, norm, image);
  auto sum = torch::zeros({1, 1, p.x.size(2), p.x.size(3)}, torch::kFloat64);
  const auto batch = std::max(1, request.batch);
  for (int first = 0; first < request.n_samples; first += batch) {
    const auto count = std::min(batch, request.n_samples - first);
    sum += posterior_signal_samples(model, p.x, request.seed, first, count, request.tile)
               .to(torch::kFloat64)
               .sum(0, /*keepdim=*/true);
  }
  return finish(sum / static_cast<double>(request.n_samples), p, norm, image, request.clip_to_input_range);
}

std::vector<Image> sample_solutions(DenoiserImpl& model, const NormStats& norm, const Image& image, int n,
                                    std::uint64_t seed, int batch) {
  if (n < 1) fail(ErrorCode::InvalidValue, "n must be >= 1");
  const auto p = prepare(model, norm, image);
  std::vector<Image> out;
  batch = std::max(1, batch);
  for (int first = 0; first < n; first += batch) {
    const auto count = std::min(batch, n - first);
    const auto samples = posterior_signal_samples(model, p.x, seed, first, count).to(torch::kFloat64);
    for (std::int64_t k = 0; k < count; ++k) out.push_back(finish(samples.narrow(0, k, 1), p, norm, image, false));
  }
  return out;
}

LatentHierarchy posterior_draw(DenoiserImpl& model, const NormStats& norm, const Image& image, std::uint64_t seed) {
  const auto p = prepare(model, norm, image);
  model.eval();
  torch::NoGradGuard no_grad;
  auto rng = RngStreams::for_batch(seed, 0, 1);
  return model.encode(p.x, rng);
}

Image resample_noisy(DenoiserImpl& model, const NormStats& norm, const Image& image, std::uint64_t seed) {
  const auto p = prepare(model, norm, image);
  model.eval();
  torch::NoGradGuard no_grad;
  auto latent_rng = RngStreams::for_batch(seed, 0, 1);
  const auto z = model.encode(p.x, latent_rng);
  auto pixel_rng = RngStreams::for_batch(mix_seed(seed, 1), 0, 1);
  const auto x = model.ar()->sample(z.decoded, pixel_rng);
  return finish(x, p, norm, image, false);
}

torch::Tensor ar_mean_signal(DenoiserImpl& model, const torch::Tensor& decoded, int L, std::uint64_t seed, int batch) {
  if (L < 1) fail(ErrorCode::InvalidValue, "L must be >= 1");
  if (decoded.dim() != 4 || decoded.size(0) != 1) fail(ErrorCode::ShapeMismatch, "expected one [1, C, H, W] map");
  model.eval();
  torch::NoGradGuard no_grad;
  auto sum = torch::zeros({1, 1, decoded.size(2), decoded.size(3)}, torch::kFloat64);
  batch = std::max(1, batch);
  for (int first = 0; first < L; first += batch) {
    const auto count = std::min(batch, L - first);
    auto rng = RngStreams::for_batch(seed, first, count);
    sum += model.ar()->sample(decoded.expand({count, -1, -1, -1}), rng).to(torch::kFloat64).sum(0, true);
  }
  return (sum / static_cast<double>(L)).to(decoded.dtype());
}

}  // namespace cosdd
