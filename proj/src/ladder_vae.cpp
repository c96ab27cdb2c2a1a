#include "cosdd/ladder_vae.hpp"

#include <cmath>

#include "cosdd/error.hpp"

namespace cosdd {

GaussianStats GaussianStats::from_conv_output(const torch::Tensor& stats) {
  auto parts = stats.chunk(2, 1);
  return {parts[0], parts[1].clamp(-kLogVarLimit, kLogVarLimit)};
}

torch::Tensor kl_gaussian_elementwise(const GaussianStats& q, const GaussianStats& p) {
  if (!q.mean.sizes().equals(p.mean.sizes()) || !q.log_var.sizes().equals(p.log_var.sizes()) ||
      !q.mean.sizes().equals(q.log_var.sizes())) {
    fail(ErrorCode::ShapeMismatch, "kl_gaussian needs equally shaped statistics");
  }
  const auto var_ratio = torch::exp(q.log_var - p.log_var);
  const auto mean_term = (p.mean - q.mean).pow(2) * torch::exp(-p.log_var);
  return 0.5 * (var_ratio + mean_term - 1.0 + p.log_var - q.log_var);
}

torch::Tensor kl_gaussian(const GaussianStats& q, const GaussianStats& p) { return kl_gaussian_elementwise(q, p).sum(); }

bool LatentHierarchy::has_kl() const {
  for (const auto& level : levels) {
    if (!level.kl) return false;
  }
  return !levels.empty();
}

torch::Tensor LatentHierarchy::total_kl() const {
  if (!has_kl()) fail(ErrorCode::NonFiniteStats, "KL is undefined for latents drawn from the prior");
  torch::Tensor total = *levels.front().kl;
  for (std::size_t l = 1; l < levels.size(); ++l) total = total + *levels[l].kl;
  return total;
}

std::vector<std::vector<std::int64_t>> latent_shapes(const HierarchyConfig& config, std::int64_t rows,
                                                      std::int64_t cols) {
  std::vector<std::vector<std::int64_t>> shapes;
  for (int level = 0; level < config.n_levels; ++level) {
    if (config.downsamples_at(level)) {
      rows /= 2;
      cols /= 2;
    }
    shapes.push_back({config.latent_dims[static_cast<std::size_t>(level)], rows, cols});
  }
  return shapes;
}

std::vector<torch::Tensor> draw_latent_noise(const HierarchyConfig& config, std::int64_t rows, std::int64_t cols,
                                             RngStreams& rng, const torch::TensorOptions& options) {
  const auto shapes = latent_shapes(config, rows, cols);
  // Draw sample by sample, level by level, so every stream is consumed in the
  // same order regardless of batch composition.
  std::vector<std::vector<torch::Tensor>> per_level(shapes.size());
  for (std::int64_t b = 0; b < rng.size(); ++b) {
    auto stream = rng.slice(b, b + 1);
    for (std::size_t l = 0; l < shapes.size(); ++l) per_level[l].push_back(stream.normal(shapes[l], options));
  }
  std::vector<torch::Tensor> noise;
  for (auto& draws : per_level) noise.push_back(torch::cat(draws, 0));
  return noise;
}

namespace {

torch::nn::Conv2d zero_conv(std::int64_t in, std::int64_t out, std::int64_t kernel) {
  torch::nn::Conv2d conv(torch::nn::Conv2dOptions(in, out, kernel).padding(kernel / 2));
  init_zero(conv);
  return conv;
}

torch::Tensor upsample2(const torch::Tensor& x) {
  return torch::nn::functional::interpolate(
      x, torch::nn::functional::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
}

}  // namespace

LadderVaeImpl::LadderVaeImpl(HierarchyConfig config) : config_(std::move(config)) {
  ModelConfig check;
  check.hierarchy = config_;
  validate(check);
  const auto c = static_cast<std::int64_t>(config_.hidden_channels);
  const bool bn = config_.batch_norm;

  stem_ = register_module("stem", make_conv(1, c, 5));
  stem_block_ = register_module("stem_block", ResidualBlock(c, bn));

  bu_down_ = register_module("bu_down", torch::nn::ModuleList());
  bu_blocks_ = register_module("bu_blocks", torch::nn::ModuleList());
  td_pre_ = register_module("td_pre", torch::nn::ModuleList());
  td_upsample_ = register_module("td_upsample", torch::nn::ModuleList());
  td_prior_ = register_module("td_prior", torch::nn::ModuleList());
  td_posterior_ = register_module("td_posterior", torch::nn::ModuleList());
  td_merge_ = register_module("td_merge", torch::nn::ModuleList());
  td_post_ = register_module("td_post", torch::nn::ModuleList());

  const int top = config_.n_levels - 1;
  for (int l = 0; l < config_.n_levels; ++l) {
    const auto dim = static_cast<std::int64_t>(config_.latent_dims[static_cast<std::size_t>(l)]);
    if (config_.downsamples_at(l)) bu_down_->push_back(make_conv(c, c, 3, 2));
    else bu_down_->push_back(torch::nn::Identity());
    bu_blocks_->push_back(ResidualBlock(c, bn));

    if (l == top) {
      td_pre_->push_back(torch::nn::Identity());
      td_upsample_->push_back(torch::nn::Identity());
      td_prior_->push_back(torch::nn::Identity());  // fixed standard normal
      td_posterior_->push_back(zero_conv(c, 2 * dim, 3));
    } else {
      td_pre_->push_back(ResidualBlock(c, bn));
      if (config_.downsamples_at(l + 1)) td_upsample_->push_back(make_conv(c, c, 3));
      else td_upsample_->push_back(torch::nn::Identity());
      td_prior_->push_back(zero_conv(c, 2 * dim, 3));
      td_posterior_->push_back(zero_conv(2 * c, 2 * dim, 3));
    }
    td_merge_->push_back(make_conv(dim, c, 1));
    td_post_->push_back(ResidualBlock(c, bn));
  }
  if (config_.downsamples_at(0)) final_upsample_ = register_module("final_upsample", make_conv(c, c, 3));
  final_block_ = register_module("final_block", ResidualBlock(c, bn));
}

void LadderVaeImpl::check_divisible(std::int64_t rows, std::int64_t cols) const {
  const auto factor = static_cast<std::int64_t>(config_.total_downsampling());
  if (rows < factor || cols < factor || rows % factor != 0 || cols % factor != 0) {
    fail(ErrorCode::ShapeNotDivisible, std::to_string(rows) + "x" + std::to_string(cols) +
                                           " is not divisible by the downsampling factor " + std::to_string(factor));
  }
}

std::vector<torch::Tensor> LadderVaeImpl::encode_bottom_up(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != 1) fail(ErrorCode::ShapeMismatch, "encoder expects [B, 1, H, W]");
  check_divisible(x.size(2), x.size(3));
  auto h = stem_block_(torch::mish(stem_(x)));
  std::vector<torch::Tensor> features;
  for (int l = 0; l < config_.n_levels; ++l) {
    if (config_.downsamples_at(l)) h = bu_down_[l]->as<torch::nn::Conv2dImpl>()->forward(h);
    h = bu_blocks_[l]->as<ResidualBlockImpl>()->forward(h);
    features.push_back(h);
  }
  return features;
}

LatentHierarchy LadderVaeImpl::sample_posterior(const std::vector<torch::Tensor>& features,
                                                std::span<const torch::Tensor> noise, const TopDownOptions& options) {
  if (static_cast<int>(features.size()) != config_.n_levels) {
    fail(ErrorCode::ShapeMismatch, "need one feature map per level");
  }
  const auto factor = config_.total_downsampling();
  const auto& top = features.back();
  return top_down(&features, top.size(2) * factor, top.size(3) * factor, noise, options);
}

LatentHierarchy LadderVaeImpl::sample_posterior(const std::vector<torch::Tensor>& features, RngStreams& rng,
                                                const TopDownOptions& options) {
  const auto factor = config_.total_downsampling();
  const auto& top = features.back();
  if (rng.size() != top.size(0)) fail(ErrorCode::ShapeMismatch, "need one rng stream per batch element");
  const auto noise = draw_latent_noise(config_, top.size(2) * factor, top.size(3) * factor, rng, top.options());
  return sample_posterior(features, noise, options);
}

LatentHierarchy LadderVaeImpl::sample_prior(std::int64_t rows, std::int64_t cols, std::span<const torch::Tensor> noise) {
  check_divisible(rows, cols);
  return top_down(nullptr, rows, cols, noise, {});
}

LatentHierarchy LadderVaeImpl::sample_prior(std::int64_t batch, std::int64_t rows, std::int64_t cols, RngStreams& rng) {
  check_divisible(rows, cols);
  if (rng.size() != batch) fail(ErrorCode::ShapeMismatch, "need one rng stream per batch element");
  const auto options = stem_->weight.options();
  const auto noise = draw_latent_noise(config_, rows, cols, rng, options);
  return sample_prior(rows, cols, noise);
}

LatentHierarchy LadderVaeImpl::top_down(const std::vector<torch::Tensor>* features, std::int64_t rows,
                                        std::int64_t cols, std::span<const torch::Tensor> noise,
                                        const TopDownOptions& options) {
  if (static_cast<int>(noise.size()) != config_.n_levels) fail(ErrorCode::ShapeMismatch, "need noise for every level");
  const auto shapes = latent_shapes(config_, rows, cols);
  LatentHierarchy out;
  out.levels.resize(static_cast<std::size_t>(config_.n_levels));
  const int top = config_.n_levels - 1;
  torch::Tensor h;

  for (int l = top; l >= 0; --l) {
    const auto idx = static_cast<std::size_t>(l);
    const auto& eps = noise[idx];
    if (eps.size(1) != shapes[idx][0] || eps.size(2) != shapes[idx][1] || eps.size(3) != shapes[idx][2]) {
      fail(ErrorCode::ShapeMismatch, "latent noise shape does not match level " + std::to_string(l));
    }

    GaussianStats prior;
    if (l == top) {
      prior = {torch::zeros_like(eps), torch::zeros_like(eps)};
    } else {
      h = td_pre_[static_cast<std::size_t>(l)]->as<ResidualBlockImpl>()->forward(h);
      if (config_.downsamples_at(l + 1)) {
        h = td_upsample_[idx]->as<torch::nn::Conv2dImpl>()->forward(upsample2(h));
      }
      prior = GaussianStats::from_conv_output(td_prior_[idx]->as<torch::nn::Conv2dImpl>()->forward(h));
    }

    std::optional<GaussianStats> posterior;
    if (features) {
      const auto& bu = (*features)[idx];
      const auto input = l == top ? bu : torch::cat({h, bu}, 1);
      posterior = GaussianStats::from_conv_output(td_posterior_[idx]->as<torch::nn::Conv2dImpl>()->forward(input));
      if (options.posterior_equals_prior) posterior = prior;
    }
    if (options.force_log_var) {
      prior.log_var = torch::full_like(prior.mean, *options.force_log_var);
      if (posterior) posterior->log_var = torch::full_like(posterior->mean, *options.force_log_var);
    }

    const GaussianStats& source = posterior ? *posterior : prior;
    if (!torch::isfinite(source.mean).all().item<bool>() || !torch::isfinite(source.log_var).all().item<bool>()) {
      fail(ErrorCode::NonFiniteStats, "non-finite latent statistics at level " + std::to_string(l));
    }
    auto z = source.mean + torch::exp(0.5 * source.log_var) * eps;

    LatentLevel level{z, posterior, prior, std::nullopt};
    if (posterior) level.kl = kl_gaussian_elementwise(*posterior, prior).sum({1, 2, 3});
    out.levels[idx] = std::move(level);

    const auto merged = td_merge_[idx]->as<torch::nn::Conv2dImpl>()->forward(z);
    h = l == top ? merged : h + merged;
    h = td_post_[idx]->as<ResidualBlockImpl>()->forward(h);
  }

  if (config_.downsamples_at(0)) h = final_upsample_(upsample2(h));
  out.decoded = final_block_(h);
  return out;
}

}  // namespace cosdd
