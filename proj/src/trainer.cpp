#include "cosdd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "cosdd/error.hpp"
#include "cosdd/layers.hpp"
#include "cosdd/tensor_utils.hpp"

namespace cosdd {

namespace {

bool finite(const torch::Tensor& t) { return torch::isfinite(t).all().item<bool>(); }

// Parameters and buffers, cloned, in registration order.
std::vector<torch::Tensor> snapshot(const torch::nn::Module& module) {
  std::vector<torch::Tensor> out;
  torch::NoGradGuard no_grad;
  for (const auto& p : module.parameters()) out.push_back(p.detach().clone());
  for (const auto& b : module.buffers()) out.push_back(b.detach().clone());
  return out;
}

void restore(torch::nn::Module& module, const std::vector<torch::Tensor>& saved) {
  torch::NoGradGuard no_grad;
  std::size_t i = 0;
  for (auto& p : module.parameters()) p.copy_(saved[i++]);
  for (auto& b : module.buffers()) b.copy_(saved[i++]);
}

void write_row(std::ofstream* out, const LossBreakdown& loss, double lr, const char* split) {
  if (!out) return;
  *out << loss.step << ',' << loss.recon_nats << ',' << loss.kl_nats << ',' << loss.elbo_nats << ','
       << loss.signal_mse << ',' << lr << ',' << split << '\n';
}

// Largest centred square-ish window shared by every image and divisible by `factor`.
std::pair<std::int64_t, std::int64_t> validation_window(const ImageStack& images, std::int64_t crop,
                                                        std::int64_t factor) {
  std::int64_t rows = crop, cols = crop;
  for (const auto& image : images.images) {
    rows = std::min(rows, image.rows());
    cols = std::min(cols, image.cols());
  }
  rows -= rows % factor;
  cols -= cols % factor;
  if (rows < factor || cols < factor) fail(ErrorCode::CropTooLarge, "validation images are smaller than the model's downsampling factor");
  return {rows, cols};
}

}  // namespace

LossBreakdown ElboTerms::values(std::int64_t step) const {
  LossBreakdown out;
  out.recon_nats = recon.item<double>();
  out.kl_nats = kl.item<double>();
  out.elbo_nats = out.recon_nats + out.kl_nats;
  out.signal_mse = signal_mse.item<double>();
  out.step = step;
  return out;
}

ElboTerms elbo(DenoiserImpl& model, const torch::Tensor& x, RngStreams& rng, const ElboOptions& options) {
  const auto z = model.encode(x, rng, options.top_down);
  auto field = model.ar()->forward(x, z.decoded);
  if (options.field_hook) field = options.field_hook(field, x);

  const double pixels = static_cast<double>(x.size(2) * x.size(3));
  ElboTerms terms;
  terms.recon = -gmm_log_prob(field, x).per_pixel.mean();
  const double batch = static_cast<double>(x.size(0));
  torch::Tensor kl_sum = torch::zeros({}, x.options());
  torch::Tensor kl_objective = torch::zeros({}, x.options());
  for (const auto& level : z.levels) {
    const auto level_kl = level.kl->sum() / batch;  // nats per image
    kl_sum = kl_sum + level_kl;
    if (options.free_bits > 0.0) kl_objective = kl_objective + level_kl.clamp_min(options.free_bits);
  }
  terms.kl = kl_sum / pixels;
  terms.kl_objective = options.free_bits > 0.0 ? kl_objective / pixels : terms.kl;
  terms.signal_mse = signal_loss(model.predict_signal(z), x);

  if (!finite(terms.recon) || !finite(terms.kl) || !finite(terms.signal_mse)) {
    fail(ErrorCode::NonFiniteLoss, "non-finite loss");
  }
  return terms;
}

Optimizers::Optimizers(DenoiserImpl& model, double lr)
    : vae(model.vae_parameters(), lr), signal(model.signal_parameters(), lr) {}

void Optimizers::set_lr(double lr) {
  vae.set_lr(lr);
  signal.set_lr(lr);
}

LossBreakdown training_step(DenoiserImpl& model, Optimizers& optimizers, const torch::Tensor& batch,
                            RngStreams& rng, const TrainConfig& config, const StepOptions& options) {
  const auto n = batch.size(0);
  const auto virtual_batches = static_cast<std::int64_t>(config.virtual_batches);
  if (n % virtual_batches != 0) fail(ErrorCode::InvalidValue, "virtual batch count must divide the batch");
  if (rng.size() != n) fail(ErrorCode::ShapeMismatch, "need one rng stream per batch element");

  model.train();
  set_batch_norm_group_size(model, n / virtual_batches);
  optimizers.vae.zero_grad();
  optimizers.signal.zero_grad();

  const auto passes = options.single_pass ? std::int64_t{1} : virtual_batches;
  const auto chunk = n / passes;
  ElboOptions elbo_options;
  elbo_options.free_bits = config.free_bits;
  LossBreakdown total;
  bool ok = true;
  for (std::int64_t p = 0; p < passes && ok; ++p) {
    auto sub_rng = rng.slice(p * chunk, (p + 1) * chunk);
    ElboTerms terms;
    try {
      terms = elbo(model, batch.narrow(0, p * chunk, chunk), sub_rng, elbo_options);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteLoss && e.code() != ErrorCode::NonFiniteStats) throw;
      ok = false;
      break;
    }
    const double weight = static_cast<double>(chunk) / static_cast<double>(n);
    torch::Tensor loss = torch::zeros({}, batch.options());
    if (options.update_vae) loss = loss + (terms.recon + terms.kl_objective) * weight;
    if (options.update_signal) loss = loss + terms.signal_mse * weight;
    if (loss.requires_grad()) loss.backward();
    const auto v = terms.values();
    total.recon_nats += v.recon_nats * weight;
    total.kl_nats += v.kl_nats * weight;
    total.signal_mse += v.signal_mse * weight;
  }
  total.elbo_nats = total.recon_nats + total.kl_nats;

  if (ok) {
    if (options.update_vae) ok = std::isfinite(clip_grad_norm(optimizers.vae.params(), config.grad_clip));
    if (ok && options.update_signal) ok = std::isfinite(clip_grad_norm(optimizers.signal.params(), config.grad_clip));
  }
  if (!ok) {
    optimizers.vae.zero_grad();
    optimizers.signal.zero_grad();
    fail(ErrorCode::NonFiniteLoss, "non-finite loss or gradient; step skipped");
  }
  if (options.update_vae) optimizers.vae.step();
  if (options.update_signal) optimizers.signal.step();
  return total;
}

PlateauSchedule::PlateauSchedule(double lr, int patience, double factor, int stop_patience)
    : lr_(lr), patience_(patience), factor_(factor), stop_patience_(stop_patience),
      best_(std::numeric_limits<double>::infinity()) {}

bool PlateauSchedule::observe(double value) {
  improved_ = value < best_;
  if (improved_) {
    best_ = value;
    bad_epochs_ = 0;
    since_best_ = 0;
    return false;
  }
  ++bad_epochs_;
  ++since_best_;
  if (bad_epochs_ >= patience_) {
    lr_ /= factor_;
    bad_epochs_ = 0;
  }
  return since_best_ >= stop_patience_;
}

namespace {

Denoiser seeded_model(const RunConfig& config) {
  torch::manual_seed(config.train.seed);
  return Denoiser(config.model);
}

}  // namespace

TrainingState::TrainingState(RunConfig config_in, NormStats norm_in)
    : config(std::move(config_in)), norm(norm_in), model(seeded_model(config)), optimizers(*model, config.train.lr) {}

LossBreakdown evaluate_elbo(DenoiserImpl& model, const ImageStack& images, const TrainConfig& config,
                            std::uint64_t seed) {
  if (images.empty()) fail(ErrorCode::TooFewImages, "validation set is empty");
  const auto factor = static_cast<std::int64_t>(model.config().hierarchy.total_downsampling());
  const auto [rows, cols] = validation_window(images, config.crop, factor);

  std::vector<Image> crops;
  for (const auto& image : images.images) {
    crops.push_back(crop(image, (image.rows() - rows) / 2, (image.cols() - cols) / 2, rows, cols));
  }

  const bool was_training = model.is_training();
  model.eval();
  torch::NoGradGuard no_grad;
  LossBreakdown total;
  double count = 0.0;
  const auto batch = static_cast<std::size_t>(std::max(1, config.batch_size));
  for (int s = 0; s < std::max(1, config.val_samples); ++s) {
    for (std::size_t first = 0; first < crops.size(); first += batch) {
      const auto size = std::min(batch, crops.size() - first);
      const auto x = to_tensor(std::span<const Image>(crops).subspan(first, size));
      auto rng = RngStreams::for_batch(mix_seed(seed, static_cast<std::uint64_t>(s)), static_cast<std::int64_t>(first),
                                       static_cast<std::int64_t>(size));
      const auto v = elbo(model, x, rng).values();
      const double w = static_cast<double>(size);
      total.recon_nats += v.recon_nats * w;
      total.kl_nats += v.kl_nats * w;
      total.signal_mse += v.signal_mse * w;
      count += w;
    }
  }
  total.recon_nats /= count;
  total.kl_nats /= count;
  total.signal_mse /= count;
  total.elbo_nats = total.recon_nats + total.kl_nats;
  model.train(was_training);
  return total;
}

FitResult fit(TrainingState& state, const ImageStack& train, const ImageStack& val, const FitOptions& options) {
  const auto& cfg = state.config.train;
  validate(cfg);
  if (train.empty()) fail(ErrorCode::TooFewImages, "training set is empty");
  if (val.empty() && !options.validation_stub) fail(ErrorCode::TooFewImages, "validation set is empty");

  auto& model = *state.model;
  std::optional<std::ofstream> metrics;
  if (options.metrics_csv) {
    metrics.emplace(*options.metrics_csv);
    if (!*metrics) fail(ErrorCode::UnreadableFile, "cannot write " + options.metrics_csv->string());
    *metrics << kMetricsHeader << '\n';
    *metrics << std::setprecision(9);
  }
  std::ofstream* out = metrics ? &*metrics : nullptr;

  const auto n = train.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const auto steps_per_epoch = static_cast<std::int64_t>((n + batch - 1) / batch);
  const CropSpec crop_spec{cfg.crop, cfg.crop, cfg.seed};
  const std::int64_t vae_steps = cfg.two_stage ? std::max<std::int64_t>(1, cfg.max_steps / 2) : cfg.max_steps;
  const std::uint64_t val_seed = mix_seed(cfg.seed, 0x7a11da7eULL);

  Rng data_rng(mix_seed(cfg.seed, 0xda7aULL));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  PlateauSchedule schedule(cfg.lr, cfg.plateau_patience, cfg.decay_factor, cfg.early_stop_patience);
  state.optimizers.set_lr(cfg.lr);
  std::vector<torch::Tensor> best;
  FitResult result;
  std::int64_t attempts = 0;
  int nonfinite_run = 0;

  while (attempts < cfg.max_steps) {
    std::shuffle(order.begin(), order.end(), data_rng);
    for (std::int64_t s = 0; s < steps_per_epoch && attempts < cfg.max_steps; ++s) {
      std::vector<Image> crops;
      for (std::size_t k = 0; k < batch; ++k) {
        crops.push_back(random_crop(train.images[order[(static_cast<std::size_t>(s) * batch + k) % n]], crop_spec, data_rng));
      }
      const auto x = to_tensor(crops);
      auto rng = RngStreams::for_batch(mix_seed(cfg.seed, static_cast<std::uint64_t>(attempts) + 1), 0,
                                       static_cast<std::int64_t>(batch));
      StepOptions step_options;
      if (cfg.two_stage) {
        step_options.update_vae = attempts < vae_steps;
        step_options.update_signal = !step_options.update_vae;
      }
      ++attempts;
      try {
        auto loss = training_step(model, state.optimizers, x, rng, cfg, step_options);
        loss.step = ++state.step;
        ++result.steps;
        nonfinite_run = 0;
        write_row(out, loss, state.optimizers.vae.lr(), "train");
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NonFiniteLoss) throw;
        ++result.skipped_steps;
        if (options.progress) options.progress("step " + std::to_string(attempts) + " skipped: " + e.what());
        if (++nonfinite_run > cfg.max_nonfinite_steps) {
          fail(ErrorCode::NonFiniteLoss, "more than " + std::to_string(cfg.max_nonfinite_steps) +
                                             " consecutive non-finite steps");
        }
      }
    }
    ++result.epochs;

    double val_elbo = 0.0;
    if (options.validation_stub) {
      val_elbo = options.validation_stub(result.epochs);
    } else {
      auto v = evaluate_elbo(model, val, cfg, val_seed);
      v.step = state.step;
      val_elbo = v.elbo_nats;
      write_row(out, v, state.optimizers.vae.lr(), "val");
    }
    const bool stop = schedule.observe(val_elbo);
    if (schedule.improved()) {
      best = snapshot(model);
      result.best_val_elbo = val_elbo;
    }
    state.optimizers.set_lr(schedule.lr());
    result.lr_history.push_back(schedule.lr());
    if (options.progress) {
      std::ostringstream msg;
      msg << "epoch " << result.epochs << " step " << state.step << " val_elbo " << val_elbo << " lr " << schedule.lr();
      options.progress(msg.str());
    }
    if (stop) {
      result.early_stopped = true;
      break;
    }
  }

  if (!best.empty()) restore(model, best);
  model.eval();
  return result;
}

}  // namespace cosdd
