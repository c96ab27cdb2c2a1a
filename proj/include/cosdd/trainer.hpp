#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "cosdd/adamax.hpp"
#include "cosdd/config.hpp"
#include "cosdd/data_pipeline.hpp"
#include "cosdd/model.hpp"

namespace cosdd {

struct LossBreakdown {
  double recon_nats = 0.0;  // per pixel
  double kl_nats = 0.0;     // per pixel, summed over levels
  double elbo_nats = 0.0;   // recon + kl
  double signal_mse = 0.0;
  std::int64_t step = 0;
};

// Differentiable terms of one loss evaluation.
struct ElboTerms {
  torch::Tensor recon;
  torch::Tensor kl;            // reported value
  torch::Tensor kl_objective;  // what is minimised; differs from kl only with free bits
  torch::Tensor signal_mse;

  LossBreakdown values(std::int64_t step = 0) const;
};

struct ElboOptions {
  TopDownOptions top_down;
  double free_bits = 0.0;
  // Test hook applied to the decoder output before scoring.
  std::function<MixtureField(const MixtureField&, const torch::Tensor& x)> field_hook;
};

// One posterior sample per image. Throws NonFiniteLoss.
ElboTerms elbo(DenoiserImpl& model, const torch::Tensor& x, RngStreams& rng, const ElboOptions& options = {});

struct Optimizers {
  Adamax vae;
  Adamax signal;

  Optimizers(DenoiserImpl& model, double lr);
  void set_lr(double lr);
};

struct StepOptions {
  bool update_vae = true;
  bool update_signal = true;
  bool single_pass = false;  // evaluate the whole batch at once instead of in virtual sub-batches
};

// Batch statistics in batch norm are always taken over groups of
// batch_size / virtual_batches samples, so single_pass and accumulated steps
// are interchangeable. Throws NonFiniteLoss without touching parameters.
LossBreakdown training_step(DenoiserImpl& model, Optimizers& optimizers, const torch::Tensor& batch,
                            RngStreams& rng, const TrainConfig& config, const StepOptions& options = {});

// Decays lr after `patience` epochs without improvement and signals a stop
// after `stop_patience` epochs without improvement.
class PlateauSchedule {
 public:
  PlateauSchedule(double lr, int patience, double factor, int stop_patience);

  // Returns true when training should stop.
  bool observe(double value);

  double lr() const { return lr_; }
  double best() const { return best_; }
  int bad_epochs() const { return bad_epochs_; }
  int epochs_since_best() const { return since_best_; }
  bool improved() const { return improved_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  int stop_patience_;
  double best_;
  int bad_epochs_ = 0;
  int since_best_ = 0;
  bool improved_ = false;
};

struct TrainingState {
  RunConfig config;
  NormStats norm;
  std::int64_t step = 0;
  Denoiser model;
  Optimizers optimizers;

  // Model weights are drawn from config.train.seed.
  TrainingState(RunConfig config, NormStats norm);
};

struct FitOptions {
  std::optional<std::filesystem::path> metrics_csv;
  // Replaces the validation ELBO; used to drive the schedule in tests.
  std::function<double(std::int64_t epoch)> validation_stub;
  std::function<void(const std::string&)> progress;
};

struct FitResult {
  std::int64_t steps = 0;
  std::int64_t epochs = 0;
  std::int64_t skipped_steps = 0;
  double best_val_elbo = 0.0;
  bool early_stopped = false;
  std::vector<double> lr_history;  // lr after each epoch
};

// Trains on normalized stacks, keeping the best-validation parameters in `state`.
FitResult fit(TrainingState& state, const ImageStack& train, const ImageStack& val, const FitOptions& options = {});

// Mean ELBO over deterministic crops of `images`, evaluation mode, fixed noise.
LossBreakdown evaluate_elbo(DenoiserImpl& model, const ImageStack& images, const TrainConfig& config,
                            std::uint64_t seed);

inline constexpr const char* kMetricsHeader = "step,recon_nats,kl_nats,elbo_nats,signal_mse,lr,split";

}  // namespace cosdd
