#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cosdd/config.hpp"
#include "cosdd/data_pipeline.hpp"
#include "cosdd/evaluation.hpp"
#include "cosdd/model.hpp"
#include "cosdd/trainer.hpp"

namespace cosdd {

// Procedural clean images with a noisy copy from the configured recipe.
struct DeskCorpus {
  ImageStack clean;
  ImageStack noisy;

  std::size_t size() const { return clean.size(); }
  // Images [begin, end) of both stacks.
  DeskCorpus slice(std::size_t begin, std::size_t end) const;
};

DeskCorpus make_desk_corpus(std::size_t count, std::int64_t size, const NoiseConfig& noise, std::uint64_t seed);

// Splits `noisy` into train/validation, normalizes with training statistics
// and runs fit.
TrainingState train_on_stack(const RunConfig& config, const ImageStack& noisy, const FitOptions& options = {});

struct DenoiseScores {
  double psnr_noisy = 0.0;     // mean over images
  double psnr_denoised = 0.0;  // mean over images
  double estimate_std = 0.0;   // pixelwise std of the estimates across images, averaged over pixels
  double dataset_std = 0.0;    // pixel std of the noisy images
  std::vector<Image> estimates;
};

// data_range follows default_data_range(clean, synthetic_unit_range).
DenoiseScores score_denoiser(DenoiserImpl& model, const NormStats& norm, const DeskCorpus& test, int n_samples,
                             std::uint64_t seed, bool synthetic_unit_range = true);

struct AblationRow {
  ReceptiveFieldSpec rf;
  std::optional<DenoiseScores> scores;  // empty when training or scoring failed
  std::string error;
  double train_seconds = 0.0;
};

struct AblationOptions {
  RunConfig base;
  std::vector<ReceptiveFieldSpec> fields;
  int n_samples = 25;
  std::uint64_t seed = 0;
  std::function<void(const std::string&)> progress;
};

// Trains one model per receptive field on `train.noisy` and scores it on
// `test`. A failing row records its error and the remaining rows still run.
std::vector<AblationRow> rf_ablation(const DeskCorpus& train, const DeskCorpus& test, const AblationOptions& options);

void write_ablation_csv(std::span<const AblationRow> rows, const std::filesystem::path& path);
// Bar-style PSNR plot, one column block per row.
void write_ablation_plot(std::span<const AblationRow> rows, const std::filesystem::path& path);

struct CollapseResult {
  double estimate_std = 0.0;  // pixelwise std of head outputs across inputs, averaged over pixels
  double dataset_std = 0.0;   // pixel std of the training images
  double final_loss = 0.0;
};

// Trains a fresh signal head on latents drawn from the prior, so z carries no
// information about x, then measures how much its output still varies.
// `images` are normalized and share one shape divisible by the downsampling factor.
CollapseResult uninformative_latent_collapse(const ModelConfig& config, const ImageStack& images, int steps,
                                             int batch_size, std::uint64_t seed);

struct NoiseReportOptions {
  int max_lag = 5;
  std::vector<double> bin_edges = uniform_bin_edges(0.1, 0.9, 4);
  int n_samples = 25;  // denoising samples used as pseudo ground truth when no clean image is given
  std::uint64_t seed = 0;
  bool untrained = false;
};

struct NoiseReport {
  AutocorrMap real_autocorr;
  AutocorrMap resampled_autocorr;
  SignalDependenceProfile real_profile;
  SignalDependenceProfile resampled_profile;
  double autocorr_cosine = 0.0;          // over the whole map
  double autocorr_cosine_off_zero = 0.0; // lag (0, 0) excluded
  double max_bin_std_rel_diff = 0.0;     // over bins reliable in both profiles
  int compared_bins = 0;
  bool exact_residuals = false;          // residuals taken against ground truth
  bool untrained = false;
  Image example_noisy;
  Image example_resampled;
  Image example_real_residual;
  Image example_resampled_residual;
};

// Both residuals are taken against one reference signal s: `clean` when given,
// otherwise the model's denoised estimate. Real residuals are x - s, resampled
// residuals x' - s with x' = resample_noisy(x). Both are binned by s.
NoiseReport noise_reconstruction_report(DenoiserImpl& model, const NormStats& norm, std::span<const Image> noisy,
                                        std::span<const Image> clean, const NoiseReportOptions& options);

// CSV profiles, autocorrelation tables, a summary and PNG panels.
void write_noise_report(const NoiseReport& report, const std::filesystem::path& dir);

}  // namespace cosdd
