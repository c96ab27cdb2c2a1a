#include "cosdd/diagnostics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "cosdd/error.hpp"
#include "cosdd/image_io.hpp"
#include "cosdd/inference.hpp"
#include "cosdd/noise_synthesis.hpp"
#include "cosdd/tensor_utils.hpp"

namespace cosdd {

namespace {

double pixel_std(std::span<const Image> images) {
  double sum = 0.0, sq = 0.0, n = 0.0;
  for (const auto& image : images) {
    for (double v : image.pixels()) {
      sum += v;
      sq += v * v;
      n += 1.0;
    }
  }
  if (n < 2) return 0.0;
  const double mean = sum / n;
  return std::sqrt(std::max(0.0, sq / n - mean * mean));
}

// Per-pixel std across images of the first image's shape, averaged over pixels.
double across_image_std(std::span<const Image> images) {
  if (images.size() < 2) return 0.0;
  const auto& first = images.front();
  std::vector<double> sum(first.pixels().size(), 0.0), sq(first.pixels().size(), 0.0);
  double n = 0.0;
  for (const auto& image : images) {
    if (!image.same_shape(first)) continue;
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += image.pixels()[i];
      sq[i] += image.pixels()[i] * image.pixels()[i];
    }
    n += 1.0;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    const double mean = sum[i] / n;
    total += std::sqrt(std::max(0.0, sq[i] / n - mean * mean));
  }
  return total / static_cast<double>(sum.size());
}

std::vector<double> off_zero(const AutocorrMap& map) {
  std::vector<double> out;
  for (int dy = -map.max_lag; dy <= map.max_lag; ++dy) {
    for (int dx = -map.max_lag; dx <= map.max_lag; ++dx) {
      if (dy != 0 || dx != 0) out.push_back(map.at(dy, dx));
    }
  }
  return out;
}

void write_autocorr_csv(const AutocorrMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out << "dy,dx,value\n" << std::setprecision(9);
  for (int dy = -map.max_lag; dy <= map.max_lag; ++dy) {
    for (int dx = -map.max_lag; dx <= map.max_lag; ++dx) out << dy << ',' << dx << ',' << map.at(dy, dx) << '\n';
  }
}

void write_profile_csv(const SignalDependenceProfile& real, const SignalDependenceProfile& resampled,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out << "lower,upper,real_count,real_mean,real_std,real_reliable,resampled_count,resampled_mean,resampled_std,"
         "resampled_reliable\n"
      << std::setprecision(9);
  for (std::size_t k = 0; k < real.bins.size(); ++k) {
    const auto& a = real.bins[k];
    const auto& b = resampled.bins[k];
    out << a.lower << ',' << a.upper << ',' << a.count << ',' << a.residual_mean << ',' << a.residual_std << ','
        << a.reliable << ',' << b.count << ',' << b.residual_mean << ',' << b.residual_std << ',' << b.reliable << '\n';
  }
}

void save_symmetric_preview(const Image& image, const std::filesystem::path& path) {
  double bound = 0.0;
  for (double v : image.pixels()) bound = std::max(bound, std::abs(v));
  if (bound == 0.0) bound = 1.0;
  save_preview_png(image, path, -bound, bound);
}

}  // namespace

DeskCorpus DeskCorpus::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) fail(ErrorCode::IndexOutOfRange, "corpus slice out of range");
  DeskCorpus out;
  for (std::size_t k = begin; k < end; ++k) {
    out.clean.push_back(clean.images[k], clean.source_ids[k]);
    out.noisy.push_back(noisy.images[k], noisy.source_ids[k]);
  }
  return out;
}

DeskCorpus make_desk_corpus(std::size_t count, std::int64_t size, const NoiseConfig& noise, std::uint64_t seed) {
  DeskCorpus corpus;
  corpus.clean = procedural_textures(count, size, size, seed);
  Rng rng(mix_seed(seed, 0x0015e));
  for (std::size_t k = 0; k < count; ++k) {
    corpus.noisy.push_back(apply_recipe(corpus.clean.images[k], noise, rng), corpus.clean.source_ids[k]);
  }
  return corpus;
}

TrainingState train_on_stack(const RunConfig& config, const ImageStack& noisy, const FitOptions& options) {
  const auto [train, val] = split_train_val(noisy, config.train.val_fraction, config.train.seed);
  const auto norm = compute_norm_stats(train);
  TrainingState state(config, norm);
  fit(state, norm.normalize(train), norm.normalize(val), options);
  return state;
}

DenoiseScores score_denoiser(DenoiserImpl& model, const NormStats& norm, const DeskCorpus& test, int n_samples,
                             std::uint64_t seed, bool synthetic_unit_range) {
  if (test.size() == 0) fail(ErrorCode::TooFewImages, "no test images");
  DenoiseScores scores;
  for (std::size_t k = 0; k < test.size(); ++k) {
    const auto& clean = test.clean.images[k];
    const auto& noisy = test.noisy.images[k];
    DenoiseRequest request;
    request.n_samples = n_samples;
    request.seed = mix_seed(seed, k);
    auto estimate = denoise(model, norm, noisy, request);
    const double range = default_data_range(clean, synthetic_unit_range);
    scores.psnr_noisy += psnr(clean, noisy, range);
    scores.psnr_denoised += psnr(clean, estimate, range);
    scores.estimates.push_back(std::move(estimate));
  }
  scores.psnr_noisy /= static_cast<double>(test.size());
  scores.psnr_denoised /= static_cast<double>(test.size());
  scores.estimate_std = across_image_std(scores.estimates);
  scores.dataset_std = pixel_std(test.noisy.images);
  return scores;
}

std::vector<AblationRow> rf_ablation(const DeskCorpus& train, const DeskCorpus& test, const AblationOptions& options) {
  std::vector<AblationRow> rows;
  for (const auto& rf : options.fields) {
    AblationRow row;
    row.rf = rf;
    const std::string label = std::string(to_string(rf.orientation)) +
                              (rf.orientation == Orientation::Full ? "" : " " + std::to_string(rf.length));
    if (options.progress) options.progress("training " + label);
    const auto start = std::chrono::steady_clock::now();
    try {
      auto config = options.base;
      config.model.ar.rf = rf;
      FitOptions fit_options;
      if (options.progress) fit_options.progress = [&](const std::string& m) { options.progress(label + ": " + m); };
      auto state = train_on_stack(config, train.noisy, fit_options);
      row.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      row.scores = score_denoiser(*state.model, state.norm, test, options.n_samples, options.seed);
      if (options.progress) {
        options.progress(label + ": psnr " + std::to_string(row.scores->psnr_denoised) + " dB");
      }
    } catch (const std::exception& e) {
      row.error = e.what();
      if (options.progress) options.progress(label + " failed: " + row.error);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(std::span<const AblationRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out << "orientation,length,psnr_noisy,psnr_denoised,estimate_std,dataset_std,train_seconds,error\n"
      << std::setprecision(9);
  for (const auto& row : rows) {
    out << to_string(row.rf.orientation) << ',';
    if (row.rf.orientation == Orientation::Full) out << "full";
    else out << row.rf.length;
    if (row.scores) {
      out << ',' << row.scores->psnr_noisy << ',' << row.scores->psnr_denoised << ',' << row.scores->estimate_std << ','
          << row.scores->dataset_std;
    } else {
      out << ",,,,";
    }
    std::string error = row.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '\n', ' ');
    out << ',' << row.train_seconds << ',' << error << '\n';
  }
}

void write_ablation_plot(std::span<const AblationRow> rows, const std::filesystem::path& path) {
  constexpr std::int64_t kBar = 24, kGap = 8, kHeight = 200;
  const auto n = static_cast<std::int64_t>(rows.size());
  Image plot(kHeight, std::max<std::int64_t>(1, n * (kBar + kGap) + kGap), 1.0);
  double top = 1.0;
  for (const auto& row : rows) {
    if (row.scores) top = std::max(top, row.scores->psnr_denoised);
  }
  for (std::int64_t k = 0; k < n; ++k) {
    const auto& row = rows[static_cast<std::size_t>(k)];
    if (!row.scores) continue;
    const auto height = static_cast<std::int64_t>(std::max(0.0, row.scores->psnr_denoised) / top * (kHeight - 10));
    const auto left = kGap + k * (kBar + kGap);
    for (std::int64_t i = kHeight - height; i < kHeight; ++i) {
      for (std::int64_t j = left; j < left + kBar; ++j) plot(i, j) = 0.2;
    }
    // Noisy baseline as a horizontal tick.
    const auto base = static_cast<std::int64_t>(std::max(0.0, row.scores->psnr_noisy) / top * (kHeight - 10));
    const auto tick = std::clamp<std::int64_t>(kHeight - 1 - base, 0, kHeight - 1);
    for (std::int64_t j = left; j < left + kBar; ++j) plot(tick, j) = 0.7;
  }
  save_preview_png(plot, path, 0.0, 1.0);
}

CollapseResult uninformative_latent_collapse(const ModelConfig& config, const ImageStack& images, int steps,
                                             int batch_size, std::uint64_t seed) {
  if (images.size() < 2) fail(ErrorCode::TooFewImages, "collapse probe needs at least 2 images");
  const auto rows = images.images.front().rows(), cols = images.images.front().cols();
  for (const auto& image : images.images) {
    if (image.rows() != rows || image.cols() != cols) fail(ErrorCode::MixedShapes, "collapse probe needs equal shapes");
  }
  torch::manual_seed(seed);
  Denoiser model(config);
  model->eval();
  Adamax optimizer(model->signal_parameters(), 0.002);
  Rng rng(mix_seed(seed, 0xc011));
  std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
  const auto batch = static_cast<std::int64_t>(batch_size);

  CollapseResult result;
  for (int step = 0; step < steps; ++step) {
    std::vector<Image> chosen;
    for (std::int64_t b = 0; b < batch; ++b) chosen.push_back(images.images[pick(rng)]);
    const auto x = to_tensor(chosen);
    torch::Tensor decoded;
    {
      torch::NoGradGuard no_grad;
      auto streams = RngStreams::for_batch(mix_seed(seed, static_cast<std::uint64_t>(step) + 1), 0, batch);
      decoded = model->vae()->sample_prior(batch, rows, cols, streams).decoded;
    }
    optimizer.zero_grad();
    auto loss = signal_loss(model->signal()(decoded), x);
    loss.backward();
    optimizer.step();
    result.final_loss = loss.item<double>();
  }

  torch::NoGradGuard no_grad;
  const std::int64_t n_eval = 32;
  auto streams = RngStreams::for_batch(mix_seed(seed, 0xe7a1), 0, n_eval);
  const auto out = model->signal()(model->vae()->sample_prior(n_eval, rows, cols, streams).decoded);
  result.estimate_std = out.std(0, /*unbiased=*/false).mean().item<double>();
  result.dataset_std = pixel_std(images.images);
  return result;
}

NoiseReport noise_reconstruction_report(DenoiserImpl& model, const NormStats& norm, std::span<const Image> noisy,
                                        std::span<const Image> clean, const NoiseReportOptions& options) {
  if (noisy.empty()) fail(ErrorCode::TooFewImages, "noise report needs at least one image");
  if (!clean.empty() && clean.size() != noisy.size()) {
    fail(ErrorCode::ShapeMismatch, "clean and noisy image counts differ");
  }
  NoiseReport report;
  report.untrained = options.untrained;
  report.exact_residuals = !clean.empty();

  std::vector<Image> real_residuals, resampled_residuals, signals;
  for (std::size_t k = 0; k < noisy.size(); ++k) {
    const auto& x = noisy[k];
    Image s;
    if (!clean.empty()) {
      if (!clean[k].same_shape(x)) fail(ErrorCode::ShapeMismatch, "clean and noisy shapes differ");
      s = clean[k];
    } else {
      DenoiseRequest request;
      request.n_samples = options.n_samples;
      request.seed = mix_seed(options.seed, 2 * k);
      s = denoise(model, norm, x, request);
    }
    auto resampled = resample_noisy(model, norm, x, mix_seed(options.seed, 2 * k + 1));
    real_residuals.push_back(x - s);
    resampled_residuals.push_back(resampled - s);
    if (k == 0) {
      report.example_noisy = x;
      report.example_resampled = resampled;
    }
    signals.push_back(std::move(s));
  }
  report.example_real_residual = real_residuals.front();
  report.example_resampled_residual = resampled_residuals.front();

  report.real_autocorr = spatial_autocorrelation(real_residuals, options.max_lag);
  report.resampled_autocorr = spatial_autocorrelation(resampled_residuals, options.max_lag);
  report.autocorr_cosine = cosine_similarity(report.real_autocorr.values, report.resampled_autocorr.values);
  report.autocorr_cosine_off_zero = cosine_similarity(off_zero(report.real_autocorr), off_zero(report.resampled_autocorr));

  report.real_profile = signal_dependence(real_residuals, signals, options.bin_edges);
  report.resampled_profile = signal_dependence(resampled_residuals, signals, options.bin_edges);
  for (std::size_t b = 0; b < report.real_profile.bins.size(); ++b) {
    const auto& a = report.real_profile.bins[b];
    const auto& r = report.resampled_profile.bins[b];
    if (!a.reliable || !r.reliable || a.residual_std <= 0.0) continue;
    report.max_bin_std_rel_diff = std::max(report.max_bin_std_rel_diff, std::abs(r.residual_std - a.residual_std) / a.residual_std);
    ++report.compared_bins;
  }
  return report;
}

void write_noise_report(const NoiseReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_autocorr_csv(report.real_autocorr, dir / "autocorr_real.csv");
  write_autocorr_csv(report.resampled_autocorr, dir / "autocorr_resampled.csv");
  write_profile_csv(report.real_profile, report.resampled_profile, dir / "signal_dependence.csv");
  {
    std::ofstream out(dir / "summary.txt");
    if (!out) fail(ErrorCode::UnreadableFile, "cannot write " + (dir / "summary.txt").string());
    out << std::setprecision(9);
    out << "untrained = " << (report.untrained ? "true" : "false") << '\n';
    out << "exact_residuals = " << (report.exact_residuals ? "true" : "false") << '\n';
    out << "autocorr_cosine = " << report.autocorr_cosine << '\n';
    out << "autocorr_cosine_off_zero = " << report.autocorr_cosine_off_zero << '\n';
    out << "max_bin_std_rel_diff = " << report.max_bin_std_rel_diff << '\n';
    out << "compared_bins = " << report.compared_bins << '\n';
  }
  if (!report.example_noisy.empty()) {
    const double lo = min_value(report.example_noisy), hi = max_value(report.example_noisy);
    save_preview_png(report.example_noisy, dir / "noisy.png", lo, hi);
    save_preview_png(report.example_resampled, dir / "resampled.png", lo, hi);
    save_symmetric_preview(report.example_real_residual, dir / "residual_real.png");
    save_symmetric_preview(report.example_resampled_residual, dir / "residual_resampled.png");
  }
  save_symmetric_preview(report.real_autocorr.as_image(), dir / "autocorr_real.png");
  save_symmetric_preview(report.resampled_autocorr.as_image(), dir / "autocorr_resampled.png");
}

}  // namespace cosdd
