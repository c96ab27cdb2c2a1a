#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cosdd {

enum class Preset { Small, Large };

// Direction the autoregressive decoder walks. Row: pixel (i, j) may see
// (i, j - length) .. (i, j - 1). Column: the transpose. Full: every pixel
// before (i, j) in row-major order.
enum class Orientation { Row, Column, Full };

struct ReceptiveFieldSpec {
  Orientation orientation = Orientation::Row;
  int length = 40;  // ignored for Full

  friend bool operator==(const ReceptiveFieldSpec&, const ReceptiveFieldSpec&) = default;
};

struct HierarchyConfig {
  int n_levels = 14;
  std::vector<int> latent_dims;  // one entry per level, bottom (index 0) to top
  int hidden_channels = 64;
  int downsample_every = 2;      // level l halves resolution when l % downsample_every == 0
  bool batch_norm = true;

  int n_downsamplings() const;
  int total_downsampling() const { return 1 << n_downsamplings(); }
  bool downsamples_at(int level) const { return level % downsample_every == 0; }

  friend bool operator==(const HierarchyConfig&, const HierarchyConfig&) = default;
};

struct ARDecoderConfig {
  int n_blocks = 8;
  int filters = 64;
  int n_components = 3;
  ReceptiveFieldSpec rf;

  friend bool operator==(const ARDecoderConfig&, const ARDecoderConfig&) = default;
};

struct SignalDecoderConfig {
  int n_layers = 4;
  int filters = 128;

  friend bool operator==(const SignalDecoderConfig&, const SignalDecoderConfig&) = default;
};

struct ModelConfig {
  HierarchyConfig hierarchy;
  ARDecoderConfig ar;
  SignalDecoderConfig signal;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainConfig {
  double lr = 0.002;
  int plateau_patience = 50;      // epochs without improvement before decaying lr
  double decay_factor = 10.0;
  std::int64_t max_steps = 80000;
  int early_stop_patience = 100;  // epochs without improvement before stopping
  int batch_size = 16;
  int virtual_batches = 4;
  int crop = 256;
  std::uint64_t seed = 0;
  double grad_clip = 100.0;
  double free_bits = 0.0;         // nats per latent level; 0 disables
  bool two_stage = false;         // train the signal decoder after the VAE instead of alongside it
  double val_fraction = 0.1;
  int max_nonfinite_steps = 20;   // consecutive skipped steps tolerated before giving up
  int val_samples = 1;            // posterior samples per validation image

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

enum class NoiseRecipe { Stripe, Checkerboard, Awg, Poisson, PoissonGaussian };

struct NoiseConfig {
  NoiseRecipe recipe = NoiseRecipe::Checkerboard;
  double poisson_scale = 0.002;
  double awg_std = 0.02;
  double stripe_std = 0.025;
  double blur_std = 1.0;
  std::string blur_axis = "horizontal";
  double dep_coeff = 0.15;
  double pattern_amp = 0.1;
  int run_length = 2;
  double s_floor = 0.05;
  std::string interpretation = "variance";

  friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

struct PathConfig {
  std::string train;
  std::string val;
  std::string out;

  friend bool operator==(const PathConfig&, const PathConfig&) = default;
};

struct RunConfig {
  Preset preset = Preset::Large;
  ModelConfig model;
  TrainConfig train;
  NoiseConfig noise;
  PathConfig paths;
  bool deterministic = false;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

ModelConfig preset_model(Preset preset);
RunConfig preset_config(Preset preset);

// Parses flat `section.key = value` text (# comments allowed). Overrides win
// over file values; `preset` is applied before any other key.
RunConfig parse_config(std::string_view text, const ConfigOverrides& overrides = {});
RunConfig parse_config_file(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

// Every key with its resolved value, in a stable order. parse_config of the
// result reproduces the input.
std::string to_text(const RunConfig& config);

void validate(const ModelConfig& config);
void validate(const TrainConfig& config);

std::string_view to_string(Preset preset);
std::string_view to_string(Orientation orientation);
std::string_view to_string(NoiseRecipe recipe);
Orientation parse_orientation(std::string_view text);
NoiseRecipe parse_recipe(std::string_view text);
Preset parse_preset(std::string_view text);

}  // namespace cosdd
