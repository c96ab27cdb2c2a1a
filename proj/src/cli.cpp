#include "cosdd/cli.hpp"

#include <algorithm>
#include <iomanip>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "cosdd/checkpoint.hpp"
#include "cosdd/config.hpp"
#include "cosdd/data_pipeline.hpp"
#include "cosdd/diagnostics.hpp"
#include "cosdd/error.hpp"
#include "cosdd/evaluation.hpp"
#include "cosdd/image_io.hpp"
#include "cosdd/inference.hpp"
#include "cosdd/manifest.hpp"
#include "cosdd/noise_synthesis.hpp"
#include "cosdd/tensor_utils.hpp"

namespace cosdd {

namespace fs = std::filesystem;

namespace {

void progress(const std::string& message) { std::cerr << message << std::endl; }

// With COSDD_CACHE set, decoded stacks are kept as .npy files keyed by the
// source path and the size and mtime of every file under it.
ImageStack load_input(const fs::path& path) {
  const char* cache = std::getenv("COSDD_CACHE");
  if (cache == nullptr || *cache == '\0') return load_stack(path);

  std::ostringstream key;
  key << fs::absolute(path).lexically_normal().string() << '\n';
  const auto describe = [&](const fs::path& file) {
    key << file.string() << ' ' << fs::file_size(file) << ' '
        << fs::last_write_time(file).time_since_epoch().count() << '\n';
  };
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) describe(f);
  } else if (fs::exists(path)) {
    describe(path);
  }
  const auto stem = fs::path(cache) / sha256_text(key.str());
  const auto array = fs::path(stem.string() + ".npy"), ids = fs::path(stem.string() + ".ids");
  if (fs::exists(array) && fs::exists(ids)) {
    auto stack = load_stack(array, StackFormat::ArrayFile);
    std::ifstream in(ids);
    std::string line;
    for (std::size_t k = 0; k < stack.size() && std::getline(in, line); ++k) stack.source_ids[k] = line;
    return stack;
  }

  auto stack = load_stack(path);
  bool uniform = true;
  for (const auto& image : stack.images) {
    uniform = uniform && image.rows() == stack.images.front().rows() && image.cols() == stack.images.front().cols();
  }
  if (uniform && !stack.empty()) {
    fs::create_directories(cache);
    save_array_file(stack, array);
    std::ofstream out(ids);
    for (const auto& id : stack.source_ids) out << id << '\n';
  }
  return stack;
}

std::string stem_of(const std::string& id) { return fs::path(id).stem().string(); }

std::vector<std::string> argv_vector(int argc, char** argv) { return {argv, argv + argc}; }

// Flags shared by every command that builds a RunConfig.
struct ConfigFlags {
  std::string file;
  std::string preset;
  std::vector<std::string> sets;
  std::optional<int> rf_length, max_steps, batch_size, crop;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::string orientation;
  bool deterministic = false;

  void attach(CLI::App& app) {
    app.add_option("--config", file, "key=value config file")->check(CLI::ExistingFile);
    app.add_option("--preset", preset, "small or large")->check(CLI::IsMember({"small", "large"}));
    app.add_option("--set", sets, "Override one config key (key=value); repeatable");
    app.add_option("--rf-length", rf_length, "AR receptive-field length");
    app.add_option("--orientation", orientation, "row, column or full")->check(CLI::IsMember({"row", "column", "full"}));
    app.add_option("--max-steps", max_steps, "Optimizer step budget");
    app.add_option("--batch-size", batch_size, "Images per optimizer step");
    app.add_option("--crop", crop, "Training crop size");
    app.add_option("--lr", lr, "Initial learning rate");
    app.add_option("--seed", seed, "Training seed");
    app.add_flag("--deterministic", deterministic, "Single-threaded deterministic kernels");
  }

  RunConfig resolve() const {
    ConfigOverrides overrides;
    if (!preset.empty()) overrides.emplace_back("preset", preset);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) fail(ErrorCode::InvalidValue, "--set expects key=value, got '" + s + "'");
      overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    if (rf_length) overrides.emplace_back("ar.rf_length", std::to_string(*rf_length));
    if (!orientation.empty()) overrides.emplace_back("ar.orientation", orientation);
    if (max_steps) overrides.emplace_back("train.max_steps", std::to_string(*max_steps));
    if (batch_size) overrides.emplace_back("train.batch_size", std::to_string(*batch_size));
    if (crop) overrides.emplace_back("train.crop", std::to_string(*crop));
    if (lr) {
      std::ostringstream v;
      v << std::setprecision(17) << *lr;
      overrides.emplace_back("train.lr", v.str());
    }
    if (seed) overrides.emplace_back("train.seed", std::to_string(*seed));
    if (deterministic) overrides.emplace_back("run.deterministic", "true");
    return file.empty() ? parse_config("", overrides) : parse_config_file(file, overrides);
  }
};

// Recipe parameter flags mirror NoiseConfig.
void attach_noise_flags(CLI::App& app, NoiseConfig& noise, std::string& recipe) {
  app.add_option("--recipe", recipe, "stripe, checkerboard, awg, poisson or poisson-gaussian");
  app.add_option("--poisson-scale", noise.poisson_scale);
  app.add_option("--awg-std", noise.awg_std);
  app.add_option("--stripe-std", noise.stripe_std);
  app.add_option("--blur-std", noise.blur_std);
  app.add_option("--blur-axis", noise.blur_axis)->check(CLI::IsMember({"horizontal", "vertical"}));
  app.add_option("--dep-coeff", noise.dep_coeff);
  app.add_option("--pattern-amp", noise.pattern_amp);
  app.add_option("--run-length", noise.run_length);
  app.add_option("--s-floor", noise.s_floor);
  app.add_option("--interpretation", noise.interpretation)->check(CLI::IsMember({"variance", "std"}));
}

nlohmann::json noise_json(const NoiseConfig& n) {
  return {{"recipe", to_string(n.recipe)}, {"poisson_scale", n.poisson_scale}, {"awg_std", n.awg_std},
          {"stripe_std", n.stripe_std},    {"blur_std", n.blur_std},           {"blur_axis", n.blur_axis},
          {"dep_coeff", n.dep_coeff},      {"pattern_amp", n.pattern_amp},     {"run_length", n.run_length},
          {"s_floor", n.s_floor},          {"interpretation", n.interpretation}};
}

ImageStack add_noise(const ImageStack& clean, const NoiseConfig& noise, std::uint64_t seed) {
  ImageStack noisy;
  for (std::size_t k = 0; k < clean.size(); ++k) {
    Rng rng(mix_seed(seed, k));
    noisy.push_back(apply_recipe(clean.images[k], noise, rng), clean.source_ids[k]);
  }
  return noisy;
}

// ---- simulate

struct SimulateArgs {
  std::string in, out, recipe = "checkerboard";
  std::uint64_t seed = 0;
  std::size_t textures = 0;
  std::int64_t size = 64;
  NoiseConfig noise;
};

void run_simulate(SimulateArgs& a, Manifest& manifest) {
  a.noise.recipe = parse_recipe(a.recipe);
  if (a.in.empty() == (a.textures == 0)) fail(ErrorCode::InvalidValue, "give exactly one of --in or --textures");
  ImageStack clean;
  if (a.textures > 0) {
    clean = procedural_textures(a.textures, a.size, a.size, mix_seed(a.seed, 0xc1ea));
    save_raster_dir(clean, fs::path(a.out) / "clean");
  } else {
    clean = load_input(a.in);
    manifest.add_input(a.in);
  }
  progress("simulate: " + std::to_string(clean.size()) + " images, recipe " + a.recipe);
  save_raster_dir(add_noise(clean, a.noise, a.seed), fs::path(a.out) / "noisy");
  manifest.parameters() = {{"seed", a.seed}, {"noise", noise_json(a.noise)}, {"textures", a.textures},
                           {"size", a.size}};
  manifest.add_artifact(fs::path(a.out) / "noisy");
  if (a.textures > 0) manifest.add_artifact(fs::path(a.out) / "clean");
}

// ---- train

struct TrainArgs {
  ConfigFlags config;
  std::string train, val, out;
};

void run_train(TrainArgs& a, Manifest& manifest) {
  auto config = a.config.resolve();
  if (!a.train.empty()) config.paths.train = a.train;
  if (!a.val.empty()) config.paths.val = a.val;
  if (!a.out.empty()) config.paths.out = a.out;
  if (config.paths.train.empty()) fail(ErrorCode::InvalidValue, "no training data (--train or paths.train)");
  if (config.paths.out.empty()) fail(ErrorCode::InvalidValue, "no output directory (--out or paths.out)");
  a.out = config.paths.out;
  set_deterministic_mode(config.deterministic);

  const fs::path out = config.paths.out;
  fs::create_directories(out);
  {
    std::ofstream resolved(out / "config.txt");
    resolved << to_text(config);
  }
  FitOptions options;
  options.metrics_csv = out / "metrics.csv";
  options.progress = [](const std::string& m) { progress("train: " + m); };

  const auto train = load_input(config.paths.train);
  manifest.add_input(config.paths.train);
  std::optional<TrainingState> state;
  if (config.paths.val.empty()) {
    state.emplace(train_on_stack(config, train, options));
  } else {
    const auto val = load_input(config.paths.val);
    manifest.add_input(config.paths.val);
    const auto norm = compute_norm_stats(train);
    state.emplace(config, norm);
    fit(*state, norm.normalize(train), norm.normalize(val), options);
  }
  save_checkpoint(*state, out / "model.ckpt");
  state->norm.save(out / "norm.txt");
  progress("train: finished after " + std::to_string(state->step) + " steps");

  manifest.parameters() = {{"config", to_text(config)}, {"seed", config.train.seed},
                           {"deterministic", config.deterministic}, {"steps", state->step}};
  for (const char* name : {"config.txt", "metrics.csv", "model.ckpt", "norm.txt"}) manifest.add_artifact(out / name);
}

// ---- denoise

struct DenoiseArgs {
  std::string ckpt, in, out;
  int samples = kDefaultSamples;
  std::uint64_t seed = 0;
  std::optional<std::int64_t> tile, overlap;
  int save_samples = 0;
  int batch = 10;
  bool clip = false;
  bool deterministic = false;
};

void run_denoise(DenoiseArgs& a, Manifest& manifest) {
  set_deterministic_mode(a.deterministic);
  auto state = load_checkpoint(a.ckpt);
  auto& model = *state.model;
  model.eval();
  manifest.add_input(a.ckpt);

  DenoiseRequest request;
  request.n_samples = a.samples;
  request.batch = a.batch;
  request.clip_to_input_range = a.clip;
  const auto radius = signal_context_radius(model.config());
  if (a.tile) request.tile = TileSpec{*a.tile, a.overlap.value_or(radius)};

  const auto stack = load_input(a.in);
  manifest.add_input(a.in);
  ImageStack denoised;
  std::vector<ImageStack> samples(static_cast<std::size_t>(a.save_samples));
  for (std::size_t k = 0; k < stack.size(); ++k) {
    request.seed = mix_seed(a.seed, k);
    denoised.push_back(denoise(model, state.norm, stack.images[k], request), stack.source_ids[k]);
    if (a.save_samples > 0) {
      auto solutions = sample_solutions(model, state.norm, stack.images[k], a.save_samples, request.seed, a.batch);
      for (std::size_t s = 0; s < solutions.size(); ++s) samples[s].push_back(std::move(solutions[s]), stack.source_ids[k]);
    }
    progress("denoise: " + std::to_string(k + 1) + "/" + std::to_string(stack.size()) + " " + stack.source_ids[k]);
  }
  const fs::path out = a.out;
  save_raster_dir(denoised, out);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    std::ostringstream name;
    name << "sample_" << std::setw(3) << std::setfill('0') << s;
    save_raster_dir(samples[s], out / "samples" / name.str());
  }
  manifest.parameters() = {{"samples", a.samples},
                           {"seed", a.seed},
                           {"per_image_seed", "mix_seed(seed, index)"},
                           {"tile", a.tile ? nlohmann::json(*a.tile) : nlohmann::json(nullptr)},
                           {"overlap", a.tile ? nlohmann::json(request.tile->overlap) : nlohmann::json(nullptr)},
                           {"save_samples", a.save_samples},
                           {"batch", a.batch},
                           {"clip", a.clip},
                           {"deterministic", a.deterministic}};
  manifest.add_artifact(out);
}

// ---- evaluate

struct EvaluateArgs {
  std::string clean, denoised, noisy, out;
  std::optional<double> data_range;
  bool unit_range = false;
};

void run_evaluate(EvaluateArgs& a, Manifest& manifest) {
  const auto clean = load_input(a.clean);
  const auto denoised = load_input(a.denoised);
  std::optional<ImageStack> noisy;
  if (!a.noisy.empty()) noisy = load_input(a.noisy);
  const auto index = [](const ImageStack& s) {
    std::map<std::string, std::size_t> m;
    for (std::size_t k = 0; k < s.size(); ++k) m[stem_of(s.source_ids[k])] = k;
    return m;
  };
  const auto by_denoised = index(denoised);
  const auto by_noisy = noisy ? index(*noisy) : std::map<std::string, std::size_t>{};

  fs::path out = a.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream csv(out);
  if (!csv) fail(ErrorCode::UnreadableFile, "cannot write " + out.string());
  csv << std::setprecision(10) << "image,data_range,psnr_denoised" << (noisy ? ",psnr_noisy" : "") << '\n';
  double sum_d = 0.0, sum_n = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < clean.size(); ++k) {
    const auto id = stem_of(clean.source_ids[k]);
    const auto d = by_denoised.find(id);
    if (d == by_denoised.end()) fail(ErrorCode::ShapeMismatch, "no denoised image for " + id);
    const auto& truth = clean.images[k];
    const double range = a.data_range.value_or(default_data_range(truth, a.unit_range));
    const double pd = psnr(truth, denoised.images[d->second], range);
    sum_d += pd;
    csv << id << ',' << range << ',' << pd;
    if (noisy) {
      const auto n = by_noisy.find(id);
      if (n == by_noisy.end()) fail(ErrorCode::ShapeMismatch, "no noisy image for " + id);
      const double pn = psnr(truth, noisy->images[n->second], range);
      sum_n += pn;
      csv << ',' << pn;
    }
    csv << '\n';
    ++count;
  }
  if (count == 0) fail(ErrorCode::TooFewImages, "no clean images");
  const double n = static_cast<double>(count);
  csv << "mean,," << sum_d / n;
  if (noisy) csv << ',' << sum_n / n;
  csv << '\n';
  csv.close();
  progress("evaluate: mean psnr " + std::to_string(sum_d / n) + " dB over " + std::to_string(count) + " images");

  for (const auto& p : {a.clean, a.denoised, a.noisy}) {
    if (!p.empty()) manifest.add_input(p);
  }
  manifest.parameters() = {{"data_range", a.data_range ? nlohmann::json(*a.data_range) : nlohmann::json("per image")},
                           {"unit_range", a.unit_range}};
  manifest.add_artifact(out);
}

// ---- ablate-rf

struct AblateArgs {
  ConfigFlags config;
  std::string train, test_noisy, test_clean, out, recipe = "checkerboard";
  std::vector<std::string> fields{"row:16", "column:16", "full:40"};
  std::size_t textures = 0, test_count = 50;
  std::int64_t size = 64;
  int samples = 25;
  std::uint64_t seed = 0;
  NoiseConfig noise;
};

ReceptiveFieldSpec parse_field(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) fail(ErrorCode::InvalidValue, "field '" + text + "' is not orientation:length");
  try {
    return {parse_orientation(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
  } catch (const std::logic_error&) {
    fail(ErrorCode::InvalidValue, "field '" + text + "' has a bad length");
  }
}

void run_ablate(AblateArgs& a, Manifest& manifest) {
  AblationOptions options;
  options.base = a.config.resolve();
  set_deterministic_mode(options.base.deterministic);
  for (const auto& f : a.fields) options.fields.push_back(parse_field(f));
  options.n_samples = a.samples;
  options.seed = a.seed;
  options.progress = [](const std::string& m) { progress("ablate-rf: " + m); };

  DeskCorpus train, test;
  if (a.textures > 0) {
    a.noise.recipe = parse_recipe(a.recipe);
    if (a.test_count >= a.textures) fail(ErrorCode::TooFewImages, "--test-count must be below --textures");
    const auto corpus = make_desk_corpus(a.textures, a.size, a.noise, a.seed);
    train = corpus.slice(0, a.textures - a.test_count);
    test = corpus.slice(a.textures - a.test_count, a.textures);
  } else {
    if (a.train.empty() || a.test_noisy.empty() || a.test_clean.empty()) {
      fail(ErrorCode::InvalidValue, "give --textures, or all of --train, --test-noisy and --test-clean");
    }
    train.noisy = load_input(a.train);
    train.clean = train.noisy;
    test.noisy = load_input(a.test_noisy);
    test.clean = load_input(a.test_clean);
    for (const auto& p : {a.train, a.test_noisy, a.test_clean}) manifest.add_input(p);
  }
  const auto rows = rf_ablation(train, test, options);
  const fs::path out = a.out;
  fs::create_directories(out);
  write_ablation_csv(rows, out / "ablation.csv");
  write_ablation_plot(rows, out / "ablation.png");
  manifest.parameters() = {{"config", to_text(options.base)}, {"fields", a.fields},   {"samples", a.samples},
                           {"seed", a.seed},                  {"textures", a.textures}, {"test_count", a.test_count},
                           {"size", a.size},                  {"noise", noise_json(a.noise)}};
  manifest.add_artifact(out / "ablation.csv");
  manifest.add_artifact(out / "ablation.png");
}

// ---- diagnose-noise

struct DiagnoseArgs {
  std::string ckpt, in, clean, out;
  NoiseReportOptions options;
  bool deterministic = false;
};

void run_diagnose(DiagnoseArgs& a, Manifest& manifest) {
  set_deterministic_mode(a.deterministic);
  auto state = load_checkpoint(a.ckpt);
  state.model->eval();
  const auto noisy = load_input(a.in);
  std::optional<ImageStack> clean;
  if (!a.clean.empty()) clean = load_input(a.clean);
  a.options.untrained = state.step == 0;
  const auto report = noise_reconstruction_report(*state.model, state.norm, noisy.images,
                                                  clean ? std::span<const Image>(clean->images) : std::span<const Image>{},
                                                  a.options);
  write_noise_report(report, a.out);
  progress("diagnose-noise: autocorrelation cosine " + std::to_string(report.autocorr_cosine) +
           ", max bin std difference " + std::to_string(report.max_bin_std_rel_diff));
  for (const auto& p : {a.ckpt, a.in, a.clean}) {
    if (!p.empty()) manifest.add_input(p);
  }
  manifest.parameters() = {{"max_lag", a.options.max_lag}, {"bin_edges", a.options.bin_edges},
                           {"samples", a.options.n_samples}, {"seed", a.options.seed}};
  manifest.add_artifact(a.out);
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Unsupervised denoising of structured, signal-dependent noise", "cosdd"};
  app.require_subcommand(1);
  std::string manifest_path;
  app.add_option("--manifest", manifest_path, "Manifest path (default: manifest.json in the output location)");

  SimulateArgs simulate;
  auto* sim = app.add_subcommand("simulate", "Corrupt clean images with a synthetic noise recipe");
  sim->add_option("--in", simulate.in, "Clean images (directory, stack or .npy)");
  sim->add_option("--textures", simulate.textures, "Generate this many procedural clean images instead of --in");
  sim->add_option("--size", simulate.size, "Procedural image size");
  sim->add_option("--out", simulate.out, "Output directory")->required();
  sim->add_option("--seed", simulate.seed, "Noise seed");
  attach_noise_flags(*sim, simulate.noise, simulate.recipe);

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Train a denoiser on noisy images");
  train.config.attach(*tr);
  tr->add_option("--train", train.train, "Noisy training images");
  tr->add_option("--val", train.val, "Validation images (default: split from --train)");
  tr->add_option("--out", train.out, "Output directory");

  DenoiseArgs den;
  auto* dn = app.add_subcommand("denoise", "Denoise images with a trained checkpoint");
  dn->add_option("--ckpt", den.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  dn->add_option("--in", den.in, "Noisy images")->required();
  dn->add_option("--out", den.out, "Output directory")->required();
  dn->add_option("--samples", den.samples, "Posterior samples averaged per image")->check(CLI::PositiveNumber);
  dn->add_option("--seed", den.seed, "Sampling seed");
  dn->add_option("--tile", den.tile, "Tile size for large images");
  dn->add_option("--overlap", den.overlap, "Tile overlap (default: the signal estimate's context radius)");
  dn->add_option("--save-samples", den.save_samples, "Also write this many individual solutions");
  dn->add_option("--batch", den.batch, "Samples evaluated together")->check(CLI::PositiveNumber);
  dn->add_flag("--clip", den.clip, "Clip estimates to the input's range");
  dn->add_flag("--deterministic", den.deterministic, "Single-threaded deterministic kernels");

  EvaluateArgs ev;
  auto* evc = app.add_subcommand("evaluate", "PSNR table of denoised images against ground truth");
  evc->add_option("--clean", ev.clean, "Ground-truth images")->required();
  evc->add_option("--denoised", ev.denoised, "Denoised images")->required();
  evc->add_option("--noisy", ev.noisy, "Noisy inputs, for a baseline column");
  evc->add_option("--out", ev.out, "CSV path")->required();
  evc->add_option("--data-range", ev.data_range, "Fixed data range (default: per image)");
  evc->add_flag("--unit-range", ev.unit_range, "Ground truth lives in [0, 1]");

  AblateArgs ab;
  auto* abc = app.add_subcommand("ablate-rf", "Train and score one model per AR receptive field");
  ab.config.attach(*abc);
  abc->add_option("--fields", ab.fields, "orientation:length entries")->delimiter(',');
  abc->add_option("--train", ab.train, "Noisy training images");
  abc->add_option("--test-noisy", ab.test_noisy, "Noisy test images");
  abc->add_option("--test-clean", ab.test_clean, "Clean test images");
  abc->add_option("--textures", ab.textures, "Use a procedural corpus of this many images instead");
  abc->add_option("--test-count", ab.test_count, "Procedural images held out for scoring");
  abc->add_option("--size", ab.size, "Procedural image size");
  abc->add_option("--samples", ab.samples, "Posterior samples per test image");
  abc->add_option("--eval-seed", ab.seed, "Corpus and scoring seed");
  abc->add_option("--out", ab.out, "Output directory")->required();
  attach_noise_flags(*abc, ab.noise, ab.recipe);

  DiagnoseArgs dg;
  auto* dgc = app.add_subcommand("diagnose-noise", "Compare real and model-resampled noise statistics");
  dgc->add_option("--ckpt", dg.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  dgc->add_option("--in", dg.in, "Noisy images")->required();
  dgc->add_option("--clean", dg.clean, "Ground truth (default: denoised estimates)");
  dgc->add_option("--out", dg.out, "Report directory")->required();
  dgc->add_option("--samples", dg.options.n_samples, "Samples for pseudo ground truth");
  dgc->add_option("--seed", dg.options.seed, "Seed");
  dgc->add_option("--max-lag", dg.options.max_lag, "Autocorrelation lag range");
  dgc->add_option("--bin-edges", dg.options.bin_edges, "Signal bin edges")->delimiter(',');
  dgc->add_flag("--deterministic", dg.deterministic, "Single-threaded deterministic kernels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  auto* chosen = app.get_subcommands().front();
  Manifest manifest(chosen->get_name(), argv_vector(argc, argv));
  try {
    fs::path default_manifest;
    if (chosen == sim) {
      run_simulate(simulate, manifest);
      default_manifest = fs::path(simulate.out) / "manifest.json";
    } else if (chosen == tr) {
      run_train(train, manifest);
      default_manifest = fs::path(train.out) / "manifest.json";
    } else if (chosen == dn) {
      run_denoise(den, manifest);
      default_manifest = fs::path(den.out) / "manifest.json";
    } else if (chosen == evc) {
      run_evaluate(ev, manifest);
      default_manifest = fs::path(ev.out).replace_extension(".manifest.json");
    } else if (chosen == abc) {
      run_ablate(ab, manifest);
      default_manifest = fs::path(ab.out) / "manifest.json";
    } else {
      run_diagnose(dg, manifest);
      default_manifest = fs::path(dg.out) / "manifest.json";
    }
    manifest.write(manifest_path.empty() ? default_manifest : fs::path(manifest_path));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

}  // namespace cosdd
