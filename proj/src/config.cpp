#include "cosdd/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>

#include "cosdd/error.hpp"

namespace cosdd {

int HierarchyConfig::n_downsamplings() const {
  int count = 0;
  for (int level = 0; level < n_levels; ++level) count += downsamples_at(level) ? 1 : 0;
  return count;
}

namespace {

std::vector<int> preset_latent_dims(int n_levels, int base) {
  std::vector<int> dims(static_cast<std::size_t>(n_levels), base);
  if (!dims.empty()) dims.back() = 2 * base;
  return dims;
}

int preset_base_dim(Preset preset) { return preset == Preset::Large ? 64 : 32; }

std::string trim(std::string_view text) {
  const auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  const auto end = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(begin, end - begin + 1));
}

[[noreturn]] void invalid(const std::string& key, const std::string& value, const std::string& why) {
  fail(ErrorCode::InvalidValue, key + " = '" + value + "': " + why);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) invalid(key, value, "expected an integer");
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) invalid(key, value, "expected a number");
    return out;
  } catch (const std::logic_error&) {
    invalid(key, value, "expected a number");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  invalid(key, value, "expected true or false");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream stream(value);
  std::string item;
  while (std::getline(stream, item, ',')) out.push_back(parse_integer<int>(key, trim(item)));
  return out;
}

std::string join(const std::vector<int>& values) {
  std::string out;
  for (std::size_t k = 0; k < values.size(); ++k) out += (k ? "," : "") + std::to_string(values[k]);
  return out;
}

std::string format_real(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

struct KeyBinding {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

// `field` is a generic lambda returning a reference into the config, usable on
// both const and mutable instances.
template <typename Field>
KeyBinding int_key(Field field) {
  return {[=](RunConfig& c, const std::string& k, const std::string& v) {
            auto& target = field(c);
            target = parse_integer<std::remove_reference_t<decltype(target)>>(k, v);
          },
          [=](const RunConfig& c) { return std::to_string(field(c)); }};
}

template <typename Field>
KeyBinding real_key(Field field) {
  return {[=](RunConfig& c, const std::string& k, const std::string& v) { field(c) = parse_real(k, v); },
          [=](const RunConfig& c) { return format_real(field(c)); }};
}

template <typename Field>
KeyBinding bool_key(Field field) {
  return {[=](RunConfig& c, const std::string& k, const std::string& v) { field(c) = parse_bool(k, v); },
          [=](const RunConfig& c) { return std::string(field(c) ? "true" : "false"); }};
}

template <typename Field>
KeyBinding string_key(Field field) {
  return {[=](RunConfig& c, const std::string&, const std::string& v) { field(c) = v; },
          [=](const RunConfig& c) { return std::string(field(c)); }};
}

template <typename Field, typename Parse, typename Print>
KeyBinding enum_key(Field field, Parse parse, Print print, const char* expected) {
  return {[=](RunConfig& c, const std::string& k, const std::string& v) {
            try {
              field(c) = parse(v);
            } catch (const Error&) {
              invalid(k, v, expected);
            }
          },
          [=](const RunConfig& c) { return std::string(print(field(c))); }};
}

#define COSDD_FIELD(path) [](auto& c) -> auto& { return c.path; }

// Ordered so that to_text is stable.
const std::vector<std::pair<std::string, KeyBinding>>& bindings() {
  static const std::vector<std::pair<std::string, KeyBinding>> table = {
      {"model.n_levels", int_key(COSDD_FIELD(model.hierarchy.n_levels))},
      {"model.latent_dims",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.model.hierarchy.latent_dims = parse_int_list(k, v); },
        [](const RunConfig& c) { return join(c.model.hierarchy.latent_dims); }}},
      {"model.hidden_channels", int_key(COSDD_FIELD(model.hierarchy.hidden_channels))},
      {"model.downsample_every", int_key(COSDD_FIELD(model.hierarchy.downsample_every))},
      {"model.batch_norm", bool_key(COSDD_FIELD(model.hierarchy.batch_norm))},
      {"ar.orientation", enum_key(COSDD_FIELD(model.ar.rf.orientation), parse_orientation,
                                  [](Orientation o) { return to_string(o); }, "expected row, column or full")},
      {"ar.rf_length", int_key(COSDD_FIELD(model.ar.rf.length))},
      {"ar.n_blocks", int_key(COSDD_FIELD(model.ar.n_blocks))},
      {"ar.filters", int_key(COSDD_FIELD(model.ar.filters))},
      {"ar.components", int_key(COSDD_FIELD(model.ar.n_components))},
      {"signal.n_layers", int_key(COSDD_FIELD(model.signal.n_layers))},
      {"signal.filters", int_key(COSDD_FIELD(model.signal.filters))},
      {"train.lr", real_key(COSDD_FIELD(train.lr))},
      {"train.plateau_patience", int_key(COSDD_FIELD(train.plateau_patience))},
      {"train.decay_factor", real_key(COSDD_FIELD(train.decay_factor))},
      {"train.max_steps", int_key(COSDD_FIELD(train.max_steps))},
      {"train.early_stop_patience", int_key(COSDD_FIELD(train.early_stop_patience))},
      {"train.batch_size", int_key(COSDD_FIELD(train.batch_size))},
      {"train.virtual_batches", int_key(COSDD_FIELD(train.virtual_batches))},
      {"train.crop", int_key(COSDD_FIELD(train.crop))},
      {"train.seed", int_key(COSDD_FIELD(train.seed))},
      {"train.grad_clip", real_key(COSDD_FIELD(train.grad_clip))},
      {"train.free_bits", real_key(COSDD_FIELD(train.free_bits))},
      {"train.two_stage", bool_key(COSDD_FIELD(train.two_stage))},
      {"train.val_fraction", real_key(COSDD_FIELD(train.val_fraction))},
      {"train.max_nonfinite_steps", int_key(COSDD_FIELD(train.max_nonfinite_steps))},
      {"train.val_samples", int_key(COSDD_FIELD(train.val_samples))},
      {"noise.recipe", enum_key(COSDD_FIELD(noise.recipe), parse_recipe, [](NoiseRecipe r) { return to_string(r); },
                                "unknown noise recipe")},
      {"noise.poisson_scale", real_key(COSDD_FIELD(noise.poisson_scale))},
      {"noise.awg_std", real_key(COSDD_FIELD(noise.awg_std))},
      {"noise.stripe_std", real_key(COSDD_FIELD(noise.stripe_std))},
      {"noise.blur_std", real_key(COSDD_FIELD(noise.blur_std))},
      {"noise.blur_axis", string_key(COSDD_FIELD(noise.blur_axis))},
      {"noise.dep_coeff", real_key(COSDD_FIELD(noise.dep_coeff))},
      {"noise.pattern_amp", real_key(COSDD_FIELD(noise.pattern_amp))},
      {"noise.run_length", int_key(COSDD_FIELD(noise.run_length))},
      {"noise.s_floor", real_key(COSDD_FIELD(noise.s_floor))},
      {"noise.interpretation", string_key(COSDD_FIELD(noise.interpretation))},
      {"paths.train", string_key(COSDD_FIELD(paths.train))},
      {"paths.val", string_key(COSDD_FIELD(paths.val))},
      {"paths.out", string_key(COSDD_FIELD(paths.out))},
      {"run.deterministic", bool_key(COSDD_FIELD(deterministic))},
  };
  return table;
}

#undef COSDD_FIELD

const KeyBinding* find_binding(const std::string& key) {
  for (const auto& [name, binding] : bindings()) {
    if (name == key) return &binding;
  }
  return nullptr;
}

ConfigOverrides parse_lines(std::string_view text) {
  ConfigOverrides entries;
  std::istringstream stream{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::InvalidValue, "line " + std::to_string(line_no) + ": expected key = value");
    }
    entries.emplace_back(trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)));
  }
  return entries;
}

}  // namespace

std::string_view to_string(Preset preset) { return preset == Preset::Large ? "large" : "small"; }

std::string_view to_string(Orientation orientation) {
  switch (orientation) {
    case Orientation::Row: return "row";
    case Orientation::Column: return "column";
    case Orientation::Full: return "full";
  }
  return "row";
}

std::string_view to_string(NoiseRecipe recipe) {
  switch (recipe) {
    case NoiseRecipe::Stripe: return "stripe";
    case NoiseRecipe::Checkerboard: return "checkerboard";
    case NoiseRecipe::Awg: return "awg";
    case NoiseRecipe::Poisson: return "poisson";
    case NoiseRecipe::PoissonGaussian: return "poisson-gaussian";
  }
  return "checkerboard";
}

Orientation parse_orientation(std::string_view text) {
  if (text == "row") return Orientation::Row;
  if (text == "column") return Orientation::Column;
  if (text == "full") return Orientation::Full;
  fail(ErrorCode::InvalidValue, "unknown orientation '" + std::string(text) + "'");
}

NoiseRecipe parse_recipe(std::string_view text) {
  for (auto recipe : {NoiseRecipe::Stripe, NoiseRecipe::Checkerboard, NoiseRecipe::Awg, NoiseRecipe::Poisson,
                      NoiseRecipe::PoissonGaussian}) {
    if (text == to_string(recipe)) return recipe;
  }
  fail(ErrorCode::InvalidValue, "unknown noise recipe '" + std::string(text) + "'");
}

Preset parse_preset(std::string_view text) {
  if (text == "large") return Preset::Large;
  if (text == "small") return Preset::Small;
  fail(ErrorCode::InvalidValue, "preset = '" + std::string(text) + "': expected small or large");
}

ModelConfig preset_model(Preset preset) {
  ModelConfig model;
  model.hierarchy.n_levels = preset == Preset::Large ? 14 : 6;
  model.hierarchy.latent_dims = preset_latent_dims(model.hierarchy.n_levels, preset_base_dim(preset));
  return model;
}

RunConfig preset_config(Preset preset) {
  RunConfig config;
  config.preset = preset;
  config.model = preset_model(preset);
  return config;
}

RunConfig parse_config(std::string_view text, const ConfigOverrides& overrides) {
  ConfigOverrides entries = parse_lines(text);
  entries.insert(entries.end(), overrides.begin(), overrides.end());

  Preset preset = Preset::Large;
  bool dims_given = false;
  for (const auto& [key, value] : entries) {
    if (key == "preset") preset = parse_preset(value);
    else if (key == "model.latent_dims") dims_given = true;
    else if (!find_binding(key)) fail(ErrorCode::UnknownKey, "unknown configuration key '" + key + "'");
  }

  RunConfig config = preset_config(preset);
  for (const auto& [key, value] : entries) {
    if (key == "preset") continue;
    find_binding(key)->set(config, key, value);
  }
  if (!dims_given) {
    config.model.hierarchy.latent_dims = preset_latent_dims(config.model.hierarchy.n_levels, preset_base_dim(preset));
  }
  validate(config.model);
  validate(config.train);
  return config;
}

RunConfig parse_config_file(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::UnreadableFile, "cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), overrides);
}

std::string to_text(const RunConfig& config) {
  std::string out = "preset = " + std::string(to_string(config.preset)) + "\n";
  for (const auto& [name, binding] : bindings()) out += name + " = " + binding.get(config) + "\n";
  return out;
}

void validate(const ModelConfig& config) {
  const auto& h = config.hierarchy;
  if (h.n_levels < 1) fail(ErrorCode::InvalidValue, "model.n_levels must be >= 1");
  if (static_cast<int>(h.latent_dims.size()) != h.n_levels) {
    fail(ErrorCode::InvalidValue, "model.latent_dims needs one entry per level");
  }
  for (int d : h.latent_dims) {
    if (d < 1) fail(ErrorCode::InvalidValue, "model.latent_dims entries must be >= 1");
  }
  if (h.hidden_channels < 1) fail(ErrorCode::InvalidValue, "model.hidden_channels must be >= 1");
  if (h.downsample_every < 1) fail(ErrorCode::InvalidValue, "model.downsample_every must be >= 1");
  if (config.ar.rf.orientation != Orientation::Full && config.ar.rf.length < 1) {
    fail(ErrorCode::InvalidValue, "ar.rf_length must be >= 1");
  }
  if (config.ar.n_blocks < 0) fail(ErrorCode::InvalidValue, "ar.n_blocks must be >= 0");
  if (config.ar.filters < 1) fail(ErrorCode::InvalidValue, "ar.filters must be >= 1");
  if (config.ar.n_components < 1) fail(ErrorCode::InvalidValue, "ar.components must be >= 1");
  if (config.signal.n_layers < 1) fail(ErrorCode::InvalidValue, "signal.n_layers must be >= 1");
  if (config.signal.filters < 1) fail(ErrorCode::InvalidValue, "signal.filters must be >= 1");
}

void validate(const TrainConfig& config) {
  if (!(config.lr >= 0.0)) fail(ErrorCode::InvalidValue, "train.lr must be >= 0");
  if (config.max_steps < 1) fail(ErrorCode::InvalidValue, "train.max_steps must be >= 1");
  if (config.batch_size < 1) fail(ErrorCode::InvalidValue, "train.batch_size must be >= 1");
  if (config.virtual_batches < 1 || config.batch_size % config.virtual_batches != 0) {
    fail(ErrorCode::InvalidValue, "train.virtual_batches must divide train.batch_size");
  }
  if (!(config.decay_factor > 0.0)) fail(ErrorCode::InvalidValue, "train.decay_factor must be positive");
  if (config.crop < 1) fail(ErrorCode::InvalidValue, "train.crop must be >= 1");
  if (!(config.val_fraction > 0.0 && config.val_fraction < 1.0)) {
    fail(ErrorCode::InvalidValue, "train.val_fraction must lie in (0, 1)");
  }
  if (config.val_samples < 1) fail(ErrorCode::InvalidValue, "train.val_samples must be >= 1");
}

}  // namespace cosdd
