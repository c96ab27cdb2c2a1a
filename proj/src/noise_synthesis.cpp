#include "cosdd/noise_synthesis.hpp"

#include <cmath>
#include <vector>

#include "cosdd/error.hpp"

namespace cosdd {
namespace {

void require_unit_range(const Image& signal) {
  for (double v : signal.pixels()) {
    if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::OutOfRangeSignal, "signal must lie in [0, 1]");
  }
}

void require_positive(double value, const char* name) {
  if (!(value > 0.0)) fail(ErrorCode::InvalidValue, std::string(name) + " must be positive");
}

double scaled_poisson(double signal, double scale, Rng& rng) {
  if (signal <= 0.0) return 0.0;
  std::poisson_distribution<long long> draw(signal / scale);
  return scale * static_cast<double>(draw(rng));
}

std::int64_t mirror(std::int64_t k, std::int64_t n) {
  // symmetric reflection: -1 -> 0, n -> n - 1
  while (k < 0 || k >= n) {
    if (k < 0) k = -k - 1;
    if (k >= n) k = 2 * n - k - 1;
  }
  return k;
}

}  // namespace

Image gaussian_blur_1d(const Image& image, double std, BlurAxis axis) {
  require_positive(std, "blur std");
  const auto radius = static_cast<std::int64_t>(std::ceil(4.0 * std));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::int64_t t = -radius; t <= radius; ++t) {
    const double w = std::exp(-0.5 * static_cast<double>(t * t) / (std * std));
    kernel[static_cast<std::size_t>(t + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;

  Image out(image.rows(), image.cols());
  for (std::int64_t i = 0; i < image.rows(); ++i) {
    for (std::int64_t j = 0; j < image.cols(); ++j) {
      double acc = 0.0;
      for (std::int64_t t = -radius; t <= radius; ++t) {
        const double w = kernel[static_cast<std::size_t>(t + radius)];
        acc += axis == BlurAxis::Horizontal ? w * image(i, mirror(j + t, image.cols()))
                                            : w * image(mirror(i + t, image.rows()), j);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

StripeComponents stripe_noise_components(const Image& signal, const StripeNoiseParams& params, Rng& rng) {
  require_unit_range(signal);
  require_positive(params.poisson_scale, "poisson_scale");
  require_positive(params.awg_std, "awg_std");
  require_positive(params.stripe_std, "stripe_std");
  require_positive(params.blur_std, "blur_std");

  StripeComponents parts{Image(signal.rows(), signal.cols()), Image(signal.rows(), signal.cols()),
                         Image(signal.rows(), signal.cols())};
  for (std::int64_t k = 0; k < signal.size(); ++k) {
    parts.shot.pixels()[static_cast<std::size_t>(k)] =
        scaled_poisson(signal.pixels()[static_cast<std::size_t>(k)], params.poisson_scale, rng);
  }
  std::normal_distribution<double> awg(0.0, params.awg_std);
  for (double& v : parts.awg.pixels()) v = awg(rng);
  std::normal_distribution<double> white(0.0, params.stripe_std);
  Image raw(signal.rows(), signal.cols());
  for (double& v : raw.pixels()) v = white(rng);
  parts.stripe = gaussian_blur_1d(raw, params.blur_std, params.blur_axis);
  return parts;
}

Image apply_stripe_noise(const Image& signal, const StripeNoiseParams& params, Rng& rng) {
  const StripeComponents parts = stripe_noise_components(signal, params, rng);
  return parts.shot + parts.awg + parts.stripe;
}

double checkerboard_gaussian_std(double signal, const CheckerboardNoiseParams& params) {
  const double ratio = params.dep_coeff / std::max(signal, params.s_floor);
  return params.interpretation == DependencyInterpretation::Variance ? std::sqrt(ratio) : ratio;
}

Image checkerboard_pattern(std::int64_t rows, std::int64_t cols, const CheckerboardNoiseParams& params, int phase) {
  if (params.run_length < 1) fail(ErrorCode::InvalidValue, "run_length must be >= 1");
  if (params.pattern_amp < 0.0) fail(ErrorCode::InvalidValue, "pattern_amp must be >= 0");
  const int period = 2 * params.run_length;
  Image pattern(rows, cols);
  for (std::int64_t i = 0; i < rows; ++i) {
    const auto position = static_cast<int>((i + phase) % period);
    const double offset = position < params.run_length ? -params.pattern_amp : params.pattern_amp;
    for (std::int64_t j = 0; j < cols; ++j) pattern(i, j) = offset;
  }
  return pattern;
}

Image apply_checkerboard_noise(const Image& signal, const CheckerboardNoiseParams& params, Rng& rng) {
  if (params.run_length < 1) fail(ErrorCode::InvalidValue, "run_length must be >= 1");
  std::uniform_int_distribution<int> phase(0, 2 * params.run_length - 1);
  return apply_checkerboard_noise(signal, params, rng, phase(rng));
}

Image apply_checkerboard_noise(const Image& signal, const CheckerboardNoiseParams& params, Rng& rng, int phase) {
  require_unit_range(signal);
  require_positive(params.dep_coeff, "dep_coeff");
  require_positive(params.s_floor, "s_floor");
  Image noisy = signal + checkerboard_pattern(signal.rows(), signal.cols(), params, phase);
  if (params.gaussian_enabled) {
    std::normal_distribution<double> unit(0.0, 1.0);
    for (std::int64_t k = 0; k < signal.size(); ++k) {
      const auto idx = static_cast<std::size_t>(k);
      noisy.pixels()[idx] += checkerboard_gaussian_std(signal.pixels()[idx], params) * unit(rng);
    }
  }
  return noisy;
}

Image apply_iid_noise(const Image& signal, IidNoiseKind kind, const IidNoiseParams& params, Rng& rng) {
  if (!all_finite(signal)) fail(ErrorCode::NonFiniteValues, "signal contains NaN or Inf");
  if (params.awg_std < 0.0) fail(ErrorCode::InvalidValue, "awg_std must be >= 0");
  if (kind != IidNoiseKind::Awg) {
    require_positive(params.poisson_scale, "poisson_scale");
    for (double v : signal.pixels()) {
      if (v < 0.0) fail(ErrorCode::NegativeSignalForPoisson, "Poisson noise needs a non-negative signal");
    }
  }
  Image noisy(signal.rows(), signal.cols());
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::int64_t k = 0; k < signal.size(); ++k) {
    const auto idx = static_cast<std::size_t>(k);
    const double s = signal.pixels()[idx];
    switch (kind) {
      case IidNoiseKind::Awg:
        noisy.pixels()[idx] = s + params.awg_std * unit(rng);
        break;
      case IidNoiseKind::Poisson:
        noisy.pixels()[idx] = scaled_poisson(s, params.poisson_scale, rng);
        break;
      case IidNoiseKind::PoissonGaussian:
        noisy.pixels()[idx] = scaled_poisson(s, params.poisson_scale, rng) + params.awg_std * unit(rng);
        break;
    }
  }
  return noisy;
}

Image apply_recipe(const Image& signal, const NoiseConfig& config, Rng& rng) {
  switch (config.recipe) {
    case NoiseRecipe::Stripe: {
      StripeNoiseParams p{config.poisson_scale, config.awg_std, config.stripe_std, config.blur_std, BlurAxis::Horizontal};
      if (config.blur_axis == "vertical") p.blur_axis = BlurAxis::Vertical;
      else if (config.blur_axis != "horizontal") fail(ErrorCode::InvalidValue, "noise.blur_axis: expected horizontal or vertical");
      return apply_stripe_noise(signal, p, rng);
    }
    case NoiseRecipe::Checkerboard: {
      CheckerboardNoiseParams p;
      p.dep_coeff = config.dep_coeff;
      p.pattern_amp = config.pattern_amp;
      p.run_length = config.run_length;
      p.s_floor = config.s_floor;
      if (config.interpretation == "std") p.interpretation = DependencyInterpretation::StdDev;
      else if (config.interpretation != "variance") fail(ErrorCode::InvalidValue, "noise.interpretation: expected variance or std");
      return apply_checkerboard_noise(signal, p, rng);
    }
    case NoiseRecipe::Awg:
      return apply_iid_noise(signal, IidNoiseKind::Awg, {config.awg_std, config.poisson_scale}, rng);
    case NoiseRecipe::Poisson:
      return apply_iid_noise(signal, IidNoiseKind::Poisson, {config.awg_std, config.poisson_scale}, rng);
    case NoiseRecipe::PoissonGaussian:
      return apply_iid_noise(signal, IidNoiseKind::PoissonGaussian, {config.awg_std, config.poisson_scale}, rng);
  }
  fail(ErrorCode::InvalidValue, "unknown noise recipe");
}

}  // namespace cosdd
