#pragma once

#include "cosdd/config.hpp"
#include "cosdd/image.hpp"

namespace cosdd {

enum class BlurAxis { Horizontal, Vertical };

struct StripeNoiseParams {
  double poisson_scale = 0.002;  // x = a * Poisson(s / a)
  double awg_std = 0.02;
  double stripe_std = 0.025;     // std of the white noise before blurring
  double blur_std = 1.0;         // pixels
  BlurAxis blur_axis = BlurAxis::Horizontal;
};

// The three additive pieces of the stripe recipe, exposed for inspection.
// `shot` already contains the signal: shot = a * Poisson(s / a).
struct StripeComponents {
  Image shot;
  Image awg;
  Image stripe;
};

StripeComponents stripe_noise_components(const Image& signal, const StripeNoiseParams& params, Rng& rng);
Image apply_stripe_noise(const Image& signal, const StripeNoiseParams& params, Rng& rng);

// How the dependency coefficient c in N(0, c / s) is read.
enum class DependencyInterpretation { Variance, StdDev };

struct CheckerboardNoiseParams {
  double dep_coeff = 0.15;
  double pattern_amp = 0.1;
  int run_length = 2;
  double s_floor = 0.05;
  DependencyInterpretation interpretation = DependencyInterpretation::Variance;
  bool gaussian_enabled = true;
};

// Standard deviation of the signal-dependent Gaussian term at signal s.
double checkerboard_gaussian_std(double signal, const CheckerboardNoiseParams& params);

// Offset added to every pixel of row i: -amp for `run_length` rows, then +amp
// for `run_length` rows, repeating down each column, shifted by `phase`.
Image checkerboard_pattern(std::int64_t rows, std::int64_t cols, const CheckerboardNoiseParams& params, int phase);

// Phase is drawn uniformly from {0, ..., 2 * run_length - 1}.
Image apply_checkerboard_noise(const Image& signal, const CheckerboardNoiseParams& params, Rng& rng);
Image apply_checkerboard_noise(const Image& signal, const CheckerboardNoiseParams& params, Rng& rng, int phase);

enum class IidNoiseKind { Awg, Poisson, PoissonGaussian };

struct IidNoiseParams {
  double awg_std = 0.1;
  double poisson_scale = 1.0;  // x = scale * Poisson(s / scale)
};

Image apply_iid_noise(const Image& signal, IidNoiseKind kind, const IidNoiseParams& params, Rng& rng);

// Normalised Gaussian kernel truncated at 4 std, mirrored at the border.
Image gaussian_blur_1d(const Image& image, double std, BlurAxis axis);

// Applies the recipe named in `config` with its parameters.
Image apply_recipe(const Image& signal, const NoiseConfig& config, Rng& rng);

}  // namespace cosdd
