#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <set>

#include "test_support.hpp"

#include "cosdd/config.hpp"
#include "cosdd/data_pipeline.hpp"
#include "cosdd/error.hpp"
#include "cosdd/evaluation.hpp"
#include "cosdd/image_io.hpp"
#include "cosdd/noise_synthesis.hpp"

using namespace cosdd;
namespace fs = std::filesystem;

namespace {

template <typename Fn>
std::optional<ErrorCode> code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("cosdd_core_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Image random_image(std::int64_t rows, std::int64_t cols, Rng& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Image image(rows, cols);
  for (auto& v : image.pixels()) v = u(rng);
  return image;
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  std::int64_t n = 0;
  double standard_error() const { return std::sqrt(var / static_cast<double>(n)); }
};

Moments moments(std::span<const double> values) {
  Moments m;
  m.n = static_cast<std::int64_t>(values.size());
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(m.n);
  for (double v : values) m.var += (v - m.mean) * (v - m.mean);
  m.var /= static_cast<double>(m.n - 1);
  return m;
}

std::vector<double> stds(const SignalDependenceProfile& profile) {
  std::vector<double> out;
  for (const auto& bin : profile.bins) out.push_back(bin.residual_std);
  return out;
}

}  // namespace

TEST_SUITE("data_pipeline") {
  TEST_CASE("raster directory of zero frames") {
    const auto dir = temp_dir("raster");
    for (int k = 0; k < 3; ++k) save_image(Image(8, 8), dir / ("f" + std::to_string(k) + ".tif"));
    const auto stack = load_stack(dir);
    REQUIRE(stack.size() == 3);
    for (const auto& image : stack.images) {
      CHECK(image.rows() == 8);
      CHECK(image.cols() == 8);
      CHECK(max_value(image) == 0.0);
      CHECK(min_value(image) == 0.0);
    }
  }

  TEST_CASE("stacked container and array file pass frames through") {
    const auto dir = temp_dir("container");
    Rng rng(1);
    ImageStack stack;
    for (int k = 0; k < 10; ++k) stack.push_back(random_image(64, 64, rng), "f" + std::to_string(k));
    save_stack_container(stack, dir / "stack.tif");
    save_array_file(stack, dir / "stack.npy");
    for (const auto& path : {dir / "stack.tif", dir / "stack.npy"}) {
      const auto loaded = load_stack(path);
      REQUIRE(loaded.size() == 10);
      for (std::size_t k = 0; k < 10; ++k) {
        CHECK(loaded.images[k].rows() == 64);
        double worst = 0.0;
        for (std::int64_t i = 0; i < 64 * 64; ++i) {
          worst = std::max(worst, std::abs(loaded.images[k].pixels()[static_cast<std::size_t>(i)] -
                                           stack.images[k].pixels()[static_cast<std::size_t>(i)]));
        }
        CHECK(worst < 1e-6);  // stored as float32
      }
    }
  }

  TEST_CASE("a NaN pixel is rejected at load") {
    const auto dir = temp_dir("nan");
    Image image(4, 4);
    image(1, 2) = std::numeric_limits<double>::quiet_NaN();
    ImageStack stack;
    stack.push_back(image, "nan");
    save_array_file(stack, dir / "nan.npy");
    CHECK(code_of([&] { load_stack(dir / "nan.npy"); }) == ErrorCode::NonFiniteValues);
    CHECK(code_of([&] { load_stack(dir / "missing.npy"); }) == ErrorCode::UnreadableFile);
  }

  TEST_CASE("normalization of a two-valued stack") {
    ImageStack stack;
    stack.push_back(Image(2, 2, std::vector<double>{0, 2, 2, 0}), "a");
    stack.push_back(Image(1, 2, std::vector<double>{0, 2}), "b");
    const auto [normalized, stats] = normalize_stack(stack);
    CHECK(stats.mean == doctest::Approx(1.0));
    CHECK(stats.std == doctest::Approx(1.0));
    CHECK(normalized.images[0](0, 0) == doctest::Approx(-1.0));
    CHECK(normalized.images[0](0, 1) == doctest::Approx(1.0));

    ImageStack constant;
    constant.push_back(Image(3, 3, 0.7), "c");
    CHECK(code_of([&] { normalize_stack(constant); }) == ErrorCode::DegenerateStack);
  }

  TEST_CASE("normalization statistics and inverse") {
    Rng rng(2);
    ImageStack stack;
    for (int k = 0; k < 5; ++k) stack.push_back(random_image(20, 30, rng, 100.0, 900.0), "r");
    const auto [normalized, stats] = normalize_stack(stack);
    std::vector<double> all;
    for (const auto& image : normalized.images) all.insert(all.end(), image.pixels().begin(), image.pixels().end());
    const auto m = moments(all);
    const double population_std = std::sqrt(m.var * static_cast<double>(m.n - 1) / static_cast<double>(m.n));
    CHECK(std::abs(m.mean) < 1e-5);
    CHECK(std::abs(population_std - 1.0) < 1e-5);

    const auto again = compute_norm_stats(normalized);
    CHECK(std::abs(again.mean) < 1e-5);
    CHECK(std::abs(again.std - 1.0) < 1e-5);

    for (std::size_t k = 0; k < stack.size(); ++k) {
      const auto back = stats.denormalize(normalized.images[k]);
      for (std::size_t i = 0; i < back.pixels().size(); ++i) {
        const double v = stack.images[k].pixels()[i];
        CHECK(std::abs(back.pixels()[i] - v) <= 1e-6 * std::abs(v));
      }
    }

    const auto dir = temp_dir("norm");
    stats.save(dir / "norm.txt");
    const auto loaded = NormStats::load(dir / "norm.txt");
    CHECK(loaded.mean == stats.mean);
    CHECK(loaded.std == stats.std);
  }

  TEST_CASE("random crops") {
    Rng rng(3);
    const auto image = random_image(8, 8, rng);
    CHECK(random_crop(image, {8, 8, 0}, rng) == image);
    CHECK(code_of([&] { random_crop(image, {16, 16, 0}, rng); }) == ErrorCode::CropTooLarge);

    Rng a(4), b(4);
    CHECK(random_crop(image, {4, 4, 0}, a) == random_crop(image, {4, 4, 0}, b));
  }

  TEST_CASE("crop offsets are uniform over every valid placement") {
    // Pixel values encode their position so the offset can be read back.
    Image image(8, 8);
    for (std::int64_t i = 0; i < 8; ++i) {
      for (std::int64_t j = 0; j < 8; ++j) image(i, j) = static_cast<double>(i * 8 + j);
    }
    Rng rng(5);
    std::vector<int> counts(25, 0);
    const int draws = 10000;
    for (int d = 0; d < draws; ++d) {
      const auto c = random_crop(image, {4, 4, 0}, rng);
      const auto top = static_cast<int>(c(0, 0)) / 8, left = static_cast<int>(c(0, 0)) % 8;
      REQUIRE(top <= 4);
      REQUIRE(left <= 4);
      ++counts[static_cast<std::size_t>(top * 5 + left)];
    }
    const double p = 1.0 / 25.0;
    const double expected = draws * p, se = std::sqrt(draws * p * (1 - p));
    for (int c : counts) CHECK(std::abs(c - expected) < 4 * se);
  }

  TEST_CASE("train/validation split") {
    ImageStack stack;
    for (int k = 0; k < 10; ++k) stack.push_back(Image(2, 2, k), "img" + std::to_string(k));
    const auto [train, val] = split_train_val(stack, 0.2, 7);
    CHECK(train.size() == 8);
    CHECK(val.size() == 2);
    std::set<std::string> ids(train.source_ids.begin(), train.source_ids.end());
    for (const auto& id : val.source_ids) CHECK(ids.insert(id).second);
    CHECK(ids.size() == 10);

    const auto [train2, val2] = split_train_val(stack, 0.2, 7);
    CHECK(train2.source_ids == train.source_ids);
    CHECK(val2.source_ids == val.source_ids);

    ImageStack one;
    one.push_back(Image(2, 2), "only");
    CHECK(code_of([&] { split_train_val(one, 0.5, 0); }) == ErrorCode::TooFewImages);
  }

  TEST_CASE("partition property over many stack sizes") {
    for (int n = 2; n < 40; ++n) {
      ImageStack stack;
      for (int k = 0; k < n; ++k) stack.push_back(Image(1, 1, k), std::to_string(k));
      const auto [train, val] = split_train_val(stack, 0.1, static_cast<std::uint64_t>(n));
      CHECK(train.size() >= 1);
      CHECK(val.size() >= 1);
      std::multiset<std::string> all(train.source_ids.begin(), train.source_ids.end());
      all.insert(val.source_ids.begin(), val.source_ids.end());
      CHECK(all.size() == static_cast<std::size_t>(n));
      CHECK(std::set<std::string>(all.begin(), all.end()).size() == static_cast<std::size_t>(n));
    }
  }
}

TEST_SUITE("noise_synthesis") {
  TEST_CASE("stripe noise on a zero signal is zero-centred") {
    Rng rng(10);
    const auto x = apply_stripe_noise(Image(1000, 1000), {}, rng);
    const auto m = moments(x.pixels());
    CHECK(std::abs(m.mean) < 4 * m.standard_error());
  }

  TEST_CASE("stripe noise on a unit signal has mean one and shot variance a s") {
    Rng rng(11);
    const Image s(1000, 1000, 1.0);
    const auto c = stripe_noise_components(s, {}, rng);
    const auto x = c.shot + c.awg + c.stripe;
    const auto m = moments(x.pixels());
    CHECK(std::abs(m.mean - 1.0) < 4 * std::sqrt(m.var) / 1e3);
    const auto shot = moments(c.shot.pixels());
    CHECK(std::abs(shot.var - 0.002) < 0.05 * 0.002);
  }

  TEST_CASE("stripe noise correlates along the blur axis") {
    Rng rng(12);
    const auto x = apply_stripe_noise(Image(1000, 1000, 0.5), {}, rng);
    const auto map = spatial_autocorrelation(x - Image(1000, 1000, 0.5), 1);
    MESSAGE("lag (0,1) " << map.at(0, 1) << " lag (1,0) " << map.at(1, 0));
    CHECK(std::abs(map.at(0, 1)) >= 5 * std::abs(map.at(1, 0)));

    StripeNoiseParams vertical;
    vertical.blur_axis = BlurAxis::Vertical;
    const auto y = apply_stripe_noise(Image(1000, 1000, 0.5), vertical, rng);
    const auto vmap = spatial_autocorrelation(y - Image(1000, 1000, 0.5), 1);
    CHECK(std::abs(vmap.at(1, 0)) >= 5 * std::abs(vmap.at(0, 1)));
  }

  TEST_CASE("checkerboard pattern values down a column") {
    CheckerboardNoiseParams params;
    const auto pattern = checkerboard_pattern(6, 3, params, 0);
    const double expected[] = {-0.1, -0.1, 0.1, 0.1, -0.1, -0.1};
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 3; ++j) CHECK(pattern(i, j) == doctest::Approx(expected[i]));
    }
  }

  TEST_CASE("checkerboard with every term disabled is the identity") {
    CheckerboardNoiseParams params;
    params.pattern_amp = 0.0;
    params.gaussian_enabled = false;
    Rng rng(13);
    const auto s = random_image(16, 16, rng);
    CHECK(apply_checkerboard_noise(s, params, rng) == s);
  }

  TEST_CASE("checkerboard Gaussian term has variance c / s") {
    CheckerboardNoiseParams params;
    params.pattern_amp = 0.0;
    Rng rng(14);
    const Image s(1000, 1000, 0.5);
    const auto m = moments((apply_checkerboard_noise(s, params, rng) - s).pixels());
    CHECK(std::abs(std::sqrt(m.var) - std::sqrt(0.15 / 0.5)) < 0.02 * std::sqrt(0.15 / 0.5));
    CHECK(checkerboard_gaussian_std(0.01, params) == doctest::Approx(std::sqrt(0.15 / 0.05)));

    params.interpretation = DependencyInterpretation::StdDev;
    CHECK(checkerboard_gaussian_std(0.5, params) == doctest::Approx(0.3));
  }

  TEST_CASE("checkerboard residual is zero-centred over the phase") {
    Rng rng(15);
    std::vector<double> residuals;
    for (int k = 0; k < 1000; ++k) {
      const Image s(33, 31, 0.6);  // odd sizes so a single image does not cancel the pattern
      const auto r = apply_checkerboard_noise(s, {}, rng) - s;
      residuals.insert(residuals.end(), r.pixels().begin(), r.pixels().end());
    }
    const auto m = moments(residuals);
    CHECK(std::abs(m.mean) < 4 * m.standard_error());
  }

  TEST_CASE("checkerboard noise std decreases with signal") {
    Rng rng(16);
    const auto s = random_image(1000, 1000, rng, 0.1, 0.9);
    const auto r = apply_checkerboard_noise(s, {}, rng) - s;
    const std::vector<double> edges{0.1, 0.3, 0.5, 0.7, 0.9};
    const auto profile = signal_dependence(r, s, edges);
    const auto sd = stds(profile);
    for (std::size_t k = 1; k < sd.size(); ++k) CHECK(sd[k] < sd[k - 1]);
  }

  TEST_CASE("iid noise recipes") {
    Rng rng(17);
    const auto s = random_image(32, 32, rng);
    IidNoiseParams zero;
    zero.awg_std = 0.0;
    CHECK(apply_iid_noise(s, IidNoiseKind::Awg, zero, rng) == s);

    const auto x = apply_iid_noise(Image(1000, 1000, 4.0), IidNoiseKind::Poisson, {}, rng);
    const auto m = moments(x.pixels());
    CHECK(std::abs(m.var - 4.0) < 0.02 * 4.0);

    auto negative = s;
    negative(0, 0) = -1.0;
    CHECK(code_of([&] { apply_iid_noise(negative, IidNoiseKind::Poisson, {}, rng); }) ==
          ErrorCode::NegativeSignalForPoisson);
  }

  TEST_CASE("generators are zero-centred and deterministic") {
    Rng source(18);
    const auto s = random_image(1000, 1000, source, 0.0, 1.0);
    const auto check = [&](auto&& generate) {
      Rng a(99), b(99);
      const auto x = generate(a);
      CHECK(x == generate(b));
      const auto m = moments((x - s).pixels());
      CHECK(std::abs(m.mean) < 4 * m.standard_error());
    };
    check([&](Rng& r) { return apply_stripe_noise(s, {}, r); });
    check([&](Rng& r) { return apply_iid_noise(s, IidNoiseKind::Awg, {}, r); });
    check([&](Rng& r) { return apply_iid_noise(s, IidNoiseKind::Poisson, {0.1, 0.01}, r); });
    check([&](Rng& r) { return apply_iid_noise(s, IidNoiseKind::PoissonGaussian, {0.1, 0.01}, r); });
  }

  TEST_CASE("signals outside the unit range are rejected") {
    Rng rng(19);
    Image s(4, 4, 0.5);
    s(0, 0) = 1.5;
    CHECK(code_of([&] { apply_stripe_noise(s, {}, rng); }) == ErrorCode::OutOfRangeSignal);
    CHECK(code_of([&] { apply_checkerboard_noise(s, {}, rng); }) == ErrorCode::OutOfRangeSignal);
  }
}

TEST_SUITE("evaluation") {
  TEST_CASE("psnr examples") {
    const Image zero(4, 4), tenth(4, 4, 0.1);
    CHECK(std::isinf(psnr(zero, zero, 1.0)));
    CHECK(psnr(zero, tenth, 1.0) == doctest::Approx(20.0));
    CHECK(psnr(zero, Image(4, 4, 2.0), 2.0) == doctest::Approx(0.0));
    CHECK(code_of([&] { psnr(zero, Image(4, 5), 1.0); }) == ErrorCode::ShapeMismatch);
    CHECK(code_of([&] { psnr(zero, tenth, 0.0); }) == ErrorCode::NonPositiveRange);
  }

  TEST_CASE("psnr decreases as the error grows") {
    Rng rng(20);
    const auto gt = random_image(16, 16, rng);
    double previous = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 50; ++k) {
      auto pred = gt;
      for (auto& v : pred.pixels()) v += 0.01 * k;
      const double value = psnr(gt, pred, 1.0);
      CHECK(value < previous);
      previous = value;
    }
  }

  TEST_CASE("white noise autocorrelation") {
    Rng rng(21);
    std::normal_distribution<double> normal;
    Image r(1000, 1000);
    for (auto& v : r.pixels()) v = normal(rng);
    const auto map = spatial_autocorrelation(r, 3);
    CHECK(map.at(0, 0) == 1.0);
    const double tol = 4.0 / std::sqrt(1e6);
    for (int dy = -3; dy <= 3; ++dy) {
      for (int dx = -3; dx <= 3; ++dx) {
        if (dy != 0 || dx != 0) CHECK(std::abs(map.at(dy, dx)) < tol);
        CHECK(std::abs(map.at(dy, dx) - map.at(-dy, -dx)) < tol);
      }
    }
    CHECK(code_of([&] { spatial_autocorrelation(Image(6, 6), 3); }) == ErrorCode::ImageTooSmall);
  }

  TEST_CASE("autocorrelation of a constant-shift pattern") {
    // Alternating columns: lag (0, 1) is perfectly anti-correlated.
    Image r(10, 10);
    for (std::int64_t i = 0; i < 10; ++i) {
      for (std::int64_t j = 0; j < 10; ++j) r(i, j) = (j % 2 == 0) ? 1.0 : -1.0;
    }
    const auto map = spatial_autocorrelation(r, 2);
    CHECK(map.at(0, 1) == doctest::Approx(-1.0));
    CHECK(map.at(0, 2) == doctest::Approx(1.0));
  }

  TEST_CASE("signal dependence profiles") {
    Rng rng(22);
    const auto s = random_image(1000, 1000, rng, 0.1, 0.9);
    const std::vector<double> edges{0.1, 0.3, 0.5, 0.7, 0.9};

    const auto awg = apply_iid_noise(s, IidNoiseKind::Awg, {}, rng) - s;
    const auto flat = stds(signal_dependence(awg, s, edges));
    const auto [lo, hi] = std::minmax_element(flat.begin(), flat.end());
    CHECK(*hi < 1.05 * *lo);

    const auto poisson = apply_iid_noise(s, IidNoiseKind::Poisson, {0.1, 0.01}, rng) - s;
    const auto rising = stds(signal_dependence(poisson, s, edges));
    for (std::size_t k = 1; k < rising.size(); ++k) CHECK(rising[k] > rising[k - 1]);

    const auto sparse = signal_dependence(awg, s, std::vector<double>{0.1, 0.1000001, 0.9});
    CHECK_FALSE(sparse.bins[0].reliable);
    CHECK(sparse.bins[1].reliable);
    CHECK(uniform_bin_edges(0.0, 1.0, 4) == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  }
}

TEST_SUITE("config") {
  TEST_CASE("presets") {
    const auto large = parse_config("preset = large\n");
    CHECK(large.model.hierarchy.n_levels == 14);
    CHECK(large.model.ar.rf.length == 40);
    CHECK(large.train.lr == 0.002);
    auto large_dims = std::vector<int>(14, 64);
    large_dims.back() = 128;
    CHECK(large.model.hierarchy.latent_dims == large_dims);

    const auto small = parse_config("preset = small\n");
    CHECK(small.model.hierarchy.n_levels == 6);
    auto small_dims = std::vector<int>(6, 32);
    small_dims.back() = 64;
    CHECK(small.model.hierarchy.latent_dims == small_dims);
  }

  TEST_CASE("unknown keys and bad values") {
    CHECK(code_of([] { parse_config("model.n_levles = 3\n"); }) == ErrorCode::UnknownKey);
    CHECK(code_of([] { parse_config("train.lr = fast\n"); }) == ErrorCode::InvalidValue);
    CHECK(code_of([] { parse_config("train.lr = -1\n"); }) == ErrorCode::InvalidValue);
    CHECK(code_of([] { parse_config("", {{"bogus", "1"}}); }) == ErrorCode::UnknownKey);
  }

  TEST_CASE("overrides win over file values") {
    const auto c = parse_config("preset = large\nar.rf_length = 40\n", {{"ar.rf_length", "16"}});
    CHECK(c.model.ar.rf.length == 16);
  }

  TEST_CASE("resolved text round trips") {
    auto c = parse_config("preset = small\nar.orientation = column\ntrain.seed = 12\n# comment\n");
    const auto text = to_text(c);
    CHECK(parse_config(text) == c);
    CHECK(to_text(parse_config(text)) == text);
    CHECK(parse_config(text) == parse_config(text));
  }
}
