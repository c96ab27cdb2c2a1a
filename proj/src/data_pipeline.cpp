#include "cosdd/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cosdd/error.hpp"

namespace fs = std::filesystem;

namespace cosdd {

Image NormStats::normalize(const Image& image) const {
  Image out = image;
  for (double& v : out.pixels()) v = normalize(v);
  return out;
}

Image NormStats::denormalize(const Image& image) const {
  Image out = image;
  for (double& v : out.pixels()) v = denormalize(v);
  return out;
}

ImageStack NormStats::normalize(const ImageStack& stack) const {
  ImageStack out;
  for (std::size_t k = 0; k < stack.size(); ++k) out.push_back(normalize(stack.images[k]), stack.source_ids[k]);
  return out;
}

void NormStats::save(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out.precision(17);
  out << "mean = " << mean << "\nstd = " << std << "\n";
}

NormStats NormStats::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::UnreadableFile, "cannot read " + path.string());
  NormStats stats;
  bool have_mean = false;
  bool have_std = false;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
    const double value = std::stod(line.substr(eq + 1));
    if (key == "mean") {
      stats.mean = value;
      have_mean = true;
    } else if (key == "std") {
      stats.std = value;
      have_std = true;
    } else {
      fail(ErrorCode::UnknownKey, "unexpected key '" + key + "' in " + path.string());
    }
  }
  if (!have_mean || !have_std || !(stats.std > 0.0)) fail(ErrorCode::CorruptFile, path.string() + " is incomplete");
  return stats;
}

NormStats compute_norm_stats(const ImageStack& stack) {
  if (stack.empty()) fail(ErrorCode::TooFewImages, "cannot normalise an empty stack");
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;
  // Welford accumulation keeps the variance accurate for large offsets.
  for (const auto& image : stack.images) {
    for (double v : image.pixels()) {
      count += 1.0;
      const double delta = v - mean;
      mean += delta / count;
      m2 += delta * (v - mean);
    }
  }
  const double std = std::sqrt(m2 / count);
  if (!(std > 0.0) || !std::isfinite(std)) fail(ErrorCode::DegenerateStack, "all pixels are equal");
  return {mean, std};
}

std::pair<ImageStack, NormStats> normalize_stack(const ImageStack& stack) {
  const NormStats stats = compute_norm_stats(stack);
  return {stats.normalize(stack), stats};
}

Image random_crop(const Image& image, const CropSpec& spec, Rng& rng) {
  if (spec.height < 1 || spec.width < 1 || spec.height > image.rows() || spec.width > image.cols()) {
    fail(ErrorCode::CropTooLarge, "crop " + std::to_string(spec.height) + "x" + std::to_string(spec.width) +
                                      " from " + std::to_string(image.rows()) + "x" + std::to_string(image.cols()));
  }
  std::uniform_int_distribution<std::int64_t> top(0, image.rows() - spec.height);
  std::uniform_int_distribution<std::int64_t> left(0, image.cols() - spec.width);
  const std::int64_t t = top(rng);
  const std::int64_t l = left(rng);
  return crop(image, t, l, spec.height, spec.width);
}

std::pair<ImageStack, ImageStack> split_train_val(const ImageStack& stack, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) fail(ErrorCode::InvalidValue, "val_fraction must lie in (0, 1)");
  const std::size_t n = stack.size();
  if (n < 2) fail(ErrorCode::TooFewImages, "need at least 2 images to split");
  const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(n))));
  if (n_val >= n) fail(ErrorCode::TooFewImages, "split leaves no training images");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::sort(val_idx.begin(), val_idx.end());

  ImageStack train;
  ImageStack val;
  for (std::size_t k = 0; k < n; ++k) {
    auto& dst = std::binary_search(val_idx.begin(), val_idx.end(), k) ? val : train;
    dst.push_back(stack.images[k], stack.source_ids[k]);
  }
  return {std::move(train), std::move(val)};
}

namespace {

// Bilinearly interpolated lattice of uniform values with the given cell size.
void add_value_noise(Image& image, double cell, double amplitude, Rng& rng) {
  const auto gr = static_cast<std::int64_t>(std::ceil(static_cast<double>(image.rows()) / cell)) + 2;
  const auto gc = static_cast<std::int64_t>(std::ceil(static_cast<double>(image.cols()) / cell)) + 2;
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Image lattice(gr, gc);
  for (double& v : lattice.pixels()) v = uni(rng);
  std::uniform_real_distribution<double> shift(0.0, cell);
  const double dy = shift(rng);
  const double dx = shift(rng);
  for (std::int64_t i = 0; i < image.rows(); ++i) {
    const double y = (static_cast<double>(i) + dy) / cell;
    const auto y0 = static_cast<std::int64_t>(y);
    const double fy = y - static_cast<double>(y0);
    const double wy = fy * fy * (3.0 - 2.0 * fy);
    for (std::int64_t j = 0; j < image.cols(); ++j) {
      const double x = (static_cast<double>(j) + dx) / cell;
      const auto x0 = static_cast<std::int64_t>(x);
      const double fx = x - static_cast<double>(x0);
      const double wx = fx * fx * (3.0 - 2.0 * fx);
      const double top = lattice(y0, x0) * (1 - wx) + lattice(y0, x0 + 1) * wx;
      const double bottom = lattice(y0 + 1, x0) * (1 - wx) + lattice(y0 + 1, x0 + 1) * wx;
      image(i, j) += amplitude * (top * (1 - wy) + bottom * wy);
    }
  }
}

void add_blobs(Image& image, int count, Rng& rng) {
  std::uniform_real_distribution<double> pos_r(0.0, static_cast<double>(image.rows()));
  std::uniform_real_distribution<double> pos_c(0.0, static_cast<double>(image.cols()));
  const double scale = static_cast<double>(std::min(image.rows(), image.cols()));
  std::uniform_real_distribution<double> radius(0.06 * scale, 0.22 * scale);
  std::uniform_real_distribution<double> level(-0.8, 0.8);
  for (int b = 0; b < count; ++b) {
    const double cy = pos_r(rng);
    const double cx = pos_c(rng);
    const double r = radius(rng);
    const double v = level(rng);
    for (std::int64_t i = 0; i < image.rows(); ++i) {
      for (std::int64_t j = 0; j < image.cols(); ++j) {
        const double d = std::hypot(static_cast<double>(i) - cy, static_cast<double>(j) - cx);
        // one-pixel soft edge
        image(i, j) += v * std::clamp(r - d + 0.5, 0.0, 1.0);
      }
    }
  }
}

}  // namespace

ImageStack procedural_textures(std::size_t count, std::int64_t rows, std::int64_t cols, std::uint64_t seed) {
  ImageStack stack;
  Rng rng(seed);
  std::uniform_int_distribution<int> blob_count(2, 6);
  for (std::size_t k = 0; k < count; ++k) {
    Image image(rows, cols);
    const double base = static_cast<double>(std::max(rows, cols));
    double amplitude = 1.0;
    for (double cell = base / 2.0; cell >= 3.0; cell /= 2.0) {
      add_value_noise(image, cell, amplitude, rng);
      amplitude *= 0.55;
    }
    add_blobs(image, blob_count(rng), rng);
    const double lo = min_value(image);
    const double hi = max_value(image);
    for (double& v : image.pixels()) v = 0.1 + 0.8 * (v - lo) / (hi - lo);
    stack.push_back(std::move(image), "texture_" + std::to_string(k));
  }
  return stack;
}

ImageStack scale_to_unit_range(const ImageStack& stack) {
  if (stack.empty()) return stack;
  double lo = min_value(stack.images.front());
  double hi = max_value(stack.images.front());
  for (const auto& image : stack.images) {
    lo = std::min(lo, min_value(image));
    hi = std::max(hi, max_value(image));
  }
  if (!(hi > lo)) fail(ErrorCode::DegenerateStack, "cannot rescale a constant stack");
  ImageStack out = stack;
  for (auto& image : out.images) {
    for (double& v : image.pixels()) v = (v - lo) / (hi - lo);
  }
  return out;
}

}  // namespace cosdd
