#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>

#include "cosdd/image.hpp"
#include "cosdd/image_io.hpp"

namespace cosdd {

// Population statistics of a training stack. Models see (v - mean) / std.
struct NormStats {
  double mean = 0.0;
  double std = 1.0;

  double normalize(double v) const { return (v - mean) / std; }
  double denormalize(double v) const { return v * std + mean; }
  Image normalize(const Image& image) const;
  Image denormalize(const Image& image) const;
  ImageStack normalize(const ImageStack& stack) const;

  // Sidecar text file with `mean = ...` and `std = ...` lines.
  void save(const std::filesystem::path& path) const;
  static NormStats load(const std::filesystem::path& path);
};

NormStats compute_norm_stats(const ImageStack& stack);
std::pair<ImageStack, NormStats> normalize_stack(const ImageStack& stack);

struct CropSpec {
  std::int64_t height = 256;
  std::int64_t width = 256;
  std::uint64_t seed = 0;
};

// Offsets are uniform over every valid placement; only the spec's dimensions
// are used here, the seed belongs to whoever owns `rng`.
Image random_crop(const Image& image, const CropSpec& spec, Rng& rng);

// Deterministic shuffled partition; returns (train, validation).
std::pair<ImageStack, ImageStack> split_train_val(const ImageStack& stack, double val_fraction, std::uint64_t seed);

inline constexpr double kDefaultValFraction = 0.1;

// Smooth multi-octave value noise plus a few hard-edged blobs, mapped onto
// [0.1, 0.9]. Used for desk-scale experiments that need ground truth.
ImageStack procedural_textures(std::size_t count, std::int64_t rows, std::int64_t cols, std::uint64_t seed);

// Rescales the whole stack linearly so its minimum is 0 and maximum is 1.
ImageStack scale_to_unit_range(const ImageStack& stack);

}  // namespace cosdd
