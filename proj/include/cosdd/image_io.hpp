#pragma once

#include <filesystem>

#include "cosdd/image.hpp"

namespace cosdd {

enum class StackFormat {
  RasterDir,         // directory of single-frame PNG/TIFF files
  StackedContainer,  // one multi-page TIFF
  ArrayFile,         // .npy holding a 2-D frame or a 3-D frame stack
};

struct LoadOptions {
  // Colour frames are rejected unless this is set, in which case channels are averaged.
  bool reduce_channels = false;
  // Per-image shapes may differ when frames are cropped downstream.
  bool allow_mixed_shapes = true;
};

// Picks the format from the path: directories are raster dirs, .npy is an
// array file, anything else is treated as a stacked container.
StackFormat detect_format(const std::filesystem::path& path);

ImageStack load_stack(const std::filesystem::path& path, StackFormat format, const LoadOptions& options = {});
ImageStack load_stack(const std::filesystem::path& path, const LoadOptions& options = {});

// Single frames are written as float32 TIFF (.tif/.tiff) or 16-bit PNG of
// values clamped to [0, 65535] (.png).
void save_image(const Image& image, const std::filesystem::path& path);
void save_stack_container(const ImageStack& stack, const std::filesystem::path& path);
// float32 .npy of shape (frames, rows, cols); all frames must share a shape.
void save_array_file(const ImageStack& stack, const std::filesystem::path& path);
// Writes every frame into `dir` under its source id (with the extension swapped to .tif).
void save_raster_dir(const ImageStack& stack, const std::filesystem::path& dir);

// 8-bit visualisation helper: linearly maps [lo, hi] onto [0, 255].
void save_preview_png(const Image& image, const std::filesystem::path& path, double lo, double hi);

}  // namespace cosdd
