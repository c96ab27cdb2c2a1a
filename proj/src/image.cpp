#include "cosdd/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cosdd/error.hpp"

namespace cosdd {

Image::Image(std::int64_t rows, std::int64_t cols, double fill)
    : rows_(rows), cols_(cols), pixels_(static_cast<std::size_t>(rows * cols), fill) {
  if (rows < 0 || cols < 0) fail(ErrorCode::InvalidValue, "negative image dimensions");
}

Image::Image(std::int64_t rows, std::int64_t cols, std::vector<double> pixels)
    : rows_(rows), cols_(cols), pixels_(std::move(pixels)) {
  if (rows < 0 || cols < 0 || static_cast<std::int64_t>(pixels_.size()) != rows * cols) {
    fail(ErrorCode::ShapeMismatch, "pixel buffer does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

namespace {

template <typename Op>
Image zip(const Image& a, const Image& b, Op op) {
  if (!a.same_shape(b)) fail(ErrorCode::ShapeMismatch, "elementwise operation on images of different shape");
  Image out(a.rows(), a.cols());
  std::transform(a.pixels().begin(), a.pixels().end(), b.pixels().begin(), out.pixels().begin(), op);
  return out;
}

}  // namespace

Image operator-(const Image& a, const Image& b) { return zip(a, b, std::minus<>{}); }
Image operator+(const Image& a, const Image& b) { return zip(a, b, std::plus<>{}); }

Image crop(const Image& image, std::int64_t top, std::int64_t left, std::int64_t rows, std::int64_t cols) {
  if (top < 0 || left < 0 || top + rows > image.rows() || left + cols > image.cols()) {
    fail(ErrorCode::CropTooLarge, "crop window exceeds image bounds");
  }
  Image out(rows, cols);
  for (std::int64_t i = 0; i < rows; ++i) {
    for (std::int64_t j = 0; j < cols; ++j) out(i, j) = image(top + i, left + j);
  }
  return out;
}

double mean(const Image& image) {
  if (image.empty()) return 0.0;
  return std::accumulate(image.pixels().begin(), image.pixels().end(), 0.0) / static_cast<double>(image.size());
}

double min_value(const Image& image) { return *std::min_element(image.pixels().begin(), image.pixels().end()); }
double max_value(const Image& image) { return *std::max_element(image.pixels().begin(), image.pixels().end()); }

bool all_finite(const Image& image) {
  return std::all_of(image.pixels().begin(), image.pixels().end(), [](double v) { return std::isfinite(v); });
}

void ImageStack::push_back(Image image, std::string source_id) {
  images.push_back(std::move(image));
  source_ids.push_back(std::move(source_id));
}

}  // namespace cosdd
