#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cosdd {

using Rng = std::mt19937_64;

// Row-major single-channel image. Pixel (i, j) is row i, column j.
class Image {
 public:
  Image() = default;
  Image(std::int64_t rows, std::int64_t cols, double fill = 0.0);
  Image(std::int64_t rows, std::int64_t cols, std::vector<double> pixels);

  std::int64_t rows() const noexcept { return rows_; }
  std::int64_t cols() const noexcept { return cols_; }
  std::int64_t size() const noexcept { return rows_ * cols_; }
  bool empty() const noexcept { return pixels_.empty(); }

  double& operator()(std::int64_t i, std::int64_t j) { return pixels_[static_cast<std::size_t>(i * cols_ + j)]; }
  double operator()(std::int64_t i, std::int64_t j) const {
    return pixels_[static_cast<std::size_t>(i * cols_ + j)];
  }

  std::span<double> pixels() noexcept { return pixels_; }
  std::span<const double> pixels() const noexcept { return pixels_; }

  bool same_shape(const Image& other) const noexcept { return rows_ == other.rows_ && cols_ == other.cols_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::int64_t rows_ = 0;
  std::int64_t cols_ = 0;
  std::vector<double> pixels_;
};

// Elementwise helpers used throughout the pipeline.
Image operator-(const Image& a, const Image& b);
Image operator+(const Image& a, const Image& b);
Image crop(const Image& image, std::int64_t top, std::int64_t left, std::int64_t rows, std::int64_t cols);
double mean(const Image& image);
double min_value(const Image& image);
double max_value(const Image& image);
bool all_finite(const Image& image);

struct ImageStack {
  std::vector<Image> images;
  std::vector<std::string> source_ids;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }
  void push_back(Image image, std::string source_id);
};

}  // namespace cosdd
