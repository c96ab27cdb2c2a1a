#include "cosdd/evaluation.hpp"

#include <cmath>
#include <limits>

#include "cosdd/error.hpp"

namespace cosdd {

double psnr(const Image& ground_truth, const Image& prediction, double data_range) {
  if (!ground_truth.same_shape(prediction)) fail(ErrorCode::ShapeMismatch, "psnr needs images of equal shape");
  if (!(data_range > 0.0)) fail(ErrorCode::NonPositiveRange, "data_range must be positive");
  double sse = 0.0;
  for (std::int64_t k = 0; k < ground_truth.size(); ++k) {
    const auto idx = static_cast<std::size_t>(k);
    const double d = ground_truth.pixels()[idx] - prediction.pixels()[idx];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(ground_truth.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / mse);
}

double default_data_range(const Image& ground_truth, bool synthetic_unit_range) {
  return synthetic_unit_range ? 1.0 : max_value(ground_truth) - min_value(ground_truth);
}

Image AutocorrMap::as_image() const {
  return Image(width(), width(), values);
}

AutocorrMap spatial_autocorrelation(const Image& residual, int max_lag) {
  return spatial_autocorrelation(std::span<const Image>(&residual, 1), max_lag);
}

AutocorrMap spatial_autocorrelation(std::span<const Image> residuals, int max_lag) {
  if (max_lag < 0) fail(ErrorCode::InvalidValue, "max_lag must be >= 0");
  if (residuals.empty()) fail(ErrorCode::ImageTooSmall, "no residuals given");
  for (const auto& r : residuals) {
    if (r.rows() <= 2 * max_lag || r.cols() <= 2 * max_lag) {
      fail(ErrorCode::ImageTooSmall, "residual must exceed 2 * max_lag in both dimensions");
    }
  }
  AutocorrMap map;
  map.max_lag = max_lag;
  map.values.assign(static_cast<std::size_t>(map.width() * map.width()), 0.0);
  for (const auto& r : residuals) map.n_pixels += r.size();

  for (int dy = -max_lag; dy <= max_lag; ++dy) {
    for (int dx = -max_lag; dx <= max_lag; ++dx) {
      double n = 0, sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (const auto& r : residuals) {
        const std::int64_t i0 = std::max(0, -dy);
        const std::int64_t i1 = std::min(r.rows(), r.rows() - dy);
        const std::int64_t j0 = std::max(0, -dx);
        const std::int64_t j1 = std::min(r.cols(), r.cols() - dx);
        for (std::int64_t i = i0; i < i1; ++i) {
          for (std::int64_t j = j0; j < j1; ++j) {
            const double a = r(i, j);
            const double b = r(i + dy, j + dx);
            n += 1;
            sa += a;
            sb += b;
            saa += a * a;
            sbb += b * b;
            sab += a * b;
          }
        }
      }
      const double cov = sab / n - (sa / n) * (sb / n);
      const double va = saa / n - (sa / n) * (sa / n);
      const double vb = sbb / n - (sb / n) * (sb / n);
      double rho = (va > 0 && vb > 0) ? cov / std::sqrt(va * vb) : 0.0;
      if (dy == 0 && dx == 0) rho = 1.0;
      map.values[static_cast<std::size_t>((dy + max_lag) * map.width() + (dx + max_lag))] = rho;
    }
  }
  return map;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::ShapeMismatch, "cosine similarity of vectors with different lengths");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

SignalDependenceProfile signal_dependence(std::span<const Image> residuals, std::span<const Image> signals,
                                          std::span<const double> bin_edges, std::int64_t min_count) {
  if (residuals.size() != signals.size()) fail(ErrorCode::ShapeMismatch, "need one signal per residual");
  if (bin_edges.size() < 2) fail(ErrorCode::InvalidValue, "need at least two bin edges");
  const std::size_t n_bins = bin_edges.size() - 1;
  std::vector<double> count(n_bins, 0.0), sum(n_bins, 0.0), sum_sq(n_bins, 0.0);

  for (std::size_t k = 0; k < residuals.size(); ++k) {
    if (!residuals[k].same_shape(signals[k])) fail(ErrorCode::ShapeMismatch, "residual and signal shapes differ");
    for (std::int64_t p = 0; p < residuals[k].size(); ++p) {
      const auto idx = static_cast<std::size_t>(p);
      const double s = signals[k].pixels()[idx];
      if (s < bin_edges.front() || s > bin_edges.back()) continue;
      std::size_t bin = n_bins - 1;
      for (std::size_t b = 0; b < n_bins; ++b) {
        if (s < bin_edges[b + 1]) {
          bin = b;
          break;
        }
      }
      const double r = residuals[k].pixels()[idx];
      count[bin] += 1;
      sum[bin] += r;
      sum_sq[bin] += r * r;
    }
  }

  SignalDependenceProfile profile;
  profile.bin_edges.assign(bin_edges.begin(), bin_edges.end());
  for (std::size_t b = 0; b < n_bins; ++b) {
    SignalBin bin;
    bin.lower = bin_edges[b];
    bin.upper = bin_edges[b + 1];
    bin.count = static_cast<std::int64_t>(count[b]);
    if (count[b] > 0) {
      bin.residual_mean = sum[b] / count[b];
      const double var = count[b] > 1 ? (sum_sq[b] - count[b] * bin.residual_mean * bin.residual_mean) / (count[b] - 1) : 0.0;
      bin.residual_std = std::sqrt(std::max(var, 0.0));
    }
    bin.reliable = bin.count >= min_count;
    profile.bins.push_back(bin);
  }
  return profile;
}

SignalDependenceProfile signal_dependence(const Image& residual, const Image& signal, std::span<const double> bin_edges,
                                          std::int64_t min_count) {
  return signal_dependence(std::span<const Image>(&residual, 1), std::span<const Image>(&signal, 1), bin_edges,
                           min_count);
}

std::vector<double> uniform_bin_edges(double lo, double hi, int n_bins) {
  if (n_bins < 1 || !(hi > lo)) fail(ErrorCode::InvalidValue, "invalid bin specification");
  std::vector<double> edges;
  for (int b = 0; b <= n_bins; ++b) edges.push_back(lo + (hi - lo) * b / n_bins);
  return edges;
}

}  // namespace cosdd
