#pragma once

#include <span>
#include <vector>

#include "cosdd/image.hpp"

namespace cosdd {

// 10 log10(range^2 / MSE). Identical images give +infinity.
double psnr(const Image& ground_truth, const Image& prediction, double data_range);

// Convention for picking data_range: 1 for synthetic [0, 1] data, otherwise
// the ground truth's max - min.
double default_data_range(const Image& ground_truth, bool synthetic_unit_range);

// Normalised autocorrelation over lags -max_lag..max_lag in both axes.
// values[(dy + L) * (2L + 1) + (dx + L)] is the Pearson correlation between
// r(i, j) and r(i + dy, j + dx) over all overlapping pixel pairs.
struct AutocorrMap {
  int max_lag = 0;
  std::vector<double> values;
  std::int64_t n_pixels = 0;

  int width() const { return 2 * max_lag + 1; }
  double at(int dy, int dx) const {
    return values[static_cast<std::size_t>((dy + max_lag) * width() + (dx + max_lag))];
  }
  Image as_image() const;
};

AutocorrMap spatial_autocorrelation(const Image& residual, int max_lag);
// Pools the pair sums of several residuals before normalising.
AutocorrMap spatial_autocorrelation(std::span<const Image> residuals, int max_lag);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct SignalBin {
  double lower = 0.0;
  double upper = 0.0;
  std::int64_t count = 0;
  double residual_mean = 0.0;
  double residual_std = 0.0;
  bool reliable = false;  // count >= min_count
};

struct SignalDependenceProfile {
  std::vector<double> bin_edges;
  std::vector<SignalBin> bins;
};

inline constexpr std::int64_t kMinBinCount = 100;

// Bins residual pixels by the co-located signal value. A pixel with signal v
// lands in bin k when edges[k] <= v < edges[k + 1] (last bin closed).
SignalDependenceProfile signal_dependence(std::span<const Image> residuals, std::span<const Image> signals,
                                          std::span<const double> bin_edges,
                                          std::int64_t min_count = kMinBinCount);
SignalDependenceProfile signal_dependence(const Image& residual, const Image& signal,
                                          std::span<const double> bin_edges,
                                          std::int64_t min_count = kMinBinCount);

// n_bins + 1 evenly spaced edges over [lo, hi].
std::vector<double> uniform_bin_edges(double lo, double hi, int n_bins);

}  // namespace cosdd
