#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "af/mat.hpp"
#include "af/rng.hpp"
#include "json.hpp"

namespace af {

struct MmdOptions {
  // Exact pooled-median bandwidth up to this many pooled points; beyond it a
  // deterministic subsample (metric seed) stands in for the median scan.
  int bandwidth_cap = 4096;
  std::uint64_t seed = 0;
};

// Squared maximum mean discrepancy, Gaussian kernel exp(-||x-y||^2 / gamma^2)
// with gamma = 0.1 * median pairwise distance over the pooled sets. Biased
// V-statistic; tiny negative results clamp to zero.
double mmd(const Mat& x, const Mat& y, const MmdOptions& opts = {});

// Optimal row->column assignment minimizing total cost, O(n^3).
std::vector<int> solve_assignment(const Mat& cost);

// Mean Euclidean transport cost under the optimal assignment; requires equal
// sample counts.
double wasserstein(const Mat& x, const Mat& y);

// Nearest-center occupancy frequencies against the true mixture weights.
double mode_weight_mse(const Mat& samples, const Mat& centers,
                       const std::vector<double>& weights);

// Number of centers holding at least min_count samples within the threshold
// ball; min_count < 0 selects max(1, ceil(0.1 * n / M)).
int modes_explored(const Mat& samples, const Mat& centers, double radius_threshold,
                   int min_count = -1);

// Mean squared error of unbiased per-dimension sample variances, with |.|
// applied to the masked dimensions first.
double variance_mse(const Mat& samples, const std::vector<bool>& abs_mask,
                    const std::vector<double>& true_vars);

// Uniform subsample of n rows without replacement.
Mat subsample_rows(const Mat& x, int n, Rng& rng);

struct MetricsReport {
  std::optional<double> mmd;
  std::optional<double> wasserstein;
  std::optional<double> mode_weight_mse;
  std::optional<int> modes_explored;
  std::optional<double> variance_mse;
  int n_x = 0;
  int n_y = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

}  // namespace af
