#include "af/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "af/errors.hpp"

namespace af {

namespace {

// Lower median of the pairwise distances among the pooled rows.
double median_pairwise_distance(const std::vector<const double*>& rows, int d) {
  const std::size_t n = rows.size();
  std::vector<double> dists;
  dists.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      dists.push_back(std::sqrt(sq_dist(rows[i], rows[j], d)));
  const std::size_t mid = (dists.size() - 1) / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  return dists[mid];
}

}  // namespace

namespace {

bool rows_lexicographic_less(const Mat& a, const Mat& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.data()[i] != b.data()[i]) return a.data()[i] < b.data()[i];
  }
  return false;
}

}  // namespace

double mmd(const Mat& x_in, const Mat& y_in, const MmdOptions& opts) {
  if (x_in.rows() < 2 || y_in.rows() < 2)
    throw ValidationError("mmd: need at least 2 samples per set");
  if (x_in.cols() != y_in.cols()) throw ValidationError("mmd: dimension mismatch");
  // Canonical argument order keeps mmd(x, y) == mmd(y, x) exact: summation
  // order would otherwise differ in the last ulp.
  const bool swapped = y_in.rows() < x_in.rows() ||
                       (y_in.rows() == x_in.rows() && rows_lexicographic_less(y_in, x_in));
  const Mat& x = swapped ? y_in : x_in;
  const Mat& y = swapped ? x_in : y_in;
  const int d = x.cols();
  const int n1 = x.rows(), n2 = y.rows();

  std::vector<const double*> pooled;
  pooled.reserve(n1 + n2);
  for (int i = 0; i < n1; ++i) pooled.push_back(x.row(i));
  for (int i = 0; i < n2; ++i) pooled.push_back(y.row(i));
  if (static_cast<int>(pooled.size()) > opts.bandwidth_cap) {
    Rng rng = Rng::stream(opts.seed, "mmd-bandwidth");
    std::vector<const double*> keep;
    keep.reserve(opts.bandwidth_cap);
    for (int i = 0; i < opts.bandwidth_cap; ++i) {
      const std::size_t j = i + rng.uniform_int(pooled.size() - i);
      std::swap(pooled[i], pooled[j]);
      keep.push_back(pooled[i]);
    }
    pooled = std::move(keep);
  }
  const double median = median_pairwise_distance(pooled, d);
  if (!(median > 0.0)) throw ValidationError("mmd: invalid bandwidth (all points identical)");
  const double gamma = 0.1 * median;
  const double alpha = 1.0 / (gamma * gamma);

  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n1; ++j) kxx += std::exp(-alpha * sq_dist(x.row(i), x.row(j), d));
  for (int i = 0; i < n2; ++i)
    for (int j = 0; j < n2; ++j) kyy += std::exp(-alpha * sq_dist(y.row(i), y.row(j), d));
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) kxy += std::exp(-alpha * sq_dist(x.row(i), y.row(j), d));
  const double value = kxx / (static_cast<double>(n1) * n1) +
                       kyy / (static_cast<double>(n2) * n2) -
                       2.0 * kxy / (static_cast<double>(n1) * n2);
  return std::max(value, 0.0);
}

std::vector<int> solve_assignment(const Mat& cost) {
  const int n = cost.rows();
  if (cost.cols() != n) throw ValidationError("assignment: cost matrix must be square");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

double wasserstein(const Mat& x, const Mat& y) {
  if (x.rows() != y.rows()) throw ValidationError("wasserstein: sample counts must match");
  if (x.cols() != y.cols()) throw ValidationError("wasserstein: dimension mismatch");
  const int n = x.rows();
  if (n == 0) throw ValidationError("wasserstein: empty input");
  Mat cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cost(i, j) = std::sqrt(sq_dist(x.row(i), y.row(j), x.cols()));
  const std::vector<int> assign = solve_assignment(cost);
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += cost(i, assign[i]);
  return total / n;
}

namespace {

int nearest_center(const Mat& centers, const double* x, int d) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int j = 0; j < centers.rows(); ++j) {
    const double dist = sq_dist(x, centers.row(j), d);
    if (dist < best_d) {
      best_d = dist;
      best = j;
    }
  }
  return best;
}

}  // namespace

double mode_weight_mse(const Mat& samples, const Mat& centers,
                       const std::vector<double>& weights) {
  const int m = centers.rows();
  if (m < 1 || static_cast<int>(weights.size()) != m)
    throw ValidationError("mode_weight_mse: centers/weights mismatch");
  if (samples.cols() != centers.cols())
    throw ValidationError("mode_weight_mse: dimension mismatch");
  std::vector<double> counts(m, 0.0);
  for (int i = 0; i < samples.rows(); ++i)
    counts[nearest_center(centers, samples.row(i), samples.cols())] += 1.0;
  double mse = 0.0;
  const double n = std::max(1, samples.rows());
  for (int j = 0; j < m; ++j) {
    const double diff = counts[j] / n - weights[j];
    mse += diff * diff;
  }
  return mse / m;
}

int modes_explored(const Mat& samples, const Mat& centers, double radius_threshold,
                   int min_count) {
  if (!(radius_threshold > 0.0))
    throw ValidationError("modes_explored: radius threshold must be positive");
  const int m = centers.rows();
  if (samples.rows() == 0) return 0;
  if (samples.cols() != centers.cols())
    throw ValidationError("modes_explored: dimension mismatch");
  if (min_count < 0)
    min_count = std::max(1, static_cast<int>(std::ceil(0.1 * samples.rows() / m)));
  const double r2 = radius_threshold * radius_threshold;
  std::vector<int> counts(m, 0);
  for (int i = 0; i < samples.rows(); ++i) {
    for (int j = 0; j < m; ++j) {
      if (sq_dist(samples.row(i), centers.row(j), samples.cols()) <= r2) ++counts[j];
    }
  }
  int explored = 0;
  for (int j = 0; j < m; ++j)
    if (counts[j] >= min_count) ++explored;
  return explored;
}

double variance_mse(const Mat& samples, const std::vector<bool>& abs_mask,
                    const std::vector<double>& true_vars) {
  const int n = samples.rows(), d = samples.cols();
  if (n < 2) throw ValidationError("variance_mse: need at least 2 samples");
  if (static_cast<int>(true_vars.size()) != d)
    throw ValidationError("variance_mse: true variance count mismatch");
  if (!abs_mask.empty() && static_cast<int>(abs_mask.size()) != d)
    throw ValidationError("variance_mse: abs mask size mismatch");
  double mse = 0.0;
  for (int c = 0; c < d; ++c) {
    const bool take_abs = !abs_mask.empty() && abs_mask[c];
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = take_abs ? std::fabs(samples(i, c)) : samples(i, c);
      mean += v;
    }
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = take_abs ? std::fabs(samples(i, c)) : samples(i, c);
      var += (v - mean) * (v - mean);
    }
    var /= (n - 1);
    const double diff = var - true_vars[c];
    mse += diff * diff;
  }
  return mse / d;
}

Mat subsample_rows(const Mat& x, int n, Rng& rng) {
  if (n >= x.rows()) return x;
  std::vector<int> idx(x.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  for (int i = 0; i < n; ++i) {
    const std::size_t j = i + rng.uniform_int(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  Mat out(n, x.cols());
  for (int i = 0; i < n; ++i)
    std::copy(x.row(idx[i]), x.row(idx[i]) + x.cols(), out.row(i));
  return out;
}

nlohmann::json MetricsReport::to_json() const {
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0)
      throw NumericError(std::string("metrics: ") + name + " is not finite and nonnegative");
    return v;
  };
  nlohmann::json j;
  j["mmd"] = mmd ? nlohmann::json(check(*mmd, "mmd")) : nlohmann::json(nullptr);
  j["wasserstein"] =
      wasserstein ? nlohmann::json(check(*wasserstein, "wasserstein")) : nlohmann::json(nullptr);
  j["mode_weight_mse"] = mode_weight_mse
                             ? nlohmann::json(check(*mode_weight_mse, "mode_weight_mse"))
                             : nlohmann::json(nullptr);
  j["modes_explored"] =
      modes_explored ? nlohmann::json(*modes_explored) : nlohmann::json(nullptr);
  j["variance_mse"] =
      variance_mse ? nlohmann::json(check(*variance_mse, "variance_mse")) : nlohmann::json(nullptr);
  j["n_x"] = n_x;
  j["n_y"] = n_y;
  j["seed"] = seed;
  return j;
}

}  // namespace af
