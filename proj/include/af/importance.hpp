#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "af/flow.hpp"
#include "af/mat.hpp"
#include "af/net.hpp"
#include "json.hpp"

namespace af {

struct DreConfig {
  std::vector<int> hidden = {64, 64, 64};
  double learning_rate = 1e-3;
  int epochs = 60;
  int batch_size = 5000;  // per side
  std::uint64_t seed = 0;
};

// One stage of the log-ratio estimator: a trained scalar net, or an injected
// analytic function (tests, exact-ratio baselines).
struct RatioStage {
  std::variant<Mlp, std::function<double(std::span<const double>)>> eval;

  double operator()(std::span<const double> x) const;
  int stage_dim() const;
};

struct RatioChain {
  std::vector<RatioStage> stages;

  double log_ratio(std::span<const double> x) const;

  // Persists net-backed stages only; analytic stages are test scaffolding.
  void save(const std::filesystem::path& dir) const;
  static RatioChain load(const std::filesystem::path& dir);
};

// Logistic discrimination between the two sample sets: minimizes
// mean log(1+e^{-r}) on samples_prev plus mean log(1+e^{r}) on samples_next,
// so the minimizer is log(f_prev / f_next).
RatioStage train_ratio_stage(const Mat& samples_prev, const Mat& samples_next,
                             const DreConfig& cfg, std::vector<double>* loss_trace = nullptr);

double log_ratio(const RatioChain& chain, std::span<const double> x);

struct IsEstimate {
  double value = 0.0;
  long clamped = 0;  // exponent clamp events (|log ratio| > 700)

  nlohmann::json to_json() const;
};

// (1/n) sum exp(log_ratio(x_i)) h(x_i) over samples from the proposal.
IsEstimate is_estimate(const Mat& samples,
                       const std::function<double(std::span<const double>)>& h,
                       const RatioChain& chain);

// Self-normalized estimator sum w_i h(x_i) / sum w_i from log-weights,
// computed through one log-sum-exp shift.
double normalized_is_estimate(const Mat& samples,
                              const std::function<double(std::span<const double>)>& h,
                              std::span<const double> log_weights);

struct TailResult {
  double mean = 0.0;
  double stddev = 0.0;
  int rounds = 0;
  int per_round = 0;
  long clamped = 0;

  nlohmann::json to_json() const;
};

// Repeated rounds of is_estimate on fresh pushed samples for the shell event
// h = 1{||x|| >= c}.
TailResult tail_probability_experiment(double c, const AnnealingFlowModel& model,
                                       const RatioChain& chain, int rounds, int per_round,
                                       std::uint64_t seed);

}  // namespace af
