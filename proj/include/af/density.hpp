#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "af/mat.hpp"
#include "af/rng.hpp"
#include "json.hpp"

namespace af {

enum class Family {
  IsotropicGaussian,
  GaussianMixture,
  TruncatedNormalRelaxed,
  Funnel,
  ExpWeightedGaussian,
  BayesianLogisticPosterior,
};

std::string family_name(Family f);

struct GaussianMixtureParams {
  Mat centers;                   // one center per row
  std::vector<double> weights;   // simplex, same count as centers
  double variance = 1.0;         // shared isotropic component variance
};

struct TruncatedNormalRelaxedParams {
  double radius = 4.0;
  double sharpness = 20.0;  // logistic slope replacing the hard indicator
};

struct FunnelParams {
  double neck_variance = 0.81;
};

struct ExpWeightedGaussianParams {
  std::vector<bool> abs_mask;      // per-dimension: taken through |.| or not
  double scale = 10.0;
  std::vector<double> variances;   // per-dimension scale divisors
};

struct BayesianLogisticPosteriorParams {
  Mat features;                 // n x d design matrix
  std::vector<double> labels;   // entries in {-1, +1}
  double prior_shape = 1.0;     // gamma prior on the precision
  double prior_rate = 0.01;
};

// An unnormalized log-density with analytic score and Hessian-vector product.
// Evaluations are pure; instances are immutable after construction and safe to
// share across threads.
class TargetDensity {
 public:
  static TargetDensity isotropic_gaussian(int dim);
  static TargetDensity gaussian_mixture(GaussianMixtureParams params);
  static TargetDensity truncated_normal(int dim, TruncatedNormalRelaxedParams params);
  static TargetDensity funnel(int dim, FunnelParams params);
  static TargetDensity exp_weighted_gaussian(int dim, ExpWeightedGaussianParams params);
  // State is (beta, log alpha); dim() is feature count + 1.
  static TargetDensity bayesian_logistic(BayesianLogisticPosteriorParams params);

  Family family() const { return family_; }
  int dim() const { return dim_; }

  double log_unnorm(std::span<const double> x) const;
  void score(std::span<const double> x, std::span<double> out) const;
  std::vector<double> score(std::span<const double> x) const;
  // out = (Hessian of log_unnorm at x) * v
  void hessian_vec(std::span<const double> x, std::span<const double> v,
                   std::span<double> out) const;

  // Known mode locations (GaussianMixture, ExpWeightedGaussian); empty Mat otherwise.
  Mat mode_centers() const;
  // Per-component standard deviation where meaningful; 1.0 otherwise.
  double component_std() const;

  bool has_exact_sampler() const;
  void sample_exact(Mat& out, Rng& rng) const;

  nlohmann::json to_json() const;
  static TargetDensity from_json(const nlohmann::json& j);

  const GaussianMixtureParams& gmm_params() const;
  const TruncatedNormalRelaxedParams& trunc_params() const;
  const ExpWeightedGaussianParams& expgauss_params() const;

 private:
  using Params = std::variant<std::monostate, GaussianMixtureParams,
                              TruncatedNormalRelaxedParams, FunnelParams,
                              ExpWeightedGaussianParams, BayesianLogisticPosteriorParams>;

  TargetDensity(Family family, int dim, Params params)
      : family_(family), dim_(dim), params_(std::move(params)) {}

  void check_dim(std::span<const double> x) const;

  Family family_;
  int dim_;
  Params params_;
};

// Centers equally spaced on a circle of the given radius in the first two
// coordinates; remaining coordinates fixed at radius/2.
TargetDensity make_gmm_on_circle(int num_modes, double radius, int dim,
                                 std::vector<double> weights = {});

// Standard Gaussian reference draws, one sample per row.
void sample_reference(Mat& out, Rng& rng);
Mat sample_reference(int n, int dim, Rng& rng);

// log pi_0 and its score for the standard Gaussian reference.
double reference_log_density(std::span<const double> x);

enum class PathKind { Geometric, ShrinkingRadius, ConstantTarget };

std::string path_kind_name(PathKind k);

// The family of unnormalized intermediate densities bridging the standard
// Gaussian reference to the target over K steps.
class AnnealingPath {
 public:
  // betas must be nondecreasing with beta_0 = 0 and beta_K = 1.
  static AnnealingPath geometric(TargetDensity target, std::vector<double> betas);
  // Equally spaced betas over `geometric_steps`, then `refinement` extra
  // blocks at beta = 1.
  static AnnealingPath geometric_uniform(TargetDensity target, int geometric_steps,
                                         int refinement = 0);
  // Target must be TruncatedNormalRelaxed; step k uses the truncation radius
  // c / (K - k + 1), so the final step is the target radius c itself.
  static AnnealingPath shrinking_radius(TargetDensity target, int steps);
  static AnnealingPath constant_target(TargetDensity target, int steps);

  PathKind kind() const { return kind_; }
  int steps() const { return steps_; }
  int dim() const { return target_.dim(); }
  const TargetDensity& target() const { return target_; }
  const std::vector<double>& betas() const { return betas_; }

  double log_density(int k, std::span<const double> x) const;
  void score(int k, std::span<const double> x, std::span<double> out) const;
  std::vector<double> score(int k, std::span<const double> x) const;
  void hessian_vec(int k, std::span<const double> x, std::span<const double> v,
                   std::span<double> out) const;

  nlohmann::json to_json() const;
  static AnnealingPath from_json(const nlohmann::json& j, TargetDensity target);

 private:
  AnnealingPath(PathKind kind, int steps, TargetDensity target)
      : kind_(kind), steps_(steps), target_(std::move(target)) {}

  void check_step(int k) const;
  double step_radius(int k) const;

  PathKind kind_;
  int steps_;
  TargetDensity target_;
  std::vector<double> betas_;                      // Geometric only, size K+1
  std::optional<TargetDensity> step_density(int k) const;  // ShrinkingRadius helper
};

// Synthetic two-class dataset for the Bayesian logistic posterior: features
// from a standard Gaussian, labels from a fixed ground-truth weight vector.
BayesianLogisticPosteriorParams synth_logistic_dataset(int n, int features,
                                                       std::uint64_t seed);

}  // namespace af
