#include "af/density.hpp"

#include <algorithm>
#include <cmath>

#include "af/errors.hpp"
#include "af/special.hpp"

namespace af {

using nlohmann::json;

std::string family_name(Family f) {
  switch (f) {
    case Family::IsotropicGaussian: return "isotropic_gaussian";
    case Family::GaussianMixture: return "gaussian_mixture";
    case Family::TruncatedNormalRelaxed: return "truncated_normal_relaxed";
    case Family::Funnel: return "funnel";
    case Family::ExpWeightedGaussian: return "exp_weighted_gaussian";
    case Family::BayesianLogisticPosterior: return "bayesian_logistic_posterior";
  }
  return "?";
}

void TargetDensity::check_dim(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_)
    throw ValidationError("density input has dimension " + std::to_string(x.size()) +
                          ", expected " + std::to_string(dim_));
}

TargetDensity TargetDensity::isotropic_gaussian(int dim) {
  if (dim < 1) throw ValidationError("isotropic_gaussian: dim must be >= 1");
  return TargetDensity(Family::IsotropicGaussian, dim, std::monostate{});
}

TargetDensity TargetDensity::gaussian_mixture(GaussianMixtureParams params) {
  const int m = params.centers.rows();
  if (m < 1) throw ValidationError("gaussian_mixture: need at least one center");
  if (static_cast<int>(params.weights.size()) != m)
    throw ValidationError("gaussian_mixture: centers/weights count mismatch");
  double total = 0.0;
  for (double w : params.weights) {
    if (!(w > 0.0)) throw ValidationError("gaussian_mixture: weights must be positive");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-12)
    throw ValidationError("gaussian_mixture: weights must sum to 1");
  if (!(params.variance > 0.0))
    throw ValidationError("gaussian_mixture: variance must be positive");
  const int dim = params.centers.cols();
  return TargetDensity(Family::GaussianMixture, dim, std::move(params));
}

TargetDensity TargetDensity::truncated_normal(int dim, TruncatedNormalRelaxedParams params) {
  if (dim < 1) throw ValidationError("truncated_normal: dim must be >= 1");
  if (!(params.radius > 0.0)) throw ValidationError("truncated_normal: radius must be positive");
  if (!(params.sharpness > 0.0))
    throw ValidationError("truncated_normal: sharpness must be positive");
  return TargetDensity(Family::TruncatedNormalRelaxed, dim, params);
}

TargetDensity TargetDensity::funnel(int dim, FunnelParams params) {
  if (dim < 2) throw ValidationError("funnel: dim must be >= 2");
  if (!(params.neck_variance > 0.0))
    throw ValidationError("funnel: neck variance must be positive");
  return TargetDensity(Family::Funnel, dim, params);
}

TargetDensity TargetDensity::exp_weighted_gaussian(int dim, ExpWeightedGaussianParams params) {
  if (dim < 1) throw ValidationError("exp_weighted_gaussian: dim must be >= 1");
  if (params.abs_mask.empty()) params.abs_mask.assign(dim, true);
  if (params.variances.empty()) params.variances.assign(dim, 1.0);
  if (static_cast<int>(params.abs_mask.size()) != dim ||
      static_cast<int>(params.variances.size()) != dim)
    throw ValidationError("exp_weighted_gaussian: per-dimension field size mismatch");
  for (double v : params.variances)
    if (!(v > 0.0)) throw ValidationError("exp_weighted_gaussian: variances must be positive");
  if (!(params.scale > 0.0))
    throw ValidationError("exp_weighted_gaussian: scale must be positive");
  return TargetDensity(Family::ExpWeightedGaussian, dim, std::move(params));
}

TargetDensity TargetDensity::bayesian_logistic(BayesianLogisticPosteriorParams params) {
  const int n = params.features.rows();
  if (n < 1) throw ValidationError("bayesian_logistic: empty dataset");
  if (static_cast<int>(params.labels.size()) != n)
    throw ValidationError("bayesian_logistic: label count mismatch");
  for (double y : params.labels)
    if (y != 1.0 && y != -1.0)
      throw ValidationError("bayesian_logistic: labels must be +1 or -1");
  const int dim = params.features.cols() + 1;  // (beta, log alpha)
  return TargetDensity(Family::BayesianLogisticPosterior, dim, std::move(params));
}

namespace {

constexpr double kLogAlphaClamp = 700.0;

double gmm_log(const GaussianMixtureParams& p, std::span<const double> x) {
  const int m = p.centers.rows();
  const int d = p.centers.cols();
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> expo(m);
  for (int j = 0; j < m; ++j) {
    expo[j] = std::log(p.weights[j]) - 0.5 * sq_dist(x.data(), p.centers.row(j), d) / p.variance;
    best = std::max(best, expo[j]);
  }
  double acc = 0.0;
  for (int j = 0; j < m; ++j) acc += std::exp(expo[j] - best);
  return best + std::log(acc);
}

void gmm_responsibilities(const GaussianMixtureParams& p, std::span<const double> x,
                          std::vector<double>& r) {
  const int m = p.centers.rows();
  const int d = p.centers.cols();
  r.resize(m);
  double best = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < m; ++j) {
    r[j] = std::log(p.weights[j]) - 0.5 * sq_dist(x.data(), p.centers.row(j), d) / p.variance;
    best = std::max(best, r[j]);
  }
  double acc = 0.0;
  for (int j = 0; j < m; ++j) {
    r[j] = std::exp(r[j] - best);
    acc += r[j];
  }
  for (int j = 0; j < m; ++j) r[j] /= acc;
}

}  // namespace

double TargetDensity::log_unnorm(std::span<const double> x) const {
  check_dim(x);
  switch (family_) {
    case Family::IsotropicGaussian:
      return -0.5 * sq_norm(x);
    case Family::GaussianMixture:
      return gmm_log(std::get<GaussianMixtureParams>(params_), x);
    case Family::TruncatedNormalRelaxed: {
      const auto& p = std::get<TruncatedNormalRelaxedParams>(params_);
      const double r = std::sqrt(sq_norm(x));
      return -softplus(-p.sharpness * (r - p.radius)) - 0.5 * r * r;
    }
    case Family::Funnel: {
      const auto& p = std::get<FunnelParams>(params_);
      const double x1 = x[0];
      double tail_sq = 0.0;
      for (std::size_t i = 1; i < x.size(); ++i) tail_sq += x[i] * x[i];
      const double e = std::exp(-x1);
      return -0.5 * x1 * x1 / p.neck_variance - 0.5 * tail_sq * e -
             0.5 * (dim_ - 1) * x1;
    }
    case Family::ExpWeightedGaussian: {
      const auto& p = std::get<ExpWeightedGaussianParams>(params_);
      double acc = 0.0;
      for (int i = 0; i < dim_; ++i) {
        const double g = p.abs_mask[i] ? std::fabs(x[i]) : x[i];
        acc += p.scale * g / p.variances[i] - 0.5 * x[i] * x[i];
      }
      return acc;
    }
    case Family::BayesianLogisticPosterior: {
      const auto& p = std::get<BayesianLogisticPosteriorParams>(params_);
      const int df = dim_ - 1;
      const double u = std::min(std::max(x[df], -kLogAlphaClamp), kLogAlphaClamp);
      const double alpha = std::exp(u);
      double beta_sq = 0.0;
      for (int i = 0; i < df; ++i) beta_sq += x[i] * x[i];
      // gamma prior on alpha (with the log-scale jacobian) + gaussian prior on
      // beta + logistic likelihood
      double acc = p.prior_shape * u - p.prior_rate * alpha;
      acc += 0.5 * df * u - 0.5 * alpha * beta_sq;
      for (int i = 0; i < p.features.rows(); ++i) {
        const double margin = p.labels[i] * dot(p.features.row(i), x.data(), df);
        acc -= softplus(-margin);
      }
      return acc;
    }
  }
  return 0.0;
}

void TargetDensity::score(std::span<const double> x, std::span<double> out) const {
  check_dim(x);
  switch (family_) {
    case Family::IsotropicGaussian:
      for (int i = 0; i < dim_; ++i) out[i] = -x[i];
      return;
    case Family::GaussianMixture: {
      const auto& p = std::get<GaussianMixtureParams>(params_);
      std::vector<double> r;
      gmm_responsibilities(p, x, r);
      for (int i = 0; i < dim_; ++i) out[i] = 0.0;
      for (int j = 0; j < p.centers.rows(); ++j) {
        const double* mu = p.centers.row(j);
        for (int i = 0; i < dim_; ++i) out[i] += r[j] * (mu[i] - x[i]) / p.variance;
      }
      return;
    }
    case Family::TruncatedNormalRelaxed: {
      const auto& p = std::get<TruncatedNormalRelaxedParams>(params_);
      const double r = std::sqrt(sq_norm(x));
      double radial = 0.0;
      if (r > 1e-12) radial = p.sharpness * logistic(-p.sharpness * (r - p.radius)) / r;
      for (int i = 0; i < dim_; ++i) out[i] = radial * x[i] - x[i];
      return;
    }
    case Family::Funnel: {
      const auto& p = std::get<FunnelParams>(params_);
      const double x1 = x[0];
      const double e = std::exp(-x1);
      double tail_sq = 0.0;
      for (std::size_t i = 1; i < x.size(); ++i) tail_sq += x[i] * x[i];
      out[0] = -x1 / p.neck_variance + 0.5 * tail_sq * e - 0.5 * (dim_ - 1);
      for (int i = 1; i < dim_; ++i) out[i] = -x[i] * e;
      return;
    }
    case Family::ExpWeightedGaussian: {
      const auto& p = std::get<ExpWeightedGaussianParams>(params_);
      for (int i = 0; i < dim_; ++i) {
        double g = 1.0;
        if (p.abs_mask[i]) g = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
        out[i] = p.scale * g / p.variances[i] - x[i];
      }
      return;
    }
    case Family::BayesianLogisticPosterior: {
      const auto& p = std::get<BayesianLogisticPosteriorParams>(params_);
      const int df = dim_ - 1;
      const double u = std::min(std::max(x[df], -kLogAlphaClamp), kLogAlphaClamp);
      const double alpha = std::exp(u);
      double beta_sq = 0.0;
      for (int i = 0; i < df; ++i) beta_sq += x[i] * x[i];
      for (int i = 0; i < df; ++i) out[i] = -alpha * x[i];
      for (int i = 0; i < p.features.rows(); ++i) {
        const double margin = p.labels[i] * dot(p.features.row(i), x.data(), df);
        const double w = p.labels[i] * logistic(-margin);
        axpy(w, p.features.row(i), out.data(), df);
      }
      out[df] = p.prior_shape - p.prior_rate * alpha + 0.5 * df - 0.5 * alpha * beta_sq;
      return;
    }
  }
}

std::vector<double> TargetDensity::score(std::span<const double> x) const {
  std::vector<double> out(dim_);
  score(x, out);
  return out;
}

void TargetDensity::hessian_vec(std::span<const double> x, std::span<const double> v,
                                std::span<double> out) const {
  check_dim(x);
  switch (family_) {
    case Family::IsotropicGaussian:
      for (int i = 0; i < dim_; ++i) out[i] = -v[i];
      return;
    case Family::GaussianMixture: {
      const auto& p = std::get<GaussianMixtureParams>(params_);
      std::vector<double> r;
      gmm_responsibilities(p, x, r);
      std::vector<double> s(dim_, 0.0);
      for (int i = 0; i < dim_; ++i) out[i] = 0.0;
      for (int j = 0; j < p.centers.rows(); ++j) {
        const double* mu = p.centers.row(j);
        double gv = 0.0;
        for (int i = 0; i < dim_; ++i) gv += (mu[i] - x[i]) / p.variance * v[i];
        for (int i = 0; i < dim_; ++i) {
          const double gji = (mu[i] - x[i]) / p.variance;
          s[i] += r[j] * gji;
          out[i] += r[j] * (gji * gv - v[i] / p.variance);
        }
      }
      double sv = 0.0;
      for (int i = 0; i < dim_; ++i) sv += s[i] * v[i];
      for (int i = 0; i < dim_; ++i) out[i] -= s[i] * sv;
      return;
    }
    case Family::TruncatedNormalRelaxed: {
      const auto& p = std::get<TruncatedNormalRelaxedParams>(params_);
      const double r = std::sqrt(sq_norm(x));
      if (r <= 1e-12) {
        for (int i = 0; i < dim_; ++i) out[i] = -v[i];
        return;
      }
      const double sig = logistic(p.sharpness * (r - p.radius));
      const double d1 = p.sharpness * (1.0 - sig);
      const double d2 = -p.sharpness * p.sharpness * sig * (1.0 - sig);
      double uv = 0.0;
      for (int i = 0; i < dim_; ++i) uv += x[i] / r * v[i];
      for (int i = 0; i < dim_; ++i) {
        const double ui = x[i] / r;
        out[i] = d2 * ui * uv + d1 / r * (v[i] - ui * uv) - v[i];
      }
      return;
    }
    case Family::Funnel: {
      const auto& p = std::get<FunnelParams>(params_);
      const double x1 = x[0];
      const double e = std::exp(-x1);
      double tail_sq = 0.0, xv = 0.0;
      for (std::size_t i = 1; i < x.size(); ++i) {
        tail_sq += x[i] * x[i];
        xv += x[i] * v[i];
      }
      out[0] = (-1.0 / p.neck_variance - 0.5 * tail_sq * e) * v[0] + e * xv;
      for (int i = 1; i < dim_; ++i) out[i] = e * x[i] * v[0] - e * v[i];
      return;
    }
    case Family::ExpWeightedGaussian:
      for (int i = 0; i < dim_; ++i) out[i] = -v[i];
      return;
    case Family::BayesianLogisticPosterior: {
      const auto& p = std::get<BayesianLogisticPosteriorParams>(params_);
      const int df = dim_ - 1;
      const double u = std::min(std::max(x[df], -kLogAlphaClamp), kLogAlphaClamp);
      const double alpha = std::exp(u);
      double beta_sq = 0.0, bv = 0.0;
      for (int i = 0; i < df; ++i) {
        beta_sq += x[i] * x[i];
        bv += x[i] * v[i];
      }
      for (int i = 0; i < df; ++i) out[i] = -alpha * v[i] - alpha * x[i] * v[df];
      for (int i = 0; i < p.features.rows(); ++i) {
        const double margin = p.labels[i] * dot(p.features.row(i), x.data(), df);
        const double sig = logistic(-margin);
        const double curve = sig * (1.0 - sig);
        const double fv = dot(p.features.row(i), v.data(), df);
        axpy(-curve * fv, p.features.row(i), out.data(), df);
      }
      out[df] = -alpha * bv + (-p.prior_rate * alpha - 0.5 * alpha * beta_sq) * v[df];
      return;
    }
  }
}

Mat TargetDensity::mode_centers() const {
  switch (family_) {
    case Family::GaussianMixture:
      return std::get<GaussianMixtureParams>(params_).centers;
    case Family::ExpWeightedGaussian: {
      const auto& p = std::get<ExpWeightedGaussianParams>(params_);
      std::vector<int> abs_dims;
      for (int i = 0; i < dim_; ++i)
        if (p.abs_mask[i]) abs_dims.push_back(i);
      const int m = 1 << abs_dims.size();
      Mat centers(m, dim_);
      for (int j = 0; j < m; ++j) {
        for (int i = 0; i < dim_; ++i) centers(j, i) = p.scale / p.variances[i];
        for (std::size_t a = 0; a < abs_dims.size(); ++a)
          if ((j >> a) & 1) centers(j, abs_dims[a]) = -centers(j, abs_dims[a]);
      }
      return centers;
    }
    default:
      return Mat();
  }
}

double TargetDensity::component_std() const {
  if (family_ == Family::GaussianMixture)
    return std::sqrt(std::get<GaussianMixtureParams>(params_).variance);
  return 1.0;
}

bool TargetDensity::has_exact_sampler() const {
  return family_ != Family::BayesianLogisticPosterior;
}

void TargetDensity::sample_exact(Mat& out, Rng& rng) const {
  if (out.cols() != dim_) throw ValidationError("sample_exact: output width mismatch");
  switch (family_) {
    case Family::IsotropicGaussian:
      rng.fill_normal(out.data(), out.size());
      return;
    case Family::GaussianMixture: {
      const auto& p = std::get<GaussianMixtureParams>(params_);
      const double sd = std::sqrt(p.variance);
      for (int i = 0; i < out.rows(); ++i) {
        double u = rng.uniform();
        int j = 0;
        while (j + 1 < p.centers.rows() && u >= p.weights[j]) {
          u -= p.weights[j];
          ++j;
        }
        for (int c = 0; c < dim_; ++c) out(i, c) = p.centers(j, c) + sd * rng.normal();
      }
      return;
    }
    case Family::TruncatedNormalRelaxed: {
      // Draws from the hard-truncated normal: radius by inverse chi tail,
      // direction uniform on the sphere.
      const auto& p = std::get<TruncatedNormalRelaxedParams>(params_);
      const double tail = gaussian_shell_tail(dim_, p.radius);
      for (int i = 0; i < out.rows(); ++i) {
        const double u = rng.uniform_pos();
        double lo = p.radius, hi = p.radius + 30.0;
        const double want = u * tail;
        for (int it = 0; it < 200; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (gaussian_shell_tail(dim_, mid) > want)
            lo = mid;
          else
            hi = mid;
        }
        const double r = 0.5 * (lo + hi);
        double norm_sq = 0.0;
        for (int c = 0; c < dim_; ++c) {
          out(i, c) = rng.normal();
          norm_sq += out(i, c) * out(i, c);
        }
        const double scale = r / std::sqrt(norm_sq);
        for (int c = 0; c < dim_; ++c) out(i, c) *= scale;
      }
      return;
    }
    case Family::Funnel: {
      const auto& p = std::get<FunnelParams>(params_);
      const double neck_sd = std::sqrt(p.neck_variance);
      for (int i = 0; i < out.rows(); ++i) {
        const double x1 = neck_sd * rng.normal();
        out(i, 0) = x1;
        const double sd = std::exp(0.5 * x1);
        for (int c = 1; c < dim_; ++c) out(i, c) = sd * rng.normal();
      }
      return;
    }
    case Family::ExpWeightedGaussian: {
      const auto& p = std::get<ExpWeightedGaussianParams>(params_);
      for (int i = 0; i < out.rows(); ++i) {
        for (int c = 0; c < dim_; ++c) {
          const double mean = p.scale / p.variances[c];
          if (p.abs_mask[c]) {
            double mag;
            do {
              mag = mean + rng.normal();
            } while (mag <= 0.0);
            out(i, c) = rng.uniform() < 0.5 ? mag : -mag;
          } else {
            out(i, c) = mean + rng.normal();
          }
        }
      }
      return;
    }
    case Family::BayesianLogisticPosterior:
      throw ValidationError("bayesian_logistic_posterior has no exact sampler");
  }
}

const GaussianMixtureParams& TargetDensity::gmm_params() const {
  return std::get<GaussianMixtureParams>(params_);
}
const TruncatedNormalRelaxedParams& TargetDensity::trunc_params() const {
  return std::get<TruncatedNormalRelaxedParams>(params_);
}
const ExpWeightedGaussianParams& TargetDensity::expgauss_params() const {
  return std::get<ExpWeightedGaussianParams>(params_);
}

json TargetDensity::to_json() const {
  json j;
  j["family"] = family_name(family_);
  j["dim"] = dim_;
  switch (family_) {
    case Family::IsotropicGaussian:
      break;
    case Family::GaussianMixture: {
      const auto& p = std::get<GaussianMixtureParams>(params_);
      json centers = json::array();
      for (int r = 0; r < p.centers.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < p.centers.cols(); ++c) row.push_back(p.centers(r, c));
        centers.push_back(row);
      }
      j["centers"] = centers;
      j["weights"] = p.weights;
      j["variance"] = p.variance;
      break;
    }
    case Family::TruncatedNormalRelaxed: {
      const auto& p = std::get<TruncatedNormalRelaxedParams>(params_);
      j["radius"] = p.radius;
      j["sharpness"] = p.sharpness;
      break;
    }
    case Family::Funnel:
      j["neck_variance"] = std::get<FunnelParams>(params_).neck_variance;
      break;
    case Family::ExpWeightedGaussian: {
      const auto& p = std::get<ExpWeightedGaussianParams>(params_);
      json abs_dims = json::array();
      for (int i = 0; i < dim_; ++i)
        if (p.abs_mask[i]) abs_dims.push_back(i + 1);  // 1-based in config files
      j["abs_dims"] = abs_dims;
      j["scale"] = p.scale;
      j["variances"] = p.variances;
      break;
    }
    case Family::BayesianLogisticPosterior: {
      const auto& p = std::get<BayesianLogisticPosteriorParams>(params_);
      json rows = json::array();
      for (int r = 0; r < p.features.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < p.features.cols(); ++c) row.push_back(p.features(r, c));
        row.push_back(p.labels[r]);
        rows.push_back(row);
      }
      j["data"] = rows;
      break;
    }
  }
  return j;
}

namespace {

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw ValidationError(where + ": unknown key '" + it.key() + "'");
  }
}

}  // namespace

TargetDensity TargetDensity::from_json(const json& j) {
  if (!j.contains("family")) throw ValidationError("target: missing 'family'");
  const std::string fam = j.at("family").get<std::string>();
  if (fam == "isotropic_gaussian") {
    require_keys(j, {"family", "dim"}, "target");
    return isotropic_gaussian(j.at("dim").get<int>());
  }
  if (fam == "gaussian_mixture") {
    require_keys(j, {"family", "dim", "centers", "weights", "variance"}, "target");
    GaussianMixtureParams p;
    const auto& centers = j.at("centers");
    const int m = static_cast<int>(centers.size());
    if (m == 0) throw ValidationError("target: empty centers");
    const int dim = static_cast<int>(centers[0].size());
    p.centers = Mat(m, dim);
    for (int r = 0; r < m; ++r) {
      if (static_cast<int>(centers[r].size()) != dim)
        throw ValidationError("target: ragged centers");
      for (int c = 0; c < dim; ++c) p.centers(r, c) = centers[r][c].get<double>();
    }
    p.weights = j.at("weights").get<std::vector<double>>();
    p.variance = j.value("variance", 1.0);
    if (j.contains("dim") && j.at("dim").get<int>() != dim)
      throw ValidationError("target: 'dim' does not match centers");
    return gaussian_mixture(std::move(p));
  }
  if (fam == "truncated_normal_relaxed") {
    require_keys(j, {"family", "dim", "radius", "sharpness"}, "target");
    TruncatedNormalRelaxedParams p;
    p.radius = j.at("radius").get<double>();
    p.sharpness = j.value("sharpness", 20.0);
    return truncated_normal(j.at("dim").get<int>(), p);
  }
  if (fam == "funnel") {
    require_keys(j, {"family", "dim", "neck_variance"}, "target");
    FunnelParams p;
    p.neck_variance = j.value("neck_variance", 0.81);
    return funnel(j.at("dim").get<int>(), p);
  }
  if (fam == "exp_weighted_gaussian") {
    require_keys(j, {"family", "dim", "abs_dims", "scale", "variances"}, "target");
    const int dim = j.at("dim").get<int>();
    ExpWeightedGaussianParams p;
    p.abs_mask.assign(dim, false);
    for (int a : j.at("abs_dims").get<std::vector<int>>()) {
      if (a < 1 || a > dim) throw ValidationError("target: abs_dims index out of range");
      p.abs_mask[a - 1] = true;
    }
    p.scale = j.value("scale", 10.0);
    if (j.contains("variances")) p.variances = j.at("variances").get<std::vector<double>>();
    return exp_weighted_gaussian(dim, std::move(p));
  }
  if (fam == "bayesian_logistic_posterior") {
    require_keys(j, {"family", "dim", "data", "dataset"}, "target");
    if (!j.contains("data"))
      throw ValidationError("target: bayesian_logistic_posterior needs inline 'data' here");
    const auto& rows = j.at("data");
    const int n = static_cast<int>(rows.size());
    if (n == 0) throw ValidationError("target: empty dataset");
    const int width = static_cast<int>(rows[0].size());
    BayesianLogisticPosteriorParams p;
    p.features = Mat(n, width - 1);
    p.labels.resize(n);
    for (int r = 0; r < n; ++r) {
      if (static_cast<int>(rows[r].size()) != width)
        throw ValidationError("target: ragged dataset rows");
      for (int c = 0; c < width - 1; ++c) p.features(r, c) = rows[r][c].get<double>();
      p.labels[r] = rows[r][width - 1].get<double>();
    }
    return bayesian_logistic(std::move(p));
  }
  throw ValidationError("target: unknown family '" + fam + "'");
}

TargetDensity make_gmm_on_circle(int num_modes, double radius, int dim,
                                 std::vector<double> weights) {
  if (num_modes < 1) throw ValidationError("make_gmm_on_circle: need at least one mode");
  if (dim < 2) throw ValidationError("make_gmm_on_circle: dim must be >= 2");
  GaussianMixtureParams p;
  p.centers = Mat(num_modes, dim);
  for (int j = 0; j < num_modes; ++j) {
    const double angle = 2.0 * M_PI * j / num_modes;
    p.centers(j, 0) = radius * std::cos(angle);
    p.centers(j, 1) = radius * std::sin(angle);
    for (int c = 2; c < dim; ++c) p.centers(j, c) = radius / 2.0;
  }
  if (weights.empty()) weights.assign(num_modes, 1.0 / num_modes);
  p.weights = std::move(weights);
  return TargetDensity::gaussian_mixture(std::move(p));
}

void sample_reference(Mat& out, Rng& rng) { rng.fill_normal(out.data(), out.size()); }

Mat sample_reference(int n, int dim, Rng& rng) {
  Mat out(n, dim);
  sample_reference(out, rng);
  return out;
}

double reference_log_density(std::span<const double> x) { return -0.5 * sq_norm(x); }

std::string path_kind_name(PathKind k) {
  switch (k) {
    case PathKind::Geometric: return "geometric";
    case PathKind::ShrinkingRadius: return "shrinking_radius";
    case PathKind::ConstantTarget: return "constant_target";
  }
  return "?";
}

AnnealingPath AnnealingPath::geometric(TargetDensity target, std::vector<double> betas) {
  if (betas.size() < 2) throw ValidationError("path: need at least beta_0 and beta_K");
  if (betas.front() != 0.0) throw ValidationError("path: beta_0 must be 0");
  if (betas.back() != 1.0) throw ValidationError("path: beta_K must be 1");
  for (std::size_t i = 1; i < betas.size(); ++i)
    if (betas[i] < betas[i - 1]) throw ValidationError("path: betas must be nondecreasing");
  AnnealingPath p(PathKind::Geometric, static_cast<int>(betas.size()) - 1, std::move(target));
  p.betas_ = std::move(betas);
  return p;
}

AnnealingPath AnnealingPath::geometric_uniform(TargetDensity target, int geometric_steps,
                                               int refinement) {
  if (geometric_steps < 1) throw ValidationError("path: need at least one geometric step");
  if (refinement < 0) throw ValidationError("path: refinement count must be >= 0");
  std::vector<double> betas(geometric_steps + refinement + 1, 1.0);
  for (int k = 0; k <= geometric_steps; ++k)
    betas[k] = static_cast<double>(k) / geometric_steps;
  return geometric(std::move(target), std::move(betas));
}

AnnealingPath AnnealingPath::shrinking_radius(TargetDensity target, int steps) {
  if (target.family() != Family::TruncatedNormalRelaxed)
    throw ValidationError("path: shrinking_radius requires a truncated normal target");
  if (steps < 1) throw ValidationError("path: need at least one step");
  return AnnealingPath(PathKind::ShrinkingRadius, steps, std::move(target));
}

AnnealingPath AnnealingPath::constant_target(TargetDensity target, int steps) {
  if (steps < 1) throw ValidationError("path: need at least one step");
  return AnnealingPath(PathKind::ConstantTarget, steps, std::move(target));
}

void AnnealingPath::check_step(int k) const {
  if (k < 0 || k > steps_)
    throw ValidationError("path: step " + std::to_string(k) + " out of range [0, " +
                          std::to_string(steps_) + "]");
}

double AnnealingPath::step_radius(int k) const {
  const double c = target_.trunc_params().radius;
  return c / (steps_ - k + 1);
}

std::optional<TargetDensity> AnnealingPath::step_density(int k) const {
  TruncatedNormalRelaxedParams p = target_.trunc_params();
  p.radius = step_radius(k);
  return TargetDensity::truncated_normal(dim(), p);
}

double AnnealingPath::log_density(int k, std::span<const double> x) const {
  check_step(k);
  if (k == 0) return reference_log_density(x);
  if (k == steps_) return target_.log_unnorm(x);
  switch (kind_) {
    case PathKind::Geometric: {
      const double beta = betas_[k];
      return (1.0 - beta) * reference_log_density(x) + beta * target_.log_unnorm(x);
    }
    case PathKind::ShrinkingRadius:
      return step_density(k)->log_unnorm(x);
    case PathKind::ConstantTarget:
      return target_.log_unnorm(x);
  }
  return 0.0;
}

void AnnealingPath::score(int k, std::span<const double> x, std::span<double> out) const {
  check_step(k);
  if (k == 0) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = -x[i];
    return;
  }
  if (k == steps_) {
    target_.score(x, out);
    return;
  }
  switch (kind_) {
    case PathKind::Geometric: {
      const double beta = betas_[k];
      target_.score(x, out);
      for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = beta * out[i] + (1.0 - beta) * -x[i];
      return;
    }
    case PathKind::ShrinkingRadius:
      step_density(k)->score(x, out);
      return;
    case PathKind::ConstantTarget:
      target_.score(x, out);
      return;
  }
}

std::vector<double> AnnealingPath::score(int k, std::span<const double> x) const {
  std::vector<double> out(dim());
  score(k, x, out);
  return out;
}

void AnnealingPath::hessian_vec(int k, std::span<const double> x, std::span<const double> v,
                                std::span<double> out) const {
  check_step(k);
  if (k == 0) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = -v[i];
    return;
  }
  if (k == steps_) {
    target_.hessian_vec(x, v, out);
    return;
  }
  switch (kind_) {
    case PathKind::Geometric: {
      const double beta = betas_[k];
      target_.hessian_vec(x, v, out);
      for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = beta * out[i] + (1.0 - beta) * -v[i];
      return;
    }
    case PathKind::ShrinkingRadius:
      step_density(k)->hessian_vec(x, v, out);
      return;
    case PathKind::ConstantTarget:
      target_.hessian_vec(x, v, out);
      return;
  }
}

json AnnealingPath::to_json() const {
  json j;
  j["kind"] = path_kind_name(kind_);
  j["steps"] = steps_;
  if (kind_ == PathKind::Geometric) j["betas"] = betas_;
  return j;
}

AnnealingPath AnnealingPath::from_json(const json& j, TargetDensity target) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "geometric") {
    if (j.contains("betas"))
      return geometric(std::move(target), j.at("betas").get<std::vector<double>>());
    const int steps = j.at("steps").get<int>();
    const int refinement = j.value("refinement_blocks", 0);
    return geometric_uniform(std::move(target), steps - refinement, refinement);
  }
  if (kind == "shrinking_radius")
    return shrinking_radius(std::move(target), j.at("steps").get<int>());
  if (kind == "constant_target")
    return constant_target(std::move(target), j.at("steps").get<int>());
  throw ValidationError("path: unknown kind '" + kind + "'");
}

BayesianLogisticPosteriorParams synth_logistic_dataset(int n, int features,
                                                       std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "synth-logit");
  BayesianLogisticPosteriorParams p;
  p.features = Mat(n, features);
  p.labels.resize(n);
  std::vector<double> truth(features);
  for (int c = 0; c < features; ++c) truth[c] = rng.normal();
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < features; ++c) p.features(r, c) = rng.normal();
    const double m = dot(p.features.row(r), truth.data(), features);
    p.labels[r] = rng.uniform() < logistic(m) ? 1.0 : -1.0;
  }
  return p;
}

}  // namespace af
