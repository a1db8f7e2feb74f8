#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "af/density.hpp"
#include "af/errors.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace af;
using test_support::fd_gradient;
using test_support::max_score_fd_err;
using test_support::rel_inf_err;

namespace {

std::vector<TargetDensity> zoo() {
  std::vector<TargetDensity> targets;
  targets.push_back(TargetDensity::isotropic_gaussian(3));
  targets.push_back(make_gmm_on_circle(6, 8.0, 2));
  targets.push_back(make_gmm_on_circle(10, 12.0, 5));
  targets.push_back(TargetDensity::truncated_normal(2, {4.0, 20.0}));
  targets.push_back(TargetDensity::truncated_normal(5, {6.0, 20.0}));
  targets.push_back(TargetDensity::funnel(5, {0.81}));
  {
    ExpWeightedGaussianParams p;
    p.abs_mask = {true, true, false};
    p.variances = {1.0, 2.0, 1.5};
    p.scale = 10.0;
    targets.push_back(TargetDensity::exp_weighted_gaussian(3, p));
  }
  targets.push_back(TargetDensity::bayesian_logistic(synth_logistic_dataset(40, 3, 11)));
  return targets;
}

}  // namespace

TEST_CASE("log_unnorm closed-form spot values") {
  // standard Gaussian at the origin
  const TargetDensity iso = TargetDensity::isotropic_gaussian(2);
  CHECK(iso.log_unnorm(std::vector<double>{0.0, 0.0}) == 0.0);

  // hand evaluation of the exponentially weighted exponent at (10, 10)
  ExpWeightedGaussianParams p;
  p.abs_mask = {true, true};
  p.variances = {1.0, 1.0};
  const TargetDensity eg = TargetDensity::exp_weighted_gaussian(2, p);
  CHECK(eg.log_unnorm(std::vector<double>{10.0, 10.0}) == doctest::Approx(100.0).epsilon(1e-12));

  // independent rewrite of the funnel formula
  const double s2 = 0.81;
  const TargetDensity funnel = TargetDensity::funnel(2, {s2});
  const std::vector<double> x{1.0, 0.0};
  const double by_hand = -x[0] * x[0] / (2.0 * s2) - 0.5 * x[1] * x[1] * std::exp(-x[0]) -
                         0.5 * (2 - 1) * x[0];
  CHECK(funnel.log_unnorm(x) == doctest::Approx(by_hand).epsilon(1e-14));
}

TEST_CASE("log_unnorm is finite everywhere sampled") {
  Rng rng(99);
  for (const TargetDensity& t : zoo()) {
    std::vector<double> x(t.dim());
    for (int i = 0; i < 50; ++i) {
      for (double& v : x) v = 10.0 * rng.normal();
      CHECK(std::isfinite(t.log_unnorm(x)));
    }
    // interior of the truncation is finite under the relaxation
    std::fill(x.begin(), x.end(), 0.1);
    CHECK(std::isfinite(t.log_unnorm(x)));
  }
}

TEST_CASE("score spot values") {
  const TargetDensity iso = TargetDensity::isotropic_gaussian(2);
  const std::vector<double> s = iso.score(std::vector<double>{1.0, 2.0});
  CHECK(s[0] == -1.0);
  CHECK(s[1] == -2.0);

  // symmetric two-mode mixture has zero score at the midpoint
  GaussianMixtureParams p;
  p.centers = Mat(2, 2);
  p.centers(0, 0) = 5.0;
  p.centers(1, 0) = -5.0;
  p.weights = {0.5, 0.5};
  const TargetDensity gmm = TargetDensity::gaussian_mixture(p);
  const std::vector<double> s0 = gmm.score(std::vector<double>{0.0, 0.0});
  CHECK(std::fabs(s0[0]) < 1e-14);
  CHECK(std::fabs(s0[1]) < 1e-14);

  // sign convention at exactly zero on an |.| dimension
  ExpWeightedGaussianParams ep;
  ep.abs_mask = {true};
  const TargetDensity eg = TargetDensity::exp_weighted_gaussian(1, ep);
  CHECK(eg.score(std::vector<double>{0.0})[0] == 0.0);
}

TEST_CASE("score matches central finite differences across the zoo") {
  Rng rng(7);
  for (const TargetDensity& t : zoo()) {
    // keep |.| dimensions away from the kink where the subgradient is exact
    double worst = 0.0;
    std::vector<double> x(t.dim());
    for (int p = 0; p < 100; ++p) {
      for (double& v : x) {
        do {
          v = 2.0 * rng.normal();
        } while (std::fabs(v) < 1e-3);
      }
      const std::vector<double> analytic = t.score(x);
      const std::vector<double> numeric =
          fd_gradient([&](std::span<const double> y) { return t.log_unnorm(y); }, x);
      worst = std::max(worst, rel_inf_err(analytic, numeric));
    }
    INFO("family ", family_name(t.family()));
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("hessian_vec matches finite differences of the score") {
  Rng rng(13);
  for (const TargetDensity& t : zoo()) {
    std::vector<double> x(t.dim()), v(t.dim()), hv(t.dim());
    for (int p = 0; p < 20; ++p) {
      for (double& c : x) {
        do {
          c = 1.5 * rng.normal();
        } while (std::fabs(c) < 1e-3);
      }
      for (double& c : v) c = rng.normal();
      t.hessian_vec(x, v, hv);
      // directional finite difference of the score along v
      const double h = 1e-6;
      std::vector<double> xp(x), xm(x), sp(t.dim()), sm(t.dim());
      for (int i = 0; i < t.dim(); ++i) {
        xp[i] += h * v[i];
        xm[i] -= h * v[i];
      }
      t.score(xp, sp);
      t.score(xm, sm);
      double err = 0.0, scale = 1.0;
      for (int i = 0; i < t.dim(); ++i) {
        const double fd = (sp[i] - sm[i]) / (2.0 * h);
        err = std::max(err, std::fabs(fd - hv[i]));
        scale = std::max(scale, std::fabs(hv[i]));
      }
      INFO("family ", family_name(t.family()));
      CHECK(err / scale < 1e-4);
    }
  }
}

TEST_CASE("gaussian mixture log density uses stable log-sum-exp") {
  GaussianMixtureParams p;
  p.centers = Mat(2, 2);
  p.centers(0, 0) = 1000.0;
  p.centers(1, 0) = -1000.0;
  p.weights = {0.5, 0.5};
  const TargetDensity gmm = TargetDensity::gaussian_mixture(p);
  const double v = gmm.log_unnorm(std::vector<double>{1000.0, 0.0});
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("gaussian mixture is invariant to component permutation") {
  Rng rng(3);
  GaussianMixtureParams p;
  p.centers = Mat(4, 3);
  for (std::size_t i = 0; i < p.centers.size(); ++i) p.centers.data()[i] = rng.normal();
  p.weights = {0.1, 0.2, 0.3, 0.4};
  GaussianMixtureParams q;
  q.centers = Mat(4, 3);
  const int perm[4] = {2, 0, 3, 1};
  q.weights.resize(4);
  for (int j = 0; j < 4; ++j) {
    for (int c = 0; c < 3; ++c) q.centers(j, c) = p.centers(perm[j], c);
    q.weights[j] = p.weights[perm[j]];
  }
  const TargetDensity a = TargetDensity::gaussian_mixture(p);
  const TargetDensity b = TargetDensity::gaussian_mixture(q);
  std::vector<double> x(3);
  for (int i = 0; i < 25; ++i) {
    for (double& v : x) v = 3.0 * rng.normal();
    CHECK(a.log_unnorm(x) == doctest::Approx(b.log_unnorm(x)).epsilon(1e-12));
  }
}

TEST_CASE("exp-weighted gaussian has 2^|A| local maxima on a grid") {
  for (int abs_count = 1; abs_count <= 3; ++abs_count) {
    const int dim = 3;
    ExpWeightedGaussianParams p;
    p.abs_mask.assign(dim, false);
    for (int i = 0; i < abs_count; ++i) p.abs_mask[i] = true;
    const TargetDensity t = TargetDensity::exp_weighted_gaussian(dim, p);

    // grid search for local maxima over [-14, 14]^3, step 2
    const double lo = -14.0, step = 2.0;
    const int n = 15;
    auto at = [&](int i, int j, int k) {
      const std::vector<double> x{lo + i * step, lo + j * step, lo + k * step};
      return t.log_unnorm(x);
    };
    int maxima = 0;
    for (int i = 1; i + 1 < n; ++i)
      for (int j = 1; j + 1 < n; ++j)
        for (int k = 1; k + 1 < n; ++k) {
          const double v = at(i, j, k);
          bool is_max = true;
          for (int di = -1; di <= 1 && is_max; ++di)
            for (int dj = -1; dj <= 1 && is_max; ++dj)
              for (int dk = -1; dk <= 1 && is_max; ++dk) {
                if (di == 0 && dj == 0 && dk == 0) continue;
                if (at(i + di, j + dj, k + dk) >= v) is_max = false;
              }
          if (is_max) ++maxima;
        }
    CHECK(maxima == (1 << abs_count));
    CHECK(t.mode_centers().rows() == (1 << abs_count));
  }
}

TEST_CASE("make_gmm_on_circle matches the stated construction") {
  const TargetDensity t = make_gmm_on_circle(6, 8.0, 2);
  const Mat& centers = t.gmm_params().centers;
  REQUIRE(centers.rows() == 6);
  for (int j = 0; j < 6; ++j) {
    const double angle = 2.0 * M_PI * j / 6;
    CHECK(centers(j, 0) == doctest::Approx(8.0 * std::cos(angle)));
    CHECK(centers(j, 1) == doctest::Approx(8.0 * std::sin(angle)));
  }

  const TargetDensity t5 = make_gmm_on_circle(10, 12.0, 5);
  for (int j = 0; j < 10; ++j)
    for (int c = 2; c < 5; ++c) CHECK(t5.gmm_params().centers(j, c) == 6.0);

  const TargetDensity single = make_gmm_on_circle(1, 0.0, 2, {1.0});
  CHECK(single.gmm_params().centers(0, 0) == 0.0);
  CHECK_THROWS_AS(make_gmm_on_circle(4, 1.0, 1), ValidationError);
}

TEST_CASE("dimension mismatch is rejected") {
  const TargetDensity iso = TargetDensity::isotropic_gaussian(3);
  CHECK_THROWS_AS(iso.log_unnorm(std::vector<double>{1.0, 2.0}), ValidationError);
  std::vector<double> out(2);
  CHECK_THROWS_AS(iso.score(std::vector<double>{1.0, 2.0}, out), ValidationError);
}

TEST_CASE("reference sampler moments and determinism") {
  Rng a(42), b(42);
  const Mat x = sample_reference(3, 2, a);
  const Mat y = sample_reference(3, 2, b);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.data()[i] == y.data()[i]);

  Rng rng(2024);
  const int n = 100000;
  const Mat big = sample_reference(n, 2, rng);
  for (int c = 0; c < 2; ++c) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += big(i, c);
    mean /= n;
    CHECK(std::fabs(mean) < 0.02);
    double var = 0.0;
    for (int i = 0; i < n; ++i) var += (big(i, c) - mean) * (big(i, c) - mean);
    var /= (n - 1);
    CHECK(std::fabs(var - 1.0) < 0.03);
  }
}

TEST_CASE("annealed density endpoints, interpolation and step range") {
  const TargetDensity target = make_gmm_on_circle(6, 8.0, 2);
  const AnnealingPath path = AnnealingPath::geometric_uniform(target, 10, 2);
  CHECK(path.steps() == 12);
  Rng rng(5);
  std::vector<double> x(2);
  for (int i = 0; i < 20; ++i) {
    for (double& v : x) v = 4.0 * rng.normal();
    // endpoints are bitwise identical to the underlying evaluation paths
    CHECK(path.log_density(0, x) == reference_log_density(x));
    CHECK(path.log_density(12, x) == target.log_unnorm(x));
    CHECK(path.log_density(11, x) == target.log_unnorm(x));  // refinement block
    // interior blend
    const double beta = path.betas()[3];
    CHECK(path.log_density(3, x) ==
          doctest::Approx((1 - beta) * reference_log_density(x) + beta * target.log_unnorm(x))
              .epsilon(1e-14));
  }
  CHECK_THROWS_AS(path.log_density(13, x), ValidationError);
  CHECK_THROWS_AS(path.log_density(-1, x), ValidationError);
}

TEST_CASE("geometric mixture hand value") {
  // beta = 1/2 between N(0,1) and a unit Gaussian centered at 2, at x = 1
  GaussianMixtureParams p;
  p.centers = Mat(1, 1);
  p.centers(0, 0) = 2.0;
  p.weights = {1.0};
  const AnnealingPath path =
      AnnealingPath::geometric(TargetDensity::gaussian_mixture(p), {0.0, 0.5, 1.0});
  const std::vector<double> x{1.0};
  CHECK(path.log_density(1, x) == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("annealed score matches finite differences at random steps") {
  const TargetDensity target = make_gmm_on_circle(6, 8.0, 2);
  const AnnealingPath path = AnnealingPath::geometric_uniform(target, 10, 2);
  Rng rng(17);
  std::vector<double> x(2);
  for (int i = 0; i < 30; ++i) {
    const int k = static_cast<int>(rng.uniform_int(13));
    for (double& v : x) v = 4.0 * rng.normal();
    const std::vector<double> analytic = path.score(k, x);
    const std::vector<double> numeric =
        fd_gradient([&](std::span<const double> y) { return path.log_density(k, y); }, x);
    CHECK(rel_inf_err(analytic, numeric) < 1e-5);
  }
}

TEST_CASE("shrinking-radius path grows the shell to the target radius") {
  const TargetDensity target = TargetDensity::truncated_normal(2, {4.0, 20.0});
  const AnnealingPath path = AnnealingPath::shrinking_radius(target, 8);
  std::vector<double> x{1.0, 2.0};
  CHECK(path.log_density(0, x) == reference_log_density(x));
  CHECK(path.log_density(8, x) == target.log_unnorm(x));
  // step k uses radius c / (K - k + 1)
  for (int k = 1; k < 8; ++k) {
    const TargetDensity step = TargetDensity::truncated_normal(2, {4.0 / (8 - k + 1), 20.0});
    CHECK(path.log_density(k, x) == doctest::Approx(step.log_unnorm(x)).epsilon(1e-14));
  }
}

TEST_CASE("target JSON round-trip") {
  Rng rng(23);
  for (const TargetDensity& t : zoo()) {
    const TargetDensity back = TargetDensity::from_json(t.to_json());
    CHECK(back.family() == t.family());
    CHECK(back.dim() == t.dim());
    std::vector<double> x(t.dim());
    for (int i = 0; i < 10; ++i) {
      for (double& v : x) v = 2.0 * rng.normal();
      CHECK(back.log_unnorm(x) == t.log_unnorm(x));
    }
  }
  CHECK_THROWS_AS(
      TargetDensity::from_json(nlohmann::json{{"family", "funnel"}, {"dim", 3}, {"oops", 1}}),
      ValidationError);
}

TEST_CASE("exact samplers hit their densities") {
  Rng rng(31);
  // mixture: empirical mode weights close to truth
  const TargetDensity gmm = make_gmm_on_circle(4, 6.0, 2, {0.4, 0.3, 0.2, 0.1});
  Mat draws(20000, 2);
  gmm.sample_exact(draws, rng);
  std::vector<int> counts(4, 0);
  for (int i = 0; i < draws.rows(); ++i) {
    int best = 0;
    double bd = 1e300;
    for (int j = 0; j < 4; ++j) {
      const double d2 = sq_dist(draws.row(i), gmm.gmm_params().centers.row(j), 2);
      if (d2 < bd) {
        bd = d2;
        best = j;
      }
    }
    counts[best]++;
  }
  const double expect[4] = {0.4, 0.3, 0.2, 0.1};
  for (int j = 0; j < 4; ++j)
    CHECK(std::fabs(counts[j] / 20000.0 - expect[j]) < 0.02);

  // truncated normal: all draws outside the shell, radial tail matches
  const TargetDensity trunc = TargetDensity::truncated_normal(2, {4.0, 20.0});
  Mat tdraws(5000, 2);
  trunc.sample_exact(tdraws, rng);
  int beyond = 0;
  for (int i = 0; i < tdraws.rows(); ++i) {
    const double r = std::sqrt(sq_norm(tdraws.row_span(i)));
    CHECK(r >= 4.0);
    if (r >= 4.5) ++beyond;
  }
  // P(R >= 4.5 | R >= 4) = exp((16 - 20.25)/2) ~ 0.119
  CHECK(std::fabs(beyond / 5000.0 - std::exp((16.0 - 20.25) / 2.0)) < 0.02);
}
