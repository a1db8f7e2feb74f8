#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>

#include "af/baselines.hpp"
#include "af/errors.hpp"
#include "doctest.h"

using namespace af;

namespace {

TargetDensity two_mode_1d(double a) {
  GaussianMixtureParams p;
  p.centers = Mat(2, 1);
  p.centers(0, 0) = -a;
  p.centers(1, 0) = a;
  p.weights = {0.5, 0.5};
  return TargetDensity::gaussian_mixture(p);
}

}  // namespace

TEST_CASE("config validation") {
  MhConfig mh;
  mh.proposal_std = 0.0;
  CHECK_THROWS_AS(mh.validate(), ValidationError);

  PtConfig pt;
  pt.temperatures = {1.0, 0.9};
  pt.num_replicas = 2;
  CHECK_THROWS_AS(pt.validate(), ValidationError);
  pt.temperatures = {1.2, 2.0};
  CHECK_THROWS_AS(pt.validate(), ValidationError);
}

TEST_CASE("mh long-chain moments on a standard gaussian") {
  const TargetDensity target = TargetDensity::isotropic_gaussian(1);
  MhConfig cfg;
  cfg.chain_length = 125000;  // 100k post burn-in
  Rng rng = Rng::stream(3, "mh-test");
  const Mat chain = mh_chain(target, std::vector<double>{0.0}, cfg, rng);
  REQUIRE(chain.rows() == 100000);
  double mean = 0.0;
  for (int i = 0; i < chain.rows(); ++i) mean += chain(i, 0);
  mean /= chain.rows();
  double var = 0.0;
  for (int i = 0; i < chain.rows(); ++i) var += (chain(i, 0) - mean) * (chain(i, 0) - mean);
  var /= (chain.rows() - 1);
  CHECK(std::fabs(mean) < 0.05);
  CHECK(std::fabs(var - 1.0) < 0.1);
}

TEST_CASE("log-space acceptance is invariant to rescaling the target") {
  const TargetDensity target = two_mode_1d(3.0);
  const double log_constant = 123.456;  // scales pi by e^123.456
  MhConfig cfg;
  cfg.chain_length = 5000;
  cfg.burn_in = 0;
  Rng r1 = Rng::stream(9, "scale");
  Rng r2 = Rng::stream(9, "scale");
  const Mat plain = mh_chain(target, std::vector<double>{0.2}, cfg, r1);
  const Mat scaled = mh_chain(
      [&](std::span<const double> x) { return target.log_unnorm(x) + log_constant; }, 1,
      std::vector<double>{0.2}, cfg, r2);
  REQUIRE(plain.rows() == scaled.rows());
  for (std::size_t i = 0; i < plain.size(); ++i) CHECK(plain.data()[i] == scaled.data()[i]);
}

TEST_CASE("detailed balance on a 3-state discretized density") {
  // proposals rounded to the grid {-1, 0, 1}; weights pi = (0.2, 0.3, 0.5)
  const double pi[3] = {0.2, 0.3, 0.5};
  Rng rng = Rng::stream(11, "db");
  int state = 1;
  std::map<std::pair<int, int>, long> transitions;
  const long steps = 400000;
  for (long t = 0; t < steps; ++t) {
    const int proposal = static_cast<int>(rng.uniform_int(3));
    const double log_alpha = std::log(pi[proposal]) - std::log(pi[state]);
    const int prev = state;
    if (std::log(rng.uniform()) < log_alpha) state = proposal;
    transitions[{prev, state}]++;
  }
  // empirical flow i->j vs j->i
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      const double fij = transitions[{i, j}];
      const double fji = transitions[{j, i}];
      const double se = 3.0 * std::sqrt(fij + fji);
      CHECK(std::fabs(fij - fji) < se);
    }
}

TEST_CASE("pt: degenerate ladder reproduces mh exactly") {
  const TargetDensity target = two_mode_1d(2.0);
  PtConfig pt;
  pt.num_replicas = 1;
  pt.iterations = 3000;
  pt.burn_in = 100;

  const std::vector<Mat> chains = pt_chains(target, pt, 77, "equiv");
  REQUIRE(chains.size() == 1);

  MhConfig mh;
  mh.chain_length = 3000;
  mh.burn_in = 100;
  Rng rng = Rng::stream(77, "equiv");
  std::vector<double> x0{rng.normal()};
  const Mat chain = mh_chain(target, x0, mh, rng);
  REQUIRE(chain.rows() == chains[0].rows());
  for (std::size_t i = 0; i < chain.size(); ++i)
    CHECK(chain.data()[i] == chains[0].data()[i]);
}

TEST_CASE("pt: equal temperatures always swap; long interval never swaps") {
  // exchange_interval > iterations: identical to independent MH chains
  const TargetDensity target = two_mode_1d(1.0);
  PtConfig pt;
  pt.num_replicas = 2;
  pt.temperatures = {1.0, 1.5};
  pt.iterations = 500;
  pt.exchange_interval = 1000;
  pt.burn_in = 0;
  const std::vector<Mat> chains = pt_chains(target, pt, 5, "noswap");

  Rng r0 = Rng::stream(5, "noswap");
  MhConfig mh;
  mh.chain_length = 500;
  mh.burn_in = 0;
  std::vector<double> x0{r0.normal()};
  const Mat cold = mh_chain(target, x0, mh, r0);
  for (std::size_t i = 0; i < cold.size(); ++i) CHECK(cold.data()[i] == chains[0].data()[i]);
}

TEST_CASE("pt cold chain visits both modes of a separated mixture") {
  const TargetDensity target = two_mode_1d(4.0);
  PtConfig pt;
  pt.iterations = 100000;
  const std::vector<Mat> chains = pt_chains(target, pt, 123, "bimodal");
  const Mat& cold = chains.front();
  long left = 0, right = 0;
  for (int i = 0; i < cold.rows(); ++i) (cold(i, 0) < 0 ? left : right)++;
  const double frac_left = static_cast<double>(left) / cold.rows();
  CHECK(frac_left >= 0.1);
  CHECK(frac_left <= 0.9);
  (void)right;
}
