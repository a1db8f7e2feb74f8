#include "af/baselines.hpp"

#include <cmath>

#include "af/errors.hpp"
#include "af/special.hpp"

namespace af {

namespace {

constexpr double kEnergyFloor = 1e-300;  // inside -log(pi + eps)

// One random-walk step on log_target / temperature; returns the new log
// density. x is updated in place on acceptance.
double mh_step(const LogDensityFn& log_density, std::vector<double>& x, double log_pi,
               double proposal_std, double temperature, Rng& rng,
               std::vector<double>& proposal) {
  const int d = static_cast<int>(x.size());
  for (int i = 0; i < d; ++i) proposal[i] = x[i] + proposal_std * rng.normal();
  const double log_pi_new = log_density(proposal);
  const double log_alpha = (log_pi_new - log_pi) / temperature;
  const double u = rng.uniform();
  if (std::log(u) < log_alpha) {
    x = proposal;
    return log_pi_new;
  }
  return log_pi;
}

}  // namespace

void MhConfig::validate() const {
  if (!(proposal_std > 0.0)) throw ValidationError("mh: proposal std must be positive");
  if (chain_length < 1) throw ValidationError("mh: chain length must be >= 1");
  if (burn_in >= chain_length) throw ValidationError("mh: burn-in exceeds chain length");
}

int MhConfig::effective_burn_in() const {
  return burn_in >= 0 ? burn_in : chain_length / 5;
}

Mat mh_chain(const LogDensityFn& log_density, int dim, std::span<const double> x0,
             const MhConfig& cfg, Rng& rng) {
  cfg.validate();
  if (static_cast<int>(x0.size()) != dim) throw ValidationError("mh: x0 dimension mismatch");
  std::vector<double> x(x0.begin(), x0.end()), proposal(dim);
  double log_pi = log_density(x);
  if (!std::isfinite(log_pi)) throw NumericError("mh: non-finite log-density at x0");
  const int burn = cfg.effective_burn_in();
  Mat out(cfg.chain_length - burn, dim);
  for (int t = 0; t < cfg.chain_length; ++t) {
    log_pi = mh_step(log_density, x, log_pi, cfg.proposal_std, 1.0, rng, proposal);
    if (t >= burn) std::copy(x.begin(), x.end(), out.row(t - burn));
  }
  return out;
}

Mat mh_chain(const TargetDensity& target, std::span<const double> x0, const MhConfig& cfg,
             Rng& rng) {
  return mh_chain([&target](std::span<const double> x) { return target.log_unnorm(x); },
                  target.dim(), x0, cfg, rng);
}

void PtConfig::validate() const {
  if (num_replicas < 1) throw ValidationError("pt: need at least one replica");
  if (!(proposal_std > 0.0)) throw ValidationError("pt: proposal std must be positive");
  if (exchange_interval < 1) throw ValidationError("pt: exchange interval must be >= 1");
  if (iterations < 1) throw ValidationError("pt: iterations must be >= 1");
  if (burn_in >= iterations) throw ValidationError("pt: burn-in exceeds iterations");
  if (!temperatures.empty()) {
    if (static_cast<int>(temperatures.size()) != num_replicas)
      throw ValidationError("pt: temperature count must match replicas");
    if (temperatures.front() != 1.0) throw ValidationError("pt: first temperature must be 1");
    for (std::size_t j = 1; j < temperatures.size(); ++j)
      if (!(temperatures[j] > temperatures[j - 1]))
        throw ValidationError("pt: temperatures must be strictly increasing");
  }
}

std::vector<double> PtConfig::ladder() const {
  if (!temperatures.empty()) return temperatures;
  std::vector<double> t(num_replicas);
  for (int j = 0; j < num_replicas; ++j)
    t[j] = num_replicas == 1 ? 1.0 : 1.0 + j * (2.0 - 1.0) / (num_replicas - 1);
  return t;
}

int PtConfig::effective_burn_in() const {
  return burn_in >= 0 ? burn_in : iterations / 5;
}

std::vector<Mat> pt_chains(const TargetDensity& target, const PtConfig& cfg,
                           std::uint64_t seed, std::string_view stream_label) {
  cfg.validate();
  const int d = target.dim();
  const int R = cfg.num_replicas;
  const std::vector<double> temps = cfg.ladder();

  // Replica 0 reuses the base stream so a single-replica run matches mh_chain.
  std::vector<Rng> rngs;
  rngs.reserve(R);
  for (int j = 0; j < R; ++j) {
    if (j == 0)
      rngs.push_back(Rng::stream(seed, stream_label));
    else
      rngs.push_back(
          Rng::stream(seed, std::string(stream_label) + "/replica" + std::to_string(j)));
  }
  Rng swap_rng = Rng::stream(seed, std::string(stream_label) + "/swap");

  const LogDensityFn log_density = [&target](std::span<const double> p) {
    return target.log_unnorm(p);
  };
  std::vector<std::vector<double>> x(R, std::vector<double>(d));
  std::vector<double> log_pi(R);
  for (int j = 0; j < R; ++j) {
    for (int c = 0; c < d; ++c) x[j][c] = rngs[j].normal();
    log_pi[j] = target.log_unnorm(x[j]);
  }

  const int burn = cfg.effective_burn_in();
  std::vector<Mat> chains(R, Mat(cfg.iterations - burn, d));
  std::vector<double> proposal(d);
  for (int it = 1; it <= cfg.iterations; ++it) {
    for (int j = 0; j < R; ++j) {
      log_pi[j] =
          mh_step(log_density, x[j], log_pi[j], cfg.proposal_std, temps[j], rngs[j], proposal);
      if (it > burn) std::copy(x[j].begin(), x[j].end(), chains[j].row(it - 1 - burn));
    }
    if (it % cfg.exchange_interval == 0) {
      for (int j = 0; j + 1 < R; ++j) {
        const double e_j = -log_add_exp(log_pi[j], std::log(kEnergyFloor));
        const double e_next = -log_add_exp(log_pi[j + 1], std::log(kEnergyFloor));
        const double delta = (1.0 / temps[j] - 1.0 / temps[j + 1]) * (e_next - e_j);
        const double u = swap_rng.uniform();
        if (std::log(u) < delta) {
          std::swap(x[j], x[j + 1]);
          std::swap(log_pi[j], log_pi[j + 1]);
        }
      }
    }
  }
  return chains;
}

}  // namespace af
