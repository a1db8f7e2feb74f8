#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "af/density.hpp"
#include "af/mat.hpp"
#include "af/rng.hpp"

namespace af {

using LogDensityFn = std::function<double(std::span<const double>)>;

struct MhConfig {
  double proposal_std = 1.0;
  int chain_length = 100000;
  int burn_in = -1;  // < 0 means first 20% discarded

  void validate() const;
  int effective_burn_in() const;
};

// Random-walk Metropolis with an isotropic Gaussian proposal. Acceptance
// ratios are formed from log-density differences, so scaling the target by a
// constant cannot change the accept/reject sequence. Returns post-burn-in
// samples, one per row, starting with x0's successor chain.
Mat mh_chain(const LogDensityFn& log_density, int dim, std::span<const double> x0,
             const MhConfig& cfg, Rng& rng);
Mat mh_chain(const TargetDensity& target, std::span<const double> x0, const MhConfig& cfg,
             Rng& rng);

struct PtConfig {
  int num_replicas = 5;
  std::vector<double> temperatures;  // empty: linear 1.0 .. 2.0
  double proposal_std = 1.0;
  int exchange_interval = 100;
  int iterations = 100000;
  int burn_in = -1;  // < 0 means first 20% discarded

  void validate() const;
  std::vector<double> ladder() const;
  int effective_burn_in() const;
};

// Parallel tempering: per-replica Metropolis steps on the tempered densities
// pi^{1/T_j}, periodic neighbor swaps with energy-difference acceptance on
// E = -log(pi + 1e-300). Replica 0 (T = 1) consumes the same stream an MH run
// would, so a one-replica ladder reproduces mh_chain exactly. Returns
// post-burn-in chains, cold replica first.
std::vector<Mat> pt_chains(const TargetDensity& target, const PtConfig& cfg,
                           std::uint64_t seed, std::string_view stream_label = "baseline");

}  // namespace af
