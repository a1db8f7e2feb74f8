#pragma once

#include <span>

#include "af/net.hpp"
#include "af/rng.hpp"

namespace af {

// Probe-averaged stochastic divergence estimate of the velocity field at
// (x, t): mean over eps ~ N(0,I) of <eps, v(x + sigma*eps, t) - v(x, t)> / sigma.
// Built only from forward evaluations.
double hutchinson_divergence(const Mlp& net, std::span<const double> x, double t,
                             double sigma, int num_probes, Rng& rng);

// Sum of d central finite differences of v_i along coordinate i, step
// 1e-6 * (1 + ||x||_inf). Validation oracle and inference-time bookkeeping,
// never a training path.
double exact_divergence(const Mlp& net, std::span<const double> x, double t);

}  // namespace af
