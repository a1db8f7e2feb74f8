#include "af/divergence.hpp"

#include <vector>

#include "af/errors.hpp"
#include "af/mat.hpp"

namespace af {

double hutchinson_divergence(const Mlp& net, std::span<const double> x, double t,
                             double sigma, int num_probes, Rng& rng) {
  if (!(sigma > 0.0)) throw ValidationError("hutchinson: sigma must be positive");
  if (num_probes < 1) throw ValidationError("hutchinson: need at least one probe");
  const int d = net.serve_dim();
  std::vector<double> eps(d), shifted(d), v_base(d), v_shift(d);
  net.eval_xt(x, t, v_base);
  double acc = 0.0;
  for (int p = 0; p < num_probes; ++p) {
    for (int i = 0; i < d; ++i) {
      eps[i] = rng.normal();
      shifted[i] = x[i] + sigma * eps[i];
    }
    net.eval_xt(shifted, t, v_shift);
    double probe = 0.0;
    for (int i = 0; i < d; ++i) probe += eps[i] * (v_shift[i] - v_base[i]);
    acc += probe / sigma;
  }
  return acc / num_probes;
}

double exact_divergence(const Mlp& net, std::span<const double> x, double t) {
  const int d = net.serve_dim();
  const double h = 1e-6 * (1.0 + norm_inf(x));
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> v_plus(d), v_minus(d);
  double div = 0.0;
  for (int i = 0; i < d; ++i) {
    const double xi = point[i];
    point[i] = xi + h;
    net.eval_xt(point, t, v_plus);
    point[i] = xi - h;
    net.eval_xt(point, t, v_minus);
    point[i] = xi;
    div += (v_plus[i] - v_minus[i]) / (2.0 * h);
  }
  return div;
}

}  // namespace af
