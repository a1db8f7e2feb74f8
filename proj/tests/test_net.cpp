#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "af/divergence.hpp"
#include "af/errors.hpp"
#include "af/net.hpp"
#include "af/tape.hpp"
#include "doctest.h"

using namespace af;

TEST_CASE("initialization is deterministic and fan-balanced") {
  Rng a(5), b(5);
  const Mlp n1 = Mlp::velocity_net(2, {32, 32}, a);
  const Mlp n2 = Mlp::velocity_net(2, {32, 32}, b);
  const auto v1 = n1.to_vector(), v2 = n2.to_vector();
  REQUIRE(v1.size() == v2.size());
  for (std::size_t i = 0; i < v1.size(); ++i) CHECK(v1[i] == v2[i]);

  // parameter count from the layer shapes
  CHECK(n1.n_params() == (3 * 32 + 32) + (32 * 32 + 32) + (32 * 2 + 2));

  // weights within the fan bound, biases zero
  for (int l = 0; l < n1.layer_count(); ++l) {
    const double bound = std::sqrt(6.0 / (n1.widths()[l] + n1.widths()[l + 1]));
    for (std::size_t i = 0; i < n1.weight(l).size(); ++i)
      CHECK(std::fabs(n1.weight(l).data()[i]) <= bound);
    for (std::size_t i = 0; i < n1.bias(l).size(); ++i) CHECK(n1.bias(l).data()[i] == 0.0);
  }
}

TEST_CASE("forward at the origin matches an independent matrix evaluation") {
  Rng rng(17);
  const Mlp net = Mlp::velocity_net(2, {32, 32}, rng);
  std::vector<double> out(2);
  net.eval_xt(std::vector<double>{0.0, 0.0}, 0.0, out);

  // hand-rolled evaluation: zero input -> sigmoid(0) = 0.5 through hiddens
  std::vector<double> h1(32), h2(32), y(2, 0.0);
  for (int o = 0; o < 32; ++o) h1[o] = 1.0 / (1.0 + std::exp(-0.0));  // pre-act is 0
  for (int o = 0; o < 32; ++o) {
    double acc = 0.0;
    for (int c = 0; c < 32; ++c) acc += net.weight(1)(o, c) * h1[c];
    h2[o] = 1.0 / (1.0 + std::exp(-acc));
  }
  for (int o = 0; o < 2; ++o) {
    double acc = 0.0;
    for (int c = 0; c < 32; ++c) acc += net.weight(2)(o, c) * h2[c];
    y[o] = acc;
  }
  CHECK(out[0] == doctest::Approx(y[0]).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(y[1]).epsilon(1e-12));
}

TEST_CASE("zero net is the zero field; batching is a semantic no-op") {
  const Mlp net = Mlp::zeros({3, 8, 2}, 2);
  Mat x(5, 2);
  Rng rng(3);
  rng.fill_normal(x.data(), x.size());
  Mat out;
  net.forward_batch_xt(x, 0.7, out);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 0.0);

  Rng rng2(19);
  const Mlp rnd = Mlp::velocity_net(2, {16}, rng2);
  Mat batch_out;
  rnd.forward_batch_xt(x, 0.3, batch_out);
  std::vector<double> row_out(2);
  for (int i = 0; i < x.rows(); ++i) {
    rnd.eval_xt(x.row_span(i), 0.3, row_out);
    CHECK(batch_out(i, 0) == row_out[0]);
    CHECK(batch_out(i, 1) == row_out[1]);
  }
}

TEST_CASE("single hidden unit forward matches a hand-computed composition") {
  Mlp net = Mlp::zeros({2, 1, 1}, 1);
  net.weight(0)(0, 0) = 0.8;   // x weight
  net.weight(0)(0, 1) = -0.2;  // t weight
  net.bias(0)(0, 0) = 0.1;
  net.weight(1)(0, 0) = 1.5;
  net.bias(1)(0, 0) = -0.3;
  const double x = 0.4, t = 0.6;
  const double pre = 0.8 * x - 0.2 * t + 0.1;
  const double expected = 1.5 / (1.0 + std::exp(-pre)) - 0.3;
  std::vector<double> out(1);
  net.eval_xt(std::vector<double>{x}, t, out);
  CHECK(out[0] == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("non-finite input is rejected") {
  Rng rng(1);
  const Mlp net = Mlp::velocity_net(2, {4}, rng);
  Mat x(1, 2);
  x(0, 0) = std::numeric_limits<double>::infinity();
  Mat out;
  CHECK_THROWS_AS(net.forward_batch_xt(x, 0.0, out), ValidationError);
}

TEST_CASE("serialization round-trips bit-exactly") {
  Rng rng(77);
  const Mlp net = Mlp::velocity_net(3, {32, 32}, rng);
  const auto path = std::filesystem::temp_directory_path() / "af_net_roundtrip.aflw";
  net.save(path);
  const Mlp back = Mlp::load(path);
  CHECK(back.widths() == net.widths());
  CHECK(back.serve_dim() == net.serve_dim());
  Mat x(7, 3);
  rng.fill_normal(x.data(), x.size());
  Mat y1, y2;
  net.forward_batch_xt(x, 0.25, y1);
  back.forward_batch_xt(x, 0.25, y2);
  for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y1.data()[i] == y2.data()[i]);
  std::filesystem::remove(path);
}

namespace {

// Builds the scalar ||v(x, t)||^2 averaged over the batch.
double loss_value(const Mlp& net, const Mat& x, double t) {
  Graph g;
  const TapedMlp taped = TapedMlp::bind(g, net);
  const int xid = g.add_leaf(x, "x");
  const int v = taped.forward_xt(g, xid, t);
  const int sq = g.sq_dist_rows(v, g.add_leaf(Mat(x.rows(), net.output_dim()), "zero"));
  return g.scalar(g.mean_all(sq));
}

std::vector<double> loss_grad(const Mlp& net, const Mat& x, double t) {
  Graph g;
  const TapedMlp taped = TapedMlp::bind(g, net);
  const int xid = g.add_leaf(x, "x");
  const int v = taped.forward_xt(g, xid, t);
  const int sq = g.sq_dist_rows(v, g.add_leaf(Mat(x.rows(), net.output_dim()), "zero"));
  g.backward(g.mean_all(sq));
  return param_gradient(g, taped);
}

}  // namespace

TEST_CASE("constant loss has zero gradient") {
  Rng rng(4);
  const Mlp net = Mlp::velocity_net(2, {4}, rng);
  Graph g;
  const TapedMlp taped = TapedMlp::bind(g, net);
  const int c = g.add_leaf(Mat(3, 1), "const");
  g.backward(g.mean_all(c));
  const std::vector<double> grad = param_gradient(g, taped);
  for (double v : grad) CHECK(v == 0.0);
}

TEST_CASE("squared-norm loss gradient on a linear net matches the quadratic form") {
  // single linear layer (no hidden): v = W [x; t] + b. With loss mean ||v||^2,
  // dL/dW = 2/n sum v_i [x_i; t]^T, dL/db = 2/n sum v_i.
  Mlp net = Mlp::zeros({3, 2}, 2);
  Rng rng(8);
  for (std::size_t i = 0; i < net.weight(0).size(); ++i) net.weight(0).data()[i] = rng.normal();
  for (std::size_t i = 0; i < net.bias(0).size(); ++i) net.bias(0).data()[i] = rng.normal();
  Mat x(5, 2);
  rng.fill_normal(x.data(), x.size());
  const double t = 0.4;

  const std::vector<double> grad = loss_grad(net, x, t);

  Mat v;
  net.forward_batch_xt(x, t, v);
  std::vector<double> expected(net.n_params(), 0.0);
  // layout: W (2 rows x 3 cols) then b (2)
  for (int i = 0; i < 5; ++i) {
    const double in[3] = {x(i, 0), x(i, 1), t};
    for (int o = 0; o < 2; ++o) {
      for (int c = 0; c < 3; ++c) expected[o * 3 + c] += 2.0 / 5.0 * v(i, o) * in[c];
      expected[6 + o] += 2.0 / 5.0 * v(i, o);
    }
  }
  REQUIRE(grad.size() == expected.size());
  for (std::size_t i = 0; i < grad.size(); ++i)
    CHECK(grad[i] == doctest::Approx(expected[i]).epsilon(1e-10));
}

TEST_CASE("tape gradient matches central finite differences on a [2,8,2] net") {
  Rng rng(21);
  Mlp net = Mlp::velocity_net(2, {8}, rng);
  Mat x(6, 2);
  rng.fill_normal(x.data(), x.size());
  const double t = 0.3;

  std::vector<double> params = net.to_vector();
  const std::vector<double> analytic = loss_grad(net, x, t);
  const double h = 1e-5;
  // spot-check 20 random coordinates
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t i = rng.uniform_int(params.size());
    const double save = params[i];
    params[i] = save + h;
    net.from_vector(params);
    const double up = loss_value(net, x, t);
    params[i] = save - h;
    net.from_vector(params);
    const double down = loss_value(net, x, t);
    params[i] = save;
    net.from_vector(params);
    const double fd = (up - down) / (2.0 * h);
    CHECK(analytic[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("hutchinson estimator: linear field expectation equals the trace") {
  // bias-free linear net realizes v(x) = A [x; t]; with t = 0 the divergence
  // is trace of the x-block.
  Mlp net = Mlp::zeros({3, 2}, 2);
  Rng rng(33);
  for (std::size_t i = 0; i < net.weight(0).size(); ++i) net.weight(0).data()[i] = rng.normal();
  const double trace = net.weight(0)(0, 0) + net.weight(0)(1, 1);

  const std::vector<double> x{0.7, -0.4};
  const int probes = 10000;
  Rng prng(55);
  const double est = hutchinson_divergence(net, x, 0.0, 1e-3, probes, prng);
  // variance of a single probe for linear fields: sum of off-diagonal terms
  const double se_bound = 3.0 * std::sqrt(2.0) *
                          std::sqrt(sq_norm(std::span<const double>(
                              net.weight(0).data(), net.weight(0).size()))) /
                          std::sqrt(static_cast<double>(probes));
  CHECK(std::fabs(est - trace) < se_bound);
}

TEST_CASE("hutchinson on a constant field is exactly zero") {
  Mlp net = Mlp::zeros({3, 4, 2}, 2);
  net.bias(1)(0, 0) = 1.7;
  net.bias(1)(0, 1) = -0.4;
  Rng rng(2);
  const double est = hutchinson_divergence(net, std::vector<double>{1.0, 2.0}, 0.5, 0.01, 50, rng);
  CHECK(est == 0.0);
}

TEST_CASE("exact divergence: linear and constant fields") {
  Mlp net = Mlp::zeros({3, 2}, 2);
  net.weight(0)(0, 0) = 1.3;
  net.weight(0)(0, 1) = 0.4;
  net.weight(0)(1, 0) = -0.2;
  net.weight(0)(1, 1) = 2.1;
  const double div = exact_divergence(net, std::vector<double>{0.3, -0.8}, 0.0);
  CHECK(std::fabs(div - (1.3 + 2.1)) < 1e-6);

  const Mlp constant = Mlp::zeros({3, 4, 2}, 2);
  CHECK(std::fabs(exact_divergence(constant, std::vector<double>{1.0, 1.0}, 0.2)) < 1e-12);
}

TEST_CASE("exact divergence agrees with an independent jacobian-column evaluation") {
  Rng rng(101);
  const Mlp net = Mlp::velocity_net(2, {16}, rng);
  std::vector<double> x(2), vp(2), vm(2);
  for (int p = 0; p < 50; ++p) {
    for (double& c : x) c = 2.0 * rng.normal();
    const double t = rng.uniform();
    const double got = exact_divergence(net, x, t);
    // redundant implementation: different step size, same stencil
    double want = 0.0;
    const double h = 2e-6 * (1.0 + norm_inf(x));
    for (int i = 0; i < 2; ++i) {
      std::vector<double> xp(x), xm(x);
      xp[i] += h;
      xm[i] -= h;
      net.eval_xt(xp, t, vp);
      net.eval_xt(xm, t, vm);
      want += (vp[i] - vm[i]) / (2.0 * h);
    }
    CHECK(std::fabs(got - want) < 1e-6);
  }
}

TEST_CASE("hutchinson matches exact divergence within 1% on random nets") {
  Rng rng(404);
  for (int trial = 0; trial < 5; ++trial) {
    const Mlp net = Mlp::velocity_net(2, {8}, rng);
    std::vector<double> x{1.5 * rng.normal(), 1.5 * rng.normal()};
    const double t = rng.uniform();
    const double exact = exact_divergence(net, x, t);
    Rng prng(1000 + trial);
    const double est = hutchinson_divergence(net, x, t, 1e-3, 10000, prng);
    CHECK(std::fabs(est - exact) / std::max(1.0, std::fabs(exact)) < 0.01);
  }
}
