#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "af/errors.hpp"
#include "af/training.hpp"
#include "doctest.h"

using namespace af;

namespace {

AnnealingPath gaussian_shift_path(double mean, std::vector<double> betas) {
  GaussianMixtureParams p;
  p.centers = Mat(1, 1);
  p.centers(0, 0) = mean;
  p.weights = {1.0};
  return AnnealingPath::geometric(TargetDensity::gaussian_mixture(p), std::move(betas));
}

TrainConfig small_cfg(int blocks) {
  TrainConfig cfg;
  cfg.alpha.assign(blocks, 0.5);
  cfg.batch_size = 64;
  cfg.pool_size = 512;
  cfg.iterations = 50;
  cfg.hidden = {8};
  cfg.seed = 7;
  return cfg;
}

double loss_value_at(const Mlp& net, const AnnealingPath& path, int k, const Mat& minibatch,
                     double alpha, const TrainConfig& cfg, const std::vector<Mat>& probes) {
  LossBuild lb = assemble_loss(net, path, k, minibatch, alpha, cfg, probes);
  return lb.value();
}

}  // namespace

TEST_CASE("w2 penalty: stationary, hand value, linear in alpha") {
  // three equal segments of a unit-speed 1d path: alpha * 3 * (1/3)^2 = alpha/3
  Graph g;
  std::vector<int> ids;
  for (int s = 0; s <= 3; ++s) {
    Mat w(2, 1);
    w(0, 0) = s / 3.0;  // moving sample
    w(1, 0) = 4.0;      // stationary sample
    ids.push_back(g.add_leaf(std::move(w), "w"));
  }
  const int term1 = w2_penalty(g, ids, 1.0);
  CHECK(g.val(term1)(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(g.val(term1)(1, 0) == 0.0);
  const int term2 = w2_penalty(g, ids, 2.0);
  CHECK(g.val(term2)(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("assemble_loss on a zero net reduces to the data terms") {
  const AnnealingPath path = gaussian_shift_path(2.0, {0.0, 1.0});
  TrainConfig cfg = small_cfg(1);
  Rng rng(3);
  Mat minibatch = sample_reference(16, 1, rng);
  const std::vector<Mat> probes = draw_probes(16, 1, cfg.sub_steps, 1, rng);

  const Mlp zero = Mlp::zeros({2, 4, 1}, 1);

  cfg.loss_variant = LossVariant::Original;
  double expected = 0.0;
  for (int i = 0; i < minibatch.rows(); ++i)
    expected += -path.log_density(1, minibatch.row_span(i));
  expected /= minibatch.rows();
  CHECK(loss_value_at(zero, path, 1, minibatch, 0.5, cfg, probes) ==
        doctest::Approx(expected).epsilon(1e-12));

  cfg.loss_variant = LossVariant::AlternativeTaylor;
  CHECK(loss_value_at(zero, path, 1, minibatch, 0.5, cfg, probes) == 0.0);
}

TEST_CASE("loss gradients match finite differences for both variants") {
  const AnnealingPath path = gaussian_shift_path(1.5, {0.0, 1.0});
  Rng rng(11);
  Mat minibatch = sample_reference(5, 1, rng);

  for (LossVariant variant : {LossVariant::Original, LossVariant::AlternativeTaylor}) {
    TrainConfig cfg = small_cfg(1);
    cfg.loss_variant = variant;
    Rng init(21);
    Mlp net = Mlp::velocity_net(1, {4}, init);
    const std::vector<Mat> probes = draw_probes(5, 1, cfg.sub_steps, 1, rng);

    LossBuild lb = assemble_loss(net, path, 1, minibatch, 0.7, cfg, probes);
    lb.graph.backward(lb.loss_id);
    const std::vector<double> analytic = param_gradient(lb.graph, lb.net_vars);

    std::vector<double> params = net.to_vector();
    const double h = 1e-5;
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double save = params[i];
      params[i] = save + h;
      net.from_vector(params);
      const double up = loss_value_at(net, path, 1, minibatch, 0.7, cfg, probes);
      params[i] = save - h;
      net.from_vector(params);
      const double down = loss_value_at(net, path, 1, minibatch, 0.7, cfg, probes);
      params[i] = save;
      net.from_vector(params);
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, std::fabs(fd - analytic[i]));
      scale = std::max(scale, std::fabs(fd));
    }
    INFO("variant ", loss_variant_name(variant));
    CHECK(worst / (1.0 + scale) < 1e-4);
  }
}

TEST_CASE("original and alternative gradients coincide on the zero net") {
  const AnnealingPath path = gaussian_shift_path(1.0, {0.0, 0.5, 1.0});
  Rng rng(31);
  Mat minibatch = sample_reference(32, 1, rng);
  const Mlp zero = Mlp::zeros({2, 6, 1}, 1);
  TrainConfig cfg = small_cfg(2);
  const std::vector<Mat> probes = draw_probes(32, 1, cfg.sub_steps, 1, rng);

  std::vector<double> grads[2];
  int slot = 0;
  for (LossVariant variant : {LossVariant::Original, LossVariant::AlternativeTaylor}) {
    cfg.loss_variant = variant;
    LossBuild lb = assemble_loss(zero, path, 1, minibatch, 0.5, cfg, probes);
    lb.graph.backward(lb.loss_id);
    grads[slot++] = param_gradient(lb.graph, lb.net_vars);
  }
  REQUIRE(grads[0].size() == grads[1].size());
  for (std::size_t i = 0; i < grads[0].size(); ++i)
    CHECK(grads[0][i] == doctest::Approx(grads[1][i]).epsilon(1e-6).scale(1.0));
}

TEST_CASE("langevin adjustment: zero steps, small-eta bound, stationary moments") {
  const AnnealingPath path = gaussian_shift_path(0.0, {0.0, 1.0});
  Rng rng(41);
  Mat batch = sample_reference(8, 1, rng);
  Mat before = batch;
  langevin_adjust(batch, path, 1, 1e-3, 0, rng);
  for (std::size_t i = 0; i < batch.size(); ++i) CHECK(batch.data()[i] == before.data()[i]);

  // single tiny step moves each row by O(sqrt(eta))
  const double eta = 1e-8;
  langevin_adjust(batch, path, 1, eta, 1, rng);
  for (int i = 0; i < batch.rows(); ++i)
    CHECK(std::fabs(batch(i, 0) - before(i, 0)) <= 10.0 * std::sqrt(eta * 1.0));

  // long run from a bad start relaxes to the target mean
  Mat chains(1000, 1);
  for (int i = 0; i < chains.rows(); ++i) chains(i, 0) = 5.0;
  langevin_adjust(chains, path, 1, 1e-3, 10000, rng);
  double mean = 0.0;
  for (int i = 0; i < chains.rows(); ++i) mean += chains(i, 0);
  mean /= chains.rows();
  CHECK(std::fabs(mean) < 0.15);
}

TEST_CASE("train_block: zero iterations returns the initialized block; determinism") {
  const AnnealingPath path = gaussian_shift_path(2.0, {0.0, 1.0});
  TrainConfig cfg = small_cfg(1);
  cfg.iterations = 0;
  AnnealingFlowModel empty;
  empty.dim = 1;
  const FlowBlock b0 = train_block(empty, 1, path, cfg);
  Rng init_rng = Rng::stream(cfg.seed, "init/block1");
  const Mlp expected = Mlp::velocity_net(1, cfg.hidden, init_rng);
  const auto got = b0.net.to_vector(), want = expected.to_vector();
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);

  cfg.iterations = 25;
  const FlowBlock b1 = train_block(empty, 1, path, cfg);
  const FlowBlock b2 = train_block(empty, 1, path, cfg);
  const auto p1 = b1.net.to_vector(), p2 = b2.net.to_vector();
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i] == p2[i]);
}

TEST_CASE("train_block learns a one-block gaussian shift") {
  const AnnealingPath path = gaussian_shift_path(2.0, {0.0, 1.0});
  TrainConfig cfg;
  cfg.loss_variant = LossVariant::Original;
  cfg.alpha = {0.05};
  cfg.hidden = {16};
  cfg.learning_rate = 1e-3;
  cfg.iterations = 1500;
  cfg.batch_size = 256;
  cfg.pool_size = 4096;
  cfg.seed = 13;

  AnnealingFlowModel model;
  model.dim = 1;
  BlockTrainStats stats;
  model.blocks.push_back(train_block(model, 1, path, cfg, &stats));

  Rng rng(99);
  const Mat draws = sample_reference(4000, 1, rng);
  const Mat pushed = push_forward(model, draws);
  double mean = 0.0;
  for (int i = 0; i < pushed.rows(); ++i) mean += pushed(i, 0);
  mean /= pushed.rows();
  CHECK(std::fabs(mean - 2.0) < 0.1);

  // smoothed loss over the last 10% does not trend upward
  const std::size_t n = stats.loss_trace.size();
  REQUIRE(n == 1500);
  auto smooth = [&](std::size_t from, std::size_t to) {
    double acc = 0.0;
    for (std::size_t i = from; i < to; ++i) acc += stats.loss_trace[i];
    return acc / (to - from);
  };
  double lo = 1e300, hi = -1e300;
  for (double v : stats.loss_trace) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double tail_first = smooth(n - n / 10, n - n / 20);
  const double tail_last = smooth(n - n / 20, n);
  CHECK(tail_last - tail_first <= 0.01 * (hi - lo));
}

TEST_CASE("train_model validates the alpha schedule and runs an identity path") {
  // q equals the reference: a single block must stay near the identity map
  const AnnealingPath path =
      AnnealingPath::constant_target(TargetDensity::isotropic_gaussian(1), 1);
  TrainConfig cfg = small_cfg(1);
  cfg.iterations = 600;
  cfg.learning_rate = 1e-3;  // the random initial field is O(0.5); give the
  cfg.pool_size = 2048;      // optimizer enough budget to pull it back
  cfg.batch_size = 128;

  TrainConfig bad = cfg;
  bad.alpha = {0.5, 0.5};
  CHECK_THROWS_AS(train_model(path, bad), ValidationError);

  const AnnealingFlowModel model = train_model(path, cfg);
  Rng rng(3);
  const Mat draws = sample_reference(2000, 1, rng);
  const Mat pushed = push_forward(model, draws);
  double mean = 0.0, var = 0.0;
  for (int i = 0; i < pushed.rows(); ++i) mean += pushed(i, 0);
  mean /= pushed.rows();
  for (int i = 0; i < pushed.rows(); ++i) var += (pushed(i, 0) - mean) * (pushed(i, 0) - mean);
  var /= (pushed.rows() - 1);
  CHECK(std::fabs(mean) < 0.15);
  CHECK(std::fabs(var - 1.0) < 0.25);
}

TEST_CASE("adam matches the reference update on a quadratic") {
  // minimize f(x) = x^2 / 2; gradient x
  std::vector<double> x{1.0};
  AdamState adam(1);
  for (int i = 0; i < 500; ++i) {
    const std::vector<double> g{x[0]};
    adam.step(x, g, 0.05);
  }
  CHECK(std::fabs(x[0]) < 1e-3);

  // hand-checked first step: m = 0.1 g, v = 0.001 g^2, update = lr * g/|g|
  std::vector<double> y{3.0};
  AdamState a2(1);
  a2.step(y, std::vector<double>{2.0}, 0.1);
  const double m_hat = 0.2 / (1 - 0.9);
  const double v_hat = 0.004 / (1 - 0.999);
  CHECK(y[0] == doctest::Approx(3.0 - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8)).epsilon(1e-12));
}
