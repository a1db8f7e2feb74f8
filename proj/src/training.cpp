#include "af/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "af/errors.hpp"

namespace af {

std::string loss_variant_name(LossVariant v) {
  return v == LossVariant::Original ? "original" : "alternative_taylor";
}

LossVariant loss_variant_from_name(const std::string& name) {
  if (name == "original") return LossVariant::Original;
  if (name == "alternative_taylor") return LossVariant::AlternativeTaylor;
  throw ValidationError("unknown loss variant '" + name + "'");
}

double TrainConfig::effective_sigma(int dim) const {
  if (hutchinson_sigma > 0.0) return hutchinson_sigma;
  return 0.02 / std::sqrt(static_cast<double>(dim));
}

void TrainConfig::validate(int blocks) const {
  if (static_cast<int>(alpha.size()) != blocks)
    throw ValidationError("train: alpha schedule has " + std::to_string(alpha.size()) +
                          " entries for " + std::to_string(blocks) + " blocks");
  for (double a : alpha)
    if (!(a > 0.0)) throw ValidationError("train: alpha entries must be positive");
  if (sub_steps < 1) throw ValidationError("train: sub_steps must be >= 1");
  if (iterations < 0) throw ValidationError("train: iterations must be >= 0");
  if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  if (pool_size < batch_size) throw ValidationError("train: pool smaller than batch");
  if (!(learning_rate > 0.0)) throw ValidationError("train: learning rate must be positive");
  if (!(lr_decay_floor > 0.0) || lr_decay_floor > 1.0)
    throw ValidationError("train: lr_decay_floor must be in (0, 1]");
  if (probes_per_node < 1) throw ValidationError("train: need at least one probe per node");
  if (hidden.empty()) throw ValidationError("train: hidden widths must be nonempty");
  if (langevin.enabled && !(langevin.eta > 0.0))
    throw ValidationError("train: langevin eta must be positive");
}

void AdamState::step(std::span<double> params, std::span<const double> grad, double lr) {
  ++step_count;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + epsilon);
  }
}

int w2_penalty(Graph& g, const std::vector<int>& waypoint_ids, double alpha) {
  if (!(alpha > 0.0)) throw ValidationError("w2_penalty: alpha must be positive");
  std::vector<std::pair<double, int>> terms;
  for (std::size_t s = 0; s + 1 < waypoint_ids.size(); ++s)
    terms.emplace_back(alpha, g.sq_dist_rows(waypoint_ids[s + 1], waypoint_ids[s]));
  return g.lincomb(std::move(terms), "w2_penalty");
}

std::vector<Mat> draw_probes(int n, int dim, int sub_steps, int probes_per_node, Rng& rng) {
  std::vector<Mat> probes;
  probes.reserve(static_cast<std::size_t>(sub_steps + 1) * probes_per_node);
  for (int i = 0; i < (sub_steps + 1) * probes_per_node; ++i) {
    Mat eps(n, dim);
    rng.fill_normal(eps.data(), eps.size());
    probes.push_back(std::move(eps));
  }
  return probes;
}

LossBuild assemble_loss(const Mlp& net, const AnnealingPath& path, int k,
                        const Mat& minibatch, double alpha, const TrainConfig& cfg,
                        const std::vector<Mat>& probes) {
  const int d = path.dim();
  const int S = cfg.sub_steps;
  const int P = cfg.probes_per_node;
  if (minibatch.cols() != d) throw ValidationError("assemble_loss: minibatch width mismatch");
  if (static_cast<int>(probes.size()) != (S + 1) * P)
    throw ValidationError("assemble_loss: wrong probe count");
  const double sigma = cfg.effective_sigma(d);
  const double h = 1.0 / S;

  LossBuild lb;
  Graph& g = lb.graph;
  lb.net_vars = TapedMlp::bind(g, net);
  const TapedMlp& tnet = lb.net_vars;

  // RK4 waypoints through the block's local time [0, 1]; the k1 stages double
  // as the waypoint velocity evaluations for the divergence nodes.
  std::vector<int> x(S + 1);
  std::vector<int> v_at(S + 1, -1);
  x[0] = g.add_leaf(minibatch, "minibatch");
  for (int s = 0; s < S; ++s) {
    const double t = static_cast<double>(s) / S;
    const int k1 = tnet.forward_xt(g, x[s], t);
    v_at[s] = k1;
    const int in2 = g.lincomb({{1.0, x[s]}, {0.5 * h, k1}}, "rk4_in2");
    const int k2 = tnet.forward_xt(g, in2, t + 0.5 * h);
    const int in3 = g.lincomb({{1.0, x[s]}, {0.5 * h, k2}}, "rk4_in3");
    const int k3 = tnet.forward_xt(g, in3, t + 0.5 * h);
    const int in4 = g.lincomb({{1.0, x[s]}, {h, k3}}, "rk4_in4");
    const int k4 = tnet.forward_xt(g, in4, t + h);
    x[s + 1] = g.lincomb(
        {{1.0, x[s]}, {h / 6.0, k1}, {h / 3.0, k2}, {h / 3.0, k3}, {h / 6.0, k4}},
        "rk4_out");
  }
  v_at[S] = tnet.forward_xt(g, x[S], 1.0);
  lb.waypoint_ids = x;

  // Divergence line integral: one (or more) Hutchinson probes at each
  // waypoint, trapezoid weights across waypoints.
  std::vector<std::pair<double, int>> div_terms;
  const int v_end = v_at[S];
  for (int s = 0; s <= S; ++s) {
    const double t = static_cast<double>(s) / S;
    const int v_base = v_at[s];
    const double w = (s == 0 || s == S) ? 0.5 * h : h;
    for (int p = 0; p < P; ++p) {
      const Mat& eps = probes[static_cast<std::size_t>(s) * P + p];
      Mat eps_scaled(eps.rows(), eps.cols());
      for (std::size_t i = 0; i < eps.size(); ++i)
        eps_scaled.data()[i] = sigma * eps.data()[i];
      const int shifted = g.add_const(x[s], std::move(eps_scaled));
      const int v_shift = tnet.forward_xt(g, shifted, t);
      const int delta = g.lincomb({{1.0, v_shift}, {-1.0, v_base}}, "hutch_delta");
      div_terms.emplace_back(w / (sigma * P), g.rowdot_const(delta, eps, 1.0));
    }
  }
  const int div_integral = g.lincomb(std::move(div_terms), "div_integral");

  const int w2 = w2_penalty(g, lb.waypoint_ids, alpha);

  int per_sample;
  if (cfg.loss_variant == LossVariant::Original) {
    const int target_term = g.neg_log_density(x[S], path, k);
    per_sample = g.lincomb({{1.0, target_term}, {-1.0, div_integral}, {1.0, w2}},
                           "per_sample_loss");
  } else {
    const int target_term = g.score_dot(x[S], v_end, path, k);
    per_sample = g.lincomb({{-1.0, target_term}, {-1.0, div_integral}, {1.0, w2}},
                           "per_sample_loss");
  }
  lb.loss_id = g.mean_all(per_sample);
  return lb;
}

void langevin_adjust(Mat& batch, const AnnealingPath& path, int k, double eta, int steps,
                     Rng& rng) {
  if (!(eta > 0.0)) throw ValidationError("langevin: eta must be positive");
  const int d = batch.cols();
  const double noise_scale = std::sqrt(eta);
  std::vector<double> s(d);
  for (int step = 0; step < steps; ++step) {
    for (int i = 0; i < batch.rows(); ++i) {
      path.score(k, batch.row_span(i), s);
      double* row = batch.row(i);
      for (int c = 0; c < d; ++c) row[c] += 0.5 * eta * s[c] + noise_scale * rng.normal();
    }
  }
}

namespace {

std::string block_label(const char* what, int k) {
  return std::string(what) + "/block" + std::to_string(k);
}

}  // namespace

FlowBlock train_block(const AnnealingFlowModel& model, int k, const AnnealingPath& path,
                      const TrainConfig& cfg, BlockTrainStats* stats) {
  if (k < 1 || k > path.steps())
    throw ValidationError("train_block: block index out of range");
  if (model.block_count() < k - 1)
    throw ValidationError("train_block: blocks 1.." + std::to_string(k - 1) +
                          " must be trained first");
  const int d = path.dim();

  Rng init_rng = Rng::stream(cfg.seed, block_label("init", k));
  FlowBlock block{Mlp::velocity_net(d, cfg.hidden, init_rng), cfg.sub_steps};
  if (cfg.iterations == 0) return block;

  // Fresh pool from the reference, pushed once through the frozen prefix.
  Rng pool_rng = Rng::stream(cfg.seed, block_label("pool", k));
  Mat pool = sample_reference(cfg.pool_size, d, pool_rng);
  pool = push_forward(model, pool, k - 1);
  if (cfg.langevin.enabled) {
    Rng langevin_rng = Rng::stream(cfg.seed, block_label("langevin", k));
    langevin_adjust(pool, path, k - 1, cfg.langevin.eta, cfg.langevin.steps, langevin_rng);
  }

  Rng shuffle_rng = Rng::stream(cfg.seed, block_label("shuffle", k));
  Rng probe_rng = Rng::stream(cfg.seed, block_label("probe", k));

  std::vector<int> order(cfg.pool_size);
  std::iota(order.begin(), order.end(), 0);
  auto reshuffle = [&] {
    for (int i = cfg.pool_size - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform_int(i + 1));
      std::swap(order[i], order[j]);
    }
  };
  reshuffle();
  int cursor = 0;

  std::vector<double> params = block.net.to_vector();
  AdamState adam(params.size());
  Mat minibatch(cfg.batch_size, d);
  const double alpha = cfg.alpha.at(k - 1);

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cursor + cfg.batch_size > cfg.pool_size) {
      reshuffle();
      cursor = 0;
    }
    for (int i = 0; i < cfg.batch_size; ++i) {
      const double* src = pool.row(order[cursor + i]);
      std::copy(src, src + d, minibatch.row(i));
    }
    cursor += cfg.batch_size;

    const std::vector<Mat> probes =
        draw_probes(cfg.batch_size, d, cfg.sub_steps, cfg.probes_per_node, probe_rng);
    double lr = cfg.learning_rate;
    if (cfg.lr_decay_floor < 1.0) {
      const double floor = cfg.learning_rate * cfg.lr_decay_floor;
      const double phase = M_PI * iter / std::max(1, cfg.iterations - 1);
      lr = floor + 0.5 * (cfg.learning_rate - floor) * (1.0 + std::cos(phase));
    }
    try {
      LossBuild lb = assemble_loss(block.net, path, k, minibatch, alpha, cfg, probes);
      lb.graph.backward(lb.loss_id);
      const std::vector<double> grad = param_gradient(lb.graph, lb.net_vars);
      adam.step(params, grad, lr);
      block.net.from_vector(params);
      if (stats) {
        double gn = 0.0;
        for (double gi : grad) gn += gi * gi;
        stats->loss_trace.push_back(lb.value());
        stats->grad_norm.push_back(std::sqrt(gn));
        stats->wall_ms.push_back(
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count());
      }
    } catch (const NumericError& e) {
      throw NumericError("block " + std::to_string(k) + ", iteration " +
                         std::to_string(iter) + ": " + e.what());
    }
  }
  return block;
}

AnnealingFlowModel train_model(const AnnealingPath& path, const TrainConfig& cfg,
                               const std::filesystem::path& out_dir) {
  cfg.validate(path.steps());
  AnnealingFlowModel model;
  model.dim = path.dim();
  model.path_meta = path.to_json();
  model.path_meta["target"] = path.target().to_json();
  const bool persist = !out_dir.empty();
  if (persist) std::filesystem::create_directories(out_dir);
  for (int k = 1; k <= path.steps(); ++k) {
    BlockTrainStats stats;
    FlowBlock block = train_block(model, k, path, cfg, &stats);
    model.blocks.push_back(std::move(block));
    if (persist) {
      char name[40];
      std::snprintf(name, sizeof(name), "block_%03d.aflw", k);
      model.blocks.back().net.save(out_dir / name);
      std::snprintf(name, sizeof(name), "block_%03d_log.csv", k);
      std::ofstream log(out_dir / name);
      log << "iteration,loss,grad_norm,wall_ms\n";
      for (std::size_t i = 0; i < stats.loss_trace.size(); ++i) {
        char row[160];
        std::snprintf(row, sizeof(row), "%zu,%.17g,%.17g,%.3f\n", i, stats.loss_trace[i],
                      stats.grad_norm[i], stats.wall_ms[i]);
        log << row;
      }
    }
  }
  if (persist) model.save(out_dir);
  return model;
}

}  // namespace af
