#include "af/flow.hpp"

#include <cmath>
#include <fstream>

#include "af/divergence.hpp"
#include "af/errors.hpp"

namespace af {

using nlohmann::json;

FieldFn field_of(const Mlp& net) {
  return [&net](std::span<const double> x, double t, std::span<double> out) {
    net.eval_xt(x, t, out);
  };
}

namespace {

// y = c * x then y += c * x accumulations, the exact shapes used by the
// recorded graph so the plain and recorded integrators agree bit for bit.
inline void assign_scaled(double c, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = c * x[i];
}

inline void acc_scaled(double c, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += c * x[i];
}

void check_stage(std::span<const double> k, int stage) {
  for (double v : k)
    if (!std::isfinite(v))
      throw NumericError("rk4: non-finite stage k" + std::to_string(stage));
}

}  // namespace

std::vector<double> rk4_step(const FieldFn& field, std::span<const double> x, double t,
                             double h) {
  if (!(h > 0.0)) throw ValidationError("rk4: step size must be positive");
  const int d = static_cast<int>(x.size());
  std::vector<double> k1(d), k2(d), k3(d), k4(d), stage(d), out(d);

  field(x, t, k1);
  check_stage(k1, 1);

  assign_scaled(1.0, x.data(), stage.data(), d);
  acc_scaled(0.5 * h, k1.data(), stage.data(), d);
  field(stage, t + 0.5 * h, k2);
  check_stage(k2, 2);

  assign_scaled(1.0, x.data(), stage.data(), d);
  acc_scaled(0.5 * h, k2.data(), stage.data(), d);
  field(stage, t + 0.5 * h, k3);
  check_stage(k3, 3);

  assign_scaled(1.0, x.data(), stage.data(), d);
  acc_scaled(h, k3.data(), stage.data(), d);
  field(stage, t + h, k4);
  check_stage(k4, 4);

  assign_scaled(1.0, x.data(), out.data(), d);
  acc_scaled(h / 6.0, k1.data(), out.data(), d);
  acc_scaled(h / 3.0, k2.data(), out.data(), d);
  acc_scaled(h / 3.0, k3.data(), out.data(), d);
  acc_scaled(h / 6.0, k4.data(), out.data(), d);
  return out;
}

void rk4_step_net(const Mlp& net, Mat& X, double t, double h) {
  const int n = X.rows(), d = X.cols();
  Mat k1, k2, k3, k4;
  Mat stage(n, d, kUninit);

  net.forward_batch_xt(X, t, k1);

  assign_scaled(1.0, X.data(), stage.data(), n * d);
  acc_scaled(0.5 * h, k1.data(), stage.data(), n * d);
  net.forward_batch_xt(stage, t + 0.5 * h, k2);

  assign_scaled(1.0, X.data(), stage.data(), n * d);
  acc_scaled(0.5 * h, k2.data(), stage.data(), n * d);
  net.forward_batch_xt(stage, t + 0.5 * h, k3);

  assign_scaled(1.0, X.data(), stage.data(), n * d);
  acc_scaled(h, k3.data(), stage.data(), n * d);
  net.forward_batch_xt(stage, t + h, k4);

  assign_scaled(1.0, X.data(), stage.data(), n * d);
  acc_scaled(h / 6.0, k1.data(), stage.data(), n * d);
  acc_scaled(h / 3.0, k2.data(), stage.data(), n * d);
  acc_scaled(h / 3.0, k3.data(), stage.data(), n * d);
  acc_scaled(h / 6.0, k4.data(), stage.data(), n * d);
  for (int i = 0; i < n * d; ++i) {
    if (!std::isfinite(stage.data()[i])) throw NumericError("rk4: non-finite state");
  }
  X = std::move(stage);
}

Trajectory integrate_block(const FlowBlock& block, std::span<const double> x0, bool record) {
  const int d = static_cast<int>(x0.size());
  const int S = block.sub_steps;
  Trajectory traj;
  traj.waypoints.reserve(S + 1);
  traj.waypoints.emplace_back(x0.begin(), x0.end());

  Mat X(1, d);
  std::copy(x0.begin(), x0.end(), X.data());
  for (int s = 0; s < S; ++s) {
    const double t = static_cast<double>(s) / S;
    rk4_step_net(block.net, X, t, 1.0 / S);
    traj.waypoints.emplace_back(X.data(), X.data() + d);
    traj.seg_sq.push_back(
        sq_dist(traj.waypoints[s].data(), traj.waypoints[s + 1].data(), d));
  }
  if (record) {
    const double h = 1.0 / S;
    double acc = 0.0;
    for (int s = 0; s <= S; ++s) {
      const double w = (s == 0 || s == S) ? 0.5 * h : h;
      const double t = static_cast<double>(s) / S;
      acc += w * exact_divergence(block.net, traj.waypoints[s], t);
    }
    traj.div_integral = acc;
  }
  return traj;
}

void AnnealingFlowModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format"] = "aflw-model";
  manifest["version"] = 1;
  manifest["dim"] = dim;
  manifest["blocks"] = block_count();
  manifest["sub_steps"] = blocks.empty() ? 3 : blocks.front().sub_steps;
  if (!path_meta.is_null()) manifest["path"] = path_meta;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw ValidationError("model: cannot write manifest in '" + dir.string() + "'");
  out << manifest.dump(2) << "\n";
  char name[32];
  for (int k = 0; k < block_count(); ++k) {
    std::snprintf(name, sizeof(name), "block_%03d.aflw", k + 1);
    blocks[k].net.save(dir / name);
  }
}

AnnealingFlowModel AnnealingFlowModel::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ValidationError("model: no manifest in '" + dir.string() + "'");
  json manifest = json::parse(in, nullptr, true);
  if (manifest.value("format", "") != "aflw-model")
    throw ValidationError("model: '" + dir.string() + "' is not a model directory");
  AnnealingFlowModel model;
  model.dim = manifest.at("dim").get<int>();
  const int blocks = manifest.at("blocks").get<int>();
  const int sub_steps = manifest.at("sub_steps").get<int>();
  if (manifest.contains("path")) model.path_meta = manifest["path"];
  char name[32];
  for (int k = 0; k < blocks; ++k) {
    std::snprintf(name, sizeof(name), "block_%03d.aflw", k + 1);
    FlowBlock block;
    block.net = Mlp::load(dir / name);
    block.sub_steps = sub_steps;
    if (block.net.serve_dim() != model.dim || block.net.input_dim() != model.dim + 1 ||
        block.net.output_dim() != model.dim)
      throw ValidationError("model: block " + std::to_string(k + 1) +
                            " dimension does not match manifest");
    model.blocks.push_back(std::move(block));
  }
  return model;
}

Mat push_forward(const AnnealingFlowModel& model, const Mat& batch, int upto_block) {
  if (batch.cols() != model.dim) throw ValidationError("push_forward: batch width mismatch");
  const int upto = upto_block < 0 ? model.block_count() : upto_block;
  if (upto > model.block_count())
    throw ValidationError("push_forward: block index out of range");
  Mat X = batch;
  for (int k = 0; k < upto; ++k) {
    const FlowBlock& block = model.blocks[k];
    for (int s = 0; s < block.sub_steps; ++s) {
      const double t = static_cast<double>(s) / block.sub_steps;
      rk4_step_net(block.net, X, t, 1.0 / block.sub_steps);
    }
  }
  return X;
}

double log_density_change(const AnnealingFlowModel& model, std::span<const double> x0,
                          int upto_block, int quad_mult) {
  if (static_cast<int>(x0.size()) != model.dim)
    throw ValidationError("log_density_change: input width mismatch");
  if (quad_mult < 1) throw ValidationError("log_density_change: quad_mult must be >= 1");
  const int upto = upto_block < 0 ? model.block_count() : upto_block;
  Mat X(1, model.dim);
  std::copy(x0.begin(), x0.end(), X.data());
  double acc = 0.0;
  for (int k = 0; k < upto; ++k) {
    const FlowBlock& block = model.blocks[k];
    const int sq = quad_mult * block.sub_steps;
    const double h = 1.0 / sq;
    for (int s = 0; s <= sq; ++s) {
      const double t = static_cast<double>(s) / sq;
      const double w = (s == 0 || s == sq) ? 0.5 * h : h;
      acc += w * exact_divergence(block.net, X.row_span(0), t);
      if (s < sq) rk4_step_net(block.net, X, t, h);
    }
  }
  return -acc;
}

}  // namespace af
