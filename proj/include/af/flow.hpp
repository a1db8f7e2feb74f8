#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "af/mat.hpp"
#include "af/net.hpp"
#include "json.hpp"

namespace af {

// A time-dependent vector field on R^d. Velocity nets satisfy it; tests may
// inject hand-set fields.
using FieldFn = std::function<void(std::span<const double> x, double t, std::span<double> out)>;

FieldFn field_of(const Mlp& net);

// One trained transport block: a velocity net integrated over local time
// [0, 1] in `sub_steps` equal RK4 steps.
struct FlowBlock {
  Mlp net;
  int sub_steps = 3;
};

// Waypoints and bookkeeping for one sample's pass through a block.
struct Trajectory {
  std::vector<std::vector<double>> waypoints;  // sub_steps + 1 points
  std::vector<double> seg_sq;                  // squared displacement per segment
  double div_integral = 0.0;                   // trapezoid estimate of the divergence line integral
};

// Classical 4-stage step from (x, t) with step h.
std::vector<double> rk4_step(const FieldFn& field, std::span<const double> x, double t,
                             double h);

// Batched RK4 sub-step for a velocity net: X -> X(t + h) in place.
void rk4_step_net(const Mlp& net, Mat& X, double t, double h);

// Integrate one block from x0 over local time [0,1]. When `record` is set the
// divergence line integral is accumulated with exact (finite-difference)
// divergences and trapezoid weights over the waypoints.
Trajectory integrate_block(const FlowBlock& block, std::span<const double> x0, bool record);

// Ordered trained blocks plus the reference dimension; applying the blocks in
// index order maps reference draws to target draws.
struct AnnealingFlowModel {
  int dim = 0;
  std::vector<FlowBlock> blocks;
  nlohmann::json path_meta;  // path/target spec used in training

  int block_count() const { return static_cast<int>(blocks.size()); }

  void save(const std::filesystem::path& dir) const;
  static AnnealingFlowModel load(const std::filesystem::path& dir);
};

// Push a batch through blocks 1..upto_block (all blocks when upto_block < 0).
// Rows are independent.
Mat push_forward(const AnnealingFlowModel& model, const Mat& batch, int upto_block = -1);

// log rho_end(x_end) - log pi_0(x0): minus the accumulated divergence line
// integral along the trajectory, quadrature on quad_mult * sub_steps nodes.
double log_density_change(const AnnealingFlowModel& model, std::span<const double> x0,
                          int upto_block = -1, int quad_mult = 3);

}  // namespace af
