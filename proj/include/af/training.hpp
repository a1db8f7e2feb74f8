#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "af/density.hpp"
#include "af/flow.hpp"
#include "af/tape.hpp"

namespace af {

enum class LossVariant { Original, AlternativeTaylor };

std::string loss_variant_name(LossVariant v);
LossVariant loss_variant_from_name(const std::string& name);

struct LangevinConfig {
  bool enabled = false;
  double eta = 1e-3;
  int steps = 10;
};

struct TrainConfig {
  LossVariant loss_variant = LossVariant::Original;
  std::vector<double> alpha;  // one entry per block
  int sub_steps = 3;
  double learning_rate = 1e-4;
  // Cosine decay of the learning rate over each block's iterations, down to
  // learning_rate * lr_decay_floor. 1.0 keeps the rate constant.
  double lr_decay_floor = 1.0;
  int iterations = 1000;
  int batch_size = 1000;
  int pool_size = 100000;
  double hutchinson_sigma = 0.0;  // <= 0 means 0.02 / sqrt(dim)
  int probes_per_node = 1;
  LangevinConfig langevin;
  std::vector<int> hidden = {32, 32};
  std::uint64_t seed = 0;

  double effective_sigma(int dim) const;
  void validate(int blocks) const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
  void step(std::span<double> params, std::span<const double> grad, double lr);
};

// alpha * sum_s ||x_{s+1} - x_s||^2 over consecutive waypoint nodes, one value
// per sample.
int w2_penalty(Graph& g, const std::vector<int>& waypoint_ids, double alpha);

struct LossBuild {
  Graph graph;
  TapedMlp net_vars;
  std::vector<int> waypoint_ids;
  int loss_id = -1;

  double value() const { return graph.scalar(loss_id); }
};

// Record the per-block objective over one minibatch of samples already pushed
// to level k-1. `probes` supplies (sub_steps+1) * probes_per_node matrices of
// standard Gaussian draws for the divergence nodes; passing them explicitly
// keeps repeated evaluations (finite-difference checks) on fixed noise.
LossBuild assemble_loss(const Mlp& net, const AnnealingPath& path, int k,
                        const Mat& minibatch, double alpha, const TrainConfig& cfg,
                        const std::vector<Mat>& probes);

std::vector<Mat> draw_probes(int n, int dim, int sub_steps, int probes_per_node, Rng& rng);

// Unadjusted Langevin steps targeting the annealed density at level k:
// x <- x + (eta/2) * score(x) + sqrt(eta) * eps.
void langevin_adjust(Mat& batch, const AnnealingPath& path, int k, double eta, int steps,
                     Rng& rng);

struct BlockTrainStats {
  std::vector<double> loss_trace;
  std::vector<double> grad_norm;
  std::vector<double> wall_ms;
};

// Train block k (1-based) given the already-trained prefix in `model`.
FlowBlock train_block(const AnnealingFlowModel& model, int k, const AnnealingPath& path,
                      const TrainConfig& cfg, BlockTrainStats* stats = nullptr);

// Full block-wise training. When out_dir is nonempty, per-block checkpoints
// and training logs are written there as training progresses.
AnnealingFlowModel train_model(const AnnealingPath& path, const TrainConfig& cfg,
                               const std::filesystem::path& out_dir = {});

}  // namespace af
