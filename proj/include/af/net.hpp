#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "af/mat.hpp"
#include "af/rng.hpp"

namespace af {

// Fully-connected network, logistic sigmoid on hidden layers and identity on
// the output. Velocity fields use input (x, t) in R^{d+1} -> R^d; density
// ratio heads use R^d -> R. All parameters are f64.
class Mlp {
 public:
  Mlp() = default;

  // widths = [input, hidden..., output]. Weights are drawn uniformly in
  // +/- sqrt(6 / (fan_in + fan_out)); biases start at zero.
  static Mlp init(std::vector<int> widths, int serve_dim, Rng& rng);
  static Mlp zeros(std::vector<int> widths, int serve_dim);

  // Velocity-net convenience constructor: widths [d+1, hidden..., d].
  static Mlp velocity_net(int dim, const std::vector<int>& hidden, Rng& rng);
  // Scalar head: widths [d, hidden..., 1].
  static Mlp scalar_net(int dim, const std::vector<int>& hidden, Rng& rng);

  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  int serve_dim() const { return serve_dim_; }
  int layer_count() const { return static_cast<int>(weights_.size()); }
  const std::vector<int>& widths() const { return widths_; }

  const Mat& weight(int layer) const { return weights_[layer]; }
  const Mat& bias(int layer) const { return biases_[layer]; }
  Mat& weight(int layer) { return weights_[layer]; }
  Mat& bias(int layer) { return biases_[layer]; }

  // Batched forward over raw inputs of width input_dim().
  void forward_batch(const Mat& X, Mat& out) const;
  // Velocity-field forward: X is n x d, t shared across the batch.
  void forward_batch_xt(const Mat& X, double t, Mat& out) const;
  void eval_xt(std::span<const double> x, double t, std::span<double> out) const;
  double eval_scalar(std::span<const double> x) const;

  std::size_t n_params() const;
  std::vector<double> to_vector() const;
  void from_vector(std::span<const double> params);

  void save(const std::filesystem::path& path) const;
  static Mlp load(const std::filesystem::path& path);

 private:
  std::vector<int> widths_;
  int serve_dim_ = 0;
  std::vector<Mat> weights_;  // layer l: widths[l+1] x widths[l]
  std::vector<Mat> biases_;   // layer l: 1 x widths[l+1]
};

}  // namespace af
