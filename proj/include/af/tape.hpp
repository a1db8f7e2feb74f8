#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "af/density.hpp"
#include "af/mat.hpp"
#include "af/net.hpp"

namespace af {

// A recorded scalar-valued computation over one minibatch. Nodes are created
// in topological order; backward() replays them in reverse and accumulates
// exact reverse-mode gradients. Recording is single-threaded per graph;
// distinct graphs are independent.
class Graph {
 public:
  int add_leaf(Mat value, const char* tag = "leaf");

  // y = x * W^T + b
  int affine(int x, int w, int b);
  // First velocity-net layer on input (x, t); t is a batch-shared constant.
  int affine_xt(int x, double t, int w, int b);
  int sigmoid(int x);
  // y = sum_i coeff_i * x_i over same-shape nodes.
  int lincomb(std::vector<std::pair<double, int>> terms, const char* tag = "lincomb");
  // y = x + c for a constant matrix c.
  int add_const(int x, Mat c);
  // y_i = scale * <a_i, c_i> against a constant matrix, one scalar per row.
  int rowdot_const(int a, Mat c, double scale);
  // y_i = ||a_i - b_i||^2, one scalar per row.
  int sq_dist_rows(int a, int b);
  // y_i = -log f_k(x_i) for the annealed density; the backward pass uses the
  // analytic score. `path` must outlive the graph.
  int neg_log_density(int x, const AnnealingPath& path, int k);
  // y_i = <score_k(x_i), v_i>; the backward pass uses the analytic
  // Hessian-vector product of log f_k.
  int score_dot(int x, int v, const AnnealingPath& path, int k);
  // y = log(1 + exp(sign * x)) elementwise.
  int softplus_of(int x, double sign);
  // Mean over every entry; returns a 1x1 node.
  int mean_all(int x);

  const Mat& val(int id) const { return nodes_[id].val; }
  double scalar(int id) const { return nodes_[id].val(0, 0); }
  int rows(int id) const { return nodes_[id].val.rows(); }

  void backward(int loss_id);
  bool has_grad(int id) const { return !nodes_[id].grad.empty(); }
  const Mat& grad_of(int id) const { return nodes_[id].grad; }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Mat val;
    Mat grad;
    std::function<void(Graph&)> back;
    const char* tag;
  };

  Mat& grad_accum(int id);
  int push(Mat value, std::function<void(Graph&)> back, const char* tag);

  std::vector<Node> nodes_;
};

// A network's parameters copied onto a graph as leaves, so one binding serves
// every forward evaluation the loss needs.
struct TapedMlp {
  const Mlp* net = nullptr;
  std::vector<int> weight_ids;
  std::vector<int> bias_ids;

  static TapedMlp bind(Graph& g, const Mlp& net);

  // Velocity-field evaluation v(x, t); x_id holds an n x d node.
  int forward_xt(Graph& g, int x_id, double t) const;
  // Plain evaluation on raw input width net->input_dim().
  int forward(Graph& g, int x_id) const;
};

// Gradient of the recorded scalar w.r.t. the bound parameters, flattened in
// the same order as Mlp::to_vector(). backward() must have run already.
std::vector<double> param_gradient(const Graph& g, const TapedMlp& taped);

}  // namespace af
