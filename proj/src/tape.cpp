#include "af/tape.hpp"

#include <cmath>

#include "af/errors.hpp"
#include "af/kernels.hpp"
#include "af/special.hpp"

namespace af {

int Graph::push(Mat value, std::function<void(Graph&)> back, const char* tag) {
  if (!value.all_finite())
    throw NumericError(std::string("non-finite value in node ") +
                       std::to_string(nodes_.size()) + " (" + tag + ")");
  nodes_.push_back(Node{std::move(value), Mat(), std::move(back), tag});
  return static_cast<int>(nodes_.size()) - 1;
}

int Graph::add_leaf(Mat value, const char* tag) { return push(std::move(value), nullptr, tag); }

Mat& Graph::grad_accum(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Mat(n.val.rows(), n.val.cols());
  return n.grad;
}

int Graph::affine(int x, int w, int b) {
  const Mat& X = nodes_[x].val;
  const Mat& W = nodes_[w].val;
  const Mat& B = nodes_[b].val;
  Mat Y(X.rows(), W.rows(), kUninit);
  affine_forward(X, W, B, Y);
  const int y = push(std::move(Y), nullptr, "affine");
  nodes_[y].back = [x, w, b, y](Graph& g) {
    const Mat& dY = g.nodes_[y].grad;
    affine_backward_dx(dY, g.nodes_[w].val, g.grad_accum(x));
    affine_backward_dw(dY, g.nodes_[x].val, g.grad_accum(w), g.grad_accum(b));
  };
  return y;
}

int Graph::affine_xt(int x, double t, int w, int b) {
  const Mat& X = nodes_[x].val;
  const Mat& W = nodes_[w].val;
  const Mat& B = nodes_[b].val;
  Mat Y(X.rows(), W.rows(), kUninit);
  affine_xt_forward(X, t, W, B, Y);
  const int y = push(std::move(Y), nullptr, "affine_xt");
  const int d = X.cols();
  nodes_[y].back = [x, t, w, b, y, d](Graph& g) {
    const Mat& dY = g.nodes_[y].grad;
    affine_backward_dx(dY, g.nodes_[w].val, g.grad_accum(x));
    // weight gradient for the x columns, then the time column separately
    const Mat& X = g.nodes_[x].val;
    Mat& dW = g.grad_accum(w);
    Mat& dB = g.grad_accum(b);
    const int n = dY.rows(), out = dY.cols();
    for (int i = 0; i < n; ++i) {
      const double* dy = dY.row(i);
      const double* xr = X.row(i);
      for (int o = 0; o < out; ++o) {
        axpy(dy[o], xr, dW.row(o), d);
        dB(0, o) += dy[o];
      }
    }
    affine_xt_backward_dwt(dY, t, d, dW);
  };
  return y;
}

int Graph::sigmoid(int x) {
  const Mat& X = nodes_[x].val;
  Mat Y(X.rows(), X.cols(), kUninit);
  sigmoid_forward(X, Y);
  const int y = push(std::move(Y), nullptr, "sigmoid");
  nodes_[y].back = [x, y](Graph& g) {
    const Mat& Y = g.nodes_[y].val;
    const Mat& dY = g.nodes_[y].grad;
    Mat& dX = g.grad_accum(x);
    for (std::size_t i = 0; i < Y.size(); ++i) {
      const double s = Y.data()[i];
      dX.data()[i] += dY.data()[i] * s * (1.0 - s);
    }
  };
  return y;
}

int Graph::lincomb(std::vector<std::pair<double, int>> terms, const char* tag) {
  if (terms.empty()) throw NumericError("lincomb: no terms");
  const Mat& first = nodes_[terms[0].second].val;
  Mat Y(first.rows(), first.cols(), kUninit);
  for (std::size_t term = 0; term < terms.size(); ++term) {
    const auto& [c, id] = terms[term];
    const Mat& X = nodes_[id].val;
    if (!X.same_shape(first)) throw NumericError("lincomb: shape mismatch");
    if (term == 0) {
      for (std::size_t i = 0; i < Y.size(); ++i) Y.data()[i] = c * X.data()[i];
    } else {
      for (std::size_t i = 0; i < Y.size(); ++i) Y.data()[i] += c * X.data()[i];
    }
  }
  const int y = push(std::move(Y), nullptr, tag);
  nodes_[y].back = [terms = std::move(terms), y](Graph& g) {
    const Mat& dY = g.nodes_[y].grad;
    for (const auto& [c, id] : terms) {
      Mat& dX = g.grad_accum(id);
      for (std::size_t i = 0; i < dY.size(); ++i) dX.data()[i] += c * dY.data()[i];
    }
  };
  return y;
}

int Graph::add_const(int x, Mat c) {
  const Mat& X = nodes_[x].val;
  if (!X.same_shape(c)) throw NumericError("add_const: shape mismatch");
  Mat Y(X.rows(), X.cols(), kUninit);
  for (std::size_t i = 0; i < Y.size(); ++i) Y.data()[i] = X.data()[i] + c.data()[i];
  const int y = push(std::move(Y), nullptr, "add_const");
  nodes_[y].back = [x, y](Graph& g) {
    const Mat& dY = g.nodes_[y].grad;
    Mat& dX = g.grad_accum(x);
    for (std::size_t i = 0; i < dY.size(); ++i) dX.data()[i] += dY.data()[i];
  };
  return y;
}

int Graph::rowdot_const(int a, Mat c, double scale) {
  const Mat& A = nodes_[a].val;
  if (!A.same_shape(c)) throw NumericError("rowdot_const: shape mismatch");
  Mat Y(A.rows(), 1, kUninit);
  for (int i = 0; i < A.rows(); ++i) Y(i, 0) = scale * dot(A.row(i), c.row(i), A.cols());
  const int y = push(std::move(Y), nullptr, "rowdot_const");
  nodes_[y].back = [a, y, c = std::move(c), scale](Graph& g) {
    const Mat& dY = g.nodes_[y].grad;
    Mat& dA = g.grad_accum(a);
    for (int i = 0; i < dA.rows(); ++i) axpy(scale * dY(i, 0), c.row(i), dA.row(i), dA.cols());
  };
  return y;
}

int Graph::sq_dist_rows(int a, int b) {
  const Mat& A = nodes_[a].val;
  const Mat& B = nodes_[b].val;
  if (!A.same_shape(B)) throw NumericError("sq_dist_rows: shape mismatch");
  Mat Y(A.rows(), 1, kUninit);
  for (int i = 0; i < A.rows(); ++i) Y(i, 0) = sq_dist(A.row(i), B.row(i), A.cols());
  const int y = push(std::move(Y), nullptr, "sq_dist_rows");
  nodes_[y].back = [a, b, y](Graph& g) {
    const Mat& A = g.nodes_[a].val;
    const Mat& B = g.nodes_[b].val;
    const Mat& dY = g.nodes_[y].grad;
    Mat& dA = g.grad_accum(a);
    Mat& dB = g.grad_accum(b);
    for (int i = 0; i < A.rows(); ++i) {
      const double gi = 2.0 * dY(i, 0);
      for (int j = 0; j < A.cols(); ++j) {
        const double diff = A(i, j) - B(i, j);
        dA(i, j) += gi * diff;
        dB(i, j) -= gi * diff;
      }
    }
  };
  return y;
}

int Graph::neg_log_density(int x, const AnnealingPath& path, int k) {
  const Mat& X = nodes_[x].val;
  Mat Y(X.rows(), 1, kUninit);
  for (int i = 0; i < X.rows(); ++i) {
    Y(i, 0) = -path.log_density(k, X.row_span(i));
    if (!std::isfinite(Y(i, 0)))
      throw NumericError("non-finite log-density at sample " + std::to_string(i));
  }
  const int y = push(std::move(Y), nullptr, "neg_log_density");
  nodes_[y].back = [x, y, &path, k](Graph& g) {
    const Mat& X = g.nodes_[x].val;
    const Mat& dY = g.nodes_[y].grad;
    Mat& dX = g.grad_accum(x);
    std::vector<double> s(X.cols());
    for (int i = 0; i < X.rows(); ++i) {
      path.score(k, X.row_span(i), s);
      axpy(-dY(i, 0), s.data(), dX.row(i), X.cols());
    }
  };
  return y;
}

int Graph::score_dot(int x, int v, const AnnealingPath& path, int k) {
  const Mat& X = nodes_[x].val;
  const Mat& V = nodes_[v].val;
  if (!X.same_shape(V)) throw NumericError("score_dot: shape mismatch");
  Mat scores(X.rows(), X.cols(), kUninit);
  Mat Y(X.rows(), 1, kUninit);
  for (int i = 0; i < X.rows(); ++i) {
    path.score(k, X.row_span(i), scores.row_span(i));
    Y(i, 0) = dot(scores.row(i), V.row(i), X.cols());
  }
  const int y = push(std::move(Y), nullptr, "score_dot");
  nodes_[y].back = [x, v, y, &path, k, scores = std::move(scores)](Graph& g) {
    const Mat& X = g.nodes_[x].val;
    const Mat& V = g.nodes_[v].val;
    const Mat& dY = g.nodes_[y].grad;
    Mat& dX = g.grad_accum(x);
    Mat& dV = g.grad_accum(v);
    std::vector<double> hv(X.cols());
    for (int i = 0; i < X.rows(); ++i) {
      const double gi = dY(i, 0);
      path.hessian_vec(k, X.row_span(i), V.row_span(i), hv);
      axpy(gi, hv.data(), dX.row(i), X.cols());
      axpy(gi, scores.row(i), dV.row(i), X.cols());
    }
  };
  return y;
}

int Graph::softplus_of(int x, double sign) {
  const Mat& X = nodes_[x].val;
  Mat Y(X.rows(), X.cols(), kUninit);
  for (std::size_t i = 0; i < X.size(); ++i) Y.data()[i] = softplus(sign * X.data()[i]);
  const int y = push(std::move(Y), nullptr, "softplus");
  nodes_[y].back = [x, y, sign](Graph& g) {
    const Mat& X = g.nodes_[x].val;
    const Mat& dY = g.nodes_[y].grad;
    Mat& dX = g.grad_accum(x);
    for (std::size_t i = 0; i < X.size(); ++i)
      dX.data()[i] += dY.data()[i] * sign * logistic(sign * X.data()[i]);
  };
  return y;
}

int Graph::mean_all(int x) {
  const Mat& X = nodes_[x].val;
  double acc = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) acc += X.data()[i];
  Mat Y(1, 1);
  Y(0, 0) = acc / static_cast<double>(X.size());
  const int y = push(std::move(Y), nullptr, "mean_all");
  nodes_[y].back = [x, y](Graph& g) {
    const double gi = g.nodes_[y].grad(0, 0) / static_cast<double>(g.nodes_[x].val.size());
    Mat& dX = g.grad_accum(x);
    for (std::size_t i = 0; i < dX.size(); ++i) dX.data()[i] += gi;
  };
  return y;
}

void Graph::backward(int loss_id) {
  if (nodes_[loss_id].val.size() != 1) throw NumericError("backward: loss must be scalar");
  grad_accum(loss_id)(0, 0) = 1.0;
  for (int id = loss_id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.back) continue;
    n.back(*this);
  }
}

TapedMlp TapedMlp::bind(Graph& g, const Mlp& net) {
  TapedMlp t;
  t.net = &net;
  for (int l = 0; l < net.layer_count(); ++l) {
    t.weight_ids.push_back(g.add_leaf(net.weight(l), "W"));
    t.bias_ids.push_back(g.add_leaf(net.bias(l), "b"));
  }
  return t;
}

int TapedMlp::forward_xt(Graph& g, int x_id, double t) const {
  int cur = g.affine_xt(x_id, t, weight_ids[0], bias_ids[0]);
  if (net->layer_count() > 1) cur = g.sigmoid(cur);
  for (int l = 1; l < net->layer_count(); ++l) {
    cur = g.affine(cur, weight_ids[l], bias_ids[l]);
    if (l + 1 < net->layer_count()) cur = g.sigmoid(cur);
  }
  return cur;
}

int TapedMlp::forward(Graph& g, int x_id) const {
  int cur = x_id;
  for (int l = 0; l < net->layer_count(); ++l) {
    cur = g.affine(cur, weight_ids[l], bias_ids[l]);
    if (l + 1 < net->layer_count()) cur = g.sigmoid(cur);
  }
  return cur;
}

std::vector<double> param_gradient(const Graph& g, const TapedMlp& taped) {
  std::vector<double> out;
  out.reserve(taped.net->n_params());
  for (std::size_t l = 0; l < taped.weight_ids.size(); ++l) {
    for (int id : {taped.weight_ids[l], taped.bias_ids[l]}) {
      const Mat& shape = g.val(id);
      if (g.has_grad(id)) {
        const Mat& grad = g.grad_of(id);
        out.insert(out.end(), grad.data(), grad.data() + grad.size());
      } else {
        out.insert(out.end(), shape.size(), 0.0);
      }
    }
  }
  return out;
}

}  // namespace af
