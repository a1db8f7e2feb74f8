#pragma once

#include <vector>

#include "af/mat.hpp"

namespace af {

// Dense layer kernels shared by the plain forward pass and the recorded
// (differentiable) pass, so both produce bit-identical values.
//
// Wide outputs use a broadcast accumulation over the input features (the
// compiler vectorizes the output row); narrow outputs use lane-split dot
// products. The choice depends only on the layer shape, so every evaluation
// of a given layer sums in the same order.

namespace kernel_detail {

inline constexpr int kBroadcastMinOut = 8;

// W is out x in; scratch receives the in x out transpose.
inline const double* transposed(const Mat& W, std::vector<double>& scratch) {
  const int out = W.rows(), in = W.cols();
  scratch.resize(static_cast<std::size_t>(in) * out);
  for (int o = 0; o < out; ++o)
    for (int c = 0; c < in; ++c) scratch[static_cast<std::size_t>(c) * out + o] = W(o, c);
  return scratch.data();
}

inline thread_local std::vector<double> transpose_scratch;

}  // namespace kernel_detail

// Y = X * W^T + b, with W laid out one output unit per row.
inline void affine_forward(const Mat& X, const Mat& W, const Mat& b, Mat& Y) {
  const int n = X.rows(), in = X.cols(), out = W.rows();
  if (out >= kernel_detail::kBroadcastMinOut) {
    const double* wt = kernel_detail::transposed(W, kernel_detail::transpose_scratch);
    for (int i = 0; i < n; ++i) {
      const double* x = X.row(i);
      double* y = Y.row(i);
      for (int o = 0; o < out; ++o) y[o] = b(0, o);
      for (int c = 0; c < in; ++c) {
        const double xc = x[c];
        const double* w = wt + static_cast<std::size_t>(c) * out;
        for (int o = 0; o < out; ++o) y[o] += xc * w[o];
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const double* x = X.row(i);
      double* y = Y.row(i);
      for (int o = 0; o < out; ++o) y[o] = b(0, o) + dot(x, W.row(o), in);
    }
  }
}

// First layer of a velocity net: the input is (x, t) with t shared across the
// batch, so the time column never gets materialized.
inline void affine_xt_forward(const Mat& X, double t, const Mat& W, const Mat& b, Mat& Y) {
  const int n = X.rows(), d = X.cols(), out = W.rows();
  if (out >= kernel_detail::kBroadcastMinOut) {
    const double* wt = kernel_detail::transposed(W, kernel_detail::transpose_scratch);
    const double* w_time = wt + static_cast<std::size_t>(d) * out;
    for (int i = 0; i < n; ++i) {
      const double* x = X.row(i);
      double* y = Y.row(i);
      for (int o = 0; o < out; ++o) y[o] = b(0, o) + t * w_time[o];
      for (int c = 0; c < d; ++c) {
        const double xc = x[c];
        const double* w = wt + static_cast<std::size_t>(c) * out;
        for (int o = 0; o < out; ++o) y[o] += xc * w[o];
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const double* x = X.row(i);
      double* y = Y.row(i);
      for (int o = 0; o < out; ++o) {
        const double* w = W.row(o);
        y[o] = b(0, o) + t * w[d] + dot(x, w, d);
      }
    }
  }
}

// Saturating logistic over a buffer; lives in its own translation unit so the
// exp calls vectorize (see sigmoid_kernel.cpp).
void sigmoid_kernel(const double* x, double* y, std::size_t n);

inline void sigmoid_forward(const Mat& X, Mat& Y) {
  sigmoid_kernel(X.data(), Y.data(), X.size());
}

// dX += dY * W (first `in` columns of W only; the time column of an (x,t)
// layer has no incoming gradient).
inline void affine_backward_dx(const Mat& dY, const Mat& W, Mat& dX) {
  const int n = dY.rows(), out = dY.cols(), in = dX.cols();
  if (in >= kernel_detail::kBroadcastMinOut) {
    for (int i = 0; i < n; ++i) {
      const double* dy = dY.row(i);
      double* dx = dX.row(i);
      for (int o = 0; o < out; ++o) axpy(dy[o], W.row(o), dx, in);
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const double* dy = dY.row(i);
      double* dx = dX.row(i);
      for (int c = 0; c < in; ++c) {
        double acc = dx[c];
        for (int o = 0; o < out; ++o) acc += dy[o] * W(o, c);
        dx[c] = acc;
      }
    }
  }
}

// dW += dY^T * X ; db += column sums of dY.
inline void affine_backward_dw(const Mat& dY, const Mat& X, Mat& dW, Mat& db) {
  const int n = dY.rows(), out = dY.cols(), in = X.cols();
  for (int i = 0; i < n; ++i) {
    const double* dy = dY.row(i);
    const double* x = X.row(i);
    for (int o = 0; o < out; ++o) {
      axpy(dy[o], x, dW.row(o), in);
      db(0, o) += dy[o];
    }
  }
}

// Time-column gradient of an (x,t) first layer: dW[:, d] += t * colsum(dY).
inline void affine_xt_backward_dwt(const Mat& dY, double t, int d, Mat& dW) {
  const int n = dY.rows(), out = dY.cols();
  for (int i = 0; i < n; ++i) {
    const double* dy = dY.row(i);
    for (int o = 0; o < out; ++o) dW(o, d) += t * dy[o];
  }
}

}  // namespace af
