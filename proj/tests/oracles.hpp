#pragma once

// Independent reference implementations used as test oracles. They share no
// code with the library beyond the Mat container and plain loops.

#include <array>
#include <cmath>
#include <vector>

#include "rcodean/net.hpp"

namespace oracle {

using rcodean::Mat;

inline Mat loop_affine(const Mat& w, const Mat& b, const Mat& x) {
  Mat z(w.rows(), x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j)
    for (std::size_t o = 0; o < w.rows(); ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < w.cols(); ++i) s += w(o, i) * x(i, j);
      z(o, j) = s;
    }
  return z;
}

inline Mat loop_relu(Mat z) {
  for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
  return z;
}

/// Layer-by-layer evaluation with explicit skip additions.
inline Mat straight_forward(const rcodean::RCodeanNet& net, const Mat& x) {
  std::array<Mat, 6> out;
  Mat in = x;
  for (std::size_t i = 0; i < 6; ++i) {
    Mat z = loop_affine(net.layers[i].weight, net.layers[i].bias, in);
    for (const rcodean::SkipSpec& s : net.skips) {
      if (static_cast<std::size_t>(s.dst) != i) continue;
      const Mat& src = out[static_cast<std::size_t>(s.src)];
      if (s.has_projection()) {
        const Mat add = loop_affine(s.projection, Mat(s.projection.rows(), 1), src);
        for (std::size_t k = 0; k < z.size(); ++k) z[k] += add[k];
      } else {
        for (std::size_t k = 0; k < z.size(); ++k) z[k] += src[k];
      }
    }
    out[i] = i == 5 ? z : loop_relu(z);
    in = out[i];
  }
  return out[5];
}

struct PlainAeResult {
  double loss = 0.0;
  std::vector<Mat> grads;  // W1, b1, ..., W6, b6
};

/// Six-layer autoencoder without skips, relu hidden layers, linear output,
/// loss = mean over columns of ||x - x_hat||^2. Backpropagation written out
/// by hand.
inline PlainAeResult plain_mse_autoencoder(const std::array<Mat, 6>& w, const std::array<Mat, 6>& b,
                                           const Mat& x) {
  const std::size_t n = x.cols();
  std::array<Mat, 7> a;  // a[0] = x, a[i+1] = layer i output
  std::array<Mat, 6> z;
  a[0] = x;
  for (std::size_t i = 0; i < 6; ++i) {
    z[i] = loop_affine(w[i], b[i], a[i]);
    a[i + 1] = i == 5 ? z[i] : loop_relu(z[i]);
  }
  PlainAeResult r;
  Mat delta(x.rows(), n);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double e = a[6][k] - x[k];
    r.loss += e * e / static_cast<double>(n);
    delta[k] = 2.0 * e / static_cast<double>(n);
  }
  r.grads.assign(12, Mat());
  for (std::size_t li = 6; li-- > 0;) {
    if (li != 5)
      for (std::size_t k = 0; k < delta.size(); ++k)
        if (z[li][k] <= 0.0) delta[k] = 0.0;
    Mat gw(w[li].rows(), w[li].cols());
    Mat gb(w[li].rows(), 1);
    for (std::size_t o = 0; o < w[li].rows(); ++o)
      for (std::size_t j = 0; j < n; ++j) {
        gb[o] += delta(o, j);
        for (std::size_t i = 0; i < w[li].cols(); ++i) gw(o, i) += delta(o, j) * a[li](i, j);
      }
    Mat prev(w[li].cols(), n);
    for (std::size_t i = 0; i < w[li].cols(); ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t o = 0; o < w[li].rows(); ++o) s += w[li](o, i) * delta(o, j);
        prev(i, j) = s;
      }
    r.grads[2 * li] = gw;
    r.grads[2 * li + 1] = gb;
    delta = prev;
  }
  return r;
}

}  // namespace oracle
