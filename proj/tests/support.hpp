#pragma once

#include "tna/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace tna::testing {

/// Central-difference gradient of f at every entry of every leaf, compared
/// with the analytic gradient from one backward pass. Returns the largest
/// norm-wise relative error ||g_a - g_n|| / max(||g_a|| + ||g_n||, floor)
/// over the leaves.
inline double gradient_error(const std::function<Tensor()>& f, std::vector<Tensor> leaves, double h = 1e-5,
                             double floor = 1e-10) {
  for (auto& l : leaves) l.zero_grad();
  Tensor loss = f();
  backward(loss);
  double worst = 0.0;
  for (auto& l : leaves) {
    const Matrix analytic = l.has_grad() ? l.grad() : Matrix::Zero(l.rows(), l.cols());
    Matrix numeric(analytic.rows(), analytic.cols());
    Matrix& v = l.mutable_value();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double keep = v.data()[i];
      v.data()[i] = keep + h;
      const double up = f().item();
      v.data()[i] = keep - h;
      const double down = f().item();
      v.data()[i] = keep;
      numeric.data()[i] = (up - down) / (2.0 * h);
    }
    const double diff = (analytic - numeric).norm();
    const double scale = std::max(analytic.norm() + numeric.norm(), floor);
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

}  // namespace tna::testing
