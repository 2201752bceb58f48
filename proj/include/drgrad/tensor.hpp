#ifndef DRGRAD_TENSOR_HPP
#define DRGRAD_TENSOR_HPP

#include <Eigen/Dense>
#include <vector>

#include "drgrad/errors.hpp"

namespace drgrad {

// 64-bit dense types used everywhere. Sizes in this project are small
// (at most a 784x100 weight block), so plain dynamic Eigen types suffice.
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline bool all_finite(const Vector& v) { return v.allFinite(); }

// y + alpha * x, elementwise.
inline Vector axpy(double alpha, const Vector& x, const Vector& y) {
  if (x.size() != y.size())
    throw DimensionError("axpy: length mismatch " + std::to_string(x.size()) +
                         " vs " + std::to_string(y.size()));
  if (alpha == 0.0) return y;
  return y + alpha * x;
}

inline Vector matvec(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size())
    throw DimensionError("matvec: " + std::to_string(a.cols()) +
                         " cols vs vector of length " +
                         std::to_string(x.size()));
  return a * x;
}

// Elementwise mean, accumulated in index order.
inline Vector reduce_mean(const std::vector<Vector>& vs) {
  if (vs.empty()) throw EmptyInputError("reduce_mean: empty list");
  const Eigen::Index len = vs.front().size();
  Vector sum = Vector::Zero(len);
  for (const Vector& v : vs) {
    if (v.size() != len) throw DimensionError("reduce_mean: length mismatch");
    sum += v;
  }
  return sum / static_cast<double>(vs.size());
}

}  // namespace drgrad

#endif  // DRGRAD_TENSOR_HPP
