#pragma once

// Dual of the entropy-linear program
//
//   min  sum_ij d_ij T_ij + sum_ij d_ij ln d_ij   over d >= 0, d 1 = l, d^T 1 = w,
//
// written in terms of the log-kernel m_ij = -T_ij + lambda_l_i + lambda_w_j.
// Every quantity is evaluated from m with a max-shifted log-sum-exp, so cost
// entries in the thousands never overflow exp().

#include "odcal/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace odcal {

/// Stable log(sum(exp(x))). Returns -inf for an empty or all -inf input.
template <typename Derived>
double log_sum_exp(const Eigen::DenseBase<Derived>& x) {
  if (x.size() == 0) return -std::numeric_limits<double>::infinity();
  const double top = x.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((x.derived().array() - top).exp().sum());
}

class LogKernel {
 public:
  LogKernel(const CostMatrix& t, const DualPotentials& lam) {
    detail::require_same_n(t.n(), lam.lambda_l.size(), "log kernel");
    detail::require_same_n(t.n(), lam.lambda_w.size(), "log kernel");
    detail::require(lam.finite(), "log kernel: non-finite dual potential");
    m_ = -t.values();
    m_.colwise() += lam.lambda_l;
    m_.rowwise() += lam.lambda_w.transpose();
    logsum_ = log_sum_exp(m_);
  }

  const Matrix& log_entries() const { return m_; }
  double logsum() const { return logsum_; }

  /// log of B 1 (row sums of the unnormalized kernel).
  Vector log_row_sums() const {
    Vector out(m_.rows());
    for (Eigen::Index i = 0; i < m_.rows(); ++i) out(i) = log_sum_exp(m_.row(i));
    return out;
  }

  /// log of B^T 1 (column sums of the unnormalized kernel).
  Vector log_col_sums() const {
    Vector out(m_.cols());
    for (Eigen::Index j = 0; j < m_.cols(); ++j) out(j) = log_sum_exp(m_.col(j));
    return out;
  }

  /// Softmax of the kernel: the primal matrix attached to these potentials.
  Matrix primal() const { return (m_.array() - logsum_).exp().matrix(); }

 private:
  Matrix m_;
  double logsum_ = 0.0;
};

inline CorrespondenceMatrix primal_from_duals(const CostMatrix& t, const DualPotentials& lam) {
  const LogKernel kernel(t, lam);
  Matrix d = kernel.primal();
  // The softmax sums to 1 up to rounding; renormalize so the stored matrix meets the invariant tightly.
  d /= d.sum();
  return CorrespondenceMatrix::normalized(std::move(d));
}

namespace detail {

inline void require_compatible(const CostMatrix& t, const DualPotentials& lam, const Marginals& m) {
  require_same_n(t.n(), lam.n(), "dual");
  require_same_n(t.n(), static_cast<std::size_t>(lam.lambda_w.size()), "dual");
  require_same_n(t.n(), m.n(), "dual");
}

inline double dual_value(const LogKernel& kernel, const DualPotentials& lam, const Marginals& m) {
  return kernel.logsum() - lam.lambda_l.dot(m.l()) - lam.lambda_w.dot(m.w());
}

}  // namespace detail

/// phi(lambda) = ln(1^T B 1) - <lambda_l, l> - <lambda_w, w>; the program's dual, to be minimized.
inline double dual_objective(const CostMatrix& t, const DualPotentials& lam, const Marginals& m) {
  detail::require_compatible(t, lam, m);
  return detail::dual_value(LogKernel(t, lam), lam, m);
}

struct DualGradient {
  Vector g_l;
  Vector g_w;

  double squared_norm() const { return g_l.squaredNorm() + g_w.squaredNorm(); }
};

/// Gradient blocks: rowsum(d) - l and colsum(d) - w with d = primal_from_duals.
inline DualGradient dual_gradient(const CostMatrix& t, const DualPotentials& lam, const Marginals& m) {
  detail::require_compatible(t, lam, m);
  const LogKernel kernel(t, lam);
  const Vector row = (kernel.log_row_sums().array() - kernel.logsum()).exp();
  const Vector col = (kernel.log_col_sums().array() - kernel.logsum()).exp();
  return {row - m.l(), col - m.w()};
}

/// f(d) = sum d T + sum d ln d, with 0 ln 0 = 0.
inline double primal_objective(const CorrespondenceMatrix& d, const CostMatrix& t) {
  detail::require_same_n(d.n(), t.n(), "primal objective");
  detail::require(d.scale() == Scale::normalized, "primal objective: matrix must be normalized");
  const Matrix& v = d.values();
  double linear = 0.0;
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      const double x = v(i, j);
      linear += x * t(i, j);
      if (x > 0.0) entropy += x * std::log(x);
    }
  }
  return linear + entropy;
}

}  // namespace odcal
