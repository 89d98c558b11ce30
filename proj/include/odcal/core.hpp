#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace odcal {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Malformed input (unreadable file, bad CSV row, bad JSON). CLI exit code 1.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that parses but breaks a documented precondition. CLI exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A solver could not make progress (e.g. the Lipschitz backtracking ran away). CLI exit code 3.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

inline void require_same_n(std::size_t a, std::size_t b, const char* where) {
  require(a == b, std::string(where) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                      std::to_string(b) + ")");
}

}  // namespace detail

/// Normalized departure (l) and arrival (w) distributions over n zones,
/// together with the population total N they were normalized by.
class Marginals {
 public:
  static constexpr double kSumTolerance = 1e-12;

  Marginals(Vector l, Vector w, double total = 1.0) : l_(std::move(l)), w_(std::move(w)), total_(total) {
    detail::require(l_.size() == w_.size(), "marginals: l and w differ in length");
    detail::require(l_.size() >= 2, "marginals: need at least two zones");
    detail::require(l_.allFinite() && w_.allFinite(), "marginals: non-finite entry");
    detail::require((l_.array() >= 0.0).all() && (w_.array() >= 0.0).all(), "marginals: negative entry");
    detail::require(std::abs(l_.sum() - 1.0) <= kSumTolerance, "marginals: l does not sum to 1");
    detail::require(std::abs(w_.sum() - 1.0) <= kSumTolerance, "marginals: w does not sum to 1");
    detail::require(total_ > 0.0 && std::isfinite(total_), "marginals: total must be positive");
  }

  std::size_t n() const { return static_cast<std::size_t>(l_.size()); }
  const Vector& l() const { return l_; }
  const Vector& w() const { return w_; }
  double total() const { return total_; }

  bool strictly_positive() const { return (l_.array() > 0.0).all() && (w_.array() > 0.0).all(); }

  bool operator==(const Marginals& o) const {
    return l_.size() == o.l_.size() && l_ == o.l_ && w_ == o.w_ && total_ == o.total_;
  }

 private:
  Vector l_;
  Vector w_;
  double total_;
};

/// v / sum(v). Division can leave the sum a few ulps from 1; the remainder is
/// folded into the largest entry.
inline Vector normalized_shares(const Vector& v) {
  Vector out = v / v.sum();
  Eigen::Index top = 0;
  out.maxCoeff(&top);
  out(top) += 1.0 - out.sum();
  return out;
}

/// Builds marginals from count vectors. Totals must agree exactly: a survey
/// describes one closed population, so a mismatch signals a data bug.
inline Marginals make_marginals(const Vector& departures, const Vector& arrivals) {
  detail::require(departures.size() == arrivals.size(), "make_marginals: length mismatch");
  detail::require(departures.size() >= 2, "make_marginals: need at least two zones");
  detail::require(departures.allFinite() && arrivals.allFinite(), "make_marginals: non-finite count");
  detail::require((departures.array() >= 0.0).all() && (arrivals.array() >= 0.0).all(),
                  "make_marginals: negative count");
  const double total_l = departures.sum();
  const double total_w = arrivals.sum();
  detail::require(total_l > 0.0, "make_marginals: all-zero input");
  detail::require(total_l == total_w, "make_marginals: departure and arrival totals differ");
  return Marginals(normalized_shares(departures), normalized_shares(arrivals), total_l);
}

/// Generalized travel cost between every ordered zone pair.
class CostMatrix {
 public:
  explicit CostMatrix(Matrix t) : t_(std::move(t)) {
    detail::require(t_.rows() == t_.cols(), "cost matrix must be square");
    detail::require(t_.rows() >= 1, "cost matrix must be non-empty");
    detail::require(t_.allFinite(), "cost matrix has a non-finite entry");
  }

  std::size_t n() const { return static_cast<std::size_t>(t_.rows()); }
  const Matrix& values() const { return t_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return t_(i, j); }

  bool operator==(const CostMatrix& o) const { return t_.rows() == o.t_.rows() && t_ == o.t_; }

 private:
  Matrix t_;
};

enum class Scale { normalized, counts };

inline const char* to_string(Scale s) { return s == Scale::normalized ? "normalized" : "counts"; }

/// Nonnegative origin-destination matrix, either as population fractions
/// (sums to 1) or commuter counts (sums to total).
class CorrespondenceMatrix {
 public:
  static constexpr double kNormalizedTolerance = 1e-9;
  static constexpr double kCountsRelTolerance = 1e-6;

  CorrespondenceMatrix(Matrix d, Scale scale, double total) : d_(std::move(d)), scale_(scale), total_(total) {
    detail::require(d_.rows() == d_.cols(), "correspondence matrix must be square");
    detail::require(d_.allFinite(), "correspondence matrix has a non-finite entry");
    detail::require((d_.array() >= 0.0).all(), "correspondence matrix has a negative entry");
    detail::require(std::isfinite(total_) && total_ >= 0.0, "correspondence total must be nonnegative");
    const double sum = d_.sum();
    if (scale_ == Scale::normalized) {
      detail::require(std::abs(sum - 1.0) <= kNormalizedTolerance, "normalized correspondence must sum to 1");
    } else {
      detail::require(std::abs(sum - total_) <= kCountsRelTolerance * total_ + 1e-12,
                      "count correspondence must sum to its total");
    }
  }

  static CorrespondenceMatrix normalized(Matrix d, double total = 1.0) {
    return CorrespondenceMatrix(std::move(d), Scale::normalized, total);
  }
  static CorrespondenceMatrix counts(Matrix d) {
    const double total = d.sum();
    return CorrespondenceMatrix(std::move(d), Scale::counts, total);
  }

  std::size_t n() const { return static_cast<std::size_t>(d_.rows()); }
  const Matrix& values() const { return d_; }
  Scale scale() const { return scale_; }
  double total() const { return total_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return d_(i, j); }

  Vector row_sums() const { return d_.rowwise().sum(); }
  Vector col_sums() const { return d_.colwise().sum().transpose(); }

  bool operator==(const CorrespondenceMatrix& o) const {
    return scale_ == o.scale_ && total_ == o.total_ && d_.rows() == o.d_.rows() && d_ == o.d_;
  }

 private:
  Matrix d_;
  Scale scale_;
  double total_;
};

/// Rescales a normalized matrix to commuter counts.
inline CorrespondenceMatrix to_counts(const CorrespondenceMatrix& d, double total) {
  detail::require(d.scale() == Scale::normalized, "to_counts: input must be normalized");
  detail::require(total > 0.0 && std::isfinite(total), "to_counts: total must be positive");
  return CorrespondenceMatrix(d.values() * total, Scale::counts, total);
}

inline CorrespondenceMatrix to_normalized(const CorrespondenceMatrix& d) {
  detail::require(d.scale() == Scale::counts, "to_normalized: input must be at counts scale");
  detail::require(d.total() > 0.0, "to_normalized: empty matrix");
  return CorrespondenceMatrix(d.values() / d.total(), Scale::normalized, d.total());
}

/// Dual potentials for the row (departure) and column (arrival) constraints.
struct DualPotentials {
  Vector lambda_l;
  Vector lambda_w;

  static DualPotentials zeros(std::size_t n) {
    return {Vector::Zero(static_cast<Eigen::Index>(n)), Vector::Zero(static_cast<Eigen::Index>(n))};
  }

  std::size_t n() const { return static_cast<std::size_t>(lambda_l.size()); }
  bool finite() const { return lambda_l.allFinite() && lambda_w.allFinite(); }

  bool operator==(const DualPotentials& o) const {
    return lambda_l.size() == o.lambda_l.size() && lambda_w.size() == o.lambda_w.size() &&
           lambda_l == o.lambda_l && lambda_w == o.lambda_w;
  }
};

struct SolverConfig {
  double eps_f = 1e-8;
  double eps_eq = 1e-8;
  int max_iters = 100000;
  double initial_L = 1.0;

  static SolverConfig sinkhorn_defaults() { return {}; }
  static SolverConfig accelerated_defaults() {
    SolverConfig cfg;
    cfg.max_iters = 10000;
    return cfg;
  }

  void validate() const {
    detail::require(eps_f > 0.0, "solver config: eps_f must be positive");
    detail::require(eps_eq > 0.0, "solver config: eps_eq must be positive");
    detail::require(max_iters >= 1, "solver config: max_iters must be at least 1");
    detail::require(initial_L > 0.0 && std::isfinite(initial_L), "solver config: initial_L must be positive");
  }
};

struct SolveReport {
  int iterations = 0;
  std::vector<double> objective_trace;
  double final_gap = 0.0;
  double row_violation = 0.0;
  double col_violation = 0.0;
  bool converged = false;
};

}  // namespace odcal
