#pragma once

// Sinkhorn (alternating exact block minimization of the dual) and its
// accelerated variant with adaptive Lipschitz backtracking, greedy block
// choice and an averaged primal reconstruction.

#include "odcal/core.hpp"
#include "odcal/dual.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace odcal {

enum class SolverKind { sinkhorn, accelerated };

inline const char* to_string(SolverKind k) { return k == SolverKind::sinkhorn ? "sinkhorn" : "accelerated"; }

inline SolverKind parse_solver_kind(const std::string& s) {
  if (s == "sinkhorn") return SolverKind::sinkhorn;
  if (s == "accelerated") return SolverKind::accelerated;
  throw ValidationError("unknown solver '" + s + "' (expected sinkhorn or accelerated)");
}

struct SolveResult {
  CorrespondenceMatrix primal;
  DualPotentials potentials;
  SolveReport report;
};

namespace detail {

inline void require_solvable(const CostMatrix& t, const Marginals& m) {
  require_same_n(t.n(), m.n(), "solver");
  require(m.strictly_positive(),
          "solver: every marginal entry must be positive (drop empty zones before solving)");
}

inline DualPotentials update_l(const LogKernel& kernel, DualPotentials lam, const Marginals& m) {
  lam.lambda_l.array() += m.l().array().log() - (kernel.log_row_sums().array() - kernel.logsum());
  return lam;
}

inline DualPotentials update_w(const LogKernel& kernel, DualPotentials lam, const Marginals& m) {
  lam.lambda_w.array() += m.w().array().log() - (kernel.log_col_sums().array() - kernel.logsum());
  return lam;
}

inline double marginal_violation(const Vector& sums, const Vector& target) { return (sums - target).norm(); }

/// Moves a nearly-feasible matrix onto the exact transport polytope: shrink
/// rows that exceed l, shrink columns that exceed w, then spread the missing
/// mass with a rank-one correction.
inline Matrix round_to_marginals(Matrix d, const Marginals& m) {
  const Vector rows = d.rowwise().sum();
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (rows(i) > m.l()(i)) d.row(i) *= m.l()(i) / rows(i);
  }
  const Vector cols = d.colwise().sum().transpose();
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    if (cols(j) > m.w()(j)) d.col(j) *= m.w()(j) / cols(j);
  }
  const Vector err_r = (m.l() - d.rowwise().sum()).cwiseMax(0.0);
  const Vector err_c = (m.w() - d.colwise().sum().transpose()).cwiseMax(0.0);
  const double mass = err_r.sum();
  if (mass > 0.0) d += err_r * err_c.transpose() / mass;
  return d;
}

inline double duality_gap(const Matrix& d, const CostMatrix& t, double phi) {
  return primal_objective(CorrespondenceMatrix::normalized(d / d.sum()), t) + phi;
}

}  // namespace detail

/// Exact minimization of the dual over the departure block: afterwards the
/// row sums of the primal matrix equal l.
inline DualPotentials sinkhorn_block_update_l(const DualPotentials& lam, const CostMatrix& t, const Marginals& m) {
  detail::require_compatible(t, lam, m);
  detail::require((m.l().array() > 0.0).all(), "block update: zero departure marginal");
  return detail::update_l(LogKernel(t, lam), lam, m);
}

/// Exact minimization over the arrival block: afterwards the column sums equal w.
inline DualPotentials sinkhorn_block_update_w(const DualPotentials& lam, const CostMatrix& t, const Marginals& m) {
  detail::require_compatible(t, lam, m);
  detail::require((m.w().array() > 0.0).all(), "block update: zero arrival marginal");
  return detail::update_w(LogKernel(t, lam), lam, m);
}

/// True iff |f(d) + phi(lam)| <= eps_f and both marginal residuals (Euclidean) are <= eps_eq.
inline bool stopping_check(const CorrespondenceMatrix& d, const DualPotentials& lam, const CostMatrix& t,
                           const Marginals& m, const SolverConfig& cfg) {
  detail::require_same_n(d.n(), t.n(), "stopping check");
  const double gap = primal_objective(d, t) + dual_objective(t, lam, m);
  return std::abs(gap) <= cfg.eps_f && detail::marginal_violation(d.row_sums(), m.l()) <= cfg.eps_eq &&
         detail::marginal_violation(d.col_sums(), m.w()) <= cfg.eps_eq;
}

/// Plain Sinkhorn: start from zero potentials and alternate exact block
/// minimizations (l-block on even iterations, w-block on odd ones).
///
/// Convergence uses the same three inequalities as the accelerated solver;
/// the duality gap is measured on the iterate rounded onto the exact
/// marginals. Running out of iterations is reported, not thrown.
inline SolveResult sinkhorn_solve(const CostMatrix& t, const Marginals& m, const SolverConfig& cfg = {}) {
  cfg.validate();
  detail::require_solvable(t, m);

  DualPotentials lam = DualPotentials::zeros(t.n());
  LogKernel kernel(t, lam);
  SolveReport report;
  report.objective_trace.reserve(static_cast<std::size_t>(std::min(cfg.max_iters, 1 << 16)));
  Matrix d;

  for (int k = 0; k < cfg.max_iters; ++k) {
    lam = (k % 2 == 0) ? detail::update_l(kernel, std::move(lam), m) : detail::update_w(kernel, std::move(lam), m);
    kernel = LogKernel(t, lam);
    const double phi = detail::dual_value(kernel, lam, m);
    report.objective_trace.push_back(phi);
    report.iterations = k + 1;

    d = kernel.primal();
    report.row_violation = detail::marginal_violation(d.rowwise().sum(), m.l());
    report.col_violation = detail::marginal_violation(d.colwise().sum().transpose(), m.w());
    if (report.row_violation <= cfg.eps_eq && report.col_violation <= cfg.eps_eq) {
      report.final_gap = detail::duality_gap(detail::round_to_marginals(d, m), t, phi);
      if (std::abs(report.final_gap) <= cfg.eps_f) {
        report.converged = true;
        break;
      }
    }
  }
  if (!report.converged) {
    report.final_gap = detail::duality_gap(detail::round_to_marginals(d, m), t, report.objective_trace.back());
  }
  d /= d.sum();
  return {CorrespondenceMatrix::normalized(std::move(d)), std::move(lam), std::move(report)};
}

/// Iterate of the accelerated solver.
struct AcceleratedState {
  DualPotentials x;
  DualPotentials v;
  double L = 1.0;
  double a = 0.0;
  Matrix d_hat;
};

/// Accelerated alternating minimization. Each outer iteration halves the
/// Lipschitz estimate, then doubles it until the sufficient-decrease test
///   phi(x_{k+1}) <= phi(y_k) - |grad phi(y_k)|^2 / (2 L_{k+1})
/// passes. The returned primal is the a_k-weighted average of d(y_k).
///
/// Throws SolverError when one outer iteration needs more than 64 doublings.
inline SolveResult accelerated_solve(const CostMatrix& t, const Marginals& m,
                                     const SolverConfig& cfg = SolverConfig::accelerated_defaults()) {
  constexpr int kMaxDoublings = 64;
  cfg.validate();
  detail::require_solvable(t, m);

  AcceleratedState s{DualPotentials::zeros(t.n()), DualPotentials::zeros(t.n()), cfg.initial_L, 0.0, {}};
  s.d_hat = LogKernel(t, s.x).primal();

  SolveReport report;
  double phi_x = dual_objective(t, s.x, m);

  for (int k = 0; k < cfg.max_iters; ++k) {
    double L_next = s.L / 2.0;
    bool accepted = false;
    for (int attempt = 0; attempt <= kMaxDoublings; ++attempt) {
      const double a_next = 1.0 / (2.0 * L_next) + std::sqrt(1.0 / (4.0 * L_next * L_next) + s.a * s.a * s.L / L_next);
      const double tau = 1.0 / (a_next * L_next);
      const DualPotentials y{tau * s.v.lambda_l + (1.0 - tau) * s.x.lambda_l,
                             tau * s.v.lambda_w + (1.0 - tau) * s.x.lambda_w};

      const LogKernel ky(t, y);
      const double phi_y = detail::dual_value(ky, y, m);
      const Vector g_l = (ky.log_row_sums().array() - ky.logsum()).exp().matrix() - m.l();
      const Vector g_w = (ky.log_col_sums().array() - ky.logsum()).exp().matrix() - m.w();
      const double g2 = g_l.squaredNorm() + g_w.squaredNorm();

      // Ties go to the departure block. Row and column reductions round
      // differently, so norms a few ulps apart count as equal.
      const double nl = g_l.squaredNorm(), nw = g_w.squaredNorm();
      const bool departures = nl >= nw - 16.0 * std::numeric_limits<double>::epsilon() * std::max(nl, nw);
      DualPotentials x_next = departures ? detail::update_l(ky, y, m) : detail::update_w(ky, y, m);
      const double phi_next = dual_objective(t, x_next, m);

      // Slack of a few ulps of phi: near the optimum the exact block step can
      // land one rounding error above phi(y) and no L would ever be accepted.
      const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(phi_y));
      if (phi_next <= phi_y - g2 / (2.0 * L_next) + slack) {
        s.v.lambda_l -= a_next * g_l;
        s.v.lambda_w -= a_next * g_w;
        s.d_hat = (a_next * ky.primal() + s.L * s.a * s.a * s.d_hat) / (L_next * a_next * a_next);
        s.d_hat /= s.d_hat.sum();
        s.x = std::move(x_next);
        s.a = a_next;
        s.L = L_next;
        phi_x = phi_next;
        accepted = true;
        break;
      }
      L_next *= 2.0;
    }
    if (!accepted) throw SolverError("accelerated solver: Lipschitz search diverged");

    report.iterations = k + 1;
    report.objective_trace.push_back(phi_x);
    report.row_violation = detail::marginal_violation(s.d_hat.rowwise().sum(), m.l());
    report.col_violation = detail::marginal_violation(s.d_hat.colwise().sum().transpose(), m.w());
    report.final_gap = detail::duality_gap(s.d_hat, t, phi_x);
    if (std::abs(report.final_gap) <= cfg.eps_f && report.row_violation <= cfg.eps_eq &&
        report.col_violation <= cfg.eps_eq) {
      report.converged = true;
      break;
    }
  }
  return {CorrespondenceMatrix::normalized(std::move(s.d_hat)), std::move(s.x), std::move(report)};
}

inline SolveResult solve(const CostMatrix& t, const Marginals& m, SolverKind kind, const SolverConfig& cfg) {
  return kind == SolverKind::sinkhorn ? sinkhorn_solve(t, m, cfg) : accelerated_solve(t, m, cfg);
}

}  // namespace odcal
