#pragma once

// Calibration of cost-family parameters against an observed correspondence
// matrix. The objective is the squared residual between observed counts and
// the entropy-model matrix rescaled to counts; it is non-convex in the
// parameters, so only derivative-free searches are offered.

#include "odcal/core.hpp"
#include "odcal/costs.hpp"
#include "odcal/data.hpp"
#include "odcal/solvers.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace odcal {

// ---------------------------------------------------------------------------
// Residual

enum class ResidualNorm {
  none,            // plain sum of squares
  zones_squared,   // divided by n^2
  observed_pairs,  // divided by the number of pairs with a positive observed count
};

inline const char* to_string(ResidualNorm r) {
  switch (r) {
    case ResidualNorm::none: return "none";
    case ResidualNorm::zones_squared: return "n2";
    case ResidualNorm::observed_pairs: return "pairs";
  }
  return "?";
}

inline ResidualNorm parse_residual_norm(const std::string& s) {
  if (s == "none") return ResidualNorm::none;
  if (s == "n2") return ResidualNorm::zones_squared;
  if (s == "pairs") return ResidualNorm::observed_pairs;
  throw ValidationError("unknown residual normalization '" + s + "' (expected none, n2 or pairs)");
}

/// Sum of squared entrywise differences of two count-scale matrices.
inline double residual(const CorrespondenceMatrix& observed, const CorrespondenceMatrix& restored,
                       ResidualNorm norm = ResidualNorm::zones_squared) {
  detail::require_same_n(observed.n(), restored.n(), "residual");
  detail::require(observed.scale() == Scale::counts && restored.scale() == Scale::counts,
                  "residual: both matrices must be at counts scale");
  const double sum = (observed.values() - restored.values()).squaredNorm();
  switch (norm) {
    case ResidualNorm::none: return sum;
    case ResidualNorm::zones_squared: {
      const double n = static_cast<double>(observed.n());
      return sum / (n * n);
    }
    case ResidualNorm::observed_pairs: {
      const auto pairs = (observed.values().array() > 0.0).count();
      return pairs > 0 ? sum / static_cast<double>(pairs) : sum;
    }
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Grid search

struct Evaluation {
  FamilyParams params;
  double residual = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct CalibrationOptions {
  SolverKind solver = SolverKind::sinkhorn;
  SolverConfig solver_config = SolverConfig::sinkhorn_defaults();
  ResidualNorm norm = ResidualNorm::zones_squared;
  unsigned jobs = 1;
};

struct CalibrationResult {
  FamilyKind family = FamilyKind::linear_time;
  std::string method = "grid";
  FamilyParams best;
  double best_residual = std::numeric_limits<double>::infinity();
  std::vector<Evaluation> evaluations;
  CalibrationOptions options;
  std::size_t n = 0;
};

/// Solves the entropy model for one parameter point and scores it against the survey.
inline Evaluation evaluate_point(const SurveyProblem& problem, const CostFamily& family,
                                 const CalibrationOptions& opt) {
  const Marginals m = problem.marginals();
  const CostMatrix cost = evaluate_family(family, problem.time, problem.dist);
  const SolveResult solved = solve(cost, m, opt.solver, opt.solver_config);
  const CorrespondenceMatrix restored = to_counts(solved.primal, m.total());
  return {family.params, residual(problem.observed_counts(), restored, opt.norm), solved.report.converged,
          solved.report.iterations};
}

namespace detail {

/// Best converged evaluation; on ties the earliest one (grid order is lexicographic).
inline void select_best(CalibrationResult& result) {
  bool any = false;
  for (const auto& e : result.evaluations) {
    if (!e.converged) continue;
    if (!any || e.residual < result.best_residual) {
      result.best = e.params;
      result.best_residual = e.residual;
      any = true;
    }
  }
  if (!any) throw SolverError("calibration: no parameter point converged");
}

}  // namespace detail

/// Exhaustive search over a parameter grid. Points are evaluated on up to
/// opt.jobs threads; results are stored by grid index, so the outcome does not
/// depend on scheduling. Non-converged points stay in the log but are never
/// selected.
inline CalibrationResult grid_search(FamilyKind kind, const GridSpec& spec, const SurveyProblem& problem,
                                     const CalibrationOptions& opt = {}) {
  detail::require(problem.solvable(), "grid_search: survey has zones with a zero marginal");
  const std::vector<FamilyParams> grid = family_grid(spec);
  for (const auto& p : grid) CostFamily{kind, p}.validate();
  opt.solver_config.validate();

  CalibrationResult result;
  result.family = kind;
  result.method = "grid";
  result.options = opt;
  result.n = problem.n();
  result.evaluations.resize(grid.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < grid.size(); k = next++) {
      result.evaluations[k] = evaluate_point(problem, CostFamily{kind, grid[k]}, opt);
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(opt.jobs, static_cast<unsigned>(grid.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(jobs);
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }
  detail::select_best(result);
  return result;
}

// ---------------------------------------------------------------------------
// Generic derivative-free minimizers over a box

using Point = std::vector<double>;
using Objective = std::function<double(const Point&)>;

struct Bounds {
  Point lower;
  Point upper;

  std::size_t dim() const { return lower.size(); }

  void validate() const {
    detail::require(!lower.empty() && lower.size() == upper.size(), "bounds: dimension mismatch or empty");
    for (std::size_t i = 0; i < lower.size(); ++i) {
      detail::require(std::isfinite(lower[i]) && std::isfinite(upper[i]) && lower[i] < upper[i],
                      "bounds: each coordinate needs lower < upper");
    }
  }
};

struct Optimum {
  Point x;
  double value = std::numeric_limits<double>::infinity();
};

namespace detail {

inline double checked(const Objective& f, const Point& x) {
  const double v = f(x);
  if (!std::isfinite(v)) throw SolverError("objective returned a non-finite value");
  return v;
}

/// Folds a coordinate back into [lo, hi] by mirror reflection.
inline double reflect(double v, double lo, double hi) {
  const double width = hi - lo;
  double u = std::fmod(v - lo, 2.0 * width);
  if (u < 0.0) u += 2.0 * width;
  return u <= width ? lo + u : hi - (u - width);
}

}  // namespace detail

struct AnnealingSchedule {
  double initial_temperature = 1.0;
  double cooling = 0.9;
  int temperatures = 100;
  int steps_per_temperature = 50;
  double step_size = 0.1;
  std::uint64_t seed = 42;

  void validate() const {
    detail::require(initial_temperature > 0.0, "annealing: initial temperature must be positive");
    detail::require(cooling > 0.0 && cooling < 1.0, "annealing: cooling factor must lie in (0, 1)");
    detail::require(temperatures >= 1 && steps_per_temperature >= 1, "annealing: need at least one step");
    detail::require(step_size > 0.0, "annealing: step size must be positive");
  }
};

/// Metropolis rule: downhill moves always pass; uphill ones pass when the
/// uniform draw u falls below exp(-delta / temperature).
inline bool metropolis_accept(double delta, double temperature, double u) {
  if (delta <= 0.0) return true;
  return u < std::exp(-delta / temperature);
}

struct AnnealingStep {
  double delta;
  double temperature;
  double u;
  bool accepted;
};

/// Simulated annealing with a geometric cooling schedule. Proposals move every
/// coordinate by U(-step, step), reflected into the bounds. One uniform draw
/// is consumed per proposal for the acceptance test, downhill or not, so the
/// random stream is a fixed function of the seed. Returns the best point seen.
inline Optimum simulated_annealing(const Objective& f, Point x0, const AnnealingSchedule& sched, const Bounds& bounds,
                                   const std::function<void(const AnnealingStep&)>& observer = {}) {
  sched.validate();
  bounds.validate();
  detail::require(x0.size() == bounds.dim(), "annealing: start point has the wrong dimension");
  for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = std::clamp(x0[i], bounds.lower[i], bounds.upper[i]);

  std::mt19937_64 rng(sched.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Point current = std::move(x0);
  double current_value = detail::checked(f, current);
  Optimum best{current, current_value};
  double temperature = sched.initial_temperature;

  for (int level = 0; level < sched.temperatures; ++level) {
    for (int step = 0; step < sched.steps_per_temperature; ++step) {
      Point candidate = current;
      for (std::size_t i = 0; i < candidate.size(); ++i) {
        const double move = (2.0 * unit(rng) - 1.0) * sched.step_size;
        candidate[i] = detail::reflect(candidate[i] + move, bounds.lower[i], bounds.upper[i]);
      }
      const double value = detail::checked(f, candidate);
      const double u = unit(rng);
      const double delta = value - current_value;
      const bool accepted = metropolis_accept(delta, temperature, u);
      if (observer) observer({delta, temperature, u, accepted});
      if (accepted) {
        current = std::move(candidate);
        current_value = value;
        if (current_value < best.value) best = {current, current_value};
      }
    }
    temperature *= sched.cooling;
  }
  return best;
}

struct PiyavskiiResult {
  double x = 0.0;
  double value = 0.0;
  double lower_bound = 0.0;  // min of the final saw-tooth minorant
  int evaluations = 0;
  std::vector<std::pair<double, double>> samples;  // (x, f(x)) sorted by x
};

/// Lower envelope max_i f(x_i) - L |x - x_i| of the sampled points.
inline double piyavskii_envelope(const std::vector<std::pair<double, double>>& samples, double lipschitz, double x) {
  double out = -std::numeric_limits<double>::infinity();
  for (const auto& [xi, fi] : samples) out = std::max(out, fi - lipschitz * std::abs(x - xi));
  return out;
}

/// Broken-line (Piyavskii) minimization of an L-Lipschitz function on [a, b].
/// Each step samples the minimizer of the current envelope (smallest x on
/// ties) and stops once f(best) - min envelope <= tol.
inline PiyavskiiResult piyavskii_minimize(const std::function<double(double)>& f, double a, double b,
                                          double lipschitz, double tol, std::optional<double> start = std::nullopt,
                                          int max_evaluations = 10000) {
  detail::require(std::isfinite(a) && std::isfinite(b) && a < b, "piyavskii: need a finite interval a < b");
  detail::require(lipschitz > 0.0 && std::isfinite(lipschitz), "piyavskii: Lipschitz constant must be positive");
  detail::require(tol >= 0.0, "piyavskii: tolerance must be nonnegative");
  const double x0 = start.value_or(0.5 * (a + b));
  detail::require(x0 >= a && x0 <= b, "piyavskii: start point outside the interval");

  PiyavskiiResult out;
  auto sample = [&](double x) {
    if (out.evaluations >= max_evaluations) throw SolverError("piyavskii: evaluation budget exceeded");
    const double v = f(x);
    if (!std::isfinite(v)) throw SolverError("piyavskii: objective returned a non-finite value");
    ++out.evaluations;
    const auto pos = std::lower_bound(out.samples.begin(), out.samples.end(), std::make_pair(x, -std::numeric_limits<double>::infinity()));
    out.samples.insert(pos, {x, v});
    if (out.evaluations == 1 || v < out.value) {
      out.x = x;
      out.value = v;
    }
  };
  sample(x0);

  while (true) {
    // Minimum of the envelope: candidates are the interval ends and the
    // crossing point of the two cones between consecutive samples.
    const auto& s = out.samples;
    double best_x = a;
    double best_p = s.front().second - lipschitz * (s.front().first - a);
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
      const auto [x1, f1] = s[k];
      const auto [x2, f2] = s[k + 1];
      const double xc = std::clamp(0.5 * (x1 + x2) + (f1 - f2) / (2.0 * lipschitz), x1, x2);
      const double pc = std::max(f1 - lipschitz * (xc - x1), f2 - lipschitz * (x2 - xc));
      if (pc < best_p) best_x = xc, best_p = pc;
    }
    const double pb = s.back().second - lipschitz * (b - s.back().first);
    if (pb < best_p) best_x = b, best_p = pb;

    out.lower_bound = best_p;
    if (out.value - best_p <= tol) break;
    sample(best_x);
  }
  return out;
}

using LocalOptimizer = std::function<Optimum(const Point&)>;

/// Coordinate descent on the lattice lower + k * step: try +-step along each
/// coordinate, move on strict improvement, stop when no neighbour improves.
inline LocalOptimizer lattice_descent(Objective f, Bounds bounds, Point steps) {
  bounds.validate();
  detail::require(steps.size() == bounds.dim(), "lattice descent: step vector has the wrong dimension");
  for (double h : steps) detail::require(h > 0.0, "lattice descent: steps must be positive");
  return [f = std::move(f), bounds = std::move(bounds), steps = std::move(steps)](const Point& start) {
    const std::size_t dim = bounds.dim();
    std::vector<long long> idx(dim), top(dim);
    auto to_point = [&](const std::vector<long long>& k) {
      Point p(dim);
      for (std::size_t i = 0; i < dim; ++i) p[i] = bounds.lower[i] + static_cast<double>(k[i]) * steps[i];
      return p;
    };
    for (std::size_t i = 0; i < dim; ++i) {
      top[i] = static_cast<long long>(std::floor((bounds.upper[i] - bounds.lower[i]) / steps[i] + 1e-9));
      idx[i] = std::clamp(std::llround((start[i] - bounds.lower[i]) / steps[i]), 0LL, top[i]);
    }
    Optimum best{to_point(idx), detail::checked(f, to_point(idx))};
    for (bool improved = true; improved;) {
      improved = false;
      for (std::size_t i = 0; i < dim; ++i) {
        for (long long dir : {-1LL, 1LL}) {
          const long long k = idx[i] + dir;
          if (k < 0 || k > top[i]) continue;
          auto trial = idx;
          trial[i] = k;
          const Point p = to_point(trial);
          const double v = detail::checked(f, p);
          if (v < best.value) {
            idx = std::move(trial);
            best = {p, v};
            improved = true;
          }
        }
      }
    }
    return best;
  };
}

/// Random multistart: k uniform starting points in the box (seeded), each
/// refined by the local optimizer; the best local result wins (first on ties).
inline Optimum multistart(const Bounds& bounds, int starts, const LocalOptimizer& local, std::uint64_t seed) {
  bounds.validate();
  detail::require(starts >= 1, "multistart: need at least one start");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Optimum best;
  for (int s = 0; s < starts; ++s) {
    Point x(bounds.dim());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = bounds.lower[i] + unit(rng) * (bounds.upper[i] - bounds.lower[i]);
    Optimum candidate = local(x);
    if (s == 0 || candidate.value < best.value) best = std::move(candidate);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Serialization of calibration results

inline nlohmann::json to_json(const FamilyParams& p) {
  return {{"alpha", p.alpha}, {"beta", p.beta}, {"gamma", p.gamma}};
}

inline FamilyParams params_from_json(const nlohmann::json& j) {
  return {j.at("alpha").get<double>(), j.at("beta").get<double>(), j.at("gamma").get<double>()};
}

inline nlohmann::json to_json(const CalibrationResult& r) {
  nlohmann::json j;
  j["family"] = to_string(r.family);
  j["method"] = r.method;
  j["n"] = r.n;
  j["best"] = to_json(r.best);
  j["best_residual"] = r.best_residual;
  j["residual_norm"] = to_string(r.options.norm);
  j["solver"] = {{"kind", to_string(r.options.solver)},
                 {"eps_f", r.options.solver_config.eps_f},
                 {"eps_eq", r.options.solver_config.eps_eq},
                 {"max_iters", r.options.solver_config.max_iters},
                 {"initial_L", r.options.solver_config.initial_L}};
  auto evals = nlohmann::json::array();
  for (const auto& e : r.evaluations) {
    evals.push_back({{"alpha", e.params.alpha},
                     {"beta", e.params.beta},
                     {"gamma", e.params.gamma},
                     {"residual", e.residual},
                     {"converged", e.converged},
                     {"iterations", e.iterations}});
  }
  j["evaluations"] = std::move(evals);
  return j;
}

inline CalibrationResult calibration_from_json(const nlohmann::json& j) {
  try {
    CalibrationResult r;
    r.family = parse_family_kind(j.at("family").get<std::string>());
    r.method = j.at("method").get<std::string>();
    r.n = j.at("n").get<std::size_t>();
    r.best = params_from_json(j.at("best"));
    r.best_residual = j.at("best_residual").get<double>();
    r.options.norm = parse_residual_norm(j.at("residual_norm").get<std::string>());
    const auto& s = j.at("solver");
    r.options.solver = parse_solver_kind(s.at("kind").get<std::string>());
    r.options.solver_config.eps_f = s.at("eps_f").get<double>();
    r.options.solver_config.eps_eq = s.at("eps_eq").get<double>();
    r.options.solver_config.max_iters = s.at("max_iters").get<int>();
    r.options.solver_config.initial_L = s.at("initial_L").get<double>();
    for (const auto& e : j.at("evaluations")) {
      r.evaluations.push_back({params_from_json(e), e.at("residual").get<double>(), e.at("converged").get<bool>(),
                               e.at("iterations").get<int>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("calibration result: ") + e.what());
  }
}

/// Plot-ready residual curve: one row per evaluated point, in evaluation order.
inline void write_curve_csv(const CalibrationResult& r, std::ostream& out) {
  out << "alpha,beta,gamma,residual,converged\n";
  for (const auto& e : r.evaluations) {
    out << detail::format_double(e.params.alpha) << ',' << detail::format_double(e.params.beta) << ','
        << detail::format_double(e.params.gamma) << ',' << detail::format_double(e.residual) << ','
        << (e.converged ? 1 : 0) << '\n';
  }
}

}  // namespace odcal
