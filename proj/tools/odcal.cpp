// odcal: estimate origin-destination matrices with the entropy model and
// calibrate travel-cost families against survey data.
//
//   odcal solve      <survey.csv|problem.json> --family ... --out DIR
//   odcal calibrate  <survey.csv> --family ... --grid-alpha lo:hi:step --method grid --out DIR
//   odcal sweep      <survey.csv> --family ... --grid-... --profile gamma --out DIR
//   odcal synth      --n 22 --seed 1 --family power_time --alpha 26.76 --gamma 0.09 --out survey.csv
//   odcal report     a.json b.json ... [--csv table.csv]
//
// Exit codes: 0 success, 1 I/O or parse error, 2 validation error, 3 non-convergence.

#include "odcal/odcal.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

enum ExitCode { kOk = 0, kParse = 1, kValidation = 2, kNotConverged = 3 };

using Clock = std::chrono::steady_clock;

struct FamilyFlags {
  std::string family = "linear_time";
  std::optional<std::string> alpha, beta, gamma;  // scalar or lo:hi:step

  void add(CLI::App& app, bool allow_grid) {
    app.add_option("--family", family, "cost family")
        ->check(CLI::IsMember({"linear_time", "power_time", "power_time_dist", "powerlog_time", "powerlog_dist"}));
    const char* what = allow_grid ? "value or lo:hi:step" : "value";
    app.add_option("--alpha", alpha, what);
    app.add_option("--beta", beta, what);
    app.add_option("--gamma", gamma, what);
    if (allow_grid) {
      app.add_option("--grid-alpha", alpha, "alpha sweep lo:hi:step")->excludes("--alpha");
      app.add_option("--grid-beta", beta, "beta sweep lo:hi:step")->excludes("--beta");
      app.add_option("--grid-gamma", gamma, "gamma sweep lo:hi:step")->excludes("--gamma");
    }
  }

  odcal::FamilyKind kind() const { return odcal::parse_family_kind(family); }

  odcal::GridSpec grid() const {
    const auto k = kind();
    odcal::GridSpec spec;
    spec.alpha = alpha ? odcal::parse_axis(*alpha) : odcal::Axis::fixed(1.0);
    if (beta) {
      if (!odcal::uses_beta(k)) throw odcal::ValidationError(family + " has no beta parameter");
      spec.beta = odcal::parse_axis(*beta);
    }
    if (gamma) {
      if (!odcal::uses_gamma(k)) throw odcal::ValidationError(family + " has no gamma parameter");
      spec.gamma = odcal::parse_axis(*gamma);
    }
    spec.validate();
    return spec;
  }

  odcal::CostFamily point() const {
    const auto spec = grid();
    if (spec.swept_count() != 0) throw odcal::ValidationError("expected fixed parameter values, not ranges");
    odcal::CostFamily fam{kind(), {spec.alpha.lo, spec.beta.lo, spec.gamma.lo}};
    fam.validate();
    return fam;
  }
};

struct SolverFlags {
  std::string solver = "sinkhorn";
  double eps_f = 1e-8;
  double eps_eq = 1e-8;
  std::optional<int> max_iters;
  double initial_L = 1.0;

  void add(CLI::App& app) {
    app.add_option("--solver", solver, "sinkhorn or accelerated")->check(CLI::IsMember({"sinkhorn", "accelerated"}));
    app.add_option("--eps-f", eps_f, "duality-gap tolerance");
    app.add_option("--eps-eq", eps_eq, "marginal-violation tolerance (Euclidean)");
    app.add_option("--max-iters", max_iters, "iteration cap (default 100000 sinkhorn, 10000 accelerated)");
    app.add_option("--initial-L", initial_L, "initial Lipschitz estimate (accelerated)");
  }

  odcal::SolverKind kind() const { return odcal::parse_solver_kind(solver); }

  odcal::SolverConfig config() const {
    odcal::SolverConfig cfg = kind() == odcal::SolverKind::sinkhorn ? odcal::SolverConfig::sinkhorn_defaults()
                                                                    : odcal::SolverConfig::accelerated_defaults();
    cfg.eps_f = eps_f;
    cfg.eps_eq = eps_eq;
    if (max_iters) cfg.max_iters = *max_iters;
    cfg.initial_L = initial_L;
    cfg.validate();
    return cfg;
  }

  json to_json() const {
    const auto cfg = config();
    return {{"solver", solver}, {"eps_f", cfg.eps_f}, {"eps_eq", cfg.eps_eq}, {"max_iters", cfg.max_iters},
            {"initial_L", cfg.initial_L}};
  }
};

json manifest(const std::string& command, const std::vector<std::string>& inputs, json config, Clock::time_point start) {
  return {{"command", command},
          {"inputs", inputs},
          {"config", std::move(config)},
          {"tool_version", kToolVersion},
          {"wall_time_seconds", std::chrono::duration<double>(Clock::now() - start).count()}};
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw odcal::ParseError("cannot write '" + path.string() + "'");
  return out;
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_matrix_csv(const fs::path& path, const odcal::Matrix& m, const std::vector<std::string>& zones) {
  auto out = open_out(path);
  out << "zone";
  for (const auto& z : zones) out << ',' << z;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << zones[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << odcal::detail::format_double(m(i, j));
    out << '\n';
  }
}

odcal::SurveyProblem load_problem(const std::string& path) {
  if (fs::path(path).extension() == ".json") {
    std::ifstream in(path);
    if (!in) throw odcal::ParseError("cannot open '" + path + "'");
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw odcal::ParseError(path + ": " + e.what());
    }
    return odcal::problem_from_json(j);
  }
  return odcal::build_problem(odcal::load_survey_csv_file(path));
}

void require_solvable(const odcal::SurveyProblem& p) {
  if (p.solvable()) return;
  std::string zones;
  for (const auto& z : p.source_only_zones) zones += " " + z + "(no arrivals)";
  for (const auto& z : p.sink_only_zones) zones += " " + z + "(no departures)";
  throw odcal::ValidationError("survey has zones with a zero marginal:" + zones);
}

json report_json(const odcal::SolveReport& r) {
  return {{"iterations", r.iterations},         {"converged", r.converged},
          {"final_gap", r.final_gap},           {"row_violation", r.row_violation},
          {"col_violation", r.col_violation},   {"objective_trace", r.objective_trace}};
}

// ---------------------------------------------------------------------------

struct SolveCmd {
  std::string input;
  std::string out_dir = "odcal-solve";
  FamilyFlags family;
  SolverFlags solver;
};

int run_solve(const SolveCmd& c) {
  const auto start = Clock::now();
  const auto problem = load_problem(c.input);
  require_solvable(problem);
  const auto fam = c.family.point();
  const auto m = problem.marginals();
  const auto cost = odcal::evaluate_family(fam, problem.time, problem.dist);
  const auto result = odcal::solve(cost, m, c.solver.kind(), c.solver.config());

  const fs::path dir(c.out_dir);
  write_matrix_csv(dir / "correspondence_normalized.csv", result.primal.values(), problem.zones);
  write_matrix_csv(dir / "correspondence_counts.csv", odcal::to_counts(result.primal, m.total()).values(),
                   problem.zones);
  {
    auto out = open_out(dir / "potentials.csv");
    out << "zone,lambda_l,lambda_w\n";
    for (std::size_t i = 0; i < problem.n(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      out << problem.zones[i] << ',' << odcal::detail::format_double(result.potentials.lambda_l(k)) << ','
          << odcal::detail::format_double(result.potentials.lambda_w(k)) << '\n';
    }
  }
  write_json(dir / "problem.json", odcal::to_json(problem));

  json config = c.solver.to_json();
  config["family"] = odcal::to_string(fam.kind);
  config["params"] = odcal::to_json(fam.params);
  json report = report_json(result.report);
  report["residual_n2"] = odcal::residual(problem.observed_counts(), odcal::to_counts(result.primal, m.total()));
  report["manifest"] = manifest("solve", {c.input}, config, start);
  write_json(dir / "report.json", report);

  std::cout << (result.report.converged ? "converged" : "NOT converged") << " after " << result.report.iterations
            << " iterations; gap " << result.report.final_gap << ", row violation " << result.report.row_violation
            << ", col violation " << result.report.col_violation << "\n";
  return result.report.converged ? kOk : kNotConverged;
}

// ---------------------------------------------------------------------------

struct CalibrateCmd {
  std::string input;
  std::string out_dir = "odcal-calibrate";
  FamilyFlags family;
  SolverFlags solver;
  std::string method = "grid";
  std::string residual_norm = "n2";
  unsigned jobs = 1;
  std::uint64_t seed = 42;
  // annealing
  double t0 = 1.0;
  double cooling = 0.9;
  int temperatures = 100;
  int steps = 50;
  std::optional<double> step_size;
  // broken-line method
  double lipschitz = 1000.0;
  double tol = 1e-4;
  // multistart
  int starts = 20;
  // sweep
  std::string profile;
};

struct SweptAxes {
  std::vector<int> which;  // 0 alpha, 1 beta, 2 gamma
  odcal::Bounds bounds;
  odcal::Point steps;
};

SweptAxes swept_axes(const odcal::GridSpec& spec) {
  SweptAxes s;
  const odcal::Axis* axes[3] = {&spec.alpha, &spec.beta, &spec.gamma};
  for (int k = 0; k < 3; ++k) {
    if (!axes[k]->swept()) continue;
    s.which.push_back(k);
    s.bounds.lower.push_back(axes[k]->lo);
    s.bounds.upper.push_back(axes[k]->hi);
    s.steps.push_back(axes[k]->step);
  }
  return s;
}

odcal::FamilyParams params_at(const odcal::GridSpec& spec, const SweptAxes& axes, const odcal::Point& x) {
  odcal::FamilyParams p{spec.alpha.lo, spec.beta.lo, spec.gamma.lo};
  double* slot[3] = {&p.alpha, &p.beta, &p.gamma};
  for (std::size_t i = 0; i < axes.which.size(); ++i) *slot[axes.which[i]] = x[i];
  return p;
}

odcal::CalibrationResult run_method(const CalibrateCmd& c, const odcal::SurveyProblem& problem) {
  const auto kind = c.family.kind();
  const auto spec = c.family.grid();
  odcal::CalibrationOptions opt;
  opt.solver = c.solver.kind();
  opt.solver_config = c.solver.config();
  opt.norm = odcal::parse_residual_norm(c.residual_norm);
  opt.jobs = c.jobs;

  if (c.method == "grid") return odcal::grid_search(kind, spec, problem, opt);

  const SweptAxes axes = swept_axes(spec);
  if (axes.which.empty()) throw odcal::ValidationError(c.method + ": at least one parameter must be given as a range");
  if (c.method == "piyavskii" && axes.which.size() != 1) {
    throw odcal::ValidationError("piyavskii: the broken-line method is one-dimensional; sweep exactly one parameter");
  }

  odcal::CalibrationResult result;
  result.family = kind;
  result.method = c.method;
  result.options = opt;
  result.n = problem.n();
  std::map<odcal::FamilyParams, double> cache;
  auto objective = [&](const odcal::Point& x) {
    const auto p = params_at(spec, axes, x);
    if (auto it = cache.find(p); it != cache.end()) return it->second;
    const auto e = odcal::evaluate_point(problem, odcal::CostFamily{kind, p}, opt);
    result.evaluations.push_back(e);
    cache.emplace(p, e.residual);
    return e.residual;
  };

  if (c.method == "anneal") {
    // Anneal in the unit cube so one proposal width suits every parameter scale.
    odcal::AnnealingSchedule sched;
    sched.initial_temperature = c.t0;
    sched.cooling = c.cooling;
    sched.temperatures = c.temperatures;
    sched.steps_per_temperature = c.steps;
    sched.step_size = c.step_size.value_or(0.1);
    sched.seed = c.seed;
    const std::size_t dim = axes.which.size();
    auto scaled = [&](const odcal::Point& u) {
      odcal::Point x(dim);
      for (std::size_t i = 0; i < dim; ++i) {
        x[i] = axes.bounds.lower[i] + u[i] * (axes.bounds.upper[i] - axes.bounds.lower[i]);
      }
      return objective(x);
    };
    odcal::simulated_annealing(scaled, odcal::Point(dim, 0.5), sched,
                               odcal::Bounds{odcal::Point(dim, 0.0), odcal::Point(dim, 1.0)});
  } else if (c.method == "piyavskii") {
    odcal::piyavskii_minimize([&](double v) { return objective({v}); }, axes.bounds.lower[0], axes.bounds.upper[0],
                              c.lipschitz, c.tol);
  } else if (c.method == "multistart") {
    odcal::multistart(axes.bounds, c.starts, odcal::lattice_descent(objective, axes.bounds, axes.steps), c.seed);
  } else {
    throw odcal::ValidationError("unknown method '" + c.method + "'");
  }
  odcal::detail::select_best(result);
  return result;
}

json calibrate_config(const CalibrateCmd& c) {
  json config = c.solver.to_json();
  config["family"] = c.family.family;
  const auto spec = c.family.grid();
  for (auto [name, axis] : {std::pair{"alpha", spec.alpha}, std::pair{"beta", spec.beta}, std::pair{"gamma", spec.gamma}}) {
    config["grid"][name] = {{"lo", axis.lo}, {"hi", axis.hi}, {"step", axis.step}};
  }
  config["method"] = c.method;
  config["residual_norm"] = c.residual_norm;
  config["jobs"] = c.jobs;
  config["seed"] = c.seed;
  if (c.method == "anneal") {
    config["anneal"] = {{"t0", c.t0}, {"cooling", c.cooling}, {"temperatures", c.temperatures}, {"steps", c.steps}};
  } else if (c.method == "piyavskii") {
    config["piyavskii"] = {{"lipschitz", c.lipschitz}, {"tol", c.tol}};
  } else if (c.method == "multistart") {
    config["multistart"] = {{"starts", c.starts}};
  }
  return config;
}

void print_best(const odcal::CalibrationResult& r) {
  std::cout << odcal::to_string(r.family) << " best residual " << odcal::detail::format_double(r.best_residual)
            << " at alpha=" << odcal::detail::format_double(r.best.alpha)
            << " beta=" << odcal::detail::format_double(r.best.beta)
            << " gamma=" << odcal::detail::format_double(r.best.gamma) << " (" << r.evaluations.size()
            << " evaluations)\n";
}

int run_calibrate(const CalibrateCmd& c, const std::string& command) {
  const auto start = Clock::now();
  const auto problem = load_problem(c.input);
  require_solvable(problem);

  int profile_axis = -1;
  if (command == "sweep") {
    if (c.method != "grid") throw odcal::ValidationError("sweep evaluates the full grid; use calibrate for other methods");
    const std::map<std::string, int> names{{"alpha", 0}, {"beta", 1}, {"gamma", 2}};
    const auto it = names.find(c.profile);
    if (it == names.end()) throw odcal::ValidationError("--profile must be alpha, beta or gamma");
    profile_axis = it->second;
  }

  const auto result = run_method(c, problem);
  const fs::path dir(c.out_dir);
  {
    auto out = open_out(dir / "curve.csv");
    odcal::write_curve_csv(result, out);
  }
  if (profile_axis >= 0) {
    // Best converged residual for each value of the profiled parameter.
    std::map<double, const odcal::Evaluation*> best;
    for (const auto& e : result.evaluations) {
      if (!e.converged) continue;
      const double key = profile_axis == 0 ? e.params.alpha : profile_axis == 1 ? e.params.beta : e.params.gamma;
      auto [it, fresh] = best.emplace(key, &e);
      if (!fresh && e.residual < it->second->residual) it->second = &e;
    }
    auto out = open_out(dir / "profile.csv");
    out << c.profile << ",residual,alpha,beta,gamma\n";
    for (const auto& [key, e] : best) {
      out << odcal::detail::format_double(key) << ',' << odcal::detail::format_double(e->residual) << ','
          << odcal::detail::format_double(e->params.alpha) << ',' << odcal::detail::format_double(e->params.beta)
          << ',' << odcal::detail::format_double(e->params.gamma) << '\n';
    }
  }
  json j = odcal::to_json(result);
  j["manifest"] = manifest(command, {c.input}, calibrate_config(c), start);
  write_json(dir / "calibration.json", j);
  print_best(result);
  return kOk;
}

// ---------------------------------------------------------------------------

struct SynthCmd {
  std::size_t n = 22;
  std::uint64_t seed = 1;
  long long total = 1965;
  FamilyFlags family;
  std::string out = "synthetic.csv";
  bool fractional = false;
  bool positive_only = false;
};

int run_synth(const SynthCmd& c) {
  const auto start = Clock::now();
  if (c.n < 2) throw odcal::ValidationError("synth: --n must be at least 2");
  odcal::SyntheticOptions opt;
  opt.n = c.n;
  opt.seed = c.seed;
  opt.total = c.total;
  opt.family = c.family.point();
  opt.integer_counts = !c.fractional;
  opt.emit_zero_pairs = !c.positive_only;
  const auto table = odcal::generate_synthetic(opt);
  {
    auto out = open_out(c.out);
    odcal::write_survey_csv(table, out);
  }
  json config = {{"n", c.n},
                 {"seed", c.seed},
                 {"total", c.total},
                 {"family", c.family.family},
                 {"params", odcal::to_json(opt.family.params)},
                 {"fractional", c.fractional},
                 {"positive_only", c.positive_only}};
  write_json(c.out + ".manifest.json", manifest("synth", {}, config, start));
  std::cout << "wrote " << table.records.size() << " records to " << c.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct ReportCmd {
  std::vector<std::string> inputs;
  std::string csv;
};

int run_report(const ReportCmd& c) {
  struct Row {
    odcal::CalibrationResult result;
    std::string source;
    bool duplicate = false;
  };
  std::vector<Row> rows;
  for (const auto& path : c.inputs) {
    std::ifstream in(path);
    if (!in) throw odcal::ParseError("cannot open '" + path + "'");
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw odcal::ParseError(path + ": " + e.what());
    }
    rows.push_back({odcal::calibration_from_json(j), path, false});
  }
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = 0; b < rows.size(); ++b) {
      if (a != b && rows[a].result.family == rows[b].result.family) rows[a].duplicate = true;
    }
    if (rows[a].result.n != rows.front().result.n) {
      std::cerr << "warning: " << rows[a].source << " has n=" << rows[a].result.n << " but " << rows.front().source
                << " has n=" << rows.front().result.n << "\n";
    }
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& x, const Row& y) { return x.result.best_residual < y.result.best_residual; });

  std::ostringstream csv;
  csv << "family,residual,alpha,beta,gamma,method,n,duplicate,source\n";
  std::cout << std::left << std::setw(17) << "family" << std::setw(14) << "residual" << std::setw(12) << "alpha"
            << std::setw(10) << "beta" << std::setw(10) << "gamma" << std::setw(12) << "method" << "flags\n";
  for (const auto& r : rows) {
    const auto& res = r.result;
    const auto f = [](double v) { return odcal::detail::format_double(v); };
    std::ostringstream resid;
    resid << std::setprecision(7) << res.best_residual;
    std::cout << std::left << std::setw(17) << odcal::to_string(res.family) << std::setw(14) << resid.str()
              << std::setw(12) << f(res.best.alpha) << std::setw(10) << f(res.best.beta) << std::setw(10)
              << f(res.best.gamma) << std::setw(12) << res.method << (r.duplicate ? "duplicate" : "") << "\n";
    csv << odcal::to_string(res.family) << ',' << f(res.best_residual) << ',' << f(res.best.alpha) << ','
        << f(res.best.beta) << ',' << f(res.best.gamma) << ',' << res.method << ',' << res.n << ','
        << (r.duplicate ? 1 : 0) << ',' << r.source << '\n';
  }
  if (!c.csv.empty()) {
    auto out = open_out(c.csv);
    out << csv.str();
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropy-model origin-destination estimation and cost-function calibration"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  SolveCmd solve;
  auto* solve_app = app.add_subcommand("solve", "solve the entropy model for one cost-family point");
  solve_app->add_option("input", solve.input, "survey CSV or problem bundle JSON")->required();
  solve_app->add_option("--out", solve.out_dir, "output directory");
  solve.family.add(*solve_app, false);
  solve.solver.add(*solve_app);

  CalibrateCmd calibrate;
  CalibrateCmd sweep;
  auto add_calibrate = [](CLI::App& sub, CalibrateCmd& c, bool is_sweep) {
    sub.add_option("input", c.input, "survey CSV or problem bundle JSON")->required();
    sub.add_option("--out", c.out_dir, "output directory");
    c.family.add(sub, true);
    c.solver.add(sub);
    sub.add_option("--residual-norm", c.residual_norm, "n2 (divide by n^2), pairs (observed pairs) or none")
        ->check(CLI::IsMember({"n2", "pairs", "none"}));
    sub.add_flag_callback("--normalized-residual", [&c] { c.residual_norm = "n2"; }, "alias for --residual-norm n2");
    sub.add_option("--jobs", c.jobs, "worker threads for grid evaluation")->check(CLI::PositiveNumber);
    if (is_sweep) {
      sub.add_option("--profile", c.profile, "parameter to profile (alpha, beta or gamma)")->required();
      return;
    }
    sub.add_option("--method", c.method, "grid, anneal, piyavskii or multistart")
        ->check(CLI::IsMember({"grid", "anneal", "piyavskii", "multistart"}));
    sub.add_option("--seed", c.seed, "random seed (anneal, multistart)");
    sub.add_option("--t0", c.t0, "annealing initial temperature");
    sub.add_option("--cooling", c.cooling, "annealing cooling factor");
    sub.add_option("--temperatures", c.temperatures, "annealing temperature levels");
    sub.add_option("--steps", c.steps, "annealing proposals per temperature");
    sub.add_option("--step-size", c.step_size, "annealing proposal half-width, as a fraction of each range");
    sub.add_option("--lipschitz", c.lipschitz, "Lipschitz constant for the broken-line method");
    sub.add_option("--tol", c.tol, "broken-line method tolerance");
    sub.add_option("--starts", c.starts, "multistart: number of random starts");
  };
  auto* calibrate_app = app.add_subcommand("calibrate", "fit cost-family parameters to a survey");
  add_calibrate(*calibrate_app, calibrate, false);
  auto* sweep_app = app.add_subcommand("sweep", "evaluate a full grid and emit residual curves and a profile");
  add_calibrate(*sweep_app, sweep, true);

  SynthCmd synth;
  auto* synth_app = app.add_subcommand("synth", "generate a synthetic survey from the entropy model");
  synth_app->add_option("--n", synth.n, "number of zones");
  synth_app->add_option("--seed", synth.seed, "random seed");
  synth_app->add_option("--total", synth.total, "population N");
  synth_app->add_option("--out", synth.out, "output CSV path");
  synth_app->add_flag("--fractional", synth.fractional, "keep exact (non-integer) counts");
  synth_app->add_flag("--positive-only", synth.positive_only, "omit pairs with zero commuters");
  synth.family.add(*synth_app, false);

  ReportCmd report;
  auto* report_app = app.add_subcommand("report", "compare calibration results");
  report_app->add_option("inputs", report.inputs, "calibration.json files")->required();
  report_app->add_option("--csv", report.csv, "also write the table as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kParse;
  }

  try {
    if (*solve_app) return run_solve(solve);
    if (*calibrate_app) return run_calibrate(calibrate, "calibrate");
    if (*sweep_app) return run_calibrate(sweep, "sweep");
    if (*synth_app) return run_synth(synth);
    if (*report_app) return run_report(report);
  } catch (const odcal::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kParse;
  } catch (const odcal::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const odcal::SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNotConverged;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kParse;
  }
  return kOk;
}
