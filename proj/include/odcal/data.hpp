#pragma once

// Survey ingestion. The input is a five-column CSV:
//
//   zone_i, zone_j, commuters (living in i, working in j), mean time (min), mean straight-line distance
//
// with an optional header row. build_problem() turns the records into the
// dense matrices the solvers consume, imputing costs for unobserved pairs.

#include "odcal/core.hpp"
#include "odcal/costs.hpp"
#include "odcal/solvers.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

namespace odcal {

struct ObservationRecord {
  std::string zone_i;
  std::string zone_j;
  double commuters = 0.0;
  double avg_time = 0.0;
  double avg_dist = 0.0;

  bool operator==(const ObservationRecord&) const = default;
};

struct ObservationTable {
  std::vector<ObservationRecord> records;

  bool operator==(const ObservationTable&) const = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

/// Integer-looking ids compare numerically, everything else lexicographically
/// (numbers before names).
inline bool zone_less(const std::string& a, const std::string& b) {
  long long ia = 0, ib = 0;
  const auto ra = std::from_chars(a.data(), a.data() + a.size(), ia);
  const auto rb = std::from_chars(b.data(), b.data() + b.size(), ib);
  const bool na = ra.ec == std::errc() && ra.ptr == a.data() + a.size();
  const bool nb = rb.ec == std::errc() && rb.ptr == b.data() + b.size();
  if (na && nb) return ia < ib;
  if (na != nb) return na;
  return a < b;
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Reads the survey CSV. Errors carry the 1-based line number: ParseError for
/// a malformed row, ValidationError for negative values or a repeated pair.
inline ObservationTable load_survey_csv(std::istream& in, const std::string& source = "<input>") {
  ObservationTable table;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    const auto fields = detail::split_fields(line);

    double values[3] = {0.0, 0.0, 0.0};
    bool numeric = fields.size() == 5;
    for (int k = 0; numeric && k < 3; ++k) numeric = detail::parse_double(fields[2 + k], values[k]);
    if (first_content) {
      first_content = false;
      // Header: leading field is not a number and the value columns are not
      // numbers either (zone ids may be names).
      double probe = 0.0;
      if (!numeric && !detail::parse_double(fields[0], probe)) continue;
    }
    if (fields.size() != 5) {
      throw ParseError(where + "expected 5 fields, got " + std::to_string(fields.size()));
    }
    if (!numeric) throw ParseError(where + "non-numeric commuter/time/distance field");
    if (fields[0].empty() || fields[1].empty()) throw ParseError(where + "empty zone id");

    ObservationRecord rec{fields[0], fields[1], values[0], values[1], values[2]};
    if (!std::isfinite(rec.commuters) || !std::isfinite(rec.avg_time) || !std::isfinite(rec.avg_dist)) {
      throw ParseError(where + "non-finite value");
    }
    if (rec.commuters < 0.0 || rec.avg_time < 0.0 || rec.avg_dist < 0.0) {
      throw ValidationError(where + "negative value");
    }
    if (!seen.emplace(rec.zone_i, rec.zone_j).second) {
      throw ValidationError(where + "duplicate pair (" + rec.zone_i + ", " + rec.zone_j + ")");
    }
    table.records.push_back(std::move(rec));
  }
  return table;
}

inline ObservationTable load_survey_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open survey file '" + path + "'");
  return load_survey_csv(in, path);
}

inline void write_survey_csv(const ObservationTable& table, std::ostream& out) {
  out << "zone_i,zone_j,commuters,avg_time,avg_dist\n";
  for (const auto& r : table.records) {
    out << r.zone_i << ',' << r.zone_j << ',' << detail::format_double(r.commuters) << ','
        << detail::format_double(r.avg_time) << ',' << detail::format_double(r.avg_dist) << '\n';
  }
}

/// Where each cost entry came from.
enum class Provenance : std::uint8_t { observed = 0, symmetric = 1, row_col_mean = 2, global_mean = 3 };

using ProvenanceMask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense calibration problem assembled from a survey.
struct SurveyProblem {
  std::vector<std::string> zones;
  Vector departures;  // L_i, persons
  Vector arrivals;    // W_j, persons
  Matrix observed;    // d_obs at counts scale, 0 where unobserved
  Matrix time;
  Matrix dist;
  ProvenanceMask provenance;
  std::vector<std::string> dropped_zones;    // no trips in either direction
  std::vector<std::string> source_only_zones;  // departures but no arrivals
  std::vector<std::string> sink_only_zones;    // arrivals but no departures

  std::size_t n() const { return zones.size(); }
  double total() const { return observed.sum(); }

  Marginals marginals() const {
    return Marginals(normalized_shares(departures), normalized_shares(arrivals), total());
  }
  CorrespondenceMatrix observed_counts() const { return CorrespondenceMatrix::counts(observed); }
  bool solvable() const { return source_only_zones.empty() && sink_only_zones.empty(); }

  bool operator==(const SurveyProblem& o) const {
    return zones == o.zones && departures == o.departures && arrivals == o.arrivals && observed == o.observed &&
           time == o.time && dist == o.dist && provenance == o.provenance && dropped_zones == o.dropped_zones &&
           source_only_zones == o.source_only_zones && sink_only_zones == o.sink_only_zones;
  }
};

namespace detail {

/// Fills unobserved entries: symmetric counterpart, else the mean of observed
/// entries in row i and column j, else the global observed mean.
inline void impute(Matrix& values, const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& seen,
                   ProvenanceMask& prov) {
  const Eigen::Index n = values.rows();
  double global_sum = 0.0;
  std::size_t global_count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (seen(i, j)) {
        global_sum += values(i, j);
        ++global_count;
      }
    }
  }
  const double global_mean = global_count > 0 ? global_sum / static_cast<double>(global_count) : 0.0;
  const Matrix observed = values;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (seen(i, j)) {
        prov(i, j) = static_cast<std::uint8_t>(Provenance::observed);
        continue;
      }
      if (seen(j, i)) {
        values(i, j) = observed(j, i);
        prov(i, j) = static_cast<std::uint8_t>(Provenance::symmetric);
        continue;
      }
      double sum = 0.0;
      std::size_t count = 0;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (seen(i, k)) sum += observed(i, k), ++count;
        if (seen(k, j) && k != i) sum += observed(k, j), ++count;
      }
      if (count > 0) {
        values(i, j) = sum / static_cast<double>(count);
        prov(i, j) = static_cast<std::uint8_t>(Provenance::row_col_mean);
      } else {
        values(i, j) = global_mean;
        prov(i, j) = static_cast<std::uint8_t>(Provenance::global_mean);
      }
    }
  }
}

}  // namespace detail

inline SurveyProblem build_problem(const ObservationTable& table) {
  detail::require(!table.records.empty(), "build_problem: empty survey table");

  std::map<std::string, double> out_total, in_total;
  for (const auto& r : table.records) {
    out_total[r.zone_i] += r.commuters;
    in_total[r.zone_j] += r.commuters;
    out_total.try_emplace(r.zone_j, 0.0);
    in_total.try_emplace(r.zone_i, 0.0);
  }

  SurveyProblem p;
  std::vector<std::string> all;
  for (const auto& [zone, _] : out_total) all.push_back(zone);
  std::sort(all.begin(), all.end(), detail::zone_less);
  for (const auto& z : all) {
    const double dep = out_total[z];
    const double arr = in_total[z];
    if (dep == 0.0 && arr == 0.0) {
      p.dropped_zones.push_back(z);
      continue;
    }
    if (arr == 0.0) p.source_only_zones.push_back(z);
    if (dep == 0.0) p.sink_only_zones.push_back(z);
    p.zones.push_back(z);
  }
  detail::require(p.zones.size() >= 2, "build_problem: fewer than two zones carry trips");

  std::map<std::string, Eigen::Index> index;
  for (std::size_t k = 0; k < p.zones.size(); ++k) index[p.zones[k]] = static_cast<Eigen::Index>(k);

  const auto n = static_cast<Eigen::Index>(p.zones.size());
  p.observed = Matrix::Zero(n, n);
  p.time = Matrix::Zero(n, n);
  p.dist = Matrix::Zero(n, n);
  p.provenance = ProvenanceMask::Zero(n, n);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> seen =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Constant(n, n, false);
  for (const auto& r : table.records) {
    const auto i = index.find(r.zone_i);
    const auto j = index.find(r.zone_j);
    if (i == index.end() || j == index.end()) continue;  // record of a dropped zone (zero commuters)
    p.observed(i->second, j->second) = r.commuters;
    p.time(i->second, j->second) = r.avg_time;
    p.dist(i->second, j->second) = r.avg_dist;
    seen(i->second, j->second) = true;
  }
  ProvenanceMask dist_prov = p.provenance;
  detail::impute(p.time, seen, p.provenance);
  detail::impute(p.dist, seen, dist_prov);

  p.departures = p.observed.rowwise().sum();
  p.arrivals = p.observed.colwise().sum().transpose();
  return p;
}

inline nlohmann::json to_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json to_json(const Vector& v) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index n) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) throw ParseError("matrix: expected " + std::to_string(n) + " rows");
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) throw ParseError("matrix: ragged row");
    for (Eigen::Index k = 0; k < n; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

inline Vector vector_from_json(const nlohmann::json& j, Eigen::Index n) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) throw ParseError("vector: expected " + std::to_string(n) + " entries");
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

/// Problem bundle written next to every solve/calibration for reproducibility.
inline nlohmann::json to_json(const SurveyProblem& p) {
  nlohmann::json j;
  j["zones"] = p.zones;
  j["total"] = p.total();
  j["departures"] = to_json(p.departures);
  j["arrivals"] = to_json(p.arrivals);
  j["observed"] = to_json(p.observed);
  j["time"] = to_json(p.time);
  j["dist"] = to_json(p.dist);
  auto prov = nlohmann::json::array();
  for (Eigen::Index i = 0; i < p.provenance.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < p.provenance.cols(); ++k) row.push_back(static_cast<int>(p.provenance(i, k)));
    prov.push_back(std::move(row));
  }
  j["provenance"] = std::move(prov);
  j["provenance_legend"] = {"observed", "symmetric", "row_col_mean", "global_mean"};
  j["dropped_zones"] = p.dropped_zones;
  j["source_only_zones"] = p.source_only_zones;
  j["sink_only_zones"] = p.sink_only_zones;
  if (p.solvable()) {
    const Marginals m = p.marginals();
    j["l"] = to_json(m.l());
    j["w"] = to_json(m.w());
  }
  return j;
}

inline SurveyProblem problem_from_json(const nlohmann::json& j) {
  try {
    SurveyProblem p;
    p.zones = j.at("zones").get<std::vector<std::string>>();
    const auto n = static_cast<Eigen::Index>(p.zones.size());
    p.departures = vector_from_json(j.at("departures"), n);
    p.arrivals = vector_from_json(j.at("arrivals"), n);
    p.observed = matrix_from_json(j.at("observed"), n);
    p.time = matrix_from_json(j.at("time"), n);
    p.dist = matrix_from_json(j.at("dist"), n);
    p.provenance = ProvenanceMask::Zero(n, n);
    const auto& prov = j.at("provenance");
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < n; ++k) {
        p.provenance(i, k) = static_cast<std::uint8_t>(prov.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<int>());
      }
    }
    p.dropped_zones = j.at("dropped_zones").get<std::vector<std::string>>();
    p.source_only_zones = j.at("source_only_zones").get<std::vector<std::string>>();
    p.sink_only_zones = j.at("sink_only_zones").get<std::vector<std::string>>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("problem bundle: ") + e.what());
  }
}

/// Rounds nonnegative reals to integers with the same (integer) total by
/// largest remainder; ties go to the lower flat index.
inline Matrix round_preserving_total(const Matrix& x, long long total) {
  Matrix out = x.array().floor().matrix();
  long long assigned = 0;
  for (Eigen::Index k = 0; k < out.size(); ++k) assigned += static_cast<long long>(out.data()[k]);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return x.data()[a] - out.data()[a] > x.data()[b] - out.data()[b];
  });
  for (std::size_t k = 0; assigned < total && k < order.size(); ++k, ++assigned) out.data()[order[k]] += 1.0;
  return out;
}

struct SyntheticOptions {
  std::size_t n = 22;
  std::uint64_t seed = 1;
  CostFamily family{FamilyKind::power_time, {26.76, 0.0, 0.09}};
  long long total = 1965;
  SolverConfig solver = SolverConfig::sinkhorn_defaults();
  // Largest-remainder rounding to whole commuters. Off gives the exact model
  // matrix (fractional counts), i.e. a noiseless survey.
  bool integer_counts = true;
  // Emit pairs whose count is zero so their time/distance stays observed
  // rather than imputed.
  bool emit_zero_pairs = true;
};

/// Generator output with the ground truth it was drawn from.
struct SyntheticSurvey {
  ObservationTable table;
  Marginals marginals;
  Matrix time;
  Matrix dist;
  Matrix counts;
};

/// Forward model for closed-loop tests: draw symmetric time (U[5,90]) and
/// distance (U[1,40]) matrices and positive marginals, solve the entropy
/// model at the given family and scale to the population.
inline SyntheticSurvey generate_synthetic_survey(const SyntheticOptions& opt) {
  detail::require(opt.n >= 2, "generate_synthetic: n must be at least 2");
  detail::require(opt.total > 0, "generate_synthetic: population must be positive");
  opt.family.validate();

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> time_dist(5.0, 90.0);
  std::uniform_real_distribution<double> dist_dist(1.0, 40.0);
  std::uniform_real_distribution<double> share(0.5, 1.5);

  const auto n = static_cast<Eigen::Index>(opt.n);
  Matrix time(n, n), dist(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      time(i, j) = time(j, i) = time_dist(rng);
      dist(i, j) = dist(j, i) = dist_dist(rng);
    }
  }
  Vector l(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) l(i) = share(rng);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = share(rng);
  const Marginals m(normalized_shares(l), normalized_shares(w), static_cast<double>(opt.total));

  const CostMatrix cost = evaluate_family(opt.family, time, dist);
  const SolveResult solved = sinkhorn_solve(cost, m, opt.solver);
  if (!solved.report.converged) throw SolverError("generate_synthetic: solver did not converge");

  const Matrix exact = solved.primal.values() * static_cast<double>(opt.total);
  Matrix counts = opt.integer_counts ? round_preserving_total(exact, opt.total) : exact;
  ObservationTable table;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (counts(i, j) <= 0.0 && !opt.emit_zero_pairs) continue;
      table.records.push_back({std::to_string(i + 1), std::to_string(j + 1), counts(i, j), time(i, j), dist(i, j)});
    }
  }
  return {std::move(table), m, std::move(time), std::move(dist), std::move(counts)};
}

inline ObservationTable generate_synthetic(const SyntheticOptions& opt) { return generate_synthetic_survey(opt).table; }

}  // namespace odcal
