#pragma once

// Parametric generalized-cost families evaluated on observed mean travel
// time and straight-line distance matrices, and the parameter grids swept
// during calibration.

#include "odcal/core.hpp"

#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace odcal {

enum class FamilyKind {
  linear_time,      // alpha * time
  power_time,       // alpha * time^gamma
  power_time_dist,  // alpha * time^gamma * dist^beta
  powerlog_time,    // alpha * time^gamma - beta * ln(time)
  powerlog_dist,    // alpha * dist^gamma - beta * ln(dist)
};

inline constexpr std::array<FamilyKind, 5> kAllFamilies{FamilyKind::linear_time, FamilyKind::power_time,
                                                        FamilyKind::power_time_dist, FamilyKind::powerlog_time,
                                                        FamilyKind::powerlog_dist};

inline const char* to_string(FamilyKind k) {
  switch (k) {
    case FamilyKind::linear_time: return "linear_time";
    case FamilyKind::power_time: return "power_time";
    case FamilyKind::power_time_dist: return "power_time_dist";
    case FamilyKind::powerlog_time: return "powerlog_time";
    case FamilyKind::powerlog_dist: return "powerlog_dist";
  }
  return "?";
}

inline FamilyKind parse_family_kind(std::string_view s) {
  for (FamilyKind k : kAllFamilies) {
    if (s == to_string(k)) return k;
  }
  throw ValidationError("unknown cost family '" + std::string(s) + "'");
}

inline bool uses_beta(FamilyKind k) { return k != FamilyKind::linear_time && k != FamilyKind::power_time; }
inline bool uses_gamma(FamilyKind k) { return k != FamilyKind::linear_time; }

/// Cost-family parameters. Components a family does not use sit at their
/// neutral values (beta = 0, gamma = 1).
struct FamilyParams {
  double alpha = 1.0;
  double beta = 0.0;
  double gamma = 1.0;

  auto operator<=>(const FamilyParams&) const = default;
};

struct CostFamily {
  FamilyKind kind = FamilyKind::linear_time;
  FamilyParams params;

  void validate() const {
    detail::require(std::isfinite(params.alpha) && params.alpha > 0.0, "cost family: alpha must be positive");
    detail::require(std::isfinite(params.beta) && params.beta >= 0.0, "cost family: beta must be nonnegative");
    detail::require(std::isfinite(params.gamma) && params.gamma >= 0.0, "cost family: gamma must be nonnegative");
    detail::require(uses_beta(kind) || params.beta == 0.0,
                    std::string("cost family: ") + to_string(kind) + " takes no beta");
    detail::require(uses_gamma(kind) || params.gamma == 1.0,
                    std::string("cost family: ") + to_string(kind) + " takes no gamma");
  }
};

/// Inputs below this value are raised to it before powers and logarithms, so
/// zero self-pair times never reach ln(0) and ln(c) stays >= 0.
inline constexpr double kDefaultInputClamp = 1.0;

inline CostMatrix evaluate_family(const CostFamily& fam, const Matrix& time, const Matrix& dist,
                                  double clamp = kDefaultInputClamp) {
  fam.validate();
  detail::require(time.rows() == time.cols() && time.rows() == dist.rows() && dist.rows() == dist.cols(),
                  "evaluate_family: time and distance matrices must be square and of equal size");
  detail::require(time.allFinite() && dist.allFinite(), "evaluate_family: non-finite input");
  detail::require((time.array() >= 0.0).all() && (dist.array() >= 0.0).all(), "evaluate_family: negative input");
  detail::require(clamp > 0.0, "evaluate_family: clamp must be positive");

  const auto t = time.array().max(clamp);
  const auto d = dist.array().max(clamp);
  const auto& [alpha, beta, gamma] = fam.params;
  Matrix out;
  switch (fam.kind) {
    case FamilyKind::linear_time: out = (alpha * t).matrix(); break;
    case FamilyKind::power_time: out = (alpha * t.pow(gamma)).matrix(); break;
    case FamilyKind::power_time_dist: out = (alpha * t.pow(gamma) * d.pow(beta)).matrix(); break;
    case FamilyKind::powerlog_time: out = (alpha * t.pow(gamma) - beta * t.log()).matrix(); break;
    case FamilyKind::powerlog_dist: out = (alpha * d.pow(gamma) - beta * d.log()).matrix(); break;
  }
  if (!out.allFinite()) throw std::logic_error("evaluate_family produced a non-finite cost after clamping");
  return CostMatrix(std::move(out));
}

/// One swept parameter: lo, lo + step, ... up to hi. A fixed value has lo == hi.
struct Axis {
  double lo = 0.0;
  double hi = 0.0;
  double step = 1.0;

  static Axis fixed(double v) { return {v, v, 1.0}; }

  bool swept() const { return hi > lo; }

  void validate(const char* name) const {
    detail::require(std::isfinite(lo) && std::isfinite(hi) && std::isfinite(step),
                    std::string("grid ") + name + ": non-finite bound");
    detail::require(lo <= hi, std::string("grid ") + name + ": lower bound exceeds upper bound");
    detail::require(step > 0.0, std::string("grid ") + name + ": step must be positive");
  }

  std::size_t size() const {
    return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  }

  std::vector<double> values() const {
    const std::size_t count = size();
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k) out[k] = lo + static_cast<double>(k) * step;
    if (std::abs(out.back() - hi) <= 1e-9 * std::max(1.0, std::abs(step))) out.back() = hi;
    return out;
  }
};

/// Parses "lo:hi:step" or a single scalar (a fixed axis).
inline Axis parse_axis(const std::string& text) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t colon = text.find(':', start);
    const std::string piece = text.substr(start, colon == std::string::npos ? std::string::npos : colon - start);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(piece, &used);
    } catch (const std::exception&) {
      throw ValidationError("bad grid axis '" + text + "' (expected lo:hi:step)");
    }
    if (used != piece.size()) throw ValidationError("bad grid axis '" + text + "' (expected lo:hi:step)");
    parts.push_back(v);
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (parts.size() == 1) return Axis::fixed(parts[0]);
  if (parts.size() != 3) throw ValidationError("bad grid axis '" + text + "' (expected lo:hi:step)");
  Axis axis{parts[0], parts[1], parts[2]};
  axis.validate("axis");
  return axis;
}

struct GridSpec {
  Axis alpha = Axis::fixed(1.0);
  Axis beta = Axis::fixed(0.0);
  Axis gamma = Axis::fixed(1.0);

  void validate() const {
    alpha.validate("alpha");
    beta.validate("beta");
    gamma.validate("gamma");
  }

  std::size_t swept_count() const {
    return static_cast<std::size_t>(alpha.swept()) + static_cast<std::size_t>(beta.swept()) +
           static_cast<std::size_t>(gamma.swept());
  }
};

/// Lexicographic enumeration: alpha outermost, then beta, then gamma.
inline std::vector<FamilyParams> family_grid(const GridSpec& spec) {
  spec.validate();
  const auto as = spec.alpha.values();
  const auto bs = spec.beta.values();
  const auto gs = spec.gamma.values();
  std::vector<FamilyParams> out;
  out.reserve(as.size() * bs.size() * gs.size());
  for (double a : as) {
    for (double b : bs) {
      for (double g : gs) out.push_back({a, b, g});
    }
  }
  if (out.empty()) throw ValidationError("family_grid: empty grid");
  return out;
}

}  // namespace odcal
