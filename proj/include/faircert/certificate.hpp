#pragma once

#include <optional>

#include "faircert/solver.hpp"
#include "faircert/types.hpp"

namespace faircert {

enum class Scenario { Sensitive, General };

std::string to_string(Scenario scenario);
Scenario scenario_from_string(const std::string& name);

/// Non-skewness options: box constraints on how far the shifted marginals
/// may drift from 50/50. Only meaningful on binary dimensions.
struct SkewOptions {
  std::optional<double> delta_s;  // sensitive-attribute skew bound, [0, 1]
  std::optional<double> delta_l;  // label skew bound, [0, 1]
};

/// Axis-aligned region of the (k, r) grid partition.
struct CellBounds {
  std::vector<double> k_lo, k_hi;  // size S
  std::vector<double> r_lo, r_hi;  // size C
};

struct SolveDiagnostics {
  std::string status;
  int iterations = 0;
  double violation = 0.0;
  bool heuristic_global = false;
};

struct Certificate {
  Scenario scenario = Scenario::Sensitive;
  double rho = 0.0;
  bool feasible = false;
  std::optional<double> value;
  std::vector<double> k, r;  // optimizer (general: winning-cell upper corners)
  std::vector<double> x;     // general only: winning-cell x grid, S*C row-major
  std::optional<CellBounds> winning_cell;  // general only
  int T = 0;                               // general only
  double confidence = 1.0;
  double min_feasible_rho = 0.0;
  SolveDiagnostics diagnostics;
};

}  // namespace faircert
