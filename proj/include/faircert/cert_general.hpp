#pragma once

#include "faircert/certificate.hpp"

namespace faircert {

struct CellResult {
  enum class Status { Feasible, Infeasible, Pruned };
  CellBounds cell;
  Status status = Status::Infeasible;
  double value = 0.0;
  std::vector<double> x;  // S*C, populated when Feasible
};

/// Convex relaxation of the worst-case loss restricted to one (k, r) grid
/// cell: maximize over x_{s,y} in [(1 - gamma_bar^2)^2, 1] the corner-split
/// objective, subject to sum sqrt(p k_hi r_hi x) >= 1 - rho^2. Cells failing
/// the simplex corner tests or the distance test at x = 1 are Infeasible
/// without invoking the solver. Requires finite M.
CellResult cell_bound(const CellBounds& cell, const StatsTable& stats, double rho);

/// General-shifting certificate: max of cell_bound over the uniform T-grid
/// partition of the (k, r) marginals. Binary axes partition one coordinate
/// and mirror the complement, so S=C=2 costs T^2 cells. Skew options clip
/// the partitioned range. Value is clamped to M.
Certificate certify_general(const StatsTable& stats, double rho, int T,
                            const SkewOptions& skew = {}, int jobs = 1);

/// Finite-sampling variant (confidence 1 - 3*S*C*delta): the objective uses
/// conservative interval endpoints of the derived quantities and the masses
/// join x as decision variables inside their confidence boxes.
Certificate certify_general_fs(const StatsTable& stats, double rho, int T,
                               double delta, const SkewOptions& skew = {},
                               int jobs = 1);

namespace detail {
/// Testing hook: disables the pre-bound cell pruning so the soundness
/// property (pruning never changes the value) can be checked.
void set_cell_pruning(bool enabled);
bool cell_pruning();
}  // namespace detail

}  // namespace faircert
