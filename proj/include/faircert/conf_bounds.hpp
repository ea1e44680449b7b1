#pragma once

#include "faircert/types.hpp"

namespace faircert {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

/// Hoeffding interval for a [0, M]-valued mean: half-width
/// M * sqrt(ln(2/delta) / (2n)), clamped into [0, M].
Interval mean_interval(double mean_hat, long n, double M, double delta);

/// Maurer-Pontil interval for the standard deviation around sqrt(s_n^2):
/// half-width M * sqrt(2 ln(2/delta) / (n-1)); lo clamped at 0, hi clamped
/// at M/2 (the largest possible standard deviation of a [0, M] variable).
Interval std_interval(double s_n, long n, double M, double delta);

/// Hoeffding interval for a cell proportion: half-width
/// sqrt(ln(2/delta) / (2 total)), clamped into [0, 1].
Interval proportion_interval(long count, long total, double delta);

/// Squared applicability radius of the shifted-loss bound:
/// gamma_bar^2 = 1 - (1 + (M-E)^2 / V)^{-1/2}. V = 0 gives 1 exactly;
/// E = M with V > 0 gives 0.
double gamma_bar_sq(double E, double V, double M);

/// Closed-form upper bound on the mean loss of any distribution within
/// Hellinger distance rho of one with mean E and variance V, loss in [0, M]:
///   E + 2 C_rho sqrt(V) + rho^2 (2 - rho^2) (M - E - V/(M-E)),
/// C_rho = sqrt(rho^2 (1-rho^2)^2 (2-rho^2)). Requires rho^2 <= gamma_bar^2;
/// outside that radius throws SolverError (callers may fall back to M).
/// Result clamped to <= M; rho = 0 returns exactly E.
double gramian_upper_bound(double E, double V, double M, double rho);

/// Per-cell high-confidence endpoints for E, sqrt(V), p plus the derived
/// quantities the finite-sampling certifiers consume. Each underlying
/// interval holds with probability 1 - delta; union-bound accounting is the
/// certifiers' job.
struct CellIntervals {
  Interval E;        // mean, clamped to [0, M]
  Interval sd;       // standard deviation, clamped to [0, M/2]
  Interval p;        // proportion, clamped to [0, 1]
  double V_lo = 0.0;  // sd.lo^2
  double V_hi = 0.0;  // sd.hi^2
  double C_lo = 0.0;  // M - E.hi - V_hi / (M - E.hi)
  double C_hi = 0.0;  // M - E.lo - V_lo / (M - E.lo)
  double gamma_bar_sq_hi = 0.0;  // 1 - (1 + (M - E.lo)^2 / V_hi)^{-1/2}
};

struct IntervalTable {
  int S = 0;
  int C = 0;
  double M = 0.0;
  double delta = 0.0;
  std::vector<CellIntervals> cells;  // row-major, s * C + y

  const CellIntervals& cell(int s, int y) const {
    return cells[static_cast<size_t>(s) * C + y];
  }
};

/// Builds the interval table for a stats table with finite M (required).
IntervalTable build_interval_table(const StatsTable& stats, double delta);

}  // namespace faircert
