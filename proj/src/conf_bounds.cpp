#include "faircert/conf_bounds.hpp"

#include <algorithm>
#include <cmath>

namespace faircert {

namespace {

constexpr double kDenomGuard = 1e-12;

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must be in (0,1)");
}

}  // namespace

Interval mean_interval(double mean_hat, long n, double M, double delta) {
  check_delta(delta);
  if (n < 1) throw InputError("mean_interval needs n >= 1");
  if (!(M > 0.0)) throw InputError("mean_interval needs M > 0");
  double hw = M * std::sqrt(std::log(2.0 / delta) / (2.0 * n));
  return {std::clamp(mean_hat - hw, 0.0, M), std::clamp(mean_hat + hw, 0.0, M)};
}

Interval std_interval(double s_n, long n, double M, double delta) {
  check_delta(delta);
  if (n < 2) throw InputError("std_interval needs n >= 2");
  if (!(M > 0.0)) throw InputError("std_interval needs M > 0");
  double hw = M * std::sqrt(2.0 * std::log(2.0 / delta) / (n - 1));
  double cap = 0.5 * M;  // max std of a [0,M]-valued variable
  return {std::clamp(s_n - hw, 0.0, cap), std::clamp(s_n + hw, 0.0, cap)};
}

Interval proportion_interval(long count, long total, double delta) {
  check_delta(delta);
  if (total < 1) throw InputError("proportion_interval needs total >= 1");
  if (count < 0 || count > total) throw InputError("count must be in [0, total]");
  double center = static_cast<double>(count) / total;
  double hw = std::sqrt(std::log(2.0 / delta) / (2.0 * total));
  return {std::clamp(center - hw, 0.0, 1.0), std::clamp(center + hw, 0.0, 1.0)};
}

double gamma_bar_sq(double E, double V, double M) {
  if (E > M + 1e-12) throw InputError("gamma_bar_sq needs E <= M");
  if (V < 0.0) throw InputError("gamma_bar_sq needs V >= 0");
  if (V == 0.0) return 1.0;
  double gap = M - E;
  if (gap <= 0.0) return 0.0;
  return 1.0 - 1.0 / std::sqrt(1.0 + gap * gap / V);
}

double gramian_upper_bound(double E, double V, double M, double rho) {
  if (!(rho >= 0.0)) throw InputError("rho must be non-negative");
  if (E > M + 1e-12) throw InputError("gramian_upper_bound needs E <= M");
  if (V < 0.0) throw InputError("gramian_upper_bound needs V >= 0");
  if (rho == 0.0) return E;
  double r2 = rho * rho;
  if (r2 > gamma_bar_sq(E, V, M) + 1e-15)
    throw SolverError("rho outside the applicability radius gamma_bar");
  double c_rho = std::sqrt(r2 * (1.0 - r2) * (1.0 - r2) * (2.0 - r2));
  double gap = std::max(M - E, kDenomGuard);
  double c = V == 0.0 ? M - E : M - E - V / gap;
  double bound = E + 2.0 * c_rho * std::sqrt(V) + r2 * (2.0 - r2) * c;
  return std::min(bound, M);
}

IntervalTable build_interval_table(const StatsTable& stats, double delta) {
  check_delta(delta);
  if (!stats.M)
    throw InputError("interval table needs a finite loss bound M");
  stats.validate();
  const double M = *stats.M;
  const long total = stats.total_count();

  IntervalTable table;
  table.S = stats.S;
  table.C = stats.C;
  table.M = M;
  table.delta = delta;
  table.cells.resize(stats.cells.size());
  for (size_t i = 0; i < stats.cells.size(); ++i) {
    const auto& c = stats.cells[i];
    CellIntervals iv;
    iv.E = mean_interval(c.E, c.n, M, delta);
    iv.sd = std_interval(std::sqrt(c.V), c.n, M, delta);
    iv.p = proportion_interval(c.n, total, delta);
    iv.V_lo = iv.sd.lo * iv.sd.lo;
    iv.V_hi = iv.sd.hi * iv.sd.hi;
    double gap_hi = std::max(M - iv.E.hi, kDenomGuard);
    double gap_lo = std::max(M - iv.E.lo, kDenomGuard);
    iv.C_lo = M - iv.E.hi - iv.V_hi / gap_hi;
    iv.C_hi = M - iv.E.lo - iv.V_lo / gap_lo;
    iv.gamma_bar_sq_hi = gamma_bar_sq(iv.E.lo, iv.V_hi, M);
    table.cells[i] = iv;
  }
  return table;
}

}  // namespace faircert
