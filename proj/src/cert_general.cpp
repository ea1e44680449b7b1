#include "faircert/cert_general.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <cstdio>
#include <limits>
#include <numeric>

#include "faircert/cert_sensitive.hpp"
#include "faircert/parallel.hpp"

namespace faircert {

namespace detail {
namespace {
std::atomic<bool> g_pruning{true};
}
void set_cell_pruning(bool enabled) { g_pruning.store(enabled); }
bool cell_pruning() { return g_pruning.load(); }
}  // namespace detail

namespace {

constexpr double kSqrtFloor = 1e-14;

using Vec = std::vector<double>;

// Statistics snapshot feeding the per-cell objective, already resolved to
// the endpoints the active mode uses (exact values, or the confidence
// endpoints paired so the objective can only grow).
struct ModeStats {
  int S = 0, C = 0;
  double M = 0.0;
  Vec ec;      // E + C (coefficient of the corner split)
  Vec cm;      // C entering the -x terms
  Vec sqrt_v;  // sqrt(V)
  Vec xlo;     // (1 - gamma_bar^2)^2
  Vec p;       // masses (empirical)
  bool fs = false;
  Vec p_lo, p_hi;  // fs only
};

double cell_c(double E, double V, double M) {
  double gap = std::max(M - E, 1e-12);
  return V == 0.0 ? M - E : M - E - V / gap;
}

ModeStats exact_stats(const StatsTable& stats) {
  if (!stats.M)
    throw InputError("general-shifting certification needs a finite loss "
                     "bound M (supply an explicit clip bound for BCE)");
  ModeStats ms;
  ms.S = stats.S;
  ms.C = stats.C;
  ms.M = *stats.M;
  size_t sc = stats.cells.size();
  ms.ec.resize(sc);
  ms.cm.resize(sc);
  ms.sqrt_v.resize(sc);
  ms.xlo.resize(sc);
  ms.p = stats.masses();
  for (size_t i = 0; i < sc; ++i) {
    const auto& c = stats.cells[i];
    double cc = cell_c(c.E, c.V, ms.M);
    ms.ec[i] = c.E + cc;
    ms.cm[i] = cc;
    ms.sqrt_v[i] = std::sqrt(c.V);
    double g2 = gamma_bar_sq(c.E, c.V, ms.M);
    ms.xlo[i] = (1.0 - g2) * (1.0 - g2);
  }
  return ms;
}

ModeStats fs_stats(const StatsTable& stats, double delta) {
  ModeStats ms = exact_stats(stats);
  IntervalTable iv = build_interval_table(stats, delta);
  ms.fs = true;
  size_t sc = stats.cells.size();
  ms.p_lo.resize(sc);
  ms.p_hi.resize(sc);
  for (size_t i = 0; i < sc; ++i) {
    const auto& c = iv.cells[i];
    ms.ec[i] = c.E.hi + c.C_hi;
    ms.cm[i] = c.C_lo;
    ms.sqrt_v[i] = std::sqrt(c.V_hi);
    ms.xlo[i] = (1.0 - c.gamma_bar_sq_hi) * (1.0 - c.gamma_bar_sq_hi);
    ms.p_lo[i] = c.p.lo;
    ms.p_hi[i] = c.p.hi;
  }
  return ms;
}

// Per-cell problem data once the corners are fixed.
struct CellTerms {
  Vec const_term;  // hi*(E+C)_+ + lo*(E+C)_-
  Vec beta;        // 2*hi*sqrt(V), coefficient of sqrt(x(1-x))
  Vec a;           // lo*(C)_+ + hi*(C)_-, coefficient of -x
  Vec d;           // sqrt(p*hi) (exact mode constraint coefficient)
  Vec sqrt_hi;     // sqrt(hi) (fs mode: constraint is sum sqrt_hi*sqrt(p*x))
  Vec xlo;
  double thresh = 0.0;
  double const_sum = 0.0;
};

CellTerms make_terms(const ModeStats& ms, const CellBounds& cell, double rho) {
  size_t sc = ms.ec.size();
  CellTerms t;
  t.const_term.resize(sc);
  t.beta.resize(sc);
  t.a.resize(sc);
  t.d.resize(sc);
  t.sqrt_hi.resize(sc);
  t.xlo = ms.xlo;
  t.thresh = 1.0 - rho * rho;
  for (int s = 0; s < ms.S; ++s)
    for (int y = 0; y < ms.C; ++y) {
      size_t i = static_cast<size_t>(s) * ms.C + y;
      double hi = cell.k_hi[s] * cell.r_hi[y];
      double lo = cell.k_lo[s] * cell.r_lo[y];
      t.const_term[i] = hi * std::max(ms.ec[i], 0.0) + lo * std::min(ms.ec[i], 0.0);
      t.beta[i] = 2.0 * hi * ms.sqrt_v[i];
      t.a[i] = lo * std::max(ms.cm[i], 0.0) + hi * std::min(ms.cm[i], 0.0);
      t.d[i] = std::sqrt(ms.p[i] * hi);
      t.sqrt_hi[i] = std::sqrt(hi);
      t.const_sum += t.const_term[i];
    }
  return t;
}

double objective_at(const CellTerms& t, std::span<const double> x) {
  double v = t.const_sum;
  for (size_t i = 0; i < t.beta.size(); ++i) {
    double prod = std::max(x[i] * (1.0 - x[i]), 0.0);
    v += t.beta[i] * std::sqrt(prod) - t.a[i] * x[i];
  }
  return v;
}

// Cheap upper pre-bound: drop the distance constraint and maximize each
// coordinate's beta*sqrt(x(1-x)) - a*x over its own box (closed form; the
// unconstrained peak is x = (1 - a/sqrt(a^2+b^2))/2, clipped).
double pre_bound(const CellTerms& t) {
  double v = t.const_sum;
  for (size_t i = 0; i < t.beta.size(); ++i) {
    double a = t.a[i], b = t.beta[i], xlo = t.xlo[i];
    double x_star = b > 0.0 ? 0.5 * (1.0 - a / std::sqrt(a * a + b * b))
                            : (a > 0.0 ? 0.0 : 1.0);
    double x = std::clamp(x_star, xlo, 1.0);
    v += b * std::sqrt(std::max(x * (1.0 - x), 0.0)) - a * x;
  }
  return v;
}

// Unconstrained per-coordinate maximizer clipped to the box.
Vec start_point(const CellTerms& t) {
  size_t sc = t.beta.size();
  Vec x(sc);
  for (size_t i = 0; i < sc; ++i) {
    double a = t.a[i], b = t.beta[i];
    double xs;
    if (b > 0.0) {
      double u = a / std::sqrt(a * a + b * b);
      xs = 0.5 * (1.0 - u);
    } else {
      xs = a > 0.0 ? 0.0 : 1.0;
    }
    x[i] = std::clamp(xs, t.xlo[i], 1.0);
  }
  return x;
}

struct CellSolve {
  double value = 0.0;
  Vec x;
  int iterations = 0;
};

// Exact-mode cell solve. Feasibility at x = 1 (the constraint maximizer) is
// guaranteed by the caller's corner test, so a feasible candidate always
// exists.
CellSolve solve_cell(const CellTerms& t) {
  size_t sc = t.beta.size();
  ProblemSpec spec;
  spec.dim = static_cast<int>(sc);
  spec.lower = t.xlo;
  spec.upper.assign(sc, 1.0);
  spec.objective = [&t](std::span<const double> x) { return objective_at(t, x); };
  spec.gradient = [&t, sc](std::span<const double> x, std::span<double> g) {
    for (size_t i = 0; i < sc; ++i) {
      double prod = std::max(x[i] * (1.0 - x[i]), kSqrtFloor);
      g[i] = t.beta[i] * (1.0 - 2.0 * x[i]) / (2.0 * std::sqrt(prod)) - t.a[i];
    }
  };
  spec.ineq = [&t, sc](std::span<const double> x) {
    double aff = 0.0;
    for (size_t i = 0; i < sc; ++i) aff += t.d[i] * std::sqrt(x[i]);
    return t.thresh - aff;
  };
  spec.ineq_gradient = [&t, sc](std::span<const double> x, std::span<double> g) {
    for (size_t i = 0; i < sc; ++i)
      g[i] = -t.d[i] / (2.0 * std::sqrt(std::max(x[i], kSqrtFloor)));
  };
  spec.has_ineq = true;

  Vec start = start_point(t);
  if (spec.ineq(start) > 0.0) {
    // Blend toward x = 1 until feasible; the constraint grows monotonically.
    double lo = 0.0, hi = 1.0;
    Vec probe(sc);
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      for (size_t i = 0; i < sc; ++i) probe[i] = start[i] + mid * (1.0 - start[i]);
      if (spec.ineq(probe) > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    for (size_t i = 0; i < sc; ++i) start[i] = start[i] + hi * (1.0 - start[i]);
  }

  SolveReport rep = maximize_concave(spec, start);

  CellSolve best;
  best.iterations = rep.iterations;
  Vec ones(sc, 1.0);
  best.value = objective_at(t, ones);
  best.x = ones;
  if (spec.ineq(start) <= 0.0) {
    double v = objective_at(t, start);
    if (v > best.value) {
      best.value = v;
      best.x = start;
    }
  }
  if (rep.violation <= 1e-8) {
    double v = objective_at(t, rep.x);
    if (v > best.value) {
      best.value = v;
      best.x = rep.x;
    }
  }
  return best;
}

// Finite-sampling cell solve over (x, p) jointly; p rides along only through
// the distance constraint.
CellSolve solve_cell_fs(const CellTerms& t, const ModeStats& ms,
                        const Vec& p_corner) {
  size_t sc = t.beta.size();
  ProblemSpec spec;
  spec.dim = static_cast<int>(2 * sc);
  spec.lower = t.xlo;
  spec.upper.assign(sc, 1.0);
  spec.lower.insert(spec.lower.end(), ms.p_lo.begin(), ms.p_lo.end());
  spec.upper.insert(spec.upper.end(), ms.p_hi.begin(), ms.p_hi.end());
  LinearEquality psum;
  for (size_t i = 0; i < sc; ++i)
    psum.terms.push_back({static_cast<int>(sc + i), 1.0});
  psum.rhs = 1.0;
  spec.equalities.push_back(psum);

  spec.objective = [&t, sc](std::span<const double> z) {
    return objective_at(t, z.subspan(0, sc));
  };
  spec.gradient = [&t, sc](std::span<const double> z, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
    for (size_t i = 0; i < sc; ++i) {
      double prod = std::max(z[i] * (1.0 - z[i]), kSqrtFloor);
      g[i] = t.beta[i] * (1.0 - 2.0 * z[i]) / (2.0 * std::sqrt(prod)) - t.a[i];
    }
  };
  spec.ineq = [&t, sc](std::span<const double> z) {
    double aff = 0.0;
    for (size_t i = 0; i < sc; ++i)
      aff += t.sqrt_hi[i] * std::sqrt(std::max(z[sc + i] * z[i], 0.0));
    return t.thresh - aff;
  };
  spec.ineq_gradient = [&t, sc](std::span<const double> z, std::span<double> g) {
    for (size_t i = 0; i < sc; ++i) {
      double root = std::sqrt(std::max(z[sc + i] * z[i], kSqrtFloor));
      g[i] = -t.sqrt_hi[i] * z[sc + i] / (2.0 * root);
      g[sc + i] = -t.sqrt_hi[i] * z[i] / (2.0 * root);
    }
  };
  spec.has_ineq = true;

  Vec start = start_point(t);
  start.insert(start.end(), p_corner.begin(), p_corner.end());
  if (spec.ineq(start) > 0.0) {
    double lo = 0.0, hi = 1.0;
    Vec probe(start);
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      for (size_t i = 0; i < sc; ++i) probe[i] = start[i] + mid * (1.0 - start[i]);
      if (spec.ineq(probe) > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    for (size_t i = 0; i < sc; ++i) start[i] = start[i] + hi * (1.0 - start[i]);
  }

  SolveReport rep = maximize_concave(spec, start);

  CellSolve best;
  best.iterations = rep.iterations;
  best.x.assign(sc, 1.0);
  best.value = objective_at(t, best.x);
  if (rep.violation <= 1e-8) {
    double v = objective_at(t, std::span<const double>(rep.x).subspan(0, sc));
    if (v > best.value) {
      best.value = v;
      best.x.assign(rep.x.begin(), rep.x.begin() + sc);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Cell enumeration
// ---------------------------------------------------------------------------

struct AxisPieces {
  // Piece i of the partitioned coordinate(s); binary axes partition
  // coordinate 0 and mirror coordinate 1.
  Vec lo, hi;
  bool binary = false;
  int dim = 0;
  size_t combos = 0;  // number of cells contributed by this axis
};

AxisPieces partition_axis(int dim, int T,
                          const std::vector<std::array<double, 2>>& skew_box) {
  AxisPieces ap;
  ap.dim = dim;
  ap.binary = (dim == 2);
  double lo = 0.0, hi = 1.0;
  if (!skew_box.empty()) {
    lo = skew_box[0][0];
    hi = skew_box[0][1];
  }
  double width = hi - lo;
  int pieces = width > 0.0 ? T : 1;
  ap.lo.resize(pieces);
  ap.hi.resize(pieces);
  for (int i = 0; i < pieces; ++i) {
    ap.lo[i] = lo + width * i / pieces;
    ap.hi[i] = lo + width * (i + 1) / pieces;
  }
  if (ap.binary) {
    ap.combos = pieces;
  } else {
    ap.combos = 1;
    for (int s = 0; s < dim; ++s) ap.combos *= static_cast<size_t>(pieces);
  }
  return ap;
}

void fill_axis(const AxisPieces& ap, size_t combo, Vec& lo_out, Vec& hi_out) {
  lo_out.resize(ap.dim);
  hi_out.resize(ap.dim);
  if (ap.binary) {
    lo_out[0] = ap.lo[combo];
    hi_out[0] = ap.hi[combo];
    lo_out[1] = 1.0 - ap.hi[combo];
    hi_out[1] = 1.0 - ap.lo[combo];
    return;
  }
  size_t pieces = ap.lo.size();
  for (int s = ap.dim - 1; s >= 0; --s) {
    size_t digit = combo % pieces;
    combo /= pieces;
    lo_out[s] = ap.lo[digit];
    hi_out[s] = ap.hi[digit];
  }
}

bool corner_test(const CellBounds& cell) {
  double klo = std::accumulate(cell.k_lo.begin(), cell.k_lo.end(), 0.0);
  double khi = std::accumulate(cell.k_hi.begin(), cell.k_hi.end(), 0.0);
  double rlo = std::accumulate(cell.r_lo.begin(), cell.r_lo.end(), 0.0);
  double rhi = std::accumulate(cell.r_hi.begin(), cell.r_hi.end(), 0.0);
  return klo <= 1.0 + 1e-12 && khi >= 1.0 - 1e-12 && rlo <= 1.0 + 1e-12 &&
         rhi >= 1.0 - 1e-12;
}

// Max of the distance affinity over the cell (at x = 1, and over p when fs).
double corner_affinity(const CellTerms& t, const ModeStats& ms, Vec* p_star) {
  if (!ms.fs) {
    if (p_star) *p_star = ms.p;
    return std::accumulate(t.d.begin(), t.d.end(), 0.0);
  }
  return max_weighted_sqrt_sum(t.sqrt_hi, ms.p_lo, ms.p_hi, p_star);
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

Certificate sweep(const ModeStats& ms, double rho, int T,
                  const SkewOptions& skew, int jobs, double confidence) {
  if (!(rho > 0.0 && rho <= 1.0)) throw InputError("rho must be in (0, 1]");
  if (T < 1) throw InputError("granularity T must be >= 1");

  AxisPieces kax = partition_axis(ms.S, T, skew_k_box(skew, ms.S));
  AxisPieces rax = partition_axis(ms.C, T, skew_r_box(skew, ms.C));
  const size_t total = kax.combos * rax.combos;
  if (total > 4'000'000)
    std::fprintf(stderr,
                 "faircert: sweeping %zu cells (T=%d, S=%d, C=%d); this may "
                 "take a while\n",
                 total, T, ms.S, ms.C);

  auto cell_at = [&](size_t idx) {
    CellBounds cell;
    fill_axis(kax, idx / rax.combos, cell.k_lo, cell.k_hi);
    fill_axis(rax, idx % rax.combos, cell.r_lo, cell.r_hi);
    return cell;
  };

  struct Pre {
    size_t idx = 0;
    double bound = 0.0;
  };
  std::vector<Pre> candidates;
  candidates.reserve(total);
  std::vector<double> affinities(total, 0.0);
  double max_affinity = 0.0;
  for (size_t idx = 0; idx < total; ++idx) {
    CellBounds cell = cell_at(idx);
    if (!corner_test(cell)) continue;
    CellTerms t = make_terms(ms, cell, rho);
    double aff = corner_affinity(t, ms, nullptr);
    affinities[idx] = aff;
    max_affinity = std::max(max_affinity, aff);
    if (aff < t.thresh) continue;  // infeasible even at x = 1
    candidates.push_back({idx, pre_bound(t)});
  }

  Certificate cert;
  cert.scenario = Scenario::General;
  cert.rho = rho;
  cert.T = T;
  cert.confidence = confidence;
  cert.min_feasible_rho = std::sqrt(std::clamp(1.0 - max_affinity, 0.0, 1.0));

  if (candidates.empty()) {
    cert.feasible = false;
    cert.diagnostics.status = to_string(SolveStatus::Infeasible);
    return cert;
  }

  std::sort(candidates.begin(), candidates.end(), [](const Pre& a, const Pre& b) {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.idx < b.idx;
  });

  auto solve_one = [&](size_t idx) {
    CellBounds cell = cell_at(idx);
    CellTerms t = make_terms(ms, cell, rho);
    if (!ms.fs) return std::make_pair(solve_cell(t), cell);
    Vec p_star;
    corner_affinity(t, ms, &p_star);
    return std::make_pair(solve_cell_fs(t, ms, p_star), cell);
  };

  // First candidate seeds the incumbent; remaining cells with a pre-bound
  // above it are solved in parallel. The evaluated set is deterministic, so
  // the job count never changes any output.
  auto [first, first_cell] = solve_one(candidates[0].idx);
  double v0 = first.value;
  const bool prune = detail::cell_pruning();
  std::vector<size_t> eval_ids;
  for (size_t i = 1; i < candidates.size(); ++i)
    if (!prune || candidates[i].bound > v0) eval_ids.push_back(candidates[i].idx);

  std::vector<std::pair<CellSolve, CellBounds>> results(eval_ids.size());
  parallel_for(eval_ids.size(), jobs,
               [&](size_t i) { results[i] = solve_one(eval_ids[i]); });

  size_t best_idx = candidates[0].idx;
  CellSolve best = first;
  CellBounds best_cell = first_cell;
  long iterations = first.iterations;
  for (size_t i = 0; i < eval_ids.size(); ++i) {
    iterations += results[i].first.iterations;
    const auto& sol = results[i].first;
    if (sol.value > best.value ||
        (sol.value == best.value && eval_ids[i] < best_idx)) {
      best = sol;
      best_cell = results[i].second;
      best_idx = eval_ids[i];
    }
  }

  cert.feasible = true;
  cert.value = std::min(best.value, ms.M);
  cert.x = best.x;
  cert.winning_cell = best_cell;
  cert.k = best_cell.k_hi;
  cert.r = best_cell.r_hi;
  cert.diagnostics.status = to_string(SolveStatus::Optimal);
  cert.diagnostics.iterations =
      static_cast<int>(std::min<long>(iterations, std::numeric_limits<int>::max()));
  cert.diagnostics.violation = 0.0;
  return cert;
}

}  // namespace

CellResult cell_bound(const CellBounds& cell, const StatsTable& stats, double rho) {
  stats.validate();
  if (static_cast<int>(cell.k_lo.size()) != stats.S ||
      static_cast<int>(cell.k_hi.size()) != stats.S ||
      static_cast<int>(cell.r_lo.size()) != stats.C ||
      static_cast<int>(cell.r_hi.size()) != stats.C)
    throw InputError("cell bounds do not match the table dimensions");
  ModeStats ms = exact_stats(stats);
  CellResult result;
  result.cell = cell;
  if (!corner_test(cell)) {
    result.status = CellResult::Status::Infeasible;
    return result;
  }
  CellTerms t = make_terms(ms, cell, rho);
  if (corner_affinity(t, ms, nullptr) < t.thresh) {
    result.status = CellResult::Status::Infeasible;
    return result;
  }
  CellSolve sol = solve_cell(t);
  result.status = CellResult::Status::Feasible;
  result.value = sol.value;
  result.x = sol.x;
  return result;
}

Certificate certify_general(const StatsTable& stats, double rho, int T,
                            const SkewOptions& skew, int jobs) {
  stats.validate();
  return sweep(exact_stats(stats), rho, T, skew, jobs, 1.0);
}

Certificate certify_general_fs(const StatsTable& stats, double rho, int T,
                               double delta, const SkewOptions& skew, int jobs) {
  stats.validate();
  double confidence = 1.0 - 3.0 * stats.S * stats.C * delta;
  return sweep(fs_stats(stats, delta), rho, T, skew, jobs, confidence);
}

}  // namespace faircert
