#include "faircert/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "faircert/kernels/row_scan.hpp"

namespace faircert {

namespace {

constexpr double kFeasTol = 1e-8;
constexpr double kStatTol = 1e-6;
constexpr double kSqrtFloor = 1e-14;
constexpr int kOuterCap = 200;
constexpr int kInnerCap = 500;

using Vec = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

// Projection onto {box} intersected with disjoint-support equalities.
// Per equality, bisection on the shift tau with x_i = clip(v_i - tau a_i).
class Projector {
 public:
  Projector(const ProblemSpec& spec) : spec_(spec), in_group_(spec.dim, false) {
    for (const auto& eq : spec.equalities)
      for (auto [i, a] : eq.terms) {
        if (i < 0 || i >= spec.dim) throw InputError("equality index out of range");
        if (in_group_[i])
          throw InputError("equality constraints must have disjoint supports");
        in_group_[i] = true;
        (void)a;
      }
  }

  void operator()(std::span<const double> v, std::span<double> out) const {
    for (int i = 0; i < spec_.dim; ++i)
      out[i] = std::clamp(v[i], spec_.lower[i], spec_.upper[i]);
    for (const auto& eq : spec_.equalities) project_group(v, eq, out);
  }

 private:
  void project_group(std::span<const double> v, const LinearEquality& eq,
                     std::span<double> out) const {
    auto value_at = [&](double tau) {
      double s = 0.0;
      for (auto [i, a] : eq.terms)
        s += a * std::clamp(v[i] - tau * a, spec_.lower[i], spec_.upper[i]);
      return s;
    };
    double max_reachable = 0.0, min_reachable = 0.0;
    for (auto [i, a] : eq.terms) {
      max_reachable += a * (a > 0 ? spec_.upper[i] : spec_.lower[i]);
      min_reachable += a * (a > 0 ? spec_.lower[i] : spec_.upper[i]);
    }
    if (eq.rhs > max_reachable + 1e-12 || eq.rhs < min_reachable - 1e-12)
      throw InputError("equality constraint infeasible within the box");
    double lo = -1.0, hi = 1.0;
    while (value_at(lo) < eq.rhs && lo > -1e18) lo *= 2.0;
    while (value_at(hi) > eq.rhs && hi < 1e18) hi *= 2.0;
    for (int it = 0; it < 100; ++it) {
      double mid = 0.5 * (lo + hi);
      if (value_at(mid) >= eq.rhs)
        lo = mid;
      else
        hi = mid;
    }
    double tau = 0.5 * (lo + hi);
    for (auto [i, a] : eq.terms)
      out[i] = std::clamp(v[i] - tau * a, spec_.lower[i], spec_.upper[i]);
  }

  const ProblemSpec& spec_;
  std::vector<bool> in_group_;
};

void check_spec(const ProblemSpec& spec) {
  if (spec.dim < 1) throw InputError("problem dimension must be >= 1");
  if (static_cast<int>(spec.lower.size()) != spec.dim ||
      static_cast<int>(spec.upper.size()) != spec.dim)
    throw InputError("box bounds must match the problem dimension");
  for (int i = 0; i < spec.dim; ++i)
    if (spec.lower[i] > spec.upper[i] + 1e-15)
      throw InputError("box has lower > upper");
  if (!spec.objective || !spec.gradient)
    throw InputError("objective and gradient evaluators are required");
  if (spec.has_ineq && (!spec.ineq || !spec.ineq_gradient))
    throw InputError("nonlinear constraint evaluators are required");
}

// Projected gradient ascent with Armijo backtracking on a smooth function.
// Returns the number of iterations used.
template <typename F, typename G>
int ascend(const Projector& project, F&& fval, G&& fgrad, Vec& x, int max_iters,
           double& step) {
  const int dim = static_cast<int>(x.size());
  Vec grad(dim), trial(dim), cand(dim);
  double fx = fval(x);
  int it = 0;
  int stall = 0;
  for (; it < max_iters; ++it) {
    fgrad(x, grad);
    bool moved = false;
    double t = step;
    for (int bt = 0; bt < 60; ++bt) {
      for (int i = 0; i < dim; ++i) trial[i] = x[i] + t * grad[i];
      project(trial, cand);
      double gain = dot(grad, cand) - dot(grad, x);
      double fc = fval(cand);
      if (fc >= fx + 1e-4 * gain && fc > fx) {
        double delta = inf_norm_diff(cand, x);
        double improvement = fc - fx;
        x = cand;
        fx = fc;
        step = t * 2.0;
        moved = true;
        if (delta < 1e-15) return it + 1;
        // sub-noise progress a few times in a row means converged
        if (improvement < 1e-12 * (1.0 + std::fabs(fx))) {
          if (++stall >= 4) return it + 1;
        } else {
          stall = 0;
        }
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;  // projected-gradient stationary
  }
  return it;
}

struct AugLagState {
  double lambda = 0.0;
  double mu = 10.0;
};

double kkt_residual(const ProblemSpec& spec, const Projector& project,
                    const Vec& x, double lambda) {
  Vec grad(spec.dim), tmp(spec.dim), moved(spec.dim), proj(spec.dim);
  spec.gradient(x, grad);
  if (spec.has_ineq && lambda > 0.0) {
    spec.ineq_gradient(x, tmp);
    for (int i = 0; i < spec.dim; ++i) grad[i] -= lambda * tmp[i];
  }
  for (int i = 0; i < spec.dim; ++i) moved[i] = x[i] + grad[i];
  project(moved, proj);
  return inf_norm_diff(proj, x);
}

}  // namespace

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::MaxIterations: return "max_iterations";
  }
  return "?";
}

SolveReport maximize_concave(const ProblemSpec& spec, std::span<const double> start) {
  check_spec(spec);
  if (static_cast<int>(start.size()) != spec.dim)
    throw InputError("start vector has wrong dimension");
  Projector project(spec);

  Vec x(spec.dim);
  project(start, x);

  SolveReport report;
  AugLagState al;

  auto al_value = [&](const Vec& v) {
    double f = spec.objective(v);
    if (spec.has_ineq) {
      double t = spec.ineq(v) + al.lambda / al.mu;
      if (t > 0.0) f -= 0.5 * al.mu * t * t;
    }
    return f;
  };
  Vec scratch(spec.dim);
  auto al_grad = [&](const Vec& v, Vec& g) {
    spec.gradient(v, g);
    if (spec.has_ineq) {
      double t = spec.ineq(v) + al.lambda / al.mu;
      if (t > 0.0) {
        spec.ineq_gradient(v, scratch);
        for (int i = 0; i < spec.dim; ++i) g[i] -= al.mu * t * scratch[i];
      }
    }
  };

  const int outer_cap = spec.has_ineq ? kOuterCap : 1;
  double prev_viol = std::numeric_limits<double>::infinity();
  double step = 1.0;  // carried across outer rounds
  for (int outer = 0; outer < outer_cap; ++outer) {
    report.iterations += ascend(project, al_value, al_grad, x, kInnerCap, step);
    if (!spec.has_ineq) break;
    double gval = spec.ineq(x);
    double viol = std::max(0.0, gval);
    if (viol <= kFeasTol) {
      double resid = kkt_residual(spec, project, x, al.lambda);
      if (resid <= kStatTol) break;
    }
    al.lambda = std::max(0.0, al.lambda + al.mu * gval);
    if (viol > 0.25 * prev_viol && viol > kFeasTol)
      al.mu = std::min(al.mu * 4.0, 1e12);
    prev_viol = viol;
  }

  double viol = spec.has_ineq ? std::max(0.0, spec.ineq(x)) : 0.0;
  if (spec.has_ineq && viol > kFeasTol) {
    // Dedicated feasibility phase: drive max(0, g)^2 down on the box.
    auto fv = [&](const Vec& v) {
      double t = std::max(0.0, spec.ineq(v));
      return -0.5 * t * t;
    };
    auto fg = [&](const Vec& v, Vec& g) {
      double t = std::max(0.0, spec.ineq(v));
      spec.ineq_gradient(v, g);
      for (int i = 0; i < spec.dim; ++i) g[i] *= -t;
    };
    double feas_step = 1.0;
    report.iterations += ascend(project, fv, fg, x, 2000, feas_step);
    viol = std::max(0.0, spec.ineq(x));
    if (viol > kFeasTol) {
      report.status = SolveStatus::Infeasible;
      report.x = x;
      report.value = spec.objective(x);
      report.violation = viol;
      return report;
    }
    // Feasible after all: resume one more constrained pass.
    al.lambda = 0.0;
    step = 1.0;
    report.iterations += ascend(project, al_value, al_grad, x, kInnerCap, step);
    viol = std::max(0.0, spec.ineq(x));
  }

  double resid = kkt_residual(spec, project, x, spec.has_ineq ? al.lambda : 0.0);
  report.status = (viol <= kFeasTol && resid <= kStatTol)
                      ? SolveStatus::Optimal
                      : SolveStatus::MaxIterations;
  report.x = x;
  report.value = spec.objective(x);
  report.violation = viol;
  return report;
}

double max_weighted_sqrt_sum(std::span<const double> a, std::span<const double> lo,
                             std::span<const double> hi,
                             std::vector<double>* argmax) {
  const size_t n = a.size();
  if (lo.size() != n || hi.size() != n)
    throw InputError("max_weighted_sqrt_sum: size mismatch");
  double lo_sum = 0.0, hi_sum = 0.0, a_sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (lo[i] > hi[i] + 1e-15 || lo[i] < -1e-15)
      throw InputError("max_weighted_sqrt_sum: bad box");
    if (!(a[i] >= 0.0)) throw InputError("max_weighted_sqrt_sum: negative weight");
    lo_sum += lo[i];
    hi_sum += hi[i];
    a_sum += a[i];
  }
  if (lo_sum > 1.0 + 1e-12 || hi_sum < 1.0 - 1e-12)
    throw InputError("max_weighted_sqrt_sum: box excludes the simplex");

  Vec x(n);
  auto fill = [&](double t) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) {
      x[i] = std::clamp(a[i] * a[i] * t, lo[i], hi[i]);
      s += x[i];
    }
    return s;
  };
  if (a_sum > 0.0) {
    double t_hi = 1.0;
    int doublings = 0;
    while (fill(t_hi) < 1.0 && doublings++ < 200) t_hi *= 2.0;
    if (fill(t_hi) >= 1.0) {
      double t_lo = 0.0;
      for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (t_lo + t_hi);
        if (fill(mid) < 1.0)
          t_lo = mid;
        else
          t_hi = mid;
      }
      fill(t_hi);
    }
  } else {
    fill(0.0);
  }
  // Weightless coordinates may need to absorb leftover mass.
  double total = 0.0;
  for (double v : x) total += v;
  if (total < 1.0 - 1e-12) {
    double leftover = 1.0 - total;
    for (size_t i = 0; i < n && leftover > 1e-15; ++i) {
      double room = hi[i] - x[i];
      double add = std::min(room, leftover);
      x[i] += add;
      leftover -= add;
    }
  }
  double value = 0.0;
  for (size_t i = 0; i < n; ++i) value += a[i] * std::sqrt(x[i]);
  if (argmax) *argmax = x;
  return value;
}

// ---------------------------------------------------------------------------
// Bilinear simplex maximization
// ---------------------------------------------------------------------------

namespace {

struct Box {
  double lo = 0.0, hi = 1.0;
};

Box box_of(const std::vector<std::array<double, 2>>& boxes, int i) {
  if (boxes.empty()) return {};
  Box b{boxes[i][0], boxes[i][1]};
  if (b.lo < 0.0 || b.hi > 1.0 || b.lo > b.hi + 1e-15)
    throw InputError("variable box must satisfy 0 <= lo <= hi <= 1");
  return b;
}

Vec make_grid(double lo, double hi, double step) {
  Vec pts;
  if (hi - lo < 1e-15) {
    pts.push_back(lo);
    return pts;
  }
  long n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  pts.reserve(n + 2);
  for (long i = 0; i <= n; ++i) pts.push_back(lo + static_cast<double>(i) * step);
  if (pts.back() < hi - 1e-15) pts.push_back(hi);
  pts.back() = std::min(pts.back(), hi);
  return pts;
}

void check_problem(const BilinearProblem& prob) {
  if (prob.S < 2 || prob.C < 2) throw InputError("need S >= 2 and C >= 2");
  size_t sc = static_cast<size_t>(prob.S) * prob.C;
  if (prob.E.size() != sc || prob.p.size() != sc)
    throw InputError("E and p must be S*C grids");
  if (!(prob.rho > 0.0 && prob.rho <= 1.0))
    throw InputError("rho must be in (0, 1]");
  if (!prob.k_box.empty() && prob.k_box.size() != static_cast<size_t>(prob.S))
    throw InputError("k box size mismatch");
  if (!prob.r_box.empty() && prob.r_box.size() != static_cast<size_t>(prob.C))
    throw InputError("r box size mismatch");
  if (!prob.p_intervals.empty() && prob.p_intervals.size() != sc)
    throw InputError("p interval size mismatch");
  double psum = 0.0;
  for (double v : prob.p) {
    if (!(v >= 0.0)) throw InputError("negative mass");
    psum += v;
  }
  if (std::fabs(psum - 1.0) > 1e-9) throw InputError("masses must sum to 1");
}

// Feasibility of a binary-binary point. With free p the cheap accept
// (empirical p) and reject (p upper endpoints) tests leave only a thin band
// that needs the exact box-simplex maximization.
class Feas22 {
 public:
  Feas22(const BilinearProblem& prob) : prob_(prob), thresh_(1.0 - prob.rho * prob.rho) {
    if (!prob.p_intervals.empty()) {
      for (int i = 0; i < 4; ++i) {
        p_lo_.push_back(prob.p_intervals[i].lo);
        p_hi_.push_back(prob.p_intervals[i].hi);
      }
    }
  }

  double threshold() const { return thresh_; }

  bool feasible(double k, double r) const {
    double w[4] = {k * r, k * (1.0 - r), (1.0 - k) * r, (1.0 - k) * (1.0 - r)};
    double aff_hat = 0.0;
    for (int i = 0; i < 4; ++i) aff_hat += std::sqrt(prob_.p[i] * w[i]);
    if (aff_hat >= thresh_) return true;
    if (prob_.p_intervals.empty()) return false;
    double aff_ub = 0.0;
    for (int i = 0; i < 4; ++i) aff_ub += std::sqrt(p_hi_[i] * w[i]);
    if (aff_ub < thresh_) return false;
    double a[4];
    for (int i = 0; i < 4; ++i) a[i] = std::sqrt(w[i]);
    return max_weighted_sqrt_sum(a, p_lo_, p_hi_) >= thresh_;
  }

 private:
  const BilinearProblem& prob_;
  double thresh_;
  Vec p_lo_, p_hi_;
};

double objective22(const BilinearProblem& prob, double k, double r) {
  return k * r * prob.E[0] + k * (1.0 - r) * prob.E[1] +
         (1.0 - k) * r * prob.E[2] + (1.0 - k) * (1.0 - r) * prob.E[3];
}

struct Candidate {
  double value = -std::numeric_limits<double>::infinity();
  double k = 0.0, r = 0.0;
  bool valid = false;
};

// Local refinement: repeatedly rescan a shrinking window around the best point.
Candidate refine22(const BilinearProblem& prob, const Feas22& feas, Candidate c,
                   double step, const Box& kb, const Box& rb) {
  double window = 2.0 * step;
  for (int round = 0; round < 4; ++round) {
    double sub = window / 40.0;
    Candidate best = c;
    Vec ks = make_grid(std::max(kb.lo, c.k - window), std::min(kb.hi, c.k + window), sub);
    Vec rs = make_grid(std::max(rb.lo, c.r - window), std::min(rb.hi, c.r + window), sub);
    for (double k : ks)
      for (double r : rs) {
        double obj = objective22(prob, k, r);
        if (obj <= best.value) continue;
        if (feas.feasible(k, r)) {
          best = {obj, k, r, true};
        }
      }
    c = best;
    window = sub;
  }
  return c;
}

// Feasible interval of t -> A sqrt(t) + B sqrt(1-t) >= thresh on [lo, hi].
// The function is concave, so the super-level set is one interval.
std::optional<std::pair<double, double>> feasible_interval(double A, double B,
                                                           double lo, double hi,
                                                           double thresh) {
  auto aff = [&](double t) {
    return A * std::sqrt(t) + B * std::sqrt(1.0 - t);
  };
  double denom = A * A + B * B;
  double peak = denom > 0.0 ? std::clamp(A * A / denom, lo, hi) : lo;
  if (aff(peak) < thresh) return std::nullopt;
  double left = lo, right = hi;
  if (aff(lo) < thresh) {
    double bad = lo, good = peak;
    for (int it = 0; it < 100; ++it) {
      double mid = 0.5 * (bad + good);
      if (aff(mid) >= thresh)
        good = mid;
      else
        bad = mid;
    }
    left = good;
  }
  if (aff(hi) < thresh) {
    double good = peak, bad = hi;
    for (int it = 0; it < 100; ++it) {
      double mid = 0.5 * (good + bad);
      if (aff(mid) >= thresh)
        good = mid;
      else
        bad = mid;
    }
    right = good;
  }
  return std::make_pair(left, right);
}

// Exact value of max over r for fixed k (fixed p): the objective is affine
// in r, so the maximum over the feasible interval sits at an endpoint.
Candidate best_r_for_k(const BilinearProblem& prob, double k, const Box& rb,
                       double thresh) {
  const auto& p = prob.p;
  double A = std::sqrt(p[0] * k) + std::sqrt(p[2] * (1.0 - k));
  double B = std::sqrt(p[1] * k) + std::sqrt(p[3] * (1.0 - k));
  auto iv = feasible_interval(A, B, rb.lo, rb.hi, thresh);
  Candidate c;
  if (!iv) return c;
  double lo_obj = objective22(prob, k, iv->first);
  double hi_obj = objective22(prob, k, iv->second);
  c = lo_obj >= hi_obj ? Candidate{lo_obj, k, iv->first, true}
                       : Candidate{hi_obj, k, iv->second, true};
  return c;
}

// Nested 1-D refinement of k with r solved exactly per point.
Candidate refine22_exact(const BilinearProblem& prob, Candidate c, double step,
                         const Box& kb, const Box& rb, double thresh) {
  double window = 2.0 * step;
  for (int round = 0; round < 6; ++round) {
    double sub = window / 40.0;
    Vec ks = make_grid(std::max(kb.lo, c.k - window), std::min(kb.hi, c.k + window), sub);
    Candidate best = c;
    for (double k : ks) {
      Candidate cand = best_r_for_k(prob, k, rb, thresh);
      if (cand.valid && cand.value > best.value) best = cand;
    }
    c = best;
    window = sub;
    if (window < 1e-12) break;
  }
  return c;
}

SolveReport solve_bilinear_22(const BilinearProblem& prob) {
  const Box kb = box_of(prob.k_box, 0);
  const Box rb = box_of(prob.r_box, 0);
  const double step = 1.0 / 2000.0;
  const Feas22 feas(prob);
  const double thresh = feas.threshold();

  Vec ks = make_grid(kb.lo, kb.hi, step);
  Vec rs = make_grid(rb.lo, rb.hi, step);
  Vec sqrt_r(rs.size()), sqrt_1mr(rs.size());
  for (size_t j = 0; j < rs.size(); ++j) {
    sqrt_r[j] = std::sqrt(rs[j]);
    sqrt_1mr[j] = std::sqrt(1.0 - rs[j]);
  }

  const bool p_free = !prob.p_intervals.empty();
  const auto scan = kernels::row_scan_kernel();

  std::vector<Candidate> row_best(ks.size());
  double max_affinity = 0.0;  // for the infeasibility report (empirical p)
  for (size_t i = 0; i < ks.size(); ++i) {
    double k = ks[i];
    double base = k * prob.E[1] + (1.0 - k) * prob.E[3];
    double slope = k * (prob.E[0] - prob.E[1]) + (1.0 - k) * (prob.E[2] - prob.E[3]);
    double c0 = std::sqrt(prob.p[0] * k) + std::sqrt(prob.p[2] * (1.0 - k));
    double c1 = std::sqrt(prob.p[1] * k) + std::sqrt(prob.p[3] * (1.0 - k));
    double denom = c0 * c0 + c1 * c1;
    if (denom > 0.0) {
      double r_star = std::clamp(c0 * c0 / denom, rb.lo, rb.hi);
      max_affinity = std::max(
          max_affinity, c0 * std::sqrt(r_star) + c1 * std::sqrt(1.0 - r_star));
    }
    if (!p_free) {
      auto res = scan(rs.data(), sqrt_r.data(), sqrt_1mr.data(),
                      static_cast<std::int64_t>(rs.size()), base, slope, c0, c1,
                      thresh);
      if (res.index >= 0) row_best[i] = {res.value, k, rs[res.index], true};
    } else {
      Candidate best;
      for (size_t j = 0; j < rs.size(); ++j) {
        double obj = base + slope * rs[j];
        if (best.valid && obj <= best.value) continue;
        if (feas.feasible(k, rs[j])) best = {obj, k, rs[j], true};
      }
      row_best[i] = best;
    }
  }

  // Top candidates with a separation radius, each refined locally.
  std::vector<size_t> order;
  for (size_t i = 0; i < ks.size(); ++i)
    if (row_best[i].valid) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (row_best[a].value != row_best[b].value)
      return row_best[a].value > row_best[b].value;
    return a < b;
  });
  std::vector<size_t> chosen;
  for (size_t i : order) {
    bool close = false;
    for (size_t c : chosen)
      if (std::fabs(ks[i] - ks[c]) <= 4.0 * step) close = true;
    if (!close) chosen.push_back(i);
    if (chosen.size() >= 16) break;
  }

  SolveReport report;
  report.iterations = static_cast<int>(ks.size());
  Candidate best;
  for (size_t i : chosen) {
    Candidate c = p_free ? refine22(prob, feas, row_best[i], step, kb, rb)
                         : refine22_exact(prob, row_best[i], step, kb, rb, thresh);
    if (c.valid && c.value > best.value) best = c;
  }

  if (!best.valid) {
    report.status = SolveStatus::Infeasible;
    report.violation = std::max(0.0, thresh - max_affinity);
    return report;
  }
  report.status = SolveStatus::Optimal;
  report.x = {best.k, 1.0 - best.k, best.r, 1.0 - best.r};
  report.value = objective22(prob, best.k, best.r);
  report.violation = 0.0;
  return report;
}

// Multi-start alternating maximization for S > 2 or C > 2. Each block is a
// linear objective over a convex feasible set, solved with maximize_concave;
// global optimality is not certified.
SolveReport solve_bilinear_alternating(const BilinearProblem& prob) {
  const int S = prob.S, C = prob.C;
  const size_t sc = static_cast<size_t>(S) * C;
  const bool p_free = !prob.p_intervals.empty();
  const double thresh = 1.0 - prob.rho * prob.rho;

  auto pm = [&](const Vec& pvars, size_t i) {
    return p_free ? pvars[i] : prob.p[i];
  };

  // Block solve over k (swap = false) or r (swap = true), with p decision
  // variables appended when p is free.
  auto block_solve = [&](Vec& k, Vec& r, Vec& pvars, bool over_r) {
    const int nblock = over_r ? C : S;
    ProblemSpec spec;
    spec.dim = nblock + (p_free ? static_cast<int>(sc) : 0);
    spec.lower.assign(spec.dim, 0.0);
    spec.upper.assign(spec.dim, 1.0);
    const auto& boxes = over_r ? prob.r_box : prob.k_box;
    for (int i = 0; i < nblock; ++i) {
      Box b = box_of(boxes, i);
      spec.lower[i] = b.lo;
      spec.upper[i] = b.hi;
    }
    LinearEquality simplex;
    for (int i = 0; i < nblock; ++i) simplex.terms.push_back({i, 1.0});
    simplex.rhs = 1.0;
    spec.equalities.push_back(simplex);
    if (p_free) {
      LinearEquality psum;
      for (size_t i = 0; i < sc; ++i) {
        spec.lower[nblock + i] = prob.p_intervals[i].lo;
        spec.upper[nblock + i] = prob.p_intervals[i].hi;
        psum.terms.push_back({nblock + static_cast<int>(i), 1.0});
      }
      psum.rhs = 1.0;
      spec.equalities.push_back(psum);
    }

    Vec lin(nblock, 0.0);
    for (int s = 0; s < S; ++s)
      for (int y = 0; y < C; ++y) {
        double e = prob.E[static_cast<size_t>(s) * C + y];
        if (over_r)
          lin[y] += k[s] * e;
        else
          lin[s] += r[y] * e;
      }
    spec.objective = [lin, nblock](std::span<const double> z) {
      double v = 0.0;
      for (int i = 0; i < nblock; ++i) v += lin[i] * z[i];
      return v;
    };
    spec.gradient = [lin, nblock](std::span<const double> z, std::span<double> g) {
      (void)z;
      std::fill(g.begin(), g.end(), 0.0);
      for (int i = 0; i < nblock; ++i) g[i] = lin[i];
    };

    auto affinity = [&, over_r](std::span<const double> z) {
      double aff = 0.0;
      for (int s = 0; s < S; ++s)
        for (int y = 0; y < C; ++y) {
          size_t i = static_cast<size_t>(s) * C + y;
          double kv = over_r ? k[s] : z[s];
          double rv = over_r ? z[y] : r[y];
          double pv = p_free ? z[nblock + i] : prob.p[i];
          aff += std::sqrt(pv * kv * rv);
        }
      return aff;
    };
    spec.ineq = [affinity, thresh](std::span<const double> z) {
      return thresh - affinity(z);
    };
    spec.ineq_gradient = [&, over_r, nblock](std::span<const double> z,
                                             std::span<double> g) {
      std::fill(g.begin(), g.end(), 0.0);
      for (int s = 0; s < S; ++s)
        for (int y = 0; y < C; ++y) {
          size_t i = static_cast<size_t>(s) * C + y;
          double kv = over_r ? k[s] : z[s];
          double rv = over_r ? z[y] : r[y];
          double pv = p_free ? z[nblock + i] : prob.p[i];
          double root = std::sqrt(std::max(pv * kv * rv, kSqrtFloor));
          if (over_r)
            g[y] -= 0.5 * pv * kv / root;
          else
            g[s] -= 0.5 * pv * rv / root;
          if (p_free) g[nblock + i] -= 0.5 * kv * rv / root;
        }
    };
    spec.has_ineq = true;

    Vec start(spec.dim);
    for (int i = 0; i < nblock; ++i) start[i] = over_r ? r[i] : k[i];
    if (p_free) for (size_t i = 0; i < sc; ++i) start[nblock + i] = pvars[i];
    SolveReport rep = maximize_concave(spec, start);
    for (int i = 0; i < nblock; ++i) (over_r ? r[i] : k[i]) = rep.x[i];
    if (p_free) for (size_t i = 0; i < sc; ++i) pvars[i] = rep.x[nblock + i];
    return rep;
  };

  auto full_objective = [&](const Vec& k, const Vec& r) {
    double v = 0.0;
    for (int s = 0; s < S; ++s)
      for (int y = 0; y < C; ++y)
        v += k[s] * r[y] * prob.E[static_cast<size_t>(s) * C + y];
    return v;
  };
  auto full_affinity = [&](const Vec& k, const Vec& r, const Vec& pvars) {
    double aff = 0.0;
    for (int s = 0; s < S; ++s)
      for (int y = 0; y < C; ++y) {
        size_t i = static_cast<size_t>(s) * C + y;
        aff += std::sqrt(pm(pvars, i) * k[s] * r[y]);
      }
    return aff;
  };

  std::mt19937_64 rng(0x5eedu);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  std::vector<std::pair<Vec, Vec>> starts;
  starts.push_back({Vec(S, 1.0 / S), Vec(C, 1.0 / C)});
  for (int s = 0; s < S; ++s)
    for (int y = 0; y < C; ++y) {
      Vec kv(S, 0.0), rv(C, 0.0);
      kv[s] = 1.0;
      rv[y] = 1.0;
      starts.push_back({kv, rv});
    }
  while (starts.size() < 16) {
    Vec kv(S), rv(C);
    double ksum = 0.0, rsum = 0.0;
    for (auto& v : kv) ksum += (v = unif(rng));
    for (auto& v : rv) rsum += (v = unif(rng));
    for (auto& v : kv) v /= ksum;
    for (auto& v : rv) v /= rsum;
    starts.push_back({kv, rv});
  }

  SolveReport best;
  best.status = SolveStatus::Infeasible;
  best.value = -std::numeric_limits<double>::infinity();
  best.violation = std::numeric_limits<double>::infinity();
  for (auto& [k0, r0] : starts) {
    Vec k = k0, r = r0, pvars(prob.p);
    SolveReport last;
    double prev = -std::numeric_limits<double>::infinity();
    for (int round = 0; round < 50; ++round) {
      block_solve(k, r, pvars, false);
      last = block_solve(k, r, pvars, true);
      double cur = full_objective(k, r);
      if (cur - prev < 1e-12) break;
      prev = cur;
    }
    double viol = std::max(0.0, thresh - full_affinity(k, r, pvars));
    double value = full_objective(k, r);
    bool feas = viol <= kFeasTol;
    bool best_feas = best.status != SolveStatus::Infeasible;
    if ((feas && (!best_feas || value > best.value)) ||
        (!feas && !best_feas && viol < best.violation)) {
      best.status = feas ? SolveStatus::Optimal : SolveStatus::Infeasible;
      best.x.assign(k.begin(), k.end());
      best.x.insert(best.x.end(), r.begin(), r.end());
      best.value = value;
      best.violation = viol;
      best.iterations += last.iterations;
    }
  }
  best.heuristic_global = true;
  if (best.status == SolveStatus::Infeasible) {
    best.value = 0.0;
    best.x.clear();
  }
  return best;
}

}  // namespace

SolveReport maximize_bilinear_simplex(const BilinearProblem& prob) {
  check_problem(prob);
  if (prob.S == 2 && prob.C == 2) {
    SolveReport rep = solve_bilinear_22(prob);
    if (rep.status == SolveStatus::Optimal) {
      // Report k ++ r like the general path.
      Vec k{rep.x[0], rep.x[1]}, r{rep.x[2], rep.x[3]};
      rep.x = k;
      rep.x.insert(rep.x.end(), r.begin(), r.end());
    }
    return rep;
  }
  return solve_bilinear_alternating(prob);
}

namespace {

// max over the boxed k-simplex of sum_s sqrt(k_s) * a_s for fixed r, where
// a_s = sum_y sqrt(p_{s,y} r_y).
double affinity_given_r(std::span<const double> p, int S, int C,
                        std::span<const double> r,
                        std::span<const std::array<double, 2>> k_box) {
  Vec a(S, 0.0);
  for (int s = 0; s < S; ++s)
    for (int y = 0; y < C; ++y)
      a[s] += std::sqrt(p[static_cast<size_t>(s) * C + y] * r[y]);
  if (k_box.empty()) {
    double ss = 0.0;
    for (double v : a) ss += v * v;
    return std::sqrt(ss);  // Cauchy-Schwarz, attained at k_s proportional to a_s^2
  }
  Vec lo(S), hi(S);
  for (int s = 0; s < S; ++s) {
    lo[s] = k_box[s][0];
    hi[s] = k_box[s][1];
  }
  return max_weighted_sqrt_sum(a, lo, hi);
}

}  // namespace

double min_feasible_rho(std::span<const double> p, int S, int C,
                        std::span<const std::array<double, 2>> k_box,
                        std::span<const std::array<double, 2>> r_box) {
  if (S < 1 || C < 1 || p.size() != static_cast<size_t>(S) * C)
    throw InputError("min_feasible_rho: bad dimensions");

  double best_aff = 0.0;
  if (C == 2 || S == 2) {
    // Scan the binary axis; the other block has a closed-form inner maximum.
    bool scan_r = (C == 2);
    std::span<const std::array<double, 2>> scan_box = scan_r ? r_box : k_box;
    std::span<const std::array<double, 2>> inner_box = scan_r ? k_box : r_box;
    Vec pt(p.begin(), p.end());
    int Si = S, Ci = C;
    if (!scan_r) {
      // Transpose so the scanned axis is always the label axis.
      pt.assign(p.size(), 0.0);
      for (int s = 0; s < S; ++s)
        for (int y = 0; y < C; ++y)
          pt[static_cast<size_t>(y) * S + s] = p[static_cast<size_t>(s) * C + y];
      std::swap(Si, Ci);
    }
    double lo = 0.0, hi = 1.0;
    if (!scan_box.empty()) {
      lo = scan_box[0][0];
      hi = scan_box[0][1];
    }
    auto eval = [&](double t) {
      double r[2] = {t, 1.0 - t};
      return affinity_given_r(pt, Si, Ci, std::span<const double>(r, 2), inner_box);
    };
    Vec pts = make_grid(lo, hi, 1.0 / 4000.0);
    double best_t = lo;
    for (double t : pts) {
      double v = eval(t);
      if (v > best_aff) {
        best_aff = v;
        best_t = t;
      }
    }
    double step = 1.0 / 4000.0;
    for (int round = 0; round < 4; ++round) {
      double sub = step / 20.0;
      Vec local = make_grid(std::max(lo, best_t - step), std::min(hi, best_t + step), sub);
      for (double t : local) {
        double v = eval(t);
        if (v > best_aff) {
          best_aff = v;
          best_t = t;
        }
      }
      step = sub;
    }
  } else {
    // Alternating exact block maxima from several starts.
    std::mt19937_64 rng(0xab5u);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    for (int start = 0; start < 16; ++start) {
      Vec r(C, 1.0 / C);
      if (start > 0) {
        double sum = 0.0;
        for (auto& v : r) sum += (v = unif(rng));
        for (auto& v : r) v /= sum;
      }
      double prev = -1.0;
      for (int round = 0; round < 60; ++round) {
        // k given r
        Vec a(S, 0.0);
        for (int s = 0; s < S; ++s)
          for (int y = 0; y < C; ++y)
            a[s] += std::sqrt(p[static_cast<size_t>(s) * C + y] * r[y]);
        Vec klo(S, 0.0), khi(S, 1.0), k;
        for (int s = 0; s < S && !k_box.empty(); ++s) {
          klo[s] = k_box[s][0];
          khi[s] = k_box[s][1];
        }
        max_weighted_sqrt_sum(a, klo, khi, &k);
        // r given k
        Vec b(C, 0.0);
        for (int s = 0; s < S; ++s)
          for (int y = 0; y < C; ++y)
            b[y] += std::sqrt(p[static_cast<size_t>(s) * C + y] * k[s]);
        Vec rlo(C, 0.0), rhi(C, 1.0);
        for (int y = 0; y < C && !r_box.empty(); ++y) {
          rlo[y] = r_box[y][0];
          rhi[y] = r_box[y][1];
        }
        double val = max_weighted_sqrt_sum(b, rlo, rhi, &r);
        if (val - prev < 1e-13) {
          best_aff = std::max(best_aff, val);
          break;
        }
        prev = val;
        best_aff = std::max(best_aff, val);
      }
    }
  }
  return std::sqrt(std::clamp(1.0 - best_aff, 0.0, 1.0));
}

}  // namespace faircert
