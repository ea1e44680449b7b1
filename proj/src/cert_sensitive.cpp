#include "faircert/cert_sensitive.hpp"

#include <cmath>

namespace faircert {

std::string to_string(Scenario scenario) {
  return scenario == Scenario::Sensitive ? "sensitive" : "general";
}

Scenario scenario_from_string(const std::string& name) {
  if (name == "sensitive") return Scenario::Sensitive;
  if (name == "general") return Scenario::General;
  throw InputError("unknown scenario: " + name);
}

namespace {

std::vector<std::array<double, 2>> skew_box(std::optional<double> delta, int dim,
                                            const char* axis) {
  if (!delta) return {};
  if (dim != 2)
    throw InputError(std::string("skew option on non-binary ") + axis + " axis");
  if (!(*delta >= 0.0 && *delta <= 1.0))
    throw InputError("skew bound must be in [0, 1]");
  double lo = 0.5 - *delta / 2.0, hi = 0.5 + *delta / 2.0;
  return {{lo, hi}, {lo, hi}};
}

Certificate finish(const StatsTable& stats, double rho, const SkewOptions& skew,
                   const SolveReport& rep, double confidence) {
  Certificate cert;
  cert.scenario = Scenario::Sensitive;
  cert.rho = rho;
  cert.confidence = confidence;
  cert.min_feasible_rho =
      min_feasible_rho(stats.masses(), stats.S, stats.C,
                       skew_k_box(skew, stats.S), skew_r_box(skew, stats.C));
  cert.diagnostics.status = to_string(rep.status);
  cert.diagnostics.iterations = rep.iterations;
  cert.diagnostics.violation = rep.violation;
  cert.diagnostics.heuristic_global = rep.heuristic_global;
  if (rep.status == SolveStatus::Infeasible) {
    cert.feasible = false;
    return cert;
  }
  cert.feasible = true;
  cert.k.assign(rep.x.begin(), rep.x.begin() + stats.S);
  cert.r.assign(rep.x.begin() + stats.S, rep.x.begin() + stats.S + stats.C);
  // Recompute the objective exactly at the returned optimizer.
  double value = 0.0;
  for (int s = 0; s < stats.S; ++s)
    for (int y = 0; y < stats.C; ++y)
      value += cert.k[s] * cert.r[y] * stats.cell(s, y).E;
  cert.value = value;
  return cert;
}

}  // namespace

std::vector<std::array<double, 2>> skew_k_box(const SkewOptions& skew, int S) {
  return skew_box(skew.delta_s, S, "sensitive");
}

std::vector<std::array<double, 2>> skew_r_box(const SkewOptions& skew, int C) {
  return skew_box(skew.delta_l, C, "label");
}

Certificate certify_sensitive(const StatsTable& stats, double rho,
                              const SkewOptions& skew) {
  stats.validate();
  if (!(rho > 0.0 && rho <= 1.0)) throw InputError("rho must be in (0, 1]");

  BilinearProblem prob;
  prob.S = stats.S;
  prob.C = stats.C;
  prob.p = stats.masses();
  prob.E.resize(prob.p.size());
  for (int s = 0; s < stats.S; ++s)
    for (int y = 0; y < stats.C; ++y)
      prob.E[static_cast<size_t>(s) * stats.C + y] = stats.cell(s, y).E;
  prob.rho = rho;
  prob.k_box = skew_k_box(skew, stats.S);
  prob.r_box = skew_r_box(skew, stats.C);

  return finish(stats, rho, skew, maximize_bilinear_simplex(prob), 1.0);
}

Certificate certify_sensitive_fs(const StatsTable& stats, double rho,
                                 double delta, const SkewOptions& skew) {
  stats.validate();
  if (!(rho > 0.0 && rho <= 1.0)) throw InputError("rho must be in (0, 1]");
  if (!stats.M)
    throw InputError(
        "finite-sampling certification needs a finite loss bound M "
        "(supply an explicit clip bound for unbounded losses)");
  IntervalTable iv = build_interval_table(stats, delta);

  BilinearProblem prob;
  prob.S = stats.S;
  prob.C = stats.C;
  prob.p = stats.masses();
  prob.E.resize(prob.p.size());
  prob.p_intervals.resize(prob.p.size());
  for (int s = 0; s < stats.S; ++s)
    for (int y = 0; y < stats.C; ++y) {
      size_t i = static_cast<size_t>(s) * stats.C + y;
      prob.E[i] = iv.cell(s, y).E.hi;
      prob.p_intervals[i] = iv.cell(s, y).p;
    }
  prob.rho = rho;
  prob.k_box = skew_k_box(skew, stats.S);
  prob.r_box = skew_r_box(skew, stats.C);

  double confidence = 1.0 - 2.0 * stats.S * stats.C * delta;
  Certificate cert =
      finish(stats, rho, skew, maximize_bilinear_simplex(prob), confidence);
  if (cert.feasible) {
    // The objective the solver maximized uses the upper mean endpoints.
    double value = 0.0;
    for (int s = 0; s < stats.S; ++s)
      for (int y = 0; y < stats.C; ++y)
        value += cert.k[s] * cert.r[y] * iv.cell(s, y).E.hi;
    cert.value = value;
  }
  return cert;
}

}  // namespace faircert
