#pragma once

#include <array>
#include <functional>
#include <span>

#include "faircert/conf_bounds.hpp"
#include "faircert/types.hpp"

namespace faircert {

enum class SolveStatus { Optimal, Infeasible, MaxIterations };

std::string to_string(SolveStatus status);

/// Sparse linear equality sum_i a_i x_i = rhs. The solver requires the
/// equalities of one problem to have pairwise-disjoint supports (true for
/// all the simplex blocks the certifiers build), which keeps projections
/// exact and cheap.
struct LinearEquality {
  std::vector<std::pair<int, double>> terms;
  double rhs = 1.0;
};

/// Small smooth constrained maximization problem: box + disjoint equality
/// groups + at most one nonlinear constraint g(x) <= 0 whose feasible set is
/// convex (the distance constraints are of the form
/// 1 - rho^2 - sum c_i sqrt(x products) <= 0).
struct ProblemSpec {
  int dim = 0;
  std::function<double(std::span<const double>)> objective;
  std::function<void(std::span<const double>, std::span<double>)> gradient;
  std::vector<LinearEquality> equalities;
  std::vector<double> lower, upper;
  std::function<double(std::span<const double>)> ineq;  // g(x) <= 0
  std::function<void(std::span<const double>, std::span<double>)> ineq_gradient;
  bool has_ineq = false;
};

struct SolveReport {
  SolveStatus status = SolveStatus::MaxIterations;
  std::vector<double> x;
  double value = 0.0;
  double violation = 0.0;
  int iterations = 0;
  // Set when the result comes from multi-start alternation rather than an
  // exhaustive low-dimensional scan, i.e. global optimality is not certified.
  bool heuristic_global = false;
};

/// Projected-gradient ascent with backtracking, wrapped in an augmented
/// Lagrangian loop when the nonlinear constraint is present. The caller
/// guarantees a concave objective and convex feasible set.
SolveReport maximize_concave(const ProblemSpec& spec, std::span<const double> start);

/// max over k,r (and p when p_intervals is set) of sum k_s r_y E_{s,y}
/// subject to simplex constraints, optional boxes, and the distance
/// constraint sum sqrt(p_{s,y} k_s r_y) >= 1 - rho^2.
struct BilinearProblem {
  int S = 0, C = 0;
  std::vector<double> E;  // S*C row-major
  std::vector<double> p;  // S*C masses
  double rho = 0.0;
  std::vector<std::array<double, 2>> k_box;  // per-s bounds; empty = [0,1]
  std::vector<std::array<double, 2>> r_box;  // per-y bounds; empty = [0,1]
  std::vector<Interval> p_intervals;  // empty = p fixed at the given masses
};

/// Binary-by-binary problems are solved by an exhaustive (k0, r0) scan at
/// step 1/2000 plus local refinement, so the result is a certified global
/// maximum. Larger instances fall back to multi-start alternating
/// maximization and are flagged heuristic_global. The returned x holds
/// k (S entries) followed by r (C entries).
SolveReport maximize_bilinear_simplex(const BilinearProblem& problem);

/// Smallest rho such that some product distribution k (x) r within the boxes
/// satisfies sum sqrt(p_{s,y} k_s r_y) >= 1 - rho^2. Always in [0, 1].
double min_feasible_rho(std::span<const double> p, int S, int C,
                        std::span<const std::array<double, 2>> k_box = {},
                        std::span<const std::array<double, 2>> r_box = {});

/// max of sum a_i sqrt(x_i) over the box-constrained simplex
/// {sum x = 1, lo <= x <= hi}, a_i >= 0. Fills argmax when non-null.
double max_weighted_sqrt_sum(std::span<const double> a,
                             std::span<const double> lo,
                             std::span<const double> hi,
                             std::vector<double>* argmax = nullptr);

}  // namespace faircert
