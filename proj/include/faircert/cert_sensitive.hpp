#pragma once

#include "faircert/certificate.hpp"

namespace faircert {

/// Worst-case expected loss over fair distributions within Hellinger
/// distance rho, when only the (sensitive, label) proportions may shift:
///   max sum k_s r_y E_{s,y}  s.t.  simplex constraints,
///   1 - rho^2 - sum sqrt(p_{s,y} k_s r_y) <= 0.
/// The certificate is tight: the returned (k, r) induce a fair distribution
/// Q* = sum k_s r_y P_{s,y} attaining the bound. rho below the feasibility
/// radius yields feasible=false (a meaningful result, not an error).
/// Unbounded losses are fine here; only the means enter.
Certificate certify_sensitive(const StatsTable& stats, double rho,
                              const SkewOptions& skew = {});

/// Finite-sampling variant: means are replaced by their upper confidence
/// endpoints and the masses become decision variables inside their
/// confidence boxes (unit sum enforced). Holds with probability
/// 1 - 2*S*C*delta. Requires a finite loss bound M.
Certificate certify_sensitive_fs(const StatsTable& stats, double rho,
                                 double delta, const SkewOptions& skew = {});

/// Skew boxes as used by both certifiers: [0.5 - delta/2, 0.5 + delta/2] on
/// the partitioned axis. Throws when a skew option targets a non-binary
/// dimension. Returns empty vectors when no options are set.
std::vector<std::array<double, 2>> skew_k_box(const SkewOptions& skew, int S);
std::vector<std::array<double, 2>> skew_r_box(const SkewOptions& skew, int C);

}  // namespace faircert
