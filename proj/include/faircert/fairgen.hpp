#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "faircert/types.hpp"

namespace faircert {

/// One simulator draw: the generated fair distribution's analytic Hellinger
/// distance from the training distribution and the empirical mean loss of a
/// subsample drawn according to it.
struct ShiftTrial {
  std::uint64_t seed = 0;
  double distance = 0.0;
  double loss = 0.0;
  long count = 0;  // subsample size behind the loss mean
  std::vector<double> q;      // S*C mixed cell masses (product form)
  std::vector<double> alpha;  // general mode: alpha (S*C) then alpha' (S*C)
};

/// Two isotropic 2-d Gaussians labeled 0/1; the sensitive attribute is the
/// sign of the second coordinate.
struct GaussianMixtureSpec {
  std::array<std::array<double, 2>, 2> mean{{{-2.0, -0.5}, {2.0, 0.5}}};
  std::array<double, 2> sigma{1.0, 1.0};
  std::array<double, 2> weight{0.5, 0.5};
};

struct GaussianSample {
  double x0 = 0.0, x1 = 0.0;
  int s = 0;
  int label = 0;
};

std::vector<GaussianSample> gen_gaussian_mixture(const GaussianMixtureSpec& spec,
                                                 long n, std::uint64_t seed);

/// Dataset the generators consume: per-sample cell membership plus losses.
/// loss_shifted holds the loss on the support-disjoint transformed copy of
/// the sample (required by the general protocol; empty otherwise).
struct TrialSample {
  int s = 0, y = 0;
  double loss = 0.0;
  double loss_shifted = 0.0;
};

struct TrialDataset {
  int S = 2, C = 2;
  bool has_shifted = false;
  std::vector<TrialSample> rows;
};

/// Probability vector of the bundled linear scorer at a feature point.
std::vector<double> demo_scorer_prediction(double x0, double x1);

/// Gaussian-mixture demo dataset with losses from the bundled scorer, plus
/// shifted losses from the disjoint transform (a 1e6 offset on the
/// non-sensitive coordinate).
TrialDataset demo_dataset(const GaussianMixtureSpec& spec, long n,
                          std::uint64_t seed, LossKind kind);

/// Sensitive-shifting protocol (binary/binary): draw k, r uniformly, resample
/// each cell to the product masses q = k (x) r, record the closed-form
/// distance sqrt(1 - sum sqrt(p q)).
std::vector<ShiftTrial> gen_sensitive_trials(const TrialDataset& data,
                                             long n_trials, std::uint64_t seed);

/// One sensitive-shifting trial at prescribed (k, r); used to replay a
/// certifier's optimizer as a trial.
ShiftTrial gen_sensitive_trial_at(const TrialDataset& data, double k, double r,
                                  std::uint64_t seed);

/// General-shifting protocol: mix each cell of the dataset with its
/// transformed copy under mixing parameters drawn subject to base-rate
/// parity and unit mass; distance sqrt(1 - sum sqrt(alpha) p).
std::vector<ShiftTrial> gen_general_trials(const TrialDataset& data,
                                           long n_trials, std::uint64_t seed);

struct SweepPoint {
  double rho = 0.0;
  bool feasible = false;
  double bound = 0.0;
};

struct ValidationReport {
  double max_violation = 0.0;  // max over trials of loss - bound(distance)
  long violations = 0;         // trials above the curve
  double tightness_gap = 0.0;  // min over buckets of bound - max bucket loss
};

/// Compares trials against a certifier sweep. Trials beyond the last sweep
/// rho are outside the certified range and are not counted. The curve must
/// be sorted by rho.
ValidationReport validate(std::span<const ShiftTrial> trials,
                          std::span<const SweepPoint> curve);

/// Deterministic per-trial seed derivation (splittable counter scheme).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace faircert
