#pragma once

#include <span>

#include "faircert/types.hpp"

namespace faircert {

/// Loss of a probability vector against a label.
///
/// ZeroOne: 0 iff argmax(prediction) == label, argmax ties broken toward the
/// smallest index. Bce: -ln(prediction[label]) with the probability floored
/// at 1e-12. Jsd: Jensen-Shannon divergence (base-2 logs) between the
/// prediction and the one-hot vector of the label, always in [0, 1].
double compute_loss(std::span<const double> prediction, int label, LossKind kind);

/// Fold raw loss samples into a StatsTable. Every (s, y) cell must hold at
/// least two samples; the variance is the unbiased sample variance
/// (equivalently the pairwise U-statistic form).
StatsTable aggregate_stats(std::span<const SampleRecord> samples, int S, int C,
                           LossKind kind);

/// Same, but losses are computed from prediction vectors first.
StatsTable aggregate_predictions(std::span<const PredictionRecord> samples, int S,
                                 int C, LossKind kind);

/// Demographic-parity gap: max over group pairs of the difference in
/// class-1 prediction rates. Binary labels only.
double dp_gap(std::span<const PredictionRecord> samples, int S, int C);

/// Equalized-odds gap: max over labels and group pairs of the difference in
/// label-conditional class-1 prediction rates. Labels absent from the whole
/// dataset are skipped; a label present in one group but missing in another
/// is an error. Binary labels only.
double eo_gap(std::span<const PredictionRecord> samples, int S, int C);

}  // namespace faircert
