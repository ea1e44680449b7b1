#pragma once

#include <span>
#include <utility>

#include "faircert/types.hpp"

namespace faircert {

/// Hellinger distance between two discrete mass vectors of equal length:
/// sqrt(1/2 * sum (sqrt(p_i) - sqrt(q_i))^2), in [0, 1].
double hellinger_discrete(std::span<const double> p, std::span<const double> q);

/// Distance of two mixtures sharing component supports pairwise, with the
/// components mutually disjoint: sqrt(1 - sum sqrt(p_i q_i) (1 - H_i^2)).
double compose_hellinger(std::span<const double> p, std::span<const double> q,
                         std::span<const double> sub_distances);

/// compose_hellinger with every within-component distance zero:
/// sqrt(1 - sum sqrt(p_i q_i)).
double sensitive_shift_distance(std::span<const double> p,
                                std::span<const double> q);

/// Distance of a mixture that keeps fraction alpha_i of component i and
/// replaces the rest with disjoint mass: sqrt(1 - sum sqrt(alpha_i) * p_i).
double mixture_shift_distance(std::span<const double> p,
                              std::span<const double> alpha);

/// (W2, Hellinger) distance pair for an isotropic Gaussian shifted by a
/// vector of norm delta_norm: (delta_norm, sqrt(1 - exp(-delta_norm^2 / 8))).
std::pair<double, double> gaussian_shift_distances(double delta_norm);

}  // namespace faircert
