#include "faircert/hellinger.hpp"

#include <algorithm>
#include <cmath>

namespace faircert {

namespace {

// sum sqrt(p q) can land just above 1 on exact-equality inputs; clamp the
// radicand before the final sqrt to avoid NaN.
double sqrt_clamped(double radicand) {
  return std::sqrt(std::clamp(radicand, 0.0, 1.0));
}

void check_mass_vector(std::span<const double> w, const char* name) {
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) throw InputError(std::string(name) + " has a negative weight");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-9)
    throw InputError(std::string(name) + " does not sum to 1");
}

}  // namespace

double hellinger_discrete(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InputError("mass vectors have different lengths");
  check_mass_vector(p, "p");
  check_mass_vector(q, "q");
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    double d = std::sqrt(p[i]) - std::sqrt(q[i]);
    acc += d * d;
  }
  return sqrt_clamped(0.5 * acc);
}

double compose_hellinger(std::span<const double> p, std::span<const double> q,
                         std::span<const double> sub_distances) {
  if (p.size() != q.size() || p.size() != sub_distances.size())
    throw InputError("component vectors have different lengths");
  check_mass_vector(p, "p");
  check_mass_vector(q, "q");
  double affinity = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    double h = sub_distances[i];
    if (!(h >= 0.0 && h <= 1.0))
      throw InputError("component distance outside [0,1]");
    affinity += std::sqrt(p[i] * q[i]) * (1.0 - h * h);
  }
  return sqrt_clamped(1.0 - affinity);
}

double sensitive_shift_distance(std::span<const double> p,
                                std::span<const double> q) {
  if (p.size() != q.size()) throw InputError("mass vectors have different lengths");
  check_mass_vector(p, "p");
  check_mass_vector(q, "q");
  double affinity = 0.0;
  for (size_t i = 0; i < p.size(); ++i) affinity += std::sqrt(p[i] * q[i]);
  return sqrt_clamped(1.0 - affinity);
}

double mixture_shift_distance(std::span<const double> p,
                              std::span<const double> alpha) {
  if (p.size() != alpha.size())
    throw InputError("mass and alpha vectors have different lengths");
  check_mass_vector(p, "p");
  double affinity = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (!(alpha[i] >= 0.0 && alpha[i] <= 1.0))
      throw InputError("alpha outside [0,1]");
    affinity += std::sqrt(alpha[i]) * p[i];
  }
  return sqrt_clamped(1.0 - affinity);
}

std::pair<double, double> gaussian_shift_distances(double delta_norm) {
  if (!(delta_norm >= 0.0)) throw InputError("delta_norm must be non-negative");
  double h = sqrt_clamped(1.0 - std::exp(-delta_norm * delta_norm / 8.0));
  return {delta_norm, h};
}

}  // namespace faircert
