#include "faircert/fairgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "faircert/hellinger.hpp"
#include "faircert/stats.hpp"

namespace faircert {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Per-cell row indices plus empirical masses.
struct CellView {
  std::vector<std::vector<size_t>> rows;  // S*C lists
  std::vector<double> p_hat;

  CellView(const TrialDataset& data) {
    if (data.S != 2 || data.C != 2)
      throw InputError("generation protocols are defined for S=2, C=2");
    rows.resize(4);
    for (size_t i = 0; i < data.rows.size(); ++i) {
      const auto& r = data.rows[i];
      if (r.s < 0 || r.s >= 2 || r.y < 0 || r.y >= 2)
        throw InputError("dataset row outside the 2x2 grid");
      rows[static_cast<size_t>(r.s) * 2 + r.y].push_back(i);
    }
    p_hat.resize(4);
    for (int i = 0; i < 4; ++i) {
      if (rows[i].empty())
        throw InputError("cell (" + std::to_string(i / 2) + "," +
                         std::to_string(i % 2) + ") has no samples");
      p_hat[i] = static_cast<double>(rows[i].size()) / data.rows.size();
    }
  }
};

// Draws m distinct indices from `pool` by partial Fisher-Yates. The pool
// stays permuted between calls, which does not bias later draws.
template <typename Rng, typename Consume>
void sample_without_replacement(std::vector<size_t>& pool, long m, Rng& rng,
                                Consume&& consume) {
  const size_t n = pool.size();
  for (long i = 0; i < m; ++i) {
    std::uniform_int_distribution<size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
    consume(pool[i]);
  }
}

// Subsample sizes per part given required masses: the binding part (largest
// required share of its cell) uses all its samples, the rest scale down.
std::vector<long> part_sizes(std::span<const double> mass,
                             std::span<const long> avail) {
  double t_total = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < mass.size(); ++i)
    if (mass[i] > 1e-15)
      t_total = std::min(t_total, static_cast<double>(avail[i]) / mass[i]);
  std::vector<long> m(mass.size(), 0);
  if (!std::isfinite(t_total)) return m;
  for (size_t i = 0; i < mass.size(); ++i)
    if (mass[i] > 1e-15)
      m[i] = std::min(avail[i], static_cast<long>(std::llround(mass[i] * t_total)));
  return m;
}

ShiftTrial sensitive_trial(const TrialDataset& data, CellView& view,
                           std::vector<std::vector<size_t>>& pools, double k,
                           double r, std::uint64_t trial_seed,
                           std::mt19937_64& rng) {
  std::vector<double> q = {k * r, k * (1.0 - r), (1.0 - k) * r,
                           (1.0 - k) * (1.0 - r)};
  std::vector<long> avail(4);
  for (int i = 0; i < 4; ++i) avail[i] = static_cast<long>(view.rows[i].size());
  std::vector<long> m = part_sizes(q, avail);

  double loss_sum = 0.0;
  long count = 0;
  for (int i = 0; i < 4; ++i) {
    sample_without_replacement(pools[i], m[i], rng, [&](size_t row) {
      loss_sum += data.rows[row].loss;
    });
    count += m[i];
  }
  ShiftTrial trial;
  trial.seed = trial_seed;
  trial.q = q;
  trial.distance = sensitive_shift_distance(view.p_hat, q);
  trial.loss = count > 0 ? loss_sum / count : 0.0;
  trial.count = count;
  return trial;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 1));
}

std::vector<GaussianSample> gen_gaussian_mixture(const GaussianMixtureSpec& spec,
                                                 long n, std::uint64_t seed) {
  if (n < 1) throw InputError("need n >= 1 samples");
  double wsum = spec.weight[0] + spec.weight[1];
  if (std::fabs(wsum - 1.0) > 1e-9)
    throw InputError("component weights must sum to 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<GaussianSample> out;
  out.reserve(n);
  for (long i = 0; i < n; ++i) {
    int comp = unif(rng) < spec.weight[0] ? 0 : 1;
    GaussianSample s;
    s.x0 = spec.mean[comp][0] + spec.sigma[comp] * gauss(rng);
    s.x1 = spec.mean[comp][1] + spec.sigma[comp] * gauss(rng);
    s.label = comp;
    s.s = s.x1 > 0.0 ? 1 : 0;
    out.push_back(s);
  }
  return out;
}

std::vector<double> demo_scorer_prediction(double x0, double x1) {
  double z = 1.2 * x0 + 0.4 * x1 - 0.1;
  double p1 = 1.0 / (1.0 + std::exp(-z));
  return {1.0 - p1, p1};
}

TrialDataset demo_dataset(const GaussianMixtureSpec& spec, long n,
                          std::uint64_t seed, LossKind kind) {
  constexpr double kDisjointOffset = 1e6;  // on the non-sensitive coordinate
  auto samples = gen_gaussian_mixture(spec, n, seed);
  TrialDataset data;
  data.has_shifted = true;
  data.rows.reserve(samples.size());
  for (const auto& g : samples) {
    TrialSample row;
    row.s = g.s;
    row.y = g.label;
    row.loss = compute_loss(demo_scorer_prediction(g.x0, g.x1), g.label, kind);
    row.loss_shifted = compute_loss(
        demo_scorer_prediction(g.x0 + kDisjointOffset, g.x1), g.label, kind);
    data.rows.push_back(row);
  }
  return data;
}

std::vector<ShiftTrial> gen_sensitive_trials(const TrialDataset& data,
                                             long n_trials, std::uint64_t seed) {
  if (n_trials < 0) throw InputError("n_trials must be non-negative");
  CellView view(data);
  std::vector<std::vector<size_t>> pools = view.rows;
  std::vector<ShiftTrial> trials;
  trials.reserve(n_trials);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (long i = 0; i < n_trials; ++i) {
    std::uint64_t ts = derive_seed(seed, static_cast<std::uint64_t>(i));
    std::mt19937_64 rng(ts);
    double k = unif(rng);
    double r = unif(rng);
    trials.push_back(sensitive_trial(data, view, pools, k, r, ts, rng));
  }
  return trials;
}

ShiftTrial gen_sensitive_trial_at(const TrialDataset& data, double k, double r,
                                  std::uint64_t seed) {
  if (!(k >= 0.0 && k <= 1.0 && r >= 0.0 && r <= 1.0))
    throw InputError("k and r must be in [0, 1]");
  CellView view(data);
  std::vector<std::vector<size_t>> pools = view.rows;
  std::mt19937_64 rng(seed);
  return sensitive_trial(data, view, pools, k, r, seed, rng);
}

std::vector<ShiftTrial> gen_general_trials(const TrialDataset& data,
                                           long n_trials, std::uint64_t seed) {
  if (n_trials < 0) throw InputError("n_trials must be non-negative");
  if (!data.has_shifted)
    throw InputError(
        "general-shifting trials need losses for the transformed samples "
        "(dataset with a loss_shifted column)");
  CellView view(data);
  std::vector<std::vector<size_t>> pools_p = view.rows;
  std::vector<std::vector<size_t>> pools_q = view.rows;
  const auto& p = view.p_hat;  // the transformed copy has the same masses

  std::vector<ShiftTrial> trials;
  trials.reserve(n_trials);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (long i = 0; i < n_trials; ++i) {
    std::uint64_t ts = derive_seed(seed, static_cast<std::uint64_t>(i));
    std::mt19937_64 rng(ts);

    // Draw six of the eight mixing parameters, solve the base-rate-parity
    // and unit-mass equalities for the last two, reject if out of range.
    std::vector<double> a(4), b(4);
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      for (int j = 0; j < 4; ++j) a[j] = unif(rng);
      b[0] = unif(rng);
      b[1] = unif(rng);
      double q00 = p[0] * (a[0] + b[0]);
      double q01 = p[1] * (a[1] + b[1]);
      double head = q00 + q01;
      if (head <= 1e-12 || head >= 1.0 - 1e-12) continue;
      double rem = 1.0 - head;
      double q10 = q00 * rem / head;
      double q11 = q01 * rem / head;
      b[2] = q10 / p[2] - a[2];
      b[3] = q11 / p[3] - a[3];
      if (b[2] < 0.0 || b[2] > 1.0 || b[3] < 0.0 || b[3] > 1.0) continue;
      ok = true;
    }
    if (!ok)
      throw SolverError("general-shifting mixing draw failed 1000 rejections");

    ShiftTrial trial;
    trial.seed = ts;
    trial.alpha = a;
    trial.alpha.insert(trial.alpha.end(), b.begin(), b.end());
    trial.q.resize(4);
    std::vector<double> mass(8);
    for (int j = 0; j < 4; ++j) {
      trial.q[j] = p[j] * (a[j] + b[j]);
      mass[j] = p[j] * a[j];       // original part
      mass[4 + j] = p[j] * b[j];   // transformed part
    }
    trial.distance = mixture_shift_distance(p, a);

    std::vector<long> avail(8);
    for (int j = 0; j < 4; ++j)
      avail[j] = avail[4 + j] = static_cast<long>(view.rows[j].size());
    std::vector<long> m = part_sizes(mass, avail);
    double loss_sum = 0.0;
    long count = 0;
    for (int j = 0; j < 4; ++j) {
      sample_without_replacement(pools_p[j], m[j], rng, [&](size_t row) {
        loss_sum += data.rows[row].loss;
      });
      sample_without_replacement(pools_q[j], m[4 + j], rng, [&](size_t row) {
        loss_sum += data.rows[row].loss_shifted;
      });
      count += m[j] + m[4 + j];
    }
    trial.loss = count > 0 ? loss_sum / count : 0.0;
    trial.count = count;
    trials.push_back(std::move(trial));
  }
  return trials;
}

ValidationReport validate(std::span<const ShiftTrial> trials,
                          std::span<const SweepPoint> curve) {
  if (trials.empty()) throw InputError("no trials to validate");
  if (curve.empty()) throw InputError("empty certificate sweep");
  std::vector<SweepPoint> feas;
  double prev = -1.0;
  for (const auto& pt : curve) {
    if (pt.rho < prev) throw InputError("sweep must be sorted by rho");
    prev = pt.rho;
    if (pt.feasible) feas.push_back(pt);
  }
  if (feas.empty()) throw InputError("sweep has no feasible certificates");

  auto bound_at = [&](double d) -> std::optional<double> {
    if (d > feas.back().rho) return std::nullopt;  // outside certified range
    if (d <= feas.front().rho) return feas.front().bound;
    for (size_t i = 1; i < feas.size(); ++i)
      if (d <= feas[i].rho) {
        double t = (d - feas[i - 1].rho) / (feas[i].rho - feas[i - 1].rho);
        return feas[i - 1].bound + t * (feas[i].bound - feas[i - 1].bound);
      }
    return feas.back().bound;
  };

  ValidationReport report;
  report.max_violation = -std::numeric_limits<double>::infinity();
  std::vector<double> bucket_max(feas.size(),
                                 -std::numeric_limits<double>::infinity());
  long counted = 0;
  for (const auto& trial : trials) {
    auto b = bound_at(trial.distance);
    if (!b) continue;
    ++counted;
    double viol = trial.loss - *b;
    report.max_violation = std::max(report.max_violation, viol);
    if (viol > 0.0) ++report.violations;
    size_t bucket = 0;
    while (bucket + 1 < feas.size() && trial.distance > feas[bucket].rho) ++bucket;
    bucket_max[bucket] = std::max(bucket_max[bucket], trial.loss);
  }
  if (counted == 0)
    throw InputError("no trial falls within the certified sweep range");

  report.tightness_gap = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < feas.size(); ++i)
    if (bucket_max[i] > -std::numeric_limits<double>::infinity())
      report.tightness_gap =
          std::min(report.tightness_gap, feas[i].bound - bucket_max[i]);
  return report;
}

}  // namespace faircert
