#include "faircert/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace faircert {

namespace {

constexpr double kProbSumTolerance = 1e-9;
constexpr double kBceFloor = 1e-12;

void check_prediction(std::span<const double> prediction, int label) {
  if (prediction.empty()) throw InputError("prediction vector is empty");
  if (label < 0 || static_cast<size_t>(label) >= prediction.size())
    throw InputError("label " + std::to_string(label) + " out of range for C=" +
                     std::to_string(prediction.size()));
  double sum = 0.0;
  for (double v : prediction) {
    if (!(v >= 0.0 && v <= 1.0 + kProbSumTolerance))
      throw InputError("prediction entry outside [0,1]");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > kProbSumTolerance)
    throw InputError("prediction does not sum to 1");
}

int argmax_smallest(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

std::optional<double> loss_cap(LossKind kind) {
  switch (kind) {
    case LossKind::ZeroOne:
    case LossKind::Jsd:
      return 1.0;
    case LossKind::Bce:
      return std::nullopt;
  }
  return std::nullopt;
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "zeroone") return LossKind::ZeroOne;
  if (name == "bce") return LossKind::Bce;
  if (name == "jsd") return LossKind::Jsd;
  throw InputError("unknown loss kind: " + name);
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::ZeroOne: return "zeroone";
    case LossKind::Bce: return "bce";
    case LossKind::Jsd: return "jsd";
  }
  return "?";
}

double compute_loss(std::span<const double> prediction, int label, LossKind kind) {
  check_prediction(prediction, label);
  switch (kind) {
    case LossKind::ZeroOne:
      return argmax_smallest(prediction) == label ? 0.0 : 1.0;
    case LossKind::Bce:
      return -std::log(std::max(prediction[label], kBceFloor));
    case LossKind::Jsd: {
      // JSD(q, e_y) with base-2 logs; e_y one-hot. m = (q + e_y)/2.
      // KL(q||m): all i != y have m_i = q_i/2; KL(e_y||m) = -log2(m_y).
      double qy = prediction[label];
      double my = 0.5 * (qy + 1.0);
      double kl_q = 0.0;
      for (int i = 0; i < static_cast<int>(prediction.size()); ++i) {
        if (i == label)
          kl_q += qy > 0.0 ? qy * std::log2(qy / my) : 0.0;
        else
          kl_q += prediction[i];  // q_i * log2(q_i / (q_i/2)) = q_i
      }
      double kl_e = -std::log2(my);
      double jsd = 0.5 * (kl_q + kl_e);
      return std::clamp(jsd, 0.0, 1.0);
    }
  }
  throw InputError("unknown loss kind");
}

long StatsTable::total_count() const {
  long total = 0;
  for (const auto& c : cells) total += c.n;
  return total;
}

std::vector<double> StatsTable::masses() const {
  std::vector<double> p(cells.size());
  for (size_t i = 0; i < cells.size(); ++i) p[i] = cells[i].p;
  return p;
}

void StatsTable::validate() const {
  if (S < 1 || C < 1 || cells.size() != static_cast<size_t>(S) * C)
    throw InputError("stats table has inconsistent dimensions");
  double psum = 0.0;
  for (int s = 0; s < S; ++s)
    for (int y = 0; y < C; ++y) {
      const auto& c = cell(s, y);
      if (c.n < 2)
        throw InputError("cell (" + std::to_string(s) + "," + std::to_string(y) +
                         ") has n=" + std::to_string(c.n) +
                         "; every subpopulation needs at least 2 samples");
      if (c.V < 0.0 || c.E < 0.0 || c.p < 0.0 || c.p > 1.0)
        throw InputError("cell (" + std::to_string(s) + "," + std::to_string(y) +
                         ") has invalid statistics");
      if (M && c.E > *M + 1e-9)
        throw InputError("cell (" + std::to_string(s) + "," + std::to_string(y) +
                         ") mean exceeds loss bound M");
      psum += c.p;
    }
  if (std::fabs(psum - 1.0) > kProbSumTolerance)
    throw InputError("cell masses sum to " + std::to_string(psum) + ", expected 1");
}

StatsTable aggregate_stats(std::span<const SampleRecord> samples, int S, int C,
                           LossKind kind) {
  if (S < 1 || C < 1) throw InputError("S and C must be positive");
  std::vector<std::vector<double>> losses(static_cast<size_t>(S) * C);
  for (const auto& rec : samples) {
    if (rec.key.s < 0 || rec.key.s >= S || rec.key.y < 0 || rec.key.y >= C)
      throw InputError("sample key (" + std::to_string(rec.key.s) + "," +
                       std::to_string(rec.key.y) + ") outside " +
                       std::to_string(S) + "x" + std::to_string(C) + " grid");
    if (!(rec.loss >= 0.0) || !std::isfinite(rec.loss))
      throw InputError("loss values must be finite and non-negative");
    losses[static_cast<size_t>(rec.key.s) * C + rec.key.y].push_back(rec.loss);
  }

  StatsTable table;
  table.S = S;
  table.C = C;
  table.M = loss_cap(kind);
  table.cells.resize(losses.size());
  const double total = static_cast<double>(samples.size());
  for (int s = 0; s < S; ++s)
    for (int y = 0; y < C; ++y) {
      const auto& xs = losses[static_cast<size_t>(s) * C + y];
      if (xs.size() < 2)
        throw InputError("cell (" + std::to_string(s) + "," + std::to_string(y) +
                         ") has " + std::to_string(xs.size()) +
                         " samples; need at least 2");
      const long n = static_cast<long>(xs.size());
      const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
      double ss = 0.0;
      for (double v : xs) ss += (v - mean) * (v - mean);
      auto& c = table.cell(s, y);
      c.n = n;
      c.E = mean;
      c.V = ss / (n - 1);  // equals the pairwise form s_n^2
      c.p = n / total;
    }
  return table;
}

StatsTable aggregate_predictions(std::span<const PredictionRecord> samples, int S,
                                 int C, LossKind kind) {
  std::vector<SampleRecord> recs;
  recs.reserve(samples.size());
  for (const auto& rec : samples) {
    if (static_cast<int>(rec.prediction.size()) != C)
      throw InputError("prediction length does not match C");
    recs.push_back({rec.key, compute_loss(rec.prediction, rec.key.y, kind)});
  }
  return aggregate_stats(recs, S, C, kind);
}

namespace {

// Per-(group, label) counts of samples and class-1 predictions.
struct RateGrid {
  std::vector<long> count;
  std::vector<long> pos;
  int S, C;
  long& n(int s, int y) { return count[static_cast<size_t>(s) * C + y]; }
  long& p1(int s, int y) { return pos[static_cast<size_t>(s) * C + y]; }
};

RateGrid tally(std::span<const PredictionRecord> samples, int S, int C) {
  if (C != 2) throw InputError("DP/EO gaps are defined for binary labels (C=2)");
  RateGrid g{std::vector<long>(static_cast<size_t>(S) * C, 0),
             std::vector<long>(static_cast<size_t>(S) * C, 0), S, C};
  for (const auto& rec : samples) {
    if (rec.key.s < 0 || rec.key.s >= S || rec.key.y < 0 || rec.key.y >= C)
      throw InputError("sample key outside grid");
    check_prediction(rec.prediction, rec.key.y);
    g.n(rec.key.s, rec.key.y) += 1;
    if (argmax_smallest(rec.prediction) == 1) g.p1(rec.key.s, rec.key.y) += 1;
  }
  return g;
}

}  // namespace

double dp_gap(std::span<const PredictionRecord> samples, int S, int C) {
  RateGrid g = tally(samples, S, C);
  std::vector<double> rate(S);
  for (int s = 0; s < S; ++s) {
    long n = g.n(s, 0) + g.n(s, 1);
    if (n == 0)
      throw InputError("sensitive group " + std::to_string(s) + " has no samples");
    rate[s] = static_cast<double>(g.p1(s, 0) + g.p1(s, 1)) / n;
  }
  auto [lo, hi] = std::minmax_element(rate.begin(), rate.end());
  return *hi - *lo;
}

double eo_gap(std::span<const PredictionRecord> samples, int S, int C) {
  RateGrid g = tally(samples, S, C);
  double gap = 0.0;
  for (int y = 0; y < C; ++y) {
    long label_total = 0;
    for (int s = 0; s < S; ++s) label_total += g.n(s, y);
    if (label_total == 0) continue;  // label absent everywhere: skip
    std::vector<double> rate(S);
    for (int s = 0; s < S; ++s) {
      if (g.n(s, y) == 0)
        throw InputError("cell (" + std::to_string(s) + "," + std::to_string(y) +
                         ") is empty; label-conditional rate undefined");
      rate[s] = static_cast<double>(g.p1(s, y)) / g.n(s, y);
    }
    auto [lo, hi] = std::minmax_element(rate.begin(), rate.end());
    gap = std::max(gap, *hi - *lo);
  }
  return gap;
}

}  // namespace faircert
