#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace faircert {

/// Raised on malformed user input: bad CSV rows, out-of-range indices,
/// schema mismatches. Maps to CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numeric routine fails internally (not when a problem is
/// merely infeasible, which is a normal result). Maps to CLI exit code 3.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (sensitive attribute, label) cell address, 0-based.
struct SubpopKey {
  int s = 0;
  int y = 0;
};

/// One observation carrying a precomputed loss value.
struct SampleRecord {
  SubpopKey key;
  double loss = 0.0;
};

/// One observation carrying the model's probability vector instead of a loss.
struct PredictionRecord {
  SubpopKey key;
  std::vector<double> prediction;
};

enum class LossKind { ZeroOne, Bce, Jsd };

/// Loss cap for a kind; BCE is unbounded.
std::optional<double> loss_cap(LossKind kind);

LossKind loss_kind_from_string(const std::string& name);
std::string to_string(LossKind kind);

/// Per-cell statistics: sample count, mean loss, unbiased loss variance,
/// population mass.
struct SubpopStats {
  long n = 0;
  double E = 0.0;
  double V = 0.0;
  double p = 0.0;
};

/// Complete S x C grid of subpopulation statistics. This is the only thing
/// the certifiers ever learn about the model.
struct StatsTable {
  int S = 0;
  int C = 0;
  std::optional<double> M;  // loss upper bound; nullopt = unbounded
  std::vector<SubpopStats> cells;  // row-major, index s * C + y

  SubpopStats& cell(int s, int y) { return cells[static_cast<size_t>(s) * C + y]; }
  const SubpopStats& cell(int s, int y) const {
    return cells[static_cast<size_t>(s) * C + y];
  }
  long total_count() const;

  /// Masses p_{s,y} flattened row-major.
  std::vector<double> masses() const;

  /// Throws InputError unless masses sum to 1, every cell has n >= 2, and
  /// (when M is finite) every mean is <= M.
  void validate() const;
};

}  // namespace faircert
