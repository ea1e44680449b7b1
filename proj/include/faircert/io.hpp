#pragma once

#include <string>

#include "faircert/certificate.hpp"
#include "faircert/fairgen.hpp"
#include "faircert/types.hpp"

namespace faircert {

/// Parsed samples CSV. Exactly one of the three layouts is present:
///   s,y,loss                 losses
///   s,y,loss,loss_shifted    losses plus transformed-sample losses
///   s,y,p0,...,p{C-1}        prediction vectors
struct SamplesFile {
  std::vector<SampleRecord> losses;
  std::vector<PredictionRecord> predictions;
  std::vector<TrialSample> dual;  // loss + loss_shifted rows
  bool has_predictions = false;
  bool has_dual = false;
};

SamplesFile read_samples_csv(const std::string& path, int S, int C);

std::string stats_to_json(const StatsTable& stats);
StatsTable stats_from_json(const std::string& text);
void write_stats_json(const StatsTable& stats, const std::string& path);
StatsTable read_stats_json(const std::string& path);

std::string certificate_to_json(const Certificate& cert);
void write_certificates_json(const std::vector<Certificate>& certs,
                             const std::string& path);

void write_sweep_csv(const std::vector<Certificate>& certs,
                     const std::string& path);
std::vector<SweepPoint> read_sweep_csv(const std::string& path);

void write_trials_csv(const std::vector<ShiftTrial>& trials,
                      const std::string& path);
std::vector<ShiftTrial> read_trials_csv(const std::string& path);

std::string report_to_json(const ValidationReport& report);
void write_report_json(const ValidationReport& report, const std::string& path);

/// Standalone SVG: the certificate curve as a single polyline, optional
/// trial scatter as circles.
void write_plot_svg(const std::vector<SweepPoint>& sweep,
                    const std::vector<ShiftTrial>& trials,
                    const std::string& path);

/// Dumps the demo dataset in the dual-loss CSV layout.
void write_dual_samples_csv(const TrialDataset& data, const std::string& path);

}  // namespace faircert
