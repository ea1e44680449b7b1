#include "faircert/io.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace faircert {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

long parse_long(const std::string& s, const std::string& what, long line_no) {
  try {
    size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw InputError("line " + std::to_string(line_no) + ": bad " + what + " '" +
                     s + "'");
  }
}

double parse_double(const std::string& s, const std::string& what, long line_no) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw InputError("line " + std::to_string(line_no) + ": bad " + what + " '" +
                     s + "'");
  }
}

}  // namespace

SamplesFile read_samples_csv(const std::string& path, int S, int C) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + " is empty");
  auto header = split_csv_line(line);
  SamplesFile out;

  enum class Mode { Loss, Dual, Pred } mode;
  if (header.size() >= 2 && header[0] == "s" && header[1] == "y") {
    if (header.size() == 3 && header[2] == "loss") {
      mode = Mode::Loss;
    } else if (header.size() == 4 && header[2] == "loss" &&
               header[3] == "loss_shifted") {
      mode = Mode::Dual;
      out.has_dual = true;
    } else if (static_cast<int>(header.size()) == 2 + C && header[2] == "p0") {
      for (int i = 0; i < C; ++i)
        if (header[2 + i] != "p" + std::to_string(i))
          throw InputError(path + ": prediction header column " +
                           std::to_string(2 + i) + " should be p" +
                           std::to_string(i));
      mode = Mode::Pred;
      out.has_predictions = true;
    } else {
      throw InputError(path + ": unrecognized header '" + line + "'");
    }
  } else {
    throw InputError(path + ": header must start with s,y");
  }

  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw InputError(path + " line " + std::to_string(line_no) +
                       ": expected " + std::to_string(header.size()) +
                       " fields, got " + std::to_string(fields.size()));
    int s = static_cast<int>(parse_long(fields[0], "s", line_no));
    int y = static_cast<int>(parse_long(fields[1], "y", line_no));
    if (s < 0 || s >= S)
      throw InputError(path + " line " + std::to_string(line_no) + ": s=" +
                       std::to_string(s) + " outside [0," + std::to_string(S) +
                       ")");
    if (y < 0 || y >= C)
      throw InputError(path + " line " + std::to_string(line_no) + ": y=" +
                       std::to_string(y) + " outside [0," + std::to_string(C) +
                       ")");
    switch (mode) {
      case Mode::Loss:
        out.losses.push_back({{s, y}, parse_double(fields[2], "loss", line_no)});
        break;
      case Mode::Dual: {
        TrialSample row;
        row.s = s;
        row.y = y;
        row.loss = parse_double(fields[2], "loss", line_no);
        row.loss_shifted = parse_double(fields[3], "loss_shifted", line_no);
        out.dual.push_back(row);
        break;
      }
      case Mode::Pred: {
        PredictionRecord rec;
        rec.key = {s, y};
        for (int i = 0; i < C; ++i)
          rec.prediction.push_back(
              parse_double(fields[2 + i], "p" + std::to_string(i), line_no));
        out.predictions.push_back(std::move(rec));
        break;
      }
    }
  }
  return out;
}

std::string stats_to_json(const StatsTable& stats) {
  json j;
  j["S"] = stats.S;
  j["C"] = stats.C;
  if (stats.M)
    j["M"] = *stats.M;
  else
    j["M"] = nullptr;
  j["cells"] = json::array();
  for (int s = 0; s < stats.S; ++s)
    for (int y = 0; y < stats.C; ++y) {
      const auto& c = stats.cell(s, y);
      j["cells"].push_back(
          {{"s", s}, {"y", y}, {"n", c.n}, {"E", c.E}, {"V", c.V}, {"p", c.p}});
    }
  return j.dump(2) + "\n";
}

StatsTable stats_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("bad stats JSON: ") + e.what());
  }
  StatsTable stats;
  try {
    stats.S = j.at("S").get<int>();
    stats.C = j.at("C").get<int>();
    if (!j.at("M").is_null()) stats.M = j.at("M").get<double>();
    stats.cells.resize(static_cast<size_t>(stats.S) * stats.C);
    std::vector<bool> seen(stats.cells.size(), false);
    for (const auto& cj : j.at("cells")) {
      int s = cj.at("s").get<int>();
      int y = cj.at("y").get<int>();
      if (s < 0 || s >= stats.S || y < 0 || y >= stats.C)
        throw InputError("stats JSON cell outside grid");
      size_t i = static_cast<size_t>(s) * stats.C + y;
      if (seen[i]) throw InputError("stats JSON repeats a cell");
      seen[i] = true;
      stats.cells[i] = {cj.at("n").get<long>(), cj.at("E").get<double>(),
                        cj.at("V").get<double>(), cj.at("p").get<double>()};
    }
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
      throw InputError("stats JSON is missing cells");
  } catch (const json::exception& e) {
    throw InputError(std::string("bad stats JSON: ") + e.what());
  }
  stats.validate();
  return stats;
}

void write_stats_json(const StatsTable& stats, const std::string& path) {
  open_out(path) << stats_to_json(stats);
}

StatsTable read_stats_json(const std::string& path) {
  std::ostringstream ss;
  ss << open_in(path).rdbuf();
  return stats_from_json(ss.str());
}

namespace {

json certificate_json(const Certificate& cert) {
  json j;
  j["scenario"] = to_string(cert.scenario);
  j["rho"] = cert.rho;
  j["feasible"] = cert.feasible;
  if (cert.value)
    j["value"] = *cert.value;
  else
    j["value"] = nullptr;
  j["k"] = cert.k;
  j["r"] = cert.r;
  j["confidence"] = cert.confidence;
  j["min_feasible_rho"] = cert.min_feasible_rho;
  j["diagnostics"] = {{"status", cert.diagnostics.status},
                      {"iterations", cert.diagnostics.iterations},
                      {"violation", cert.diagnostics.violation},
                      {"heuristic_global", cert.diagnostics.heuristic_global}};
  if (cert.scenario == Scenario::General) {
    j["T"] = cert.T;
    if (cert.winning_cell) {
      j["winning_cell"] = {{"k_lo", cert.winning_cell->k_lo},
                           {"k_hi", cert.winning_cell->k_hi},
                           {"r_lo", cert.winning_cell->r_lo},
                           {"r_hi", cert.winning_cell->r_hi}};
    } else {
      j["winning_cell"] = nullptr;
    }
    json rows = json::array();
    if (!cert.x.empty()) {
      size_t cols = cert.r.size();
      for (size_t s = 0; s < cert.k.size(); ++s) {
        json row = json::array();
        for (size_t y = 0; y < cols; ++y) row.push_back(cert.x[s * cols + y]);
        rows.push_back(row);
      }
    }
    j["x"] = rows;
  }
  return j;
}

}  // namespace

std::string certificate_to_json(const Certificate& cert) {
  return certificate_json(cert).dump(2) + "\n";
}

void write_certificates_json(const std::vector<Certificate>& certs,
                             const std::string& path) {
  json arr = json::array();
  for (const auto& c : certs) arr.push_back(certificate_json(c));
  open_out(path) << arr.dump(2) << "\n";
}

void write_sweep_csv(const std::vector<Certificate>& certs,
                     const std::string& path) {
  auto out = open_out(path);
  out << "rho,bound,feasible\n";
  for (const auto& c : certs) {
    out << fmt_double(c.rho) << ",";
    if (c.feasible && c.value) out << fmt_double(*c.value);
    out << "," << (c.feasible ? 1 : 0) << "\n";
  }
}

std::vector<SweepPoint> read_sweep_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) !=
      std::vector<std::string>{"rho", "bound", "feasible"})
    throw InputError(path + ": expected header rho,bound,feasible");
  std::vector<SweepPoint> out;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3)
      throw InputError(path + " line " + std::to_string(line_no) +
                       ": expected 3 fields");
    SweepPoint pt;
    pt.rho = parse_double(fields[0], "rho", line_no);
    pt.feasible = parse_long(fields[2], "feasible", line_no) != 0;
    if (pt.feasible) pt.bound = parse_double(fields[1], "bound", line_no);
    out.push_back(pt);
  }
  return out;
}

void write_trials_csv(const std::vector<ShiftTrial>& trials,
                      const std::string& path) {
  auto out = open_out(path);
  out << "seed,distance,loss\n";
  for (const auto& t : trials) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%" PRIu64, t.seed);
    out << buf << "," << fmt_double(t.distance) << "," << fmt_double(t.loss)
        << "\n";
  }
}

std::vector<ShiftTrial> read_trials_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) !=
      std::vector<std::string>{"seed", "distance", "loss"})
    throw InputError(path + ": expected header seed,distance,loss");
  std::vector<ShiftTrial> out;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3)
      throw InputError(path + " line " + std::to_string(line_no) +
                       ": expected 3 fields");
    ShiftTrial t;
    try {
      t.seed = std::stoull(fields[0]);
    } catch (...) {
      throw InputError(path + " line " + std::to_string(line_no) + ": bad seed");
    }
    t.distance = parse_double(fields[1], "distance", line_no);
    t.loss = parse_double(fields[2], "loss", line_no);
    out.push_back(t);
  }
  return out;
}

std::string report_to_json(const ValidationReport& report) {
  json j;
  j["max_violation"] = report.max_violation;
  j["violations"] = report.violations;
  if (std::isfinite(report.tightness_gap))
    j["tightness_gap"] = report.tightness_gap;
  else
    j["tightness_gap"] = nullptr;
  return j.dump(2) + "\n";
}

void write_report_json(const ValidationReport& report, const std::string& path) {
  open_out(path) << report_to_json(report);
}

void write_plot_svg(const std::vector<SweepPoint>& sweep,
                    const std::vector<ShiftTrial>& trials,
                    const std::string& path) {
  std::vector<SweepPoint> feas;
  for (const auto& pt : sweep)
    if (pt.feasible) feas.push_back(pt);
  if (feas.empty()) throw InputError("empty sweep: nothing to plot");

  double x_lo = feas.front().rho, x_hi = feas.back().rho;
  for (const auto& t : trials) {
    x_lo = std::min(x_lo, t.distance);
    x_hi = std::max(x_hi, t.distance);
  }
  double y_hi = 0.0;
  for (const auto& pt : feas) y_hi = std::max(y_hi, pt.bound);
  for (const auto& t : trials) y_hi = std::max(y_hi, t.loss);
  if (y_hi <= 0.0) y_hi = 1.0;
  if (x_hi <= x_lo) x_hi = x_lo + 1e-6;

  const double W = 640, H = 480, m = 50;
  auto px = [&](double x) { return m + (x - x_lo) / (x_hi - x_lo) * (W - 2 * m); };
  auto py = [&](double y) { return H - m - y / y_hi * (H - 2 * m); };

  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes
  out << "<line x1=\"" << m << "\" y1=\"" << H - m << "\" x2=\"" << W - m
      << "\" y2=\"" << H - m << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\""
      << H - m << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">Hellinger distance</text>\n";
  out << "<text x=\"14\" y=\"" << H / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 14 "
      << H / 2 << ")\">loss</text>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    double xv = x_lo + (x_hi - x_lo) * tick / 4.0;
    double yv = y_hi * tick / 4.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", xv);
    out << "<text x=\"" << px(xv) << "\" y=\"" << H - m + 16
        << "\" text-anchor=\"middle\" font-size=\"10\">" << buf << "</text>\n";
    std::snprintf(buf, sizeof(buf), "%.3g", yv);
    out << "<text x=\"" << m - 6 << "\" y=\"" << py(yv) + 3
        << "\" text-anchor=\"end\" font-size=\"10\">" << buf << "</text>\n";
  }
  for (const auto& t : trials)
    out << "<circle cx=\"" << px(t.distance) << "\" cy=\"" << py(t.loss)
        << "\" r=\"1.5\" fill=\"grey\" fill-opacity=\"0.5\"/>\n";
  out << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"2\" points=\"";
  for (const auto& pt : feas) out << px(pt.rho) << "," << py(pt.bound) << " ";
  out << "\"/>\n</svg>\n";
}

void write_dual_samples_csv(const TrialDataset& data, const std::string& path) {
  auto out = open_out(path);
  out << "s,y,loss,loss_shifted\n";
  for (const auto& row : data.rows)
    out << row.s << "," << row.y << "," << fmt_double(row.loss) << ","
        << fmt_double(row.loss_shifted) << "\n";
}

}  // namespace faircert
