#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "faircert/cert_general.hpp"
#include "faircert/cert_sensitive.hpp"
#include "faircert/io.hpp"
#include "faircert/parallel.hpp"
#include "faircert/stats.hpp"

namespace fs = std::filesystem;
using namespace faircert;

namespace {

int default_jobs() {
  if (const char* env = std::getenv("FAIRCERT_JOBS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

std::string out_file(const std::string& dir, const char* name) {
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

// Flat key=value run configuration; command-line flags win. Keys are the
// long flag names without dashes. Each command reads the keys it understands.
class FlatConfig {
 public:
  FlatConfig() = default;

  static FlatConfig load(const std::string& path) {
    FlatConfig cfg;
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file " + path);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw InputError(path + " line " + std::to_string(line_no) +
                         ": expected key=value");
      cfg.kv_[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return cfg;
  }

  template <typename T>
  void merge(const CLI::App* cmd, const std::string& flag, T& target) const {
    if (cmd->count("--" + flag) > 0) return;  // flags win
    auto it = kv_.find(flag);
    if (it == kv_.end()) return;
    parse_into(flag, it->second, target);
  }

 private:
  static void parse_into(const std::string&, const std::string& text,
                         std::string& out) {
    out = text;
  }
  static void parse_into(const std::string& key, const std::string& text,
                         double& out) {
    try {
      out = std::stod(text);
    } catch (...) {
      throw InputError("config key " + key + ": bad number '" + text + "'");
    }
  }
  static void parse_into(const std::string& key, const std::string& text,
                         int& out) {
    double v;
    parse_into(key, text, v);
    out = static_cast<int>(v);
  }
  static void parse_into(const std::string& key, const std::string& text,
                         long& out) {
    double v;
    parse_into(key, text, v);
    out = static_cast<long>(v);
  }
  static void parse_into(const std::string& key, const std::string& text,
                         std::uint64_t& out) {
    try {
      out = std::stoull(text);
    } catch (...) {
      throw InputError("config key " + key + ": bad number '" + text + "'");
    }
  }
  static void parse_into(const std::string&, const std::string& text,
                         bool& out) {
    out = text == "1" || text == "true" || text == "yes";
  }
  static void parse_into(const std::string& key, const std::string& text,
                         std::vector<double>& out) {
    out.clear();
    std::string field;
    std::istringstream ss(text);
    while (std::getline(ss, field, ',')) {
      double v;
      parse_into(key, field, v);
      out.push_back(v);
    }
  }

  std::map<std::string, std::string> kv_;
};

std::vector<double> resolve_rhos(const std::vector<double>& rho_list,
                                 double start, double stop, double step) {
  std::vector<double> rhos = rho_list;
  if (rhos.empty() && step > 0.0) {
    for (int i = 0;; ++i) {
      double r = start + i * step;
      if (r > stop + 1e-12) break;
      rhos.push_back(r);
    }
  }
  if (rhos.empty())
    throw InputError("no rho values given (use --rho or --rho-start/stop/step)");
  std::sort(rhos.begin(), rhos.end());
  for (double r : rhos)
    if (!(r > 0.0 && r <= 1.0)) throw InputError("rho values must be in (0, 1]");
  return rhos;
}

struct CertifyArgs {
  std::string config, stats_path, scenario = "sensitive", out_dir = "out";
  std::vector<double> rho_list;
  double rho_start = 0.0, rho_stop = 0.0, rho_step = 0.0;
  int T = 200;
  bool finite_sampling = false;
  double delta = 0.1;  // the paper's 90% per-quantity confidence
  double skew_s = -1.0, skew_y = -1.0;
  double M_override = -1.0;
  int jobs = default_jobs();
};

int run_certify(const CertifyArgs& args) {
  if (args.stats_path.empty()) throw InputError("--stats is required");
  StatsTable stats = read_stats_json(args.stats_path);
  if (args.M_override > 0.0) stats.M = args.M_override;
  SkewOptions skew;
  if (args.skew_s >= 0.0) skew.delta_s = args.skew_s;
  if (args.skew_y >= 0.0) skew.delta_l = args.skew_y;
  Scenario scenario = scenario_from_string(args.scenario);
  std::vector<double> rhos =
      resolve_rhos(args.rho_list, args.rho_start, args.rho_stop, args.rho_step);

  std::vector<Certificate> certs(rhos.size());
  if (scenario == Scenario::Sensitive) {
    parallel_for(rhos.size(), args.jobs, [&](size_t i) {
      certs[i] = args.finite_sampling
                     ? certify_sensitive_fs(stats, rhos[i], args.delta, skew)
                     : certify_sensitive(stats, rhos[i], skew);
    });
  } else {
    for (size_t i = 0; i < rhos.size(); ++i)
      certs[i] = args.finite_sampling
                     ? certify_general_fs(stats, rhos[i], args.T, args.delta,
                                          skew, args.jobs)
                     : certify_general(stats, rhos[i], args.T, skew, args.jobs);
  }

  for (const auto& c : certs) {
    if (c.feasible)
      std::printf("rho=%-8g bound=%.9f confidence=%g\n", c.rho, *c.value,
                  c.confidence);
    else
      std::printf("rho=%-8g infeasible (min feasible rho ~ %.6f)\n", c.rho,
                  c.min_feasible_rho);
  }
  write_certificates_json(certs, out_file(args.out_dir, "certificates.json"));
  write_sweep_csv(certs, out_file(args.out_dir, "sweep.csv"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness certification under Hellinger-bounded shifts"};
  app.require_subcommand(1);

  // --- stats ---
  auto* cmd_stats = app.add_subcommand(
      "stats", "Aggregate a samples CSV into a statistics table");
  std::string st_config, st_samples, st_loss = "zeroone", st_out = "out";
  int st_S = 2, st_C = 2;
  cmd_stats->add_option("--config", st_config, "key=value config file");
  cmd_stats->add_option("--samples", st_samples, "samples CSV");
  cmd_stats->add_option("--S", st_S, "sensitive attribute count");
  cmd_stats->add_option("--C", st_C, "label count");
  cmd_stats->add_option("--loss", st_loss, "zeroone|bce|jsd");
  cmd_stats->add_option("--out", st_out, "output directory");

  // --- certify ---
  auto* cmd_certify =
      app.add_subcommand("certify", "Compute fairness certificates over rho");
  CertifyArgs ca;
  cmd_certify->add_option("--config", ca.config, "key=value config file");
  cmd_certify->add_option("--stats", ca.stats_path, "stats JSON");
  cmd_certify->add_option("--scenario", ca.scenario, "sensitive|general");
  cmd_certify->add_option("--rho", ca.rho_list, "explicit rho values")
      ->delimiter(',');
  cmd_certify->add_option("--rho-start", ca.rho_start, "sweep start");
  cmd_certify->add_option("--rho-stop", ca.rho_stop, "sweep stop");
  cmd_certify->add_option("--rho-step", ca.rho_step, "sweep step");
  cmd_certify->add_option("--granularity", ca.T, "region granularity T");
  cmd_certify->add_flag("--finite-sampling", ca.finite_sampling,
                        "use confidence-interval statistics");
  cmd_certify->add_option("--delta", ca.delta, "per-quantity delta");
  cmd_certify->add_option("--skew-s", ca.skew_s, "sensitive skew bound");
  cmd_certify->add_option("--skew-y", ca.skew_y, "label skew bound");
  cmd_certify->add_option("--M", ca.M_override, "loss bound override");
  cmd_certify->add_option("--out", ca.out_dir, "output directory");
  cmd_certify->add_option("--jobs", ca.jobs, "worker count");

  // --- gen ---
  auto* cmd_gen = app.add_subcommand("gen", "Generate fair shifted trials");
  std::string g_config, g_scenario = "sensitive", g_samples, g_loss = "zeroone",
              g_out = "out";
  long g_trials = 1000, g_gaussian = 0;
  std::uint64_t g_seed = 12345;
  bool g_dump = false;
  cmd_gen->add_option("--config", g_config, "key=value config file");
  cmd_gen->add_option("--scenario", g_scenario, "sensitive|general");
  cmd_gen->add_option("--samples", g_samples, "samples CSV (loss layout)");
  cmd_gen->add_option("--gaussian", g_gaussian,
                      "synthesize a Gaussian-mixture demo dataset of this size");
  cmd_gen->add_option("--trials", g_trials, "number of trials");
  cmd_gen->add_option("--seed", g_seed, "RNG seed");
  cmd_gen->add_option("--loss", g_loss, "loss kind for the demo scorer");
  cmd_gen->add_flag("--dump-samples", g_dump, "also write samples.csv");
  cmd_gen->add_option("--out", g_out, "output directory");

  // --- validate ---
  auto* cmd_validate =
      app.add_subcommand("validate", "Check trials against a certificate sweep");
  std::string v_config, v_sweep, v_trials, v_out = "out";
  cmd_validate->add_option("--config", v_config, "key=value config file");
  cmd_validate->add_option("--sweep", v_sweep, "sweep CSV");
  cmd_validate->add_option("--trials", v_trials, "trials CSV");
  cmd_validate->add_option("--out", v_out, "output directory");

  // --- plot ---
  auto* cmd_plot = app.add_subcommand("plot", "Render sweep (and trials) as SVG");
  std::string p_config, p_sweep, p_trials, p_out = "out";
  cmd_plot->add_option("--config", p_config, "key=value config file");
  cmd_plot->add_option("--sweep", p_sweep, "sweep CSV");
  cmd_plot->add_option("--trials", p_trials, "trials CSV");
  cmd_plot->add_option("--out", p_out, "output directory");

  try {
    app.parse(argc, argv);

    if (*cmd_stats) {
      if (!st_config.empty()) {
        FlatConfig cfg = FlatConfig::load(st_config);
        cfg.merge(cmd_stats, "samples", st_samples);
        cfg.merge(cmd_stats, "S", st_S);
        cfg.merge(cmd_stats, "C", st_C);
        cfg.merge(cmd_stats, "loss", st_loss);
        cfg.merge(cmd_stats, "out", st_out);
      }
      if (st_samples.empty()) throw InputError("--samples is required");
      SamplesFile file = read_samples_csv(st_samples, st_S, st_C);
      LossKind kind = loss_kind_from_string(st_loss);
      StatsTable table;
      if (file.has_predictions)
        table = aggregate_predictions(file.predictions, st_S, st_C, kind);
      else if (file.has_dual) {
        std::vector<SampleRecord> recs;
        for (const auto& row : file.dual)
          recs.push_back({{row.s, row.y}, row.loss});
        table = aggregate_stats(recs, st_S, st_C, kind);
      } else {
        table = aggregate_stats(file.losses, st_S, st_C, kind);
      }
      write_stats_json(table, out_file(st_out, "stats.json"));
      std::printf("S=%d C=%d n=%ld M=%s\n", table.S, table.C,
                  table.total_count(),
                  table.M ? std::to_string(*table.M).c_str() : "unbounded");
      for (int s = 0; s < table.S; ++s)
        for (int y = 0; y < table.C; ++y) {
          const auto& c = table.cell(s, y);
          std::printf("cell (%d,%d): n=%ld E=%.6f V=%.6f p=%.6f\n", s, y, c.n,
                      c.E, c.V, c.p);
        }
      return 0;
    }

    if (*cmd_certify) {
      if (!ca.config.empty()) {
        FlatConfig cfg = FlatConfig::load(ca.config);
        cfg.merge(cmd_certify, "stats", ca.stats_path);
        cfg.merge(cmd_certify, "scenario", ca.scenario);
        cfg.merge(cmd_certify, "rho", ca.rho_list);
        cfg.merge(cmd_certify, "rho-start", ca.rho_start);
        cfg.merge(cmd_certify, "rho-stop", ca.rho_stop);
        cfg.merge(cmd_certify, "rho-step", ca.rho_step);
        cfg.merge(cmd_certify, "granularity", ca.T);
        cfg.merge(cmd_certify, "finite-sampling", ca.finite_sampling);
        cfg.merge(cmd_certify, "delta", ca.delta);
        cfg.merge(cmd_certify, "skew-s", ca.skew_s);
        cfg.merge(cmd_certify, "skew-y", ca.skew_y);
        cfg.merge(cmd_certify, "M", ca.M_override);
        cfg.merge(cmd_certify, "out", ca.out_dir);
        cfg.merge(cmd_certify, "jobs", ca.jobs);
      }
      return run_certify(ca);
    }

    if (*cmd_gen) {
      if (!g_config.empty()) {
        FlatConfig cfg = FlatConfig::load(g_config);
        cfg.merge(cmd_gen, "scenario", g_scenario);
        cfg.merge(cmd_gen, "samples", g_samples);
        cfg.merge(cmd_gen, "gaussian", g_gaussian);
        cfg.merge(cmd_gen, "trials", g_trials);
        cfg.merge(cmd_gen, "seed", g_seed);
        cfg.merge(cmd_gen, "loss", g_loss);
        cfg.merge(cmd_gen, "dump-samples", g_dump);
        cfg.merge(cmd_gen, "out", g_out);
      }
      TrialDataset data;
      if (g_gaussian > 0) {
        data = demo_dataset(GaussianMixtureSpec{}, g_gaussian, g_seed,
                            loss_kind_from_string(g_loss));
      } else if (!g_samples.empty()) {
        SamplesFile file = read_samples_csv(g_samples, 2, 2);
        if (file.has_dual) {
          data.rows = file.dual;
          data.has_shifted = true;
        } else if (!file.losses.empty()) {
          for (const auto& rec : file.losses)
            data.rows.push_back({rec.key.s, rec.key.y, rec.loss, 0.0});
        } else {
          throw InputError("gen needs a loss or dual-loss samples CSV");
        }
      } else {
        throw InputError("gen needs --samples or --gaussian");
      }
      if (g_dump)
        write_dual_samples_csv(data, out_file(g_out, "samples.csv"));
      std::vector<ShiftTrial> trials;
      if (scenario_from_string(g_scenario) == Scenario::Sensitive)
        trials = gen_sensitive_trials(data, g_trials, g_seed);
      else
        trials = gen_general_trials(data, g_trials, g_seed);
      write_trials_csv(trials, out_file(g_out, "trials.csv"));
      std::printf("wrote %zu trials\n", trials.size());
      return 0;
    }

    if (*cmd_validate) {
      if (!v_config.empty()) {
        FlatConfig cfg = FlatConfig::load(v_config);
        cfg.merge(cmd_validate, "sweep", v_sweep);
        cfg.merge(cmd_validate, "trials", v_trials);
        cfg.merge(cmd_validate, "out", v_out);
      }
      if (v_sweep.empty() || v_trials.empty())
        throw InputError("validate needs --sweep and --trials");
      auto sweep = read_sweep_csv(v_sweep);
      auto trials = read_trials_csv(v_trials);
      ValidationReport report = validate(trials, sweep);
      write_report_json(report, out_file(v_out, "report.json"));
      std::printf("max_violation=%.9g violations=%ld tightness_gap=%.9g\n",
                  report.max_violation, report.violations, report.tightness_gap);
      return 0;
    }

    if (*cmd_plot) {
      if (!p_config.empty()) {
        FlatConfig cfg = FlatConfig::load(p_config);
        cfg.merge(cmd_plot, "sweep", p_sweep);
        cfg.merge(cmd_plot, "trials", p_trials);
        cfg.merge(cmd_plot, "out", p_out);
      }
      if (p_sweep.empty()) throw InputError("plot needs --sweep");
      auto sweep = read_sweep_csv(p_sweep);
      std::vector<ShiftTrial> trials;
      if (!p_trials.empty()) trials = read_trials_csv(p_trials);
      write_plot_svg(sweep, trials, out_file(p_out, "plot.svg"));
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
  return 0;
}
