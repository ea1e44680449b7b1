#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "faircert/cert_sensitive.hpp"
#include "faircert/io.hpp"
#include "faircert/stats.hpp"

using namespace faircert;
namespace fs = std::filesystem;

namespace {

const std::string kCli = FAIRCERT_CLI_PATH;

int run(const std::string& args) {
  std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TmpDir {
  fs::path path;
  TmpDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  std::string file(const char* name) const { return (path / name).string(); }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("full pipeline: gen, stats, certify, validate, plot") {
  TmpDir dir("faircert_cli_pipeline");
  CHECK(run("gen --gaussian 8000 --trials 300 --seed 21 --dump-samples --out " +
            dir.str()) == 0);
  CHECK(fs::exists(dir.file("trials.csv")));
  CHECK(fs::exists(dir.file("samples.csv")));

  CHECK(run("stats --samples " + dir.file("samples.csv") +
            " --S 2 --C 2 --loss zeroone --out " + dir.str()) == 0);
  StatsTable stats = read_stats_json(dir.file("stats.json"));
  CHECK(stats.total_count() == 8000);

  // infeasible rho values exit 0: infeasibility is data, not failure
  CHECK(run("certify --stats " + dir.file("stats.json") +
            " --scenario sensitive --rho-start 0.05 --rho-stop 0.9 "
            "--rho-step 0.05 --out " +
            dir.str()) == 0);
  auto sweep = read_sweep_csv(dir.file("sweep.csv"));
  CHECK(sweep.size() == 18);
  CHECK(!sweep.front().feasible);
  CHECK(sweep.back().feasible);

  CHECK(run("validate --sweep " + dir.file("sweep.csv") + " --trials " +
            dir.file("trials.csv") + " --out " + dir.str()) == 0);
  std::string report = slurp(dir.file("report.json"));
  CHECK(report.find("max_violation") != std::string::npos);

  CHECK(run("plot --sweep " + dir.file("sweep.csv") + " --trials " +
            dir.file("trials.csv") + " --out " + dir.str()) == 0);
  std::string svg = slurp(dir.file("plot.svg"));
  CHECK(svg.find("<polyline") != std::string::npos);
}

TEST_CASE("stats round trip reproduces in-process certification") {
  TmpDir dir("faircert_cli_roundtrip");
  REQUIRE(run("gen --gaussian 4000 --trials 1 --seed 3 --dump-samples --out " +
              dir.str()) == 0);
  REQUIRE(run("stats --samples " + dir.file("samples.csv") +
              " --S 2 --C 2 --loss zeroone --out " + dir.str()) == 0);
  REQUIRE(run("certify --stats " + dir.file("stats.json") +
              " --rho 0.3,0.5 --out " + dir.str()) == 0);
  auto sweep = read_sweep_csv(dir.file("sweep.csv"));
  StatsTable stats = read_stats_json(dir.file("stats.json"));
  // compare against the in-process result
  auto cert = certify_sensitive(stats, 0.3);
  REQUIRE(cert.feasible);
  CHECK(sweep[0].bound == *cert.value);
}

TEST_CASE("identical configs produce byte-identical outputs") {
  TmpDir a("faircert_cli_det_a"), b("faircert_cli_det_b");
  for (const auto& dir : {a.str(), b.str()}) {
    REQUIRE(run("gen --gaussian 3000 --trials 100 --seed 77 --dump-samples "
                "--out " + dir) == 0);
    REQUIRE(run("stats --samples " + dir + "/samples.csv --S 2 --C 2 "
                "--loss zeroone --out " + dir) == 0);
    REQUIRE(run("certify --stats " + dir + "/stats.json --rho 0.3,0.6 "
                "--scenario general --granularity 25 --out " + dir) == 0);
  }
  for (const char* name : {"trials.csv", "samples.csv", "stats.json",
                           "sweep.csv", "certificates.json"})
    CHECK(slurp(a.file(name)) == slurp(b.file(name)));
  // job count does not change outputs either
  TmpDir c("faircert_cli_det_c");
  REQUIRE(run("gen --gaussian 3000 --trials 100 --seed 77 --dump-samples "
              "--out " + c.str()) == 0);
  REQUIRE(run("stats --samples " + c.str() + "/samples.csv --S 2 --C 2 "
              "--loss zeroone --out " + c.str()) == 0);
  REQUIRE(run("certify --stats " + c.str() + "/stats.json --rho 0.3,0.6 "
              "--scenario general --granularity 25 --jobs 3 --out " +
              c.str()) == 0);
  CHECK(slurp(a.file("sweep.csv")) == slurp(c.file("sweep.csv")));
}

TEST_CASE("config file supplies defaults and flags win") {
  TmpDir dir("faircert_cli_config");
  REQUIRE(run("gen --gaussian 3000 --trials 1 --seed 5 --dump-samples --out " +
              dir.str()) == 0);
  REQUIRE(run("stats --samples " + dir.file("samples.csv") +
              " --S 2 --C 2 --loss zeroone --out " + dir.str()) == 0);
  std::ofstream(dir.file("run.cfg")) << "rho=0.4\nstats=" << dir.file("stats.json")
                                     << "\nout=" << dir.str() << "\n";
  CHECK(run("certify --config " + dir.file("run.cfg")) == 0);
  auto sweep = read_sweep_csv(dir.file("sweep.csv"));
  REQUIRE(sweep.size() == 1);
  CHECK(sweep[0].rho == 0.4);
  // flag overrides the config value
  CHECK(run("certify --config " + dir.file("run.cfg") + " --rho 0.6") == 0);
  sweep = read_sweep_csv(dir.file("sweep.csv"));
  REQUIRE(sweep.size() == 1);
  CHECK(sweep[0].rho == 0.6);
}

TEST_CASE("error exit codes") {
  TmpDir dir("faircert_cli_errors");
  // schema error -> 2
  std::ofstream(dir.file("bad.csv")) << "loss,s,y\n0.1,0,0\n";
  CHECK(run("stats --samples " + dir.file("bad.csv") + " --S 2 --C 2 --out " +
            dir.str()) == 2);
  // missing file -> 2
  CHECK(run("certify --stats " + dir.file("nope.json") + " --rho 0.3 --out " +
            dir.str()) == 2);
  // BCE stats + general scenario without an M override -> 2
  REQUIRE(run("gen --gaussian 3000 --trials 1 --seed 5 --dump-samples --out " +
              dir.str()) == 0);
  REQUIRE(run("stats --samples " + dir.file("samples.csv") +
              " --S 2 --C 2 --loss bce --out " + dir.str()) == 0);
  CHECK(run("certify --stats " + dir.file("stats.json") +
            " --scenario general --rho 0.3 --out " + dir.str()) == 2);
  // ... and succeeds with --M
  CHECK(run("certify --stats " + dir.file("stats.json") +
            " --scenario general --rho 0.3 --granularity 25 --M 28 --out " +
            dir.str()) == 0);
  // gen with zero trials writes a header-only CSV
  CHECK(run("gen --gaussian 3000 --trials 0 --seed 5 --out " + dir.str()) == 0);
  CHECK(slurp(dir.file("trials.csv")) == "seed,distance,loss\n");
  // shuffled trials columns -> 2
  std::ofstream(dir.file("shuffled.csv")) << "distance,seed,loss\n0.1,1,0.2\n";
  std::ofstream(dir.file("sweep_ok.csv")) << "rho,bound,feasible\n0.3,0.5,1\n";
  CHECK(run("validate --sweep " + dir.file("sweep_ok.csv") + " --trials " +
            dir.file("shuffled.csv") + " --out " + dir.str()) == 2);
}

TEST_CASE("prediction-mode stats via the CLI") {
  TmpDir dir("faircert_cli_pred");
  std::ofstream csv(dir.file("pred.csv"));
  csv << "s,y,p0,p1\n";
  for (int i = 0; i < 40; ++i) {
    int s = i % 2, y = (i / 2) % 2;
    csv << s << "," << y << "," << (y == 0 ? 0.8 : 0.3) << ","
        << (y == 0 ? 0.2 : 0.7) << "\n";
  }
  csv.close();
  CHECK(run("stats --samples " + dir.file("pred.csv") +
            " --S 2 --C 2 --loss jsd --out " + dir.str()) == 0);
  StatsTable stats = read_stats_json(dir.file("stats.json"));
  for (const auto& c : stats.cells) {
    CHECK(c.E >= 0.0);
    CHECK(c.E <= 1.0);
  }
  // spot-check one cell against compute_loss by hand
  double expected = compute_loss(std::vector<double>{0.8, 0.2}, 0, LossKind::Jsd);
  CHECK(stats.cell(0, 0).E == doctest::Approx(expected));
}
