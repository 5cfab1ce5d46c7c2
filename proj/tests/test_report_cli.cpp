#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "maglab/cli_runner.hpp"
#include "maglab/errors.hpp"
#include "maglab/report_io.hpp"

using namespace maglab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "maglab_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(MAGLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

double cell(const CsvData& d, size_t row, const std::string& col) {
  const int c = d.column(col);
  REQUIRE(c >= 0);
  return std::stod(d.rows.at(row).at(c));
}

}  // namespace

TEST_SUITE("report_cli") {
  TEST_CASE("doubles round-trip through text") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, M_PI}) CHECK(std::stod(format_double(v)) == v);
    CHECK(format_double(std::nan("")) == "nan");
    CHECK(format_double(-INFINITY) == "-inf");
  }

  TEST_CASE("CSV writing, quoting and reading") {
    const fs::path dir = scratch("csv");
    CsvTable t({"name", "value", "n"});
    t.add({std::string("plain"), 0.25, 3});
    t.add({std::string("with,comma \"q\""), -1e-17, 4ll});
    CHECK_THROWS_AS(t.add({1.0}), InvalidArgument);
    RunDirectory rd(dir);
    rd.write_csv("t.csv", t);
    CHECK(rd.artifacts() == std::vector<std::string>{"t.csv"});
    const CsvData d = read_csv(dir / "t.csv");
    CHECK(d.header == std::vector<std::string>{"name", "value", "n"});
    REQUIRE(d.rows.size() == 2);
    CHECK(d.rows[1][0] == "with,comma \"q\"");
    CHECK(cell(d, 1, "value") == -1e-17);
    CHECK(d.column("missing") == -1);
  }

  TEST_CASE("manifest and error documents") {
    const fs::path dir = scratch("manifest");
    Manifest m;
    m.subcommand = "lengths";
    m.seed = 42;
    m.artifacts = {"a.csv"};
    write_manifest(dir, m);
    const auto j = read_json(dir / "manifest.json");
    CHECK(j["schema_version"] == kSchemaVersion);
    CHECK(j["seed"] == 42);
    CHECK(j["versions"].contains("eigen"));
    CHECK(j["versions"].contains("cli11"));
    write_error(dir, "x_code", "message", {{"k", 1}});
    const auto e = read_json(dir / "error.json");
    CHECK(e["code"] == "x_code");
    CHECK(e["details"]["k"] == 1);
  }

  TEST_CASE("config validation") {
    ExperimentConfig c;
    c.subcommand = "lengths";
    c.tol = -1.0;
    CHECK_THROWS(c.validate());
    c.tol = 1e-6;
    c.cutoff = 0;
    CHECK_THROWS(c.validate());
    c.cutoff = 16;
    CHECK_NOTHROW(c.validate());
    const auto j = c.to_json();
    CHECK(j["subcommand"] == "lengths");
    CHECK(j.contains("seed"));
  }

  TEST_CASE("library runs: circle spectrum and gauge verdicts") {
    ExperimentConfig c;
    c.subcommand = "schrodinger";
    c.out = scratch("circle");
    c.flux = 0.25;
    const RunResult r = run_experiment(c);
    CHECK(r.ok());
    const CsvData s = read_csv(c.out / "spectrum.csv");
    REQUIRE(s.rows.size() == 20);
    // (k + 1/4)^2 sorted: 1/16, 9/16, 25/16, 49/16, ...
    CHECK(cell(s, 0, "eigenvalue") == doctest::Approx(0.0625).epsilon(1e-12));
    CHECK(cell(s, 1, "eigenvalue") == doctest::Approx(0.5625).epsilon(1e-12));
    CHECK(cell(s, 2, "eigenvalue") == doctest::Approx(1.5625).epsilon(1e-12));
    const auto man = read_json(c.out / "manifest.json");
    CHECK(man["status"] == "ok");
    CHECK(man["subcommand"] == "schrodinger");

    ExperimentConfig g;
    g.subcommand = "gauge";
    g.out = scratch("gauge");
    g.trials = 8;
    CHECK(run_experiment(g).ok());
    const CsvData gd = read_csv(g.out / "gauge.csv");
    REQUIRE(gd.rows.size() == 8);
    const int kind = gd.column("kind"), verdict = gd.column("verdict");
    REQUIRE(kind >= 0);
    REQUIRE(verdict >= 0);
    for (const auto& row : gd.rows) {
      if (row[kind] == "gauge") CHECK(row[verdict] == "equivalent");
      if (row[kind] == "nonclosed" || row[kind] == "nonquantized") CHECK(row[verdict] == "not_equivalent");
    }
  }

  TEST_CASE("recover-jets on the disk leaves no q difference") {
    ExperimentConfig c;
    c.subcommand = "recover-jets";
    c.boundary = "disk";
    c.out = scratch("jets");
    CHECK(run_experiment(c).ok());
    const CsvData d = read_csv(c.out / "recovery.csv");
    REQUIRE(!d.rows.empty());
    for (size_t i = 0; i < d.rows.size(); ++i) CHECK(cell(d, i, "dq_sup") < 1e-8);
    CHECK(read_json(c.out / "ledger.json").contains("steps"));
  }

  TEST_CASE("CLI runs are deterministic") {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    REQUIRE(cli("--out " + a.string() + " --seed 9 lengths") == 0);
    REQUIRE(cli("--out " + b.string() + " --seed 9 lengths") == 0);
    for (const char* f : {"lengths.csv", "trace_invariant.csv", "lengths.json"})
      CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
    const auto m = read_json(a / "manifest.json");
    CHECK(m["seed"] == 9);
    CHECK(m["artifacts"].size() == 3);
    const CsvData l = read_csv(a / "lengths.csv");
    CHECK(l.header == std::vector<std::string>{"length", "word", "primitive_period", "poincare_det", "iterate",
                                               "multiplicity"});
    CHECK(cell(l, 0, "length") == doctest::Approx(2 * std::acosh(1 + 1 / std::sqrt(2.0))).epsilon(1e-12));
    // options after the subcommand name reach the parent too
    const fs::path c = scratch("det_c");
    REQUIRE(cli("lengths --seed 9 --out " + c.string()) == 0);
    CHECK(slurp(a / "lengths.csv") == slurp(c / "lengths.csv"));
  }

  TEST_CASE("CLI configuration files") {
    const fs::path dir = scratch("ini");
    {
      std::ofstream os(dir / "run.ini");
      os << "seed = 4\n[schrodinger]\nflux = 0.1\ncount = 5\n";
    }
    REQUIRE(cli("--out " + (dir / "run").string() + " --config " + (dir / "run.ini").string() + " schrodinger") == 0);
    const auto m = read_json(dir / "run" / "manifest.json");
    CHECK(m["seed"] == 4);
    CHECK(m["config"]["flux"] == doctest::Approx(0.1));
    CHECK(read_csv(dir / "run" / "spectrum.csv").rows.size() == 5);
    {
      std::ofstream os(dir / "bad.ini");
      os << "no_such_key = 1\n";
    }
    CHECK(cli("--out " + (dir / "bad").string() + " --config " + (dir / "bad.ini").string() + " lengths") == 2);
    CHECK(read_json(dir / "bad" / "error.json")["code"] == "config_error");

    // config_text from a manifest replays the same run
    REQUIRE(cli("--out " + (dir / "a").string() + " --seed 7 steklov-oracle --q 0.5 --a-theta 0 0 0.3 --kmax 48") == 0);
    const auto ma = read_json(dir / "a" / "manifest.json");
    {
      std::ofstream os(dir / "replay.ini");
      os << ma["config_text"].get<std::string>();
    }
    REQUIRE(cli("--out " + (dir / "b").string() + " --config " + (dir / "replay.ini").string() + " steklov-oracle") == 0);
    auto cb = read_json(dir / "b" / "manifest.json")["config"];
    auto ca = ma["config"];
    ca.erase("out");
    cb.erase("out");
    CHECK(ca == cb);
    CHECK(read_csv(dir / "a" / "oracle.csv").rows == read_csv(dir / "b" / "oracle.csv").rows);
  }

  TEST_CASE("CLI errors and exit codes") {
    const fs::path dir = scratch("errors");
    CHECK(cli("--out " + (dir / "u").string() + " frobnicate") == 2);
    CHECK(read_json(dir / "u" / "error.json")["code"] == "unknown_subcommand");
    CHECK(cli("--out " + (dir / "t").string() + " --tol -1 lengths") == 2);
    CHECK(read_json(dir / "t" / "error.json")["code"] == "config_error");
    CHECK(cli("--out " + (dir / "n").string()) == 2);
    CHECK(read_json(dir / "n" / "error.json")["code"] == "usage_error");
    // an unreachable tolerance is a tolerance violation
    CHECK(cli("--out " + (dir / "v").string() + " --tol 1e-30 --cutoff 6 schrodinger --preset torus --count 5") == 1);
    const auto v = read_json(dir / "v" / "error.json");
    CHECK(v["code"] == "tolerance_violation");
    CHECK(!v["details"]["failed"].empty());
    CHECK(read_json(dir / "v" / "manifest.json")["status"] == "tolerance_violation");
    // runtime failures exit 3
    CHECK(cli("--out " + (dir / "r").string() + " steklov-symbol --boundary sphere") == 3);
    CHECK(read_json(dir / "r" / "error.json")["code"] == "invalid_argument");
  }
}
