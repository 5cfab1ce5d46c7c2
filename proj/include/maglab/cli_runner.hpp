#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "maglab/report_io.hpp"
#include "maglab/steklov_symbol.hpp"

namespace maglab {

// Everything a run needs. Subcommand-specific fields are ignored by the others.
struct ExperimentConfig {
  std::string subcommand;
  std::filesystem::path out = "maglab_run";
  unsigned long long seed = 1;
  double tol = 1e-6;
  int order = 4;
  int cutoff = 16;
  bool check = false;

  // charts and sampling
  std::string chart = "all";     // flat, bumpy, hyperbolic, warped3, all
  int resolution = 0;            // 0: preset default
  int n_theta = 16;
  int trials = 0;                // 0: preset default
  // hyperbolic surfaces
  std::string surface = "octagon";  // octagon, twisted; xray also takes torus
  std::vector<double> twist{0.3, 0.2, 0.1};
  double lmax_factor = 2.0;
  double lmax = 0.0;             // absolute cutoff, overrides lmax_factor when > 0
  int word_budget = 12;
  int maslov = 0;
  // transport
  std::string word = "a";
  double f0 = 0.5;
  int steps = 4000;
  // magnetic operator, gauge, xray
  std::string preset;            // per subcommand, see README
  double flux = 0.25;
  int count = 20;
  double gauge_amp = 0.1;
  std::vector<double> periods;   // torus periods or cohomology periods
  int max_winding = 2;
  // Steklov
  std::string boundary;          // disk, flat, curved; recover-jets: torus, disk
  double q = 0.5;
  std::vector<double> a_theta;   // radial polynomial coefficients, disk
  int kmin = 16, kmax = 64, kstep = 4;
  int terms = 3;
  int inject_order = -1;         // recover-jets negative control, -1 for none
  double inject_amp = 0.2;

  void validate() const;
  nlohmann::json to_json() const;
};

struct CheckRecord {
  std::string name;
  double value = 0.0;
  double tol = 0.0;
  bool pass = true;
  std::string relation = "<";    // value < tol, or ">" and ">=" for lower bounds
};

struct RunResult {
  std::vector<CheckRecord> checks;
  bool ok() const;
};

// Runs one subcommand into cfg.out: artifacts, then manifest.json. Errors propagate.
RunResult run_experiment(const ExperimentConfig& cfg);
// The full property suite: each subcommand with its defaults in out/<subcommand>/, plus check.csv.
RunResult run_check_suite(const ExperimentConfig& cfg);

// Command line entry; exit 0 on success, 1 on a tolerance or invariant failure, 2 for usage or
// configuration errors, 3 for runtime errors. Failures leave error.json in the output directory.
int run_cli(int argc, const char* const* argv);

// Steklov presets shared by the subcommands: boundary data of the named kind and a partner whose
// jets differ by a boundary gauge and gauge jets of order 1..J (plus an optional genuine q jet).
BoundaryJets steklov_preset(const std::string& boundary, int n, int J, double q, const std::vector<double>& a_theta);
BoundaryJets manufactured_partner(const BoundaryJets& A, unsigned long long seed, int inject_order, double inject_amp,
                                  Eigen::ArrayXcd* injected = nullptr);

}  // namespace maglab
