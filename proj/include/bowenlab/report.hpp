#ifndef BOWENLAB_REPORT_HPP
#define BOWENLAB_REPORT_HPP

#include <optional>
#include <string>
#include <vector>

// vendored single-header nlohmann/json; ordered_json keeps reports
// byte-stable across runs.
#include <json.hpp>

#include "bowenlab/constructions.hpp"

namespace bowenlab {

using Json = nlohmann::ordered_json;

struct RunConfig {
  std::string command;  // dim, pressure, poles, escape-bound, escape-check,
                        // schedule, selftest, formula

  // family block
  std::string family_id;  // tan, zsinz, zcossqrtz, rational-exp, formula-only
  int m_power = 1;
  Cplx mu{1.0, 0.0};
  std::vector<Cplx> rational_num, rational_den;
  Cplx rational_freq{0.0, 1.0};
  double rho = 0.0, beta = -1.0, alpha = 0.0;
  int big_m = 0, q = 0;

  // construction block
  std::string construction = "mayer";  // mayer, ku-affine, ku-escape
  std::size_t branches = 16;
  std::optional<double> t_target;
  double s0 = 0.0, s1 = 0.0, S = 0.0;
  double koebe_K = 1.15;

  // perturbation block
  std::string perturb_mode = "zero";
  double epsilon = 0.0, delta = 0.0;
  std::uint64_t rng_seed = 0;
  Cplx shift{0.0, 0.0};
  std::vector<PerturbationStep> steps;

  // numeric block
  std::optional<double> t;
  std::string t_grid;          // "lo:hi:step"
  double t_lo = 0.05, t_hi = 0.95;
  std::size_t depth = 6;
  std::size_t word_cap = 2000000;
  double tol = 1e-4;
  std::size_t samples = 128;
  std::size_t pole_budget = 200000;
  double max_modulus = 100.0;
  unsigned threads = 0;

  // output block
  std::string out_path;
  std::string format = "json";  // json or csv
};

// Strict JSON -> config: unknown keys are rejected.
RunConfig parse_run_config(const Json& j);
RunConfig load_config_file(const std::string& path);

Family family_from_config(const RunConfig& cfg);
PerturbationSequence perturbation_from_config(const RunConfig& cfg);

// Executes the configured command; returns the report payload. Throws
// bowenlab::Error subclasses on failure.
Json run_command(const RunConfig& cfg);

// Full pipeline: runs, writes the report/CSV files, prints a short summary,
// maps errors onto exit codes (0 ok, 2 infeasible config, 3 numerical).
int run(const RunConfig& cfg);

// CSV with header t,depth,log_Zn_over_n,method.
std::string pressure_csv(const std::vector<PressureEstimate>& estimates);

}  // namespace bowenlab

#endif  // BOWENLAB_REPORT_HPP
