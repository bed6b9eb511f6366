// bowenlab command-line driver: builds the perturbed-family systems,
// estimates pressures and Bowen brackets, and writes JSON/CSV reports.

#include <CLI11.hpp>
#include <iostream>

#include "bowenlab/report.hpp"

namespace {

using bowenlab::RunConfig;

void add_common(CLI::App* sub, RunConfig& cfg, std::string& config_path) {
  sub->add_option("--config", config_path, "JSON config file (flags override it)");
  sub->add_option("--family", cfg.family_id,
                  "tan | zsinz | zcossqrtz | rational-exp | formula-only");
  sub->add_option("--m", cfg.m_power, "power m for the tan family");
  sub->add_option("--construction", cfg.construction, "mayer | ku-affine | ku-escape");
  sub->add_option("--branches", cfg.branches, "branch count (mayer) / sample count");
  sub->add_option("--t-target", [&cfg](const std::vector<std::string>& v) {
    cfg.t_target = std::stod(v.back());
    return true;
  }, "target exponent for the schedule searches");
  sub->add_option("--s0", cfg.s0, "outer radius of the return-map construction");
  sub->add_option("--s1", cfg.s1, "inner radius of the return-map construction");
  sub->add_option("--S", cfg.S, "pole-disk radius for the escape constructions");
  sub->add_option("--koebe-K", cfg.koebe_K, "distortion scale (81 = classical bound)");
  sub->add_option("--perturb-mode", cfg.perturb_mode, "zero | constant | random | list");
  sub->add_option("--epsilon", cfg.epsilon, "additive perturbation radius");
  sub->add_option("--delta", cfg.delta, "multiplicative perturbation radius");
  sub->add_option("--seed", cfg.rng_seed, "perturbation RNG seed");
  sub->add_option("--t", [&cfg](const std::vector<std::string>& v) {
    cfg.t = std::stod(v.back());
    return true;
  }, "single exponent t");
  sub->add_option("--t-grid", cfg.t_grid, "exponent grid lo:hi:step");
  sub->add_option("--t-bracket", [&cfg](const std::vector<std::string>& v) {
    const std::string& s = v.back();
    auto colon = s.find(':');
    if (colon == std::string::npos) return false;
    cfg.t_lo = std::stod(s.substr(0, colon));
    cfg.t_hi = std::stod(s.substr(colon + 1));
    return true;
  }, "bisection bracket lo:hi");
  sub->add_option("--depth", cfg.depth, "pressure depth / address depth");
  sub->add_option("--word-cap", cfg.word_cap, "exact-enumeration word budget");
  sub->add_option("--tol", cfg.tol, "bisection tolerance on t");
  sub->add_option("--samples", cfg.samples, "boundary samples for sup norms");
  sub->add_option("--pole-budget", cfg.pole_budget, "pole catalogue budget");
  sub->add_option("--max-modulus", cfg.max_modulus, "pole enumeration cutoff");
  sub->add_option("--threads", cfg.threads, "worker threads (0 = auto)");
  sub->add_option("--out", cfg.out_path, "report file path");
  sub->add_option("--format", cfg.format, "json | csv");
  // formula parameters
  sub->add_option("--rho", cfg.rho, "order rho");
  sub->add_option("--beta", cfg.beta, "pole-coefficient exponent beta");
  sub->add_option("--alpha", cfg.alpha, "derivative growth exponent alpha");
  sub->add_option("--M", cfg.big_m, "multiplicity bound M");
  sub->add_option("--q", cfg.q, "distinguished pole multiplicity q");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"non-autonomous conformal IFS dimension laboratory"};
  app.require_subcommand(1);

  const std::vector<std::string> commands = {"dim",          "pressure",  "poles",
                                             "escape-bound", "escape-check", "schedule",
                                             "selftest",     "formula"};
  struct SubState {
    RunConfig cfg;
    std::string config_path;
    CLI::App* sub = nullptr;
  };
  std::vector<SubState> states(commands.size());
  for (std::size_t i = 0; i < commands.size(); ++i) {
    states[i].sub = app.add_subcommand(commands[i]);
    states[i].cfg.command = commands[i];
    add_common(states[i].sub, states[i].cfg, states[i].config_path);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // bad invocation counts as an infeasible configuration
  }

  for (auto& st : states) {
    if (!st.sub->parsed()) continue;
    RunConfig cfg;
    if (!st.config_path.empty()) {
      try {
        cfg = bowenlab::load_config_file(st.config_path);
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
      }
      cfg.command = st.cfg.command;
      // Flags override file values, field by field.
      auto* s = st.sub;
      auto touched = [s](const std::string& n) {
        auto* o = s->get_option_no_throw(n);
        return o != nullptr && o->count() > 0;
      };
      if (touched("--family")) cfg.family_id = st.cfg.family_id;
      if (touched("--m")) cfg.m_power = st.cfg.m_power;
      if (touched("--construction")) cfg.construction = st.cfg.construction;
      if (touched("--branches")) cfg.branches = st.cfg.branches;
      if (touched("--t-target")) cfg.t_target = st.cfg.t_target;
      if (touched("--s0")) cfg.s0 = st.cfg.s0;
      if (touched("--s1")) cfg.s1 = st.cfg.s1;
      if (touched("--S")) cfg.S = st.cfg.S;
      if (touched("--koebe-K")) cfg.koebe_K = st.cfg.koebe_K;
      if (touched("--perturb-mode")) cfg.perturb_mode = st.cfg.perturb_mode;
      if (touched("--epsilon")) cfg.epsilon = st.cfg.epsilon;
      if (touched("--delta")) cfg.delta = st.cfg.delta;
      if (touched("--seed")) cfg.rng_seed = st.cfg.rng_seed;
      if (touched("--t")) cfg.t = st.cfg.t;
      if (touched("--t-grid")) cfg.t_grid = st.cfg.t_grid;
      if (touched("--t-bracket")) {
        cfg.t_lo = st.cfg.t_lo;
        cfg.t_hi = st.cfg.t_hi;
      }
      if (touched("--depth")) cfg.depth = st.cfg.depth;
      if (touched("--word-cap")) cfg.word_cap = st.cfg.word_cap;
      if (touched("--tol")) cfg.tol = st.cfg.tol;
      if (touched("--samples")) cfg.samples = st.cfg.samples;
      if (touched("--pole-budget")) cfg.pole_budget = st.cfg.pole_budget;
      if (touched("--max-modulus")) cfg.max_modulus = st.cfg.max_modulus;
      if (touched("--threads")) cfg.threads = st.cfg.threads;
      if (touched("--out")) cfg.out_path = st.cfg.out_path;
      if (touched("--format")) cfg.format = st.cfg.format;
      if (touched("--rho")) cfg.rho = st.cfg.rho;
      if (touched("--beta")) cfg.beta = st.cfg.beta;
      if (touched("--alpha")) cfg.alpha = st.cfg.alpha;
      if (touched("--M")) cfg.big_m = st.cfg.big_m;
      if (touched("--q")) cfg.q = st.cfg.q;
      return bowenlab::run(cfg);
    }
    return bowenlab::run(st.cfg);
  }
  return 2;
}
