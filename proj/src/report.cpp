#include "bowenlab/report.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "bowenlab/parallel.hpp"
#include "bowenlab/pole_catalog.hpp"
#include "bowenlab/verify.hpp"

namespace bowenlab {

namespace {

Cplx cplx_from(const Json& j, const std::string& where) {
  if (j.is_number()) return Cplx(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2)
    return Cplx(j[0].get<double>(), j[1].get<double>());
  throw DomainError("config: " + where + " must be a number or [re, im]");
}

Json cplx_to(Cplx z) { return Json::array({z.real(), z.imag()}); }

void reject_unknown(const Json& j, const std::vector<std::string>& known,
                    const std::string& block) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw DomainError("config: unknown key '" + it.key() + "' in " + block);
  }
}

std::vector<double> parse_grid(const std::string& range) {
  double lo, hi, step;
  char c1, c2;
  std::istringstream is(range);
  if (!(is >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0.0))
    throw DomainError("config: t_grid must be 'lo:hi:step'");
  std::vector<double> grid;
  for (double t = lo; t <= hi + 1e-12; t += step) grid.push_back(t);
  return grid;
}

}  // namespace

RunConfig parse_run_config(const Json& j) {
  RunConfig cfg;
  reject_unknown(j, {"command", "family", "construction", "perturbation", "numeric",
                     "output", "schema"},
                 "top level");
  if (j.contains("command")) cfg.command = j.at("command").get<std::string>();

  if (j.contains("family")) {
    const Json& f = j.at("family");
    reject_unknown(f, {"id", "m", "mu", "num", "den", "freq", "rho", "beta", "alpha", "M",
                       "q"},
                   "family");
    cfg.family_id = f.at("id").get<std::string>();
    if (f.contains("m")) cfg.m_power = f.at("m").get<int>();
    if (f.contains("mu")) cfg.mu = cplx_from(f.at("mu"), "family.mu");
    if (f.contains("num"))
      for (const auto& x : f.at("num")) cfg.rational_num.push_back(cplx_from(x, "num"));
    if (f.contains("den"))
      for (const auto& x : f.at("den")) cfg.rational_den.push_back(cplx_from(x, "den"));
    if (f.contains("freq")) cfg.rational_freq = cplx_from(f.at("freq"), "family.freq");
    if (f.contains("rho")) cfg.rho = f.at("rho").get<double>();
    if (f.contains("beta")) cfg.beta = f.at("beta").get<double>();
    if (f.contains("alpha")) cfg.alpha = f.at("alpha").get<double>();
    if (f.contains("M")) cfg.big_m = f.at("M").get<int>();
    if (f.contains("q")) cfg.q = f.at("q").get<int>();
  }

  if (j.contains("construction")) {
    const Json& c = j.at("construction");
    reject_unknown(c, {"kind", "branches", "t_target", "s0", "s1", "S", "koebe_K"},
                   "construction");
    if (c.contains("kind")) cfg.construction = c.at("kind").get<std::string>();
    if (c.contains("branches")) cfg.branches = c.at("branches").get<std::size_t>();
    if (c.contains("t_target")) cfg.t_target = c.at("t_target").get<double>();
    if (c.contains("s0")) cfg.s0 = c.at("s0").get<double>();
    if (c.contains("s1")) cfg.s1 = c.at("s1").get<double>();
    if (c.contains("S")) cfg.S = c.at("S").get<double>();
    if (c.contains("koebe_K")) cfg.koebe_K = c.at("koebe_K").get<double>();
  }

  if (j.contains("perturbation")) {
    const Json& p = j.at("perturbation");
    reject_unknown(p, {"mode", "epsilon", "delta", "rng_seed", "shift", "steps"},
                   "perturbation");
    if (p.contains("mode")) cfg.perturb_mode = p.at("mode").get<std::string>();
    if (p.contains("epsilon")) cfg.epsilon = p.at("epsilon").get<double>();
    if (p.contains("delta")) cfg.delta = p.at("delta").get<double>();
    if (p.contains("rng_seed")) cfg.rng_seed = p.at("rng_seed").get<std::uint64_t>();
    if (p.contains("shift")) cfg.shift = cplx_from(p.at("shift"), "perturbation.shift");
    if (p.contains("steps"))
      for (const auto& s : p.at("steps")) {
        if (!s.is_array() || s.size() != 4)
          throw DomainError("config: perturbation.steps entries are [c_re,c_im,l_re,l_im]");
        PerturbationStep st;
        st.shift = Cplx(s[0].get<double>(), s[1].get<double>());
        st.gain = Cplx(s[2].get<double>(), s[3].get<double>());
        cfg.steps.push_back(st);
      }
  }

  if (j.contains("numeric")) {
    const Json& n = j.at("numeric");
    reject_unknown(n, {"t", "t_grid", "t_lo", "t_hi", "depth", "word_cap", "tol", "samples",
                       "pole_budget", "max_modulus", "threads"},
                   "numeric");
    if (n.contains("t")) cfg.t = n.at("t").get<double>();
    if (n.contains("t_grid")) cfg.t_grid = n.at("t_grid").get<std::string>();
    if (n.contains("t_lo")) cfg.t_lo = n.at("t_lo").get<double>();
    if (n.contains("t_hi")) cfg.t_hi = n.at("t_hi").get<double>();
    if (n.contains("depth")) cfg.depth = n.at("depth").get<std::size_t>();
    if (n.contains("word_cap")) cfg.word_cap = n.at("word_cap").get<std::size_t>();
    if (n.contains("tol")) cfg.tol = n.at("tol").get<double>();
    if (n.contains("samples")) cfg.samples = n.at("samples").get<std::size_t>();
    if (n.contains("pole_budget")) cfg.pole_budget = n.at("pole_budget").get<std::size_t>();
    if (n.contains("max_modulus")) cfg.max_modulus = n.at("max_modulus").get<double>();
    if (n.contains("threads")) cfg.threads = n.at("threads").get<unsigned>();
  }

  if (j.contains("output")) {
    const Json& o = j.at("output");
    reject_unknown(o, {"path", "format"}, "output");
    if (o.contains("path")) cfg.out_path = o.at("path").get<std::string>();
    if (o.contains("format")) cfg.format = o.at("format").get<std::string>();
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("config: cannot open " + path);
  Json j = Json::parse(in);
  return parse_run_config(j);
}

Family family_from_config(const RunConfig& cfg) {
  if (cfg.family_id == "tan") return Family::tan_power(cfg.m_power, cfg.mu);
  if (cfg.family_id == "zsinz") return Family::z_sin_z();
  if (cfg.family_id == "zcossqrtz") return Family::z_cos_sqrt_z();
  if (cfg.family_id == "rational-exp")
    return Family::rational_exp(cfg.rational_num, cfg.rational_den, cfg.rational_freq);
  if (cfg.family_id == "formula-only") {
    int big_m = cfg.big_m > 0 ? cfg.big_m : 1;
    int q = cfg.q > 0 ? cfg.q : 1;
    return Family::formula_only(cfg.rho, std::max(cfg.beta, 0.0), big_m, big_m, q,
                                cfg.alpha);
  }
  throw DomainError("config: unknown family id '" + cfg.family_id + "'");
}

PerturbationSequence perturbation_from_config(const RunConfig& cfg) {
  if (cfg.perturb_mode == "zero") return PerturbationSequence::zero();
  if (cfg.perturb_mode == "constant") return PerturbationSequence::constant_shift(cfg.shift);
  if (cfg.perturb_mode == "random")
    return PerturbationSequence::random_in_ball(cfg.epsilon, cfg.delta, cfg.rng_seed);
  if (cfg.perturb_mode == "list") return PerturbationSequence::user_list(cfg.steps);
  throw DomainError("config: unknown perturbation mode '" + cfg.perturb_mode + "'");
}

namespace {

NumericOptions numerics_from(const RunConfig& cfg) {
  NumericOptions n;
  n.level_samples = cfg.samples;
  n.pole_budget = cfg.pole_budget;
  return n;
}

BuiltSystem build_from_config(const RunConfig& cfg) {
  Family fam = family_from_config(cfg);
  PerturbationSequence perturb = perturbation_from_config(cfg);
  if (cfg.construction == "mayer") {
    MayerConfig mc;
    mc.fam = fam;
    mc.s0 = cfg.s0;
    mc.s1 = cfg.s1;
    mc.koebe_K = cfg.koebe_K;
    mc.branch_count = cfg.branches;
    mc.t_target = cfg.t_target;
    mc.perturb = perturb;
    mc.numerics = numerics_from(cfg);
    return build_mayer(mc);
  }
  if (cfg.construction == "ku-affine") {
    KuAffineConfig kc;
    kc.fam = fam;
    kc.S = cfg.S;
    kc.t_target = cfg.t_target.value_or(cfg.t.value_or(0.3));
    kc.perturb = perturb;
    kc.numerics = numerics_from(cfg);
    return build_ku_affine(kc);
  }
  if (cfg.construction == "ku-escape") {
    KuEscapeConfig kc;
    kc.fam = fam;
    kc.S = cfg.S;
    kc.t_target = cfg.t_target.value_or(cfg.t.value_or(0.1));
    kc.perturb = perturb;
    kc.numerics = numerics_from(cfg);
    return build_ku_escape(kc);
  }
  throw DomainError("config: unknown construction '" + cfg.construction + "'");
}

Json constants_json(const BuiltSystem& built) {
  Json arr = Json::array();
  for (const auto& c : built.constants) {
    Json e;
    e["name"] = c.name;
    e["value"] = c.value;
    e["provenance"] = c.provenance;
    arr.push_back(e);
  }
  return arr;
}

Json pressure_json(const PressureEstimate& p) {
  Json e;
  e["t"] = p.t;
  e["depths"] = p.depths;
  e["log_Zn_over_n"] = p.log_Zn_over_n;
  Json methods = Json::array();
  for (auto m : p.methods) methods.push_back(to_string(m));
  e["methods"] = methods;
  e["lower_pressure"] = p.lower_pressure;
  return e;
}

Json cmd_formula(const RunConfig& cfg) {
  Json out;
  double value;
  if (cfg.q > 0) {
    value = mayer_dimension(cfg.rho, cfg.alpha, cfg.q);
    out["formula"] = "rho / (alpha + 1 + 1/q)";
    out["rho"] = cfg.rho;
    out["alpha"] = cfg.alpha;
    out["q"] = cfg.q;
  } else {
    if (cfg.big_m < 1) throw DomainError("formula: need --M (or --q)");
    if (cfg.beta < 0.0) throw DomainError("formula: need --beta >= 0");
    value = theoretical_dimension(cfg.rho, cfg.beta, cfg.big_m);
    out["formula"] = "rho M / (beta + M + 1)";
    out["rho"] = cfg.rho;
    out["beta"] = cfg.beta;
    out["M"] = cfg.big_m;
  }
  out["value"] = value;
  return out;
}

Json cmd_poles(const RunConfig& cfg) {
  Family fam = family_from_config(cfg);
  auto poles = fam.poles_up_to(cfg.max_modulus);
  Json out;
  out["family"] = fam.name();
  out["max_modulus"] = cfg.max_modulus;
  out["count"] = poles.size();
  Json list = Json::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(poles.size(), 64); ++i) {
    Json p;
    p["location"] = cplx_to(poles[i].location);
    p["multiplicity"] = poles[i].multiplicity;
    p["laurent_coeff"] = cplx_to(poles[i].laurent_coeff);
    p["principal"] = poles[i].principal;
    list.push_back(p);
  }
  out["poles_head"] = list;
  if (poles.size() >= 50) {
    ExponentEstimate est = estimate_order(poles);
    Json e;
    e["rho_hat"] = est.rho_hat;
    e["ci_halfwidth"] = est.ci_halfwidth;
    e["method"] = "counting-regression";
    out["order_estimate"] = e;
    out["mult_star_detected"] = detect_mult_star(poles, fam.order());
  }
  if (cfg.t) {
    BorelSum bs = borel_partial_sum(poles, *cfg.t);
    Json b;
    b["t"] = bs.exponent_t;
    b["partial_sum"] = bs.partial_sum;
    b["terms"] = bs.term_count;
    out["borel_sum"] = b;
  }
  out["divergence_type"] = fam.divergence_type();
  out["order_analytic"] = fam.order();
  out["mult_star_analytic"] = fam.dominant_multiplicity();
  return out;
}

Json cmd_dim(const RunConfig& cfg) {
  BuiltSystem built = build_from_config(cfg);
  DimensionReport rep = bowen_dimension(*built.system, cfg.t_lo, cfg.t_hi, cfg.tol,
                                        cfg.depth, cfg.word_cap);
  Json out;
  out["construction"] = cfg.construction;
  out["constants"] = constants_json(built);
  out["audits"] = built.audit_notes;
  out["bowen_bracket"] = Json::array({rep.bowen_bracket.first, rep.bowen_bracket.second});
  if (built.theoretical_target) out["theoretical_target"] = *built.theoretical_target;
  out["t_grid"] = rep.t_grid;
  Json pres = Json::array();
  for (const auto& p : rep.pressures) pres.push_back(pressure_json(p));
  out["pressures"] = pres;
  out["system_provenance"] = built.system->provenance();
  return out;
}

Json cmd_pressure(const RunConfig& cfg, std::vector<PressureEstimate>& estimates) {
  BuiltSystem built = build_from_config(cfg);
  std::vector<double> grid;
  if (!cfg.t_grid.empty())
    grid = parse_grid(cfg.t_grid);
  else if (cfg.t)
    grid = {*cfg.t};
  else
    throw DomainError("pressure: need numeric.t or numeric.t_grid");
  Json out;
  out["construction"] = cfg.construction;
  out["constants"] = constants_json(built);
  out["audits"] = built.audit_notes;
  Json pres = Json::array();
  for (double t : grid) {
    PressureEstimate p = lower_pressure(*built.system, t, cfg.depth, cfg.word_cap);
    estimates.push_back(p);
    pres.push_back(pressure_json(p));
  }
  out["pressures"] = pres;
  if (built.theoretical_target) out["theoretical_target"] = *built.theoretical_target;
  return out;
}

Json cmd_schedule(const RunConfig& cfg) {
  Family fam = family_from_config(cfg);
  Json out;
  out["family"] = fam.name();
  out["construction"] = cfg.construction;
  if (cfg.construction == "ku-escape") {
    KuEscapeConfig kc;
    kc.fam = fam;
    kc.S = cfg.S;
    kc.t_target = cfg.t_target.value_or(cfg.t.value_or(0.1));
    kc.perturb = perturbation_from_config(cfg);
    kc.numerics = numerics_from(cfg);
    EscapeSchedule sched = ku_escape_schedule(kc, std::max<std::size_t>(2, cfg.depth / 2));
    out["t_target"] = kc.t_target;
    out["xi"] = sched.xi;
    out["block_sums"] = sched.block_sums;
    out["thresholds"] = sched.thresholds;
    out["poles_consumed"] = sched.pole_moduli.size();
  } else if (cfg.construction == "ku-affine") {
    KuAffineConfig kc;
    kc.fam = fam;
    kc.S = cfg.S;
    kc.t_target = cfg.t_target.value_or(cfg.t.value_or(0.3));
    kc.perturb = perturbation_from_config(cfg);
    kc.numerics = numerics_from(cfg);
    KuAffineSchedule sched = ku_affine_schedule(kc);
    out["t_target"] = kc.t_target;
    out["N_t"] = sched.branch_count;
    out["threshold"] = sched.threshold;
    out["achieved_sum"] = sched.achieved;
    out["epsilon_budget"] = sched.eps_budget;
    out["delta_budget"] = sched.delta_budget;
    out["alphabet_max_modulus"] = sched.alphabet_max_modulus;
  } else {
    MayerConfig mc;
    mc.fam = fam;
    mc.s0 = cfg.s0;
    mc.s1 = cfg.s1;
    mc.koebe_K = cfg.koebe_K;
    mc.perturb = perturbation_from_config(cfg);
    mc.numerics = numerics_from(cfg);
    double t = cfg.t_target.value_or(cfg.t.value_or(0.4));
    MayerSchedule sched = mayer_branch_schedule(mc, t);
    out["t_target"] = t;
    out["branch_count"] = sched.branch_count;
    out["threshold"] = sched.threshold;
    out["achieved_sum"] = sched.achieved_sum;
  }
  return out;
}

Json cmd_escape_bound(const RunConfig& cfg) {
  Family fam = family_from_config(cfg);
  Json out;
  out["family"] = fam.name();
  double t = cfg.t.value_or(0.4);
  out["t"] = t;
  out["theoretical_threshold"] =
      theoretical_dimension(fam.order(), fam.coeff_exponent(), fam.max_multiplicity());
  try {
    double r3 = select_R3(fam, t, cfg.pole_budget, numerics_from(cfg));
    out["R3"] = r3;
    // realized alphabet: catalogued poles in (R3, catalogue end]
    std::vector<PoleRecord> alphabet;
    PoleCursor cursor(fam, {r3, std::nullopt, false});
    for (std::size_t i = alphabet.size(); i < cfg.pole_budget; ++i) {
      PoleRecord p = cursor.next();
      alphabet.push_back(p);
      if (alphabet.size() >= cfg.pole_budget) break;
    }
    PoleLadder lad = resolve_ladder(fam, cfg.S, numerics_from(cfg));
    CoverSumReport cover = escape_cover_sum(fam, t, lad.S, alphabet, cfg.depth,
                                            perturbation_from_config(cfg), numerics_from(cfg));
    Json cj;
    cj["per_level_factor"] = cover.per_level_factor;
    cj["levels"] = cover.levels;
    cj["sigma_analytic"] = cover.sigma_analytic;
    cj["sigma_direct"] = cover.sigma_direct;
    cj["alphabet_size"] = cover.alphabet_size;
    cj["alphabet_range"] = Json::array({cover.alphabet_lo, cover.alphabet_hi});
    out["cover_sum"] = cj;
  } catch (const NotSupercritical& e) {
    out["R3"] = nullptr;
    out["not_supercritical"] = e.what();
  }
  ThresholdScan scan = threshold_scan(fam, 0.6 * out["theoretical_threshold"].get<double>(),
                                      1.5 * out["theoretical_threshold"].get<double>(),
                                      0.05 * out["theoretical_threshold"].get<double>(),
                                      cfg.pole_budget);
  Json sj;
  sj["t_values"] = scan.t_values;
  sj["growth"] = scan.growth;
  sj["convergent"] = scan.convergent;
  sj["detected_transition"] = scan.detected_transition;
  out["threshold_scan"] = sj;
  return out;
}

Json cmd_escape_check(const RunConfig& cfg) {
  RunConfig ecfg = cfg;
  ecfg.construction = "ku-escape";
  BuiltSystem built = build_from_config(ecfg);
  Family fam = family_from_config(cfg);
  PerturbationSequence perturb = perturbation_from_config(cfg);
  double S = built.constant("S");
  double R2 = built.constant("R2");

  std::size_t count = std::max<std::size_t>(8, cfg.branches);
  auto addresses = sample_addresses(*built.system, cfg.depth, count, cfg.rng_seed + 17);
  Json out;
  out["construction"] = "ku-escape";
  out["constants"] = constants_json(built);
  out["audits"] = built.audit_notes;
  Json points = Json::array();
  std::size_t escaped = 0;
  for (const auto& addr : addresses) {
    EscapeWitness w = escape_witness(*built.system, addr, fam, perturb);
    bool stays_beyond = w.min_modulus > R2;
    bool near_schedule =
        w.max_pole_distance <= S && w.max_forward_residual <= w.residual_threshold();
    if (stays_beyond && near_schedule) ++escaped;
    Json p;
    p["start"] = cplx_to(w.start);
    p["word"] = addr.word;
    p["min_modulus"] = w.min_modulus;
    p["max_pole_distance"] = w.max_pole_distance;
    p["max_forward_residual"] = w.max_forward_residual;
    p["residual_threshold"] = w.residual_threshold();
    p["stays_beyond_R2"] = stays_beyond;
    p["follows_pole_schedule"] = near_schedule;
    points.push_back(p);
  }
  out["points"] = points;
  out["escape_threshold_R2"] = R2;
  out["pole_proximity_S"] = S;
  out["passing"] = escaped;
  out["total"] = addresses.size();
  bool blowup = derivative_blowup_audit(*built.system, addresses, fam, perturb);
  out["derivative_blowup_audit"] = blowup;
  return out;
}

Json cmd_selftest() {
  Json out;
  bool ok = true;
  {
    double v = moran_oracle({0.25, 0.25, 0.25});
    ok = ok && std::abs(v - std::log(3.0) / std::log(4.0)) < 1e-10;
    out["moran_3x_quarter"] = v;
  }
  {
    auto sys = make_similarity_system({0.25, 0.25, 0.25});
    DimensionReport rep = bowen_dimension(sys, 0.1, 1.2, 1e-8, 6, 1 << 20);
    double mid = 0.5 * (rep.bowen_bracket.first + rep.bowen_bracket.second);
    ok = ok && std::abs(mid - std::log(3.0) / std::log(4.0)) < 1e-6;
    out["bowen_3x_quarter"] = mid;
  }
  {
    Cplx root = newton_invert(
        Cplx(0.5, 0.0), Cplx(0.4, 0.0), [](Cplx z) { return z * z; },
        [](Cplx z) { return 2.0 * z; });
    ok = ok && std::abs(root - Cplx(std::sqrt(0.5), 0.0)) < 1e-10;
  }
  {
    Family fam = Family::z_sin_z();
    Cplx v = fam.value(Cplx(M_PI + 0.1, 0.0));
    ok = ok && std::abs(v - Cplx(-3.0900508490917676, 0.0)) < 1e-9;
  }
  out["pass"] = ok;
  if (!ok) throw NoConvergence("selftest failed", 0.0);
  return out;
}

}  // namespace

std::string pressure_csv(const std::vector<PressureEstimate>& estimates) {
  std::ostringstream os;
  os << "t,depth,log_Zn_over_n,method\n";
  os.precision(17);
  for (const auto& p : estimates)
    for (std::size_t i = 0; i < p.depths.size(); ++i)
      os << p.t << ',' << p.depths[i] << ',' << p.log_Zn_over_n[i] << ','
         << to_string(p.methods[i]) << '\n';
  return os.str();
}

Json run_command(const RunConfig& cfg) {
  if (cfg.threads != 0)
    set_thread_count(cfg.threads);
  else if (const char* env = std::getenv("BOWENLAB_THREADS"))
    set_thread_count(static_cast<unsigned>(std::strtoul(env, nullptr, 10)));

  Json report;
  report["schema"] = 1;
  report["command"] = cfg.command;

  std::vector<PressureEstimate> estimates;
  Json result;
  if (cfg.command == "formula")
    result = cmd_formula(cfg);
  else if (cfg.command == "poles")
    result = cmd_poles(cfg);
  else if (cfg.command == "dim")
    result = cmd_dim(cfg);
  else if (cfg.command == "pressure")
    result = cmd_pressure(cfg, estimates);
  else if (cfg.command == "schedule")
    result = cmd_schedule(cfg);
  else if (cfg.command == "escape-bound")
    result = cmd_escape_bound(cfg);
  else if (cfg.command == "escape-check")
    result = cmd_escape_check(cfg);
  else if (cfg.command == "selftest")
    result = cmd_selftest();
  else
    throw DomainError("unknown command '" + cfg.command + "'");
  report["result"] = result;
  if (cfg.command == "pressure" && cfg.format == "csv")
    report["csv"] = pressure_csv(estimates);
  return report;
}

int run(const RunConfig& cfg) {
  try {
    Json report = run_command(cfg);
    std::string payload;
    if (cfg.format == "csv" && report.contains("csv"))
      payload = report.at("csv").get<std::string>();
    else
      payload = report.dump(2) + "\n";
    if (!cfg.out_path.empty()) {
      std::ofstream out(cfg.out_path);
      if (!out) throw DomainError("cannot write " + cfg.out_path);
      out << payload;
    }
    if (cfg.command == "formula") {
      std::ostringstream os;
      os.precision(10);
      os << report.at("result").at("value").get<double>();
      std::cout << os.str() << "\n";
    } else {
      std::cout << payload;
    }
    return 0;
  } catch (const Error& e) {
    Json diag;
    diag["schema"] = 1;
    diag["command"] = cfg.command;
    diag["error"] = e.what();
    int code = is_config_error(e) ? 2 : 3;
    diag["exit_code"] = code;
    std::cout << diag.dump(2) << "\n";
    if (!cfg.out_path.empty()) {
      std::ofstream out(cfg.out_path);
      out << diag.dump(2) << "\n";
    }
    return code;
  }
}

}  // namespace bowenlab
