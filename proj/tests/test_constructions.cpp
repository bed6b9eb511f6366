#include <doctest.h>

#include <cmath>

#include "bowenlab/constructions.hpp"
#include "bowenlab/pole_catalog.hpp"

using namespace bowenlab;

TEST_CASE("mayer builder: audits, geometry, monotone brackets") {
  MayerConfig cfg;
  cfg.fam = Family::tan_power(1);
  cfg.branch_count = 8;
  BuiltSystem m8 = build_mayer(cfg);
  CHECK(m8.system->level(1).size() == 8);
  CHECK(m8.constant("s1") < m8.constant("s0") / (16.0 * cfg.koebe_K * cfg.koebe_K));
  CHECK(m8.constant("R2") == doctest::Approx(3.0 * m8.constant("R1")));
  CHECK(*m8.theoretical_target == doctest::Approx(0.5));
  // branch anchors beyond R2 and increasing
  REQUIRE(m8.branch_anchor_moduli.size() == 8);
  CHECK(m8.branch_anchor_moduli.front() > m8.constant("R2"));
  for (std::size_t i = 1; i < 8; ++i)
    CHECK(m8.branch_anchor_moduli[i] >= m8.branch_anchor_moduli[i - 1]);

  cfg.branch_count = 16;
  BuiltSystem m16 = build_mayer(cfg);
  auto r8 = bowen_dimension(*m8.system, 0.02, 0.95, 1e-4, 6, 5000);
  auto r16 = bowen_dimension(*m16.system, 0.02, 0.95, 1e-4, 6, 5000);
  CHECK(r16.bowen_bracket.first > r8.bowen_bracket.second - 1e-4);
  CHECK(r16.bowen_bracket.second < 0.51);
}

TEST_CASE("mayer level sums obey the derivation chain") {
  // Z_(1)(t) >= Q^{-2} L^{-1} 2^{-2(4+2/q)} sum |z_m|^{-t(alpha+1+1/q)}
  // (autonomous case), the quantitative engine behind the branch-count rule.
  MayerConfig cfg;
  cfg.fam = Family::tan_power(1);
  cfg.branch_count = 16;
  BuiltSystem built = build_mayer(cfg);
  double q = 1.0, t = 0.4;
  double Q = built.constant("growth_Q"), L = built.constant("comparability_L");
  double sum = 0.0;
  for (double zm : built.branch_anchor_moduli)
    sum += std::pow(zm, -t * (0.0 + 1.0 + 1.0 / q));
  double chain = std::pow(Q, -2.0) / L * std::pow(2.0, -2.0 * (4.0 + 2.0 / q)) * sum;
  double z1 = level_sum(built.system->level(1), t);
  CHECK(z1 >= chain);
}

TEST_CASE("mayer branch-count predicate is monotone in N_t") {
  MayerConfig cfg;
  cfg.fam = Family::tan_power(1);
  cfg.branch_count = 64;
  BuiltSystem built = build_mayer(cfg);
  double t = 0.4, expo = t * 2.0;
  double running = 0.0, prev = 0.0;
  for (double zm : built.branch_anchor_moduli) {
    running += std::pow(zm, -expo);
    CHECK(running > prev);
    prev = running;
  }
}

TEST_CASE("mayer schedule at desk scale is honestly out of reach") {
  // The branch-count threshold 2^{1+2(4+2/q)} K^2 Q^2 L is astronomical for
  // the catalogue constants; the schedule search must refuse rather than
  // fake it.
  MayerConfig cfg;
  cfg.fam = Family::tan_power(1);
  cfg.numerics.pole_budget = 20000;
  CHECK_THROWS_AS(mayer_branch_schedule(cfg, 0.4), ScheduleInfeasible);
}

TEST_CASE("mayer perturbed: containment audited, stability bracket") {
  MayerConfig cfg;
  cfg.fam = Family::tan_power(1);
  cfg.branch_count = 8;
  BuiltSystem plain = build_mayer(cfg);
  cfg.perturb = PerturbationSequence::random_in_ball(0.01, 0.01, 42);
  BuiltSystem pert = build_mayer(cfg);
  auto audit = audit_perturbation_stability(*pert.system, *plain.system, 0.3, 4, 0.01);
  CHECK(audit.within);
  for (double r : audit.level_ratios) {
    CHECK(r > 0.95 * audit.bracket_lo);
    CHECK(r < 1.05 * audit.bracket_hi);
  }
  // Oversized perturbations are rejected up front.
  cfg.perturb = PerturbationSequence::random_in_ball(0.2, 0.01, 1);
  CHECK_THROWS_AS(build_mayer(cfg), ConfigInfeasible);
}

TEST_CASE("ku affine: schedule, audits, pressure witness") {
  KuAffineConfig cfg;
  cfg.fam = Family::z_sin_z();
  cfg.t_target = 0.25;
  BuiltSystem built = build_ku_affine(cfg);
  CHECK(built.constant("N_t") > 100);
  CHECK(built.constant("a0_modulus") == doctest::Approx(M_PI));
  CHECK(*built.theoretical_target == doctest::Approx(1.0 / 3.0));
  CHECK(built.constant("schedule_achieved") >= built.constant("schedule_threshold"));
  // the scheduled level-sum bound held
  bool bound_pass = false;
  for (const auto& note : built.audit_notes)
    if (note.find("level-sum bound") != std::string::npos &&
        note.find("(pass)") != std::string::npos)
      bound_pass = true;
  CHECK(bound_pass);
  auto p = lower_pressure(*built.system, 0.25, 6, 2000);
  CHECK(p.lower_pressure > 0.0);

  // degenerate exponent
  KuAffineConfig zero;
  zero.fam = Family::z_sin_z();
  zero.t_target = 0.0;
  BuiltSystem trivial = build_ku_affine(zero);
  CHECK(trivial.constant("N_t") == 1);
  auto rep = bowen_dimension(*trivial.system, 0.0, 0.6, 1e-4, 6, 2000);
  CHECK(rep.bowen_bracket.second < 0.01);
}

TEST_CASE("ku affine on the tan family") {
  KuAffineConfig cfg;
  cfg.fam = Family::tan_power(1);
  cfg.t_target = 0.3;
  BuiltSystem built = build_ku_affine(cfg);
  CHECK(built.constant("N_t") > 10);
  CHECK(*built.theoretical_target == doctest::Approx(0.5));
  auto p = lower_pressure(*built.system, 0.3, 5, 1000);
  CHECK(p.lower_pressure > 0.0);

  // t = 0.45 < 1/2 still schedules finitely (divergence type), though far
  // beyond what a level can hold.
  KuAffineConfig big;
  big.fam = Family::tan_power(1);
  big.t_target = 0.45;
  big.numerics.pole_budget = 3000000;
  auto sched = ku_affine_schedule(big);
  CHECK(sched.branch_count > 100000);
  CHECK(sched.achieved >= sched.threshold);
  CHECK(sched.eps_budget > 0.0);
  CHECK(sched.eps_budget < sched.delta_budget);
}

TEST_CASE("ku escape: schedule against a brute accumulation") {
  KuEscapeConfig cfg;
  cfg.fam = Family::z_sin_z();
  cfg.t_target = 0.1;
  EscapeSchedule sched = ku_escape_schedule(cfg, 2);
  REQUIRE(sched.xi.size() >= 3);
  CHECK(sched.xi[0] == 0);

  // Independent re-accumulation from the pole stream.
  double expo = 0.1 * 3.0;
  PoleLadder lad = resolve_ladder(Family::z_sin_z(), 0.0, cfg.numerics);
  PoleCursor cursor(Family::z_sin_z(),
                    {std::max(2.0 * lad.R2, 1.0), 1, true});
  std::vector<double> mods;
  for (std::size_t i = 0; i <= sched.xi[2] + 4; ++i)
    mods.push_back(std::abs(cursor.next().location));
  double k_sched = 1.5 * lad.comparability_K;
  for (std::size_t step : {1u, 2u}) {
    double need = 2.0 * std::pow(k_sched, 4.0 / 3.0) * std::pow(mods[step], 2.0);
    double acc = 0.0;
    std::size_t j = sched.xi[step - 1];
    while (acc < need) {
      ++j;
      acc += std::pow(mods[j], -expo);
    }
    CHECK(j == sched.xi[step]);
  }
}

TEST_CASE("ku escape: levels, alphabets, growth by one") {
  KuEscapeConfig cfg;
  cfg.fam = Family::z_sin_z();
  cfg.t_target = 0.1;
  BuiltSystem built = build_ku_escape(cfg);
  std::size_t prev = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    const NcifsLevel& lev = built.system->level(n);
    if (n >= 2) CHECK(lev.size() <= prev + 1);
    prev = lev.size();
    CHECK(level_sum(lev, cfg.t_target, 32) >= 2.0);
  }
  // supercritical target: the schedule goal is unreachable
  KuEscapeConfig bad = cfg;
  bad.t_target = 0.34;
  bad.numerics.pole_budget = 100000;
  CHECK_THROWS_AS(build_ku_escape(bad), ScheduleInfeasible);

  // multiplicative perturbations are rejected for the escape construction
  KuEscapeConfig affine_pert = cfg;
  affine_pert.perturb = PerturbationSequence::random_in_ball(0.01, 0.05, 3);
  CHECK_THROWS_AS(build_ku_escape(affine_pert), ConfigInfeasible);
}

TEST_CASE("ku escape: stagnation heuristic fires on supercritical sums") {
  KuEscapeConfig cfg;
  cfg.fam = Family::z_sin_z();
  cfg.t_target = 0.34;
  cfg.numerics.pole_budget = 5000000;
  cfg.numerics.stagnation_rel = 1e-4;
  try {
    ku_escape_schedule(cfg, 1);
    FAIL("expected ScheduleInfeasible");
  } catch (const ScheduleInfeasible& e) {
    CHECK(std::string(e.what()).find("stagnated") != std::string::npos);
    CHECK(e.achieved_sum > 0.0);
  }
}

TEST_CASE("escape cover sums: factor dichotomy and direct enumeration") {
  Family zs = Family::z_sin_z();
  auto perturb = PerturbationSequence::zero();

  // empty alphabet
  CoverSumReport empty = escape_cover_sum(zs, 0.4, 0.7, {}, 3, perturb);
  CHECK(empty.per_level_factor == 0.0);

  // supercritical t with the alphabet beyond R3: factor <= 1, sigma bounded
  double r3 = select_R3(zs, 0.40, 100000);
  std::vector<PoleRecord> alphabet;
  PoleCursor cursor(zs, {r3, std::nullopt, false});
  for (int i = 0; i < 10000; ++i) alphabet.push_back(cursor.next());
  CoverSumReport super = escape_cover_sum(zs, 0.40, 0.7, alphabet, 4, perturb);
  CHECK(super.per_level_factor <= 1.0);
  for (std::size_t i = 1; i < super.sigma_analytic.size(); ++i)
    CHECK(super.sigma_analytic[i] <= super.sigma_analytic[i - 1] * (1.0 + 1e-12));

  // subcritical t with a full low alphabet: factor > 1, sigma grows
  std::vector<PoleRecord> low;
  PoleCursor cursor2(zs, {1.0, std::nullopt, false});
  for (int i = 0; i < 10000; ++i) low.push_back(cursor2.next());
  CoverSumReport sub = escape_cover_sum(zs, 0.25, 0.7, low, 4, perturb);
  CHECK(sub.per_level_factor > 1.0);
  CHECK(sub.sigma_analytic.back() > sub.sigma_analytic.front());

  // direct enumeration on a small alphabet stays below the analytic chain
  std::vector<PoleRecord> tiny(low.begin(), low.begin() + 4);
  CoverSumReport direct = escape_cover_sum(zs, 0.4, 0.7, tiny, 3, perturb);
  REQUIRE(direct.sigma_direct.size() >= 2);
  for (std::size_t i = 0; i < direct.sigma_direct.size(); ++i)
    CHECK(direct.sigma_direct[i] <= direct.sigma_analytic[i] * (1.0 + 1e-9));
}

TEST_CASE("select_R3 behaviour across the threshold") {
  Family zs = Family::z_sin_z();
  double r_easy = select_R3(zs, 2.0, 50000);
  double r_mid = select_R3(zs, 0.4, 50000);
  CHECK(r_easy == doctest::Approx(M_PI));  // rapid convergence: tiny tail already at pi
  CHECK(r_mid > 10.0 * r_easy);
  CHECK_THROWS_AS(select_R3(zs, 1.0 / 3.0, 50000), NotSupercritical);
  CHECK_THROWS_AS(select_R3(zs, 0.30, 100000), NotSupercritical);

  // the realized alphabet satisfies the defining inequality
  double r3 = select_R3(zs, 0.5, 50000);
  double sum = 0.0;
  PoleCursor cursor(zs, {r3, std::nullopt, false});
  for (int i = 0; i < 50000; ++i)
    sum += std::pow(std::abs(cursor.next().location), -0.5 * 3.0);
  CHECK(1.0 * std::pow(zs.comparability_seed(), 0.5) * sum <= 1.0);
}

TEST_CASE("threshold scan brackets the critical exponent") {
  auto scan = threshold_scan(Family::z_sin_z(), 0.28, 0.42, 0.01, 100000);
  CHECK(scan.detected_transition > 0.31);
  CHECK(scan.detected_transition < 0.36);
  auto scan2 = threshold_scan(Family::z_cos_sqrt_z(), 0.14, 0.26, 0.01, 100000);
  CHECK(scan2.detected_transition > 0.18);
  CHECK(scan2.detected_transition < 0.23);
}
