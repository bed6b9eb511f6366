#include <doctest.h>

#include <cmath>

#include "bowenlab/report.hpp"

using namespace bowenlab;

TEST_CASE("config parsing is strict") {
  Json j = Json::parse(R"({
    "command": "formula",
    "family": {"id": "tan", "m": 2},
    "numeric": {"t": 0.4, "depth": 5},
    "output": {"path": "", "format": "json"}
  })");
  RunConfig cfg = parse_run_config(j);
  CHECK(cfg.command == "formula");
  CHECK(cfg.family_id == "tan");
  CHECK(cfg.m_power == 2);
  CHECK(cfg.t == doctest::Approx(0.4));
  CHECK(cfg.depth == 5);

  Json bad = j;
  bad["numeric"]["wordcap"] = 10;  // misspelled key
  CHECK_THROWS_AS(parse_run_config(bad), DomainError);
  Json bad2 = j;
  bad2["surprise"] = 1;
  CHECK_THROWS_AS(parse_run_config(bad2), DomainError);
}

TEST_CASE("family and perturbation construction from config") {
  RunConfig cfg;
  cfg.family_id = "zsinz";
  CHECK(family_from_config(cfg).id() == FamilyId::ZSinZ);
  cfg.family_id = "nonesuch";
  CHECK_THROWS_AS(family_from_config(cfg), DomainError);

  cfg.perturb_mode = "random";
  cfg.epsilon = 0.01;
  cfg.delta = 0.02;
  cfg.rng_seed = 7;
  auto seq = perturbation_from_config(cfg);
  CHECK(seq.mode() == PerturbMode::RandomInBall);
  CHECK(std::abs(seq.step(3).shift) < 0.01);

  cfg.perturb_mode = "zero";
  CHECK(perturbation_from_config(cfg).step(1).is_identity());
}

TEST_CASE("formula command values") {
  RunConfig cfg;
  cfg.command = "formula";
  cfg.rho = 2.0;
  cfg.beta = 0.0;
  cfg.big_m = 3;
  Json rep = run_command(cfg);
  CHECK(rep.at("result").at("value").get<double>() == doctest::Approx(1.5));

  RunConfig mc;
  mc.command = "formula";
  mc.rho = 2.0;
  mc.alpha = 0.0;
  mc.q = 3;
  Json rep2 = run_command(mc);
  CHECK(rep2.at("result").at("value").get<double>() == doctest::Approx(1.5));
}

TEST_CASE("poles command reports order and mult-star") {
  RunConfig cfg;
  cfg.command = "poles";
  cfg.family_id = "zsinz";
  cfg.max_modulus = 400.0;
  cfg.t = 3.0;
  Json rep = run_command(cfg);
  const Json& r = rep.at("result");
  CHECK(r.at("mult_star_detected").get<int>() == 1);
  CHECK(std::abs(r.at("order_estimate").at("rho_hat").get<double>() - 1.0) < 0.08);
  CHECK(r.at("borel_sum").at("partial_sum").get<double>() > 0.0);
}

TEST_CASE("reports are byte-stable across runs") {
  RunConfig cfg;
  cfg.command = "dim";
  cfg.family_id = "tan";
  cfg.construction = "mayer";
  cfg.branches = 8;
  cfg.t_lo = 0.05;
  cfg.t_hi = 0.9;
  cfg.tol = 1e-3;
  cfg.depth = 4;
  cfg.word_cap = 2000;
  Json a = run_command(cfg);
  Json b = run_command(cfg);
  CHECK(a.dump() == b.dump());
  CHECK(a.at("result").contains("bowen_bracket"));
  // every constant carries a provenance tag
  for (const auto& c : a.at("result").at("constants")) {
    std::string prov = c.at("provenance").get<std::string>();
    CHECK((prov == "analytic" || prov == "audited" || prov == "user"));
  }
}

TEST_CASE("pressure csv layout") {
  PressureEstimate p;
  p.t = 0.5;
  p.depths = {1, 2};
  p.log_Zn_over_n = {0.25, 0.125};
  p.methods = {ZnMethod::ExactEnumeration, ZnMethod::ProductLowerBound};
  std::string csv = pressure_csv({p});
  CHECK(csv.rfind("t,depth,log_Zn_over_n,method\n", 0) == 0);
  CHECK(csv.find("0.5,1,0.25,exact") != std::string::npos);
  CHECK(csv.find("0.5,2,0.125,product-bound") != std::string::npos);
}

TEST_CASE("run maps infeasible configs to exit code 2") {
  RunConfig cfg;
  cfg.command = "dim";
  cfg.family_id = "formula-only";
  cfg.rho = 1.0;
  cfg.beta = 0.0;
  cfg.construction = "mayer";
  CHECK(run(cfg) == 2);
}

TEST_CASE("schedule command (ku-affine) reports budgets") {
  RunConfig cfg;
  cfg.command = "schedule";
  cfg.family_id = "zsinz";
  cfg.construction = "ku-affine";
  cfg.t_target = 0.2;
  Json rep = run_command(cfg);
  const Json& r = rep.at("result");
  CHECK(r.at("N_t").get<std::size_t>() > 0);
  CHECK(r.at("achieved_sum").get<double>() >= r.at("threshold").get<double>());
  CHECK(r.at("delta_budget").get<double>() > 0.0);
}
