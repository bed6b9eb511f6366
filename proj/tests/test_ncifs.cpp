#include <doctest.h>

#include <cmath>
#include <random>

#include "bowenlab/ncifs.hpp"
#include "bowenlab/verify.hpp"

using namespace bowenlab;

namespace {

// Synthetic stationary system with prescribed per-level similarity ratios.
NcifsSystem system_with_level_ratios(const std::vector<std::vector<double>>& per_level,
                                     double K) {
  Disk d(Cplx(0, 0), 1.0);
  std::vector<NcifsLevel> levels;
  for (std::size_t n = 0; n < per_level.size(); ++n) {
    std::vector<MapPtr> branches;
    for (double r : per_level[n])
      branches.push_back(std::make_shared<Similarity>(Cplx(r, 0), Cplx(0, 0)));
    levels.emplace_back(n + 1, d, d, branches);
  }
  auto maker = [levels](std::size_t n) {
    return levels[std::min(n - 1, levels.size() - 1)];
  };
  return NcifsSystem(maker, K, per_level.size() == 1, "synthetic");
}

}  // namespace

TEST_CASE("level_sum on similarity levels") {
  auto sys = make_similarity_system({0.25, 0.25, 0.25});
  const NcifsLevel& lev = sys.level(1);
  CHECK(level_sum(lev, 1.0) == doctest::Approx(0.75).epsilon(1e-14));
  double moran_t = std::log(3.0) / std::log(4.0);
  CHECK(level_sum(lev, moran_t) == doctest::Approx(1.0).epsilon(1e-13));

  NcifsLevel empty(1, Disk(Cplx(0, 0), 1.0), Disk(Cplx(0, 0), 1.0), {});
  CHECK(level_sum(empty, 1.0) == 0.0);
}

TEST_CASE("exact_Zn multiplies for similarities") {
  auto sys = make_similarity_system({0.5, 1.0 / 3.0});
  CHECK(exact_Zn(sys, 2, 1.0, 1000) == doctest::Approx(25.0 / 36.0).epsilon(1e-13));
  CHECK(exact_Zn(sys, 1, 1.0, 1000) ==
        doctest::Approx(level_sum(sys.level(1), 1.0)).epsilon(1e-13));
  CHECK_THROWS_AS(exact_Zn(sys, 40, 1.0, 1000), WordBudgetExceeded);
}

TEST_CASE("product lower bound arithmetic and tightness") {
  // K = 1 similarities: the bound is exact.
  auto sys = make_similarity_system({0.5, 0.25, 0.125});
  for (std::size_t n : {1u, 2u, 3u, 4u})
    CHECK(product_lower_bound(sys, n, 0.7) ==
          doctest::Approx(exact_Zn(sys, n, 0.7, 1 << 20)).epsilon(1e-12));

  // K = 12, level sums 3 and 5 at t = 0.5: 12^{-1} * 15 = 1.25.
  std::vector<std::vector<double>> ratios = {
      std::vector<double>(12, 1.0 / 16.0),  // sum of sqrt = 12/4 = 3
      std::vector<double>(20, 1.0 / 16.0),  // 20/4 = 5
  };
  auto sys2 = system_with_level_ratios(ratios, 12.0);
  CHECK(level_sum(sys2.level(1), 0.5) == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(level_sum(sys2.level(2), 0.5) == doctest::Approx(5.0).epsilon(1e-13));
  CHECK(product_lower_bound(sys2, 2, 0.5) == doctest::Approx(1.25).epsilon(1e-12));
}

TEST_CASE("distortion inequality on randomized grids") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ratio_d(0.1, 0.45);
  std::uniform_int_distribution<int> count_d(2, 5);
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<std::vector<double>> per_level;
    for (int lev = 0; lev < 3; ++lev) {
      std::vector<double> rs(static_cast<std::size_t>(count_d(rng)));
      for (auto& r : rs) r = ratio_d(rng);
      per_level.push_back(rs);
    }
    auto sys = system_with_level_ratios(per_level, 1.5);
    for (std::size_t n : {1u, 2u, 3u})
      for (double t : {0.2, 0.5, 0.9, 1.3}) {
        double exact = exact_Zn(sys, n, t, 1 << 20);
        double bound = product_lower_bound(sys, n, t);
        CHECK(bound <= exact * (1.0 + 1e-12));
      }
  }
}

TEST_CASE("lower pressure closed forms") {
  // Single branch ratio r: pressure is t log r.
  auto one = make_similarity_system({0.3});
  for (double t : {0.5, 1.0, 1.7}) {
    auto p = lower_pressure(one, t, 6, 1 << 16);
    CHECK(p.lower_pressure == doctest::Approx(t * std::log(0.3)).epsilon(1e-10));
  }
  // N equal branches at the Moran exponent: pressure 0.
  auto sys = make_similarity_system({0.25, 0.25, 0.25});
  double moran_t = std::log(3.0) / std::log(4.0);
  auto p0 = lower_pressure(sys, moran_t, 6, 1 << 20);
  CHECK(std::abs(p0.lower_pressure) < 1e-9);
  // Per-level sums >= 2 force positive pressure.
  auto big = system_with_level_ratios({std::vector<double>(8, 0.25)}, 1.0);
  auto p1 = lower_pressure(big, 1.0, 6, 1 << 20);
  CHECK(p1.lower_pressure >= std::log(2.0) * (1.0 - 1e-9));
}

TEST_CASE("pressure estimates are strictly decreasing in t") {
  auto sys = make_similarity_system({0.4, 0.3, 0.2});
  double prev = HUGE_VAL;
  for (double t : {0.1, 0.4, 0.7, 1.0, 1.4}) {
    auto p = lower_pressure(sys, t, 5, 1 << 18);
    CHECK(p.lower_pressure < prev);
    prev = p.lower_pressure;
  }
}

TEST_CASE("bowen bisection against closed forms") {
  auto sys = make_similarity_system({0.25, 0.25, 0.25});
  auto rep = bowen_dimension(sys, 0.1, 1.5, 1e-8, 6, 1 << 20);
  double mid = 0.5 * (rep.bowen_bracket.first + rep.bowen_bracket.second);
  CHECK(std::abs(mid - 0.7924812503605781) < 1e-6);
  CHECK(rep.bowen_bracket.second - rep.bowen_bracket.first <= 1e-6);

  auto sys2 = make_similarity_system({0.5, 0.25});
  auto rep2 = bowen_dimension(sys2, 0.1, 1.5, 1e-8, 6, 1 << 20);
  double mid2 = 0.5 * (rep2.bowen_bracket.first + rep2.bowen_bracket.second);
  CHECK(std::abs(mid2 - 0.6942419136306173) < 1e-6);

  // A single map: the bracket collapses at zero.
  auto one = make_similarity_system({0.5});
  auto rep3 = bowen_dimension(one, 1e-9, 1.0, 1e-4, 6, 1 << 16);
  CHECK(rep3.bowen_bracket.second <= 1e-4);

  CHECK_THROWS_AS(bowen_dimension(sys, 0.1, 0.2, 1e-6, 6, 1 << 20), NoSignChange);
}

TEST_CASE("bowen bracket insensitive to the distortion constant on exact depths") {
  std::vector<std::vector<double>> ratios = {{0.3, 0.22, 0.14}};
  auto a = system_with_level_ratios(ratios, 2.0);
  auto b = system_with_level_ratios(ratios, 4.0);
  auto ra = bowen_dimension(a, 0.1, 1.5, 1e-7, 6, 1 << 20);
  auto rb = bowen_dimension(b, 0.1, 1.5, 1e-7, 6, 1 << 20);
  CHECK(std::abs(ra.bowen_bracket.first - rb.bowen_bracket.first) <= 2.0 / 6.0);
  CHECK(std::abs(ra.bowen_bracket.first - rb.bowen_bracket.first) < 1e-6);
}

TEST_CASE("open set condition audit") {
  // Disjoint images: pass.
  auto sys = make_similarity_system({0.25, 0.25, 0.25});
  CHECK(audit_open_set_condition(sys.level(1), 1.0));
  // Duplicated branch: identical images overlap.
  Disk d(Cplx(0, 0), 1.0);
  auto br = std::make_shared<Similarity>(Cplx(0.25, 0), Cplx(0.4, 0));
  NcifsLevel dup(1, d, d, {br, br});
  CHECK(!audit_open_set_condition(dup, 1.0));
}

TEST_CASE("uniform contraction audit") {
  auto sys = make_similarity_system({0.4, 0.3});
  auto audit = audit_uniform_contraction(sys, 5, 3, 16);
  CHECK(audit.uniform);
  CHECK(audit.beta == doctest::Approx(0.4).epsilon(1e-9));
}

TEST_CASE("level_sum propagates NonFiniteValue from singular samples") {
  struct Bad final : ConformalMap {
    Cplx value(Cplx z) const override { return z; }
    Cplx derivative(Cplx z) const override { return 1.0 / (z - Cplx(1.0, 0.0)); }
  };
  Disk d(Cplx(0, 0), 1.0);  // the boundary passes through the singularity
  NcifsLevel lev(1, d, d, {std::make_shared<Bad>()});
  CHECK_THROWS_AS(level_sum(lev, 1.0), NonFiniteValue);
}

TEST_CASE("word sup norms for nonlinear branches match direct composites") {
  // f(z) = z^2 pulled back by two square-root branches on a far disk: the
  // word table must equal the directly sampled composite sup norms.
  struct Root final : ConformalMap {
    int sign;
    explicit Root(int s) : sign(s) {}
    Cplx value(Cplx z) const override {
      Cplx r = std::sqrt(z);
      return sign > 0 ? r : -r;
    }
    Cplx derivative(Cplx z) const override {
      return 0.5 / value(z) * (sign > 0 ? 1.0 : 1.0);
    }
  };
  Disk d(Cplx(16.0, 0), 1.0);
  std::vector<MapPtr> branches = {std::make_shared<Root>(+1)};
  NcifsLevel lev(1, d, d, branches);
  auto maker = [lev](std::size_t) { return lev; };
  NcifsSystem sys(maker, 81.0, true);
  double direct = 0.0;
  for (int i = 0; i < 64; ++i) {
    Cplx z = d.boundary_point(i, 64);
    Cplx w = std::sqrt(z);
    direct = std::max(direct, std::abs(0.5 / w) * std::abs(0.5 / std::sqrt(w)));
  }
  CHECK(exact_Zn(sys, 2, 1.0, 100) == doctest::Approx(direct).epsilon(1e-12));
}
