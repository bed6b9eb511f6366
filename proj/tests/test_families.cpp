#include <doctest.h>

#include <cmath>
#include <random>

#include "bowenlab/families.hpp"

using namespace bowenlab;

namespace {
// Long-double evaluation of 1/(z sin z), independent of the library path.
long double zsinz_ld(long double x) { return 1.0L / (x * std::sin(x)); }
}  // namespace

TEST_CASE("evaluate: catalogue values") {
  Family zs = Family::z_sin_z();
  // oracle: 1/((pi+0.1) sin(pi+0.1)) in extended precision
  long double want = zsinz_ld(static_cast<long double>(M_PI) + 0.1L);
  Cplx got = zs.value(Cplx(M_PI + 0.1, 0.0));
  CHECK(std::abs(got.real() - static_cast<double>(want)) < 1e-12);
  CHECK(std::abs(got.real() - (-3.0900508490917676)) < 1e-12);

  Family tan1 = Family::tan_power(1);
  CHECK(std::abs(tan1.value(Cplx(M_PI / 4.0, 0.0)) - Cplx(1.0, 0.0)) < 1e-14);
  PerturbationStep shifted{Cplx(0.01, 0.0), Cplx(1.0, 0.0)};
  CHECK(std::abs(tan1.value(Cplx(M_PI / 4.0, 0.0), shifted) - Cplx(1.01, 0.0)) < 1e-14);
}

TEST_CASE("derivative: finite-difference oracle and gain linearity") {
  Family zs = Family::z_sin_z();
  Family tan1 = Family::tan_power(1);
  CHECK(std::abs(tan1.derivative(Cplx(0, 0)) - Cplx(1, 0)) < 1e-14);

  Cplx z(M_PI + 0.1, 0.0);
  double h = 1e-6;
  Cplx fd = (zs.value(z + Cplx(h, 0)) - zs.value(z - Cplx(h, 0))) / (2.0 * h);
  Cplx an = zs.derivative(z);
  CHECK(std::abs(fd - an) / std::abs(an) < 1e-5);

  PerturbationStep doubled{Cplx(0, 0), Cplx(2.0, 0.0)};
  for (Cplx w : {Cplx(1.1, 0.3), Cplx(-2.0, 0.7), Cplx(4.4, -0.2)}) {
    CHECK(zs.derivative(w, doubled) == 2.0 * zs.derivative(w));
    CHECK(tan1.derivative(w, doubled) == 2.0 * tan1.derivative(w));
  }
}

TEST_CASE("evaluate near a pole raises PoleHit") {
  Family zs = Family::z_sin_z();
  CHECK_THROWS_AS(zs.value(Cplx(M_PI, 0.0)), PoleHit);
}

TEST_CASE("enumerate_poles per family") {
  Family tan1 = Family::tan_power(1);
  auto tp = tan1.poles_up_to(5.0);
  REQUIRE(tp.size() == 4);
  CHECK(std::abs(tp[0].location - Cplx(M_PI / 2, 0)) < 1e-14);
  CHECK(std::abs(tp[1].location - Cplx(-M_PI / 2, 0)) < 1e-14);
  CHECK(std::abs(std::abs(tp[2].location) - 3 * M_PI / 2) < 1e-14);

  Family zc = Family::z_cos_sqrt_z();
  auto zp = zc.poles_up_to(30.0);
  bool has_first = false, has_second = false;
  for (const auto& p : zp) {
    if (std::abs(p.location - Cplx(2.4674011002723395, 0)) < 1e-12) has_first = true;
    if (std::abs(p.location - Cplx(22.206609902451056, 0)) < 1e-11) has_second = true;
    CHECK(p.multiplicity == 1);
  }
  CHECK(has_first);
  CHECK(has_second);

  Family zs = Family::z_sin_z();
  auto sp = zs.poles_up_to(10.0);
  REQUIRE(sp.size() == 7);
  CHECK(sp[0].multiplicity == 2);
  CHECK(std::abs(sp[0].location) == 0.0);
  for (std::size_t i = 1; i < sp.size(); ++i) {
    CHECK(sp[i].multiplicity == 1);
    CHECK(std::abs(std::remainder(sp[i].location.real(), M_PI)) < 1e-12);
  }
  // sorted by modulus
  for (std::size_t i = 1; i < sp.size(); ++i)
    CHECK(std::abs(sp[i - 1].location) <= std::abs(sp[i].location) + 1e-12);
}

TEST_CASE("laurent data matches the local expansion") {
  // |f0(z) (z-a)^m / c - 1| must vanish as z -> a.
  for (Family fam : {Family::z_sin_z(), Family::tan_power(2), Family::z_cos_sqrt_z()}) {
    for (std::size_t k = 0; k < 6; ++k) {
      PoleRecord p = fam.pole_by_rank(k);
      Cplx z = p.location + Cplx(1e-5, 0.7e-5);
      Cplx u = z - p.location;
      Cplx pw = 1.0;
      for (int j = 0; j < p.multiplicity; ++j) pw *= u;
      Cplx ratio = fam.value(z) * pw / p.laurent_coeff;
      CHECK(std::abs(ratio - Cplx(1, 0)) < 1e-3);
    }
  }
}

TEST_CASE("local_branch round trips") {
  Family zs = Family::z_sin_z();
  PoleRecord pi_pole = zs.pole_by_rank(1);
  REQUIRE(std::abs(pi_pole.location - Cplx(M_PI, 0)) < 1e-14);
  Disk dom(Cplx(-3.0900508490917676, 0.0), 0.3);
  auto br = local_branch(zs, PerturbationStep::identity(), pi_pole, 1, dom);
  Cplx z = br->value(Cplx(-3.0900508490917676, 0.0));
  CHECK(std::abs(z - Cplx(M_PI + 0.1, 0.0)) < 1e-9);

  Family tan1 = Family::tan_power(1);
  PoleRecord b = tan1.pole_by_rank(0);
  Disk d2(Cplx(2.0, 0.0), 0.4);
  auto br2 = local_branch(tan1, PerturbationStep::identity(), b, 1, d2);
  for (std::size_t i = 0; i < 8; ++i) {
    Cplx w = d2.boundary_point(i, 8);
    CHECK(std::abs(tan1.value(br2->value(w)) - w) < 1e-10);
  }

  CHECK_THROWS_AS(local_branch(zs, PerturbationStep::identity(), pi_pole, 2, dom),
                  BranchDomainInvalid);
}

TEST_CASE("branch round trip over random targets per family") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Family zs = Family::z_sin_z();
  PoleRecord a = zs.pole_by_rank(3);  // 2 pi
  Disk dom(Cplx(7.0, 0.0), 1.2);
  auto br = local_branch(zs, PerturbationStep::identity(), a, 1, dom);
  for (int i = 0; i < 1000; ++i) {
    Cplx w = dom.center + Cplx(unif(rng), unif(rng)) * (dom.radius / 1.5);
    Cplx z = br->value(w);
    CHECK(std::abs(zs.value(z) - w) <= 1e-9 * (1.0 + std::abs(w)) * 100.0);
  }
}

TEST_CASE("dimension formulas") {
  CHECK(theoretical_dimension(1, 1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(theoretical_dimension(0.5, 0.5, 1) == doctest::Approx(0.2).epsilon(1e-15));
  for (int q = 1; q <= 5; ++q)
    CHECK(theoretical_dimension(2, 0, q) ==
          doctest::Approx(2.0 * q / (q + 1.0)).epsilon(1e-15));
  for (int m = 1; m <= 6; ++m)
    CHECK(theoretical_dimension(1, 0, m) == doctest::Approx(m / (m + 1.0)).epsilon(1e-15));
  CHECK_THROWS_AS(theoretical_dimension(0.0, 1, 1), DomainError);

  for (int d = 1; d <= 8; ++d)
    CHECK(mayer_dimension(d / 2.0 + 1.0, d / 2.0, 1) ==
          doctest::Approx((d + 2.0) / (d + 4.0)).epsilon(1e-15));
  CHECK(mayer_dimension(1, 0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  for (int q = 1; q <= 5; ++q)
    CHECK(mayer_dimension(2, 0, q) == doctest::Approx(2.0 * q / (q + 1.0)).epsilon(1e-15));
  CHECK_THROWS_AS(mayer_dimension(1, -3.0, 1), DomainError);
}

TEST_CASE("coefficient comparability law near poles") {
  // |f0(z)| |z-a|^m |a|^beta pinned in [1/2, 2] at distance 0.1.
  Family zs = Family::z_sin_z();
  for (int n = 1; n <= 100; ++n) {
    Cplx a(n * M_PI, 0.0);
    for (int i = 0; i < 64; ++i) {
      Cplx z = a + 0.1 * std::exp(Cplx(0, 2 * M_PI * i / 64.0));
      double ratio = std::abs(zs.value(z)) * 0.1 * std::pow(std::abs(a), 1.0);
      CHECK(ratio > 0.5);
      CHECK(ratio < 2.0);
    }
  }
}

TEST_CASE("branch derivative asymptotics stay within a bounded factor") {
  for (Family fam : {Family::z_sin_z(), Family::tan_power(1), Family::z_cos_sqrt_z()}) {
    double beta = fam.coeff_exponent();
    double worst = 1.0;
    PoleCursor cursor(fam, {3.0, std::nullopt, true});
    PoleRecord base = cursor.next();
    for (int k = 0; k < 12; ++k) {
      PoleRecord a = cursor.next();
      int m = a.multiplicity;
      Disk dom(base.location, 0.4);
      auto br = local_branch(fam, PerturbationStep::identity(), a, m, dom);
      for (int i = 0; i < 8; ++i) {
        Cplx z = dom.boundary_point(i, 8);
        double law = std::pow(std::abs(z), -(m + 1.0) / m) *
                     std::pow(std::abs(a.location), -beta / m);
        double r = std::abs(br->derivative(z)) / law;
        worst = std::max({worst, r, 1.0 / r});
      }
    }
    CHECK(worst <= 20.0);
  }
}

TEST_CASE("tan pole counting grows linearly") {
  Family tan1 = Family::tan_power(1);
  for (double r : {100.0 * M_PI, 200.0 * M_PI}) {
    double count = static_cast<double>(tan1.poles_up_to(r).size());
    CHECK(std::abs(count / r - 2.0 / M_PI) / (2.0 / M_PI) < 0.05);
  }
}

TEST_CASE("perturbation sequences") {
  auto zero = PerturbationSequence::zero();
  CHECK(zero.step(1).is_identity());
  CHECK(zero.step(1000).is_identity());

  auto rnd = PerturbationSequence::random_in_ball(0.01, 0.02, 42);
  auto rnd2 = PerturbationSequence::random_in_ball(0.01, 0.02, 42);
  for (std::size_t n : {1u, 2u, 7u, 100u}) {
    PerturbationStep a = rnd.step(n), b = rnd2.step(n);
    CHECK(a.shift == b.shift);
    CHECK(a.gain == b.gain);
    CHECK(std::abs(a.shift) < 0.01);
    CHECK(std::abs(a.gain - Cplx(1, 0)) < 0.02);
    CHECK(std::abs(1.0 / a.gain - Cplx(1, 0)) < 0.02);
  }
  CHECK(PerturbationSequence::random_in_ball(0.01, 0.0, 1).additive_only());
  CHECK(!rnd.additive_only());
  CHECK_THROWS_AS(rnd.require_within(0.005, 1.0), ConfigInfeasible);

  auto from_list = PerturbationSequence::user_list(
      {PerturbationStep{Cplx(0.1, 0), Cplx(1, 0)}});
  CHECK(from_list.additive_only());
  CHECK(from_list.step(5).shift == Cplx(0.1, 0));
}

TEST_CASE("rational-exp reproduces tan") {
  // tan z = -i (w^2 - 1)/(w^2 + 1) with w = e^{iz}
  Family rexp = Family::rational_exp({Cplx(0, 1), Cplx(0, 0), Cplx(0, -1)},
                                     {Cplx(1, 0), Cplx(0, 0), Cplx(1, 0)});
  Family tan1 = Family::tan_power(1);
  for (Cplx z : {Cplx(0.3, 0.1), Cplx(-1.2, 0.4), Cplx(2.0, -0.3)}) {
    CHECK(std::abs(rexp.value(z) - tan1.value(z)) < 1e-10);
    CHECK(std::abs(rexp.derivative(z) - tan1.derivative(z)) < 1e-9);
  }
  auto poles = rexp.poles_up_to(5.0);
  REQUIRE(poles.size() == 4);
  CHECK(std::abs(std::abs(poles[0].location) - M_PI / 2) < 1e-8);
  CHECK(rexp.order() == doctest::Approx(1.0));
  CHECK(rexp.coeff_exponent() == doctest::Approx(0.0));
}

TEST_CASE("formula-only families expose metadata only") {
  Family f = Family::formula_only(2.0, 0.0, 3, 3, 3, 0.0);
  CHECK(f.order() == doctest::Approx(2.0));
  CHECK(!f.numeric());
  CHECK_THROWS_AS(f.value(Cplx(1, 0)), Unsupported);
  CHECK_THROWS_AS(f.pole_by_rank(0), Unsupported);
  CHECK_THROWS_AS(Family::formula_only(2.0, 0.0, 1, 2, 1, 0.0), DomainError);
  CHECK_THROWS_AS(Family::formula_only(2.0, 0.0, 1, 1, 1, -2.5), DomainError);
}

TEST_CASE("mayer pole selection") {
  CHECK(std::abs(Family::tan_power(1).mayer_pole().location - Cplx(M_PI / 2, 0)) < 1e-14);
  CHECK(std::abs(Family::z_sin_z().mayer_pole().location - Cplx(M_PI, 0)) < 1e-14);
  // the first zcossqrtz pole sits next to a large critical value; the second
  // is the distinguished one
  CHECK(std::abs(Family::z_cos_sqrt_z().mayer_pole().location -
                 Cplx(22.206609902451056, 0)) < 1e-11);
}
