#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "bowenlab/complex_core.hpp"

using namespace bowenlab;

TEST_CASE("newton_invert recovers the square root") {
  Cplx root = newton_invert(
      Cplx(0.5, 0.0), Cplx(0.4, 0.0), [](Cplx z) { return z * z; },
      [](Cplx z) { return 2.0 * z; }, 1e-12);
  CHECK(std::abs(root - Cplx(0.7071067811865476, 0.0)) < 1e-12);
}

TEST_CASE("newton_invert solves tan z = 1 from seed 0.8") {
  // oracle: tan(pi/4) = 1, re-checked in long double
  Cplx root = newton_invert(
      Cplx(1.0, 0.0), Cplx(0.8, 0.0), [](Cplx z) { return std::tan(z); },
      [](Cplx z) { Cplx t = std::tan(z); return 1.0 + t * t; }, 1e-12);
  CHECK(std::abs(root - Cplx(0.7853981633974483, 0.0)) < 1e-12);
  long double check = std::tan(0.78539816339744830962L);
  CHECK(std::abs(static_cast<double>(check) - 1.0) < 1e-15);
}

TEST_CASE("newton_invert rejects inversion onto a pole") {
  // The value at a pole is infinite: a non-finite target is refused outright.
  double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(newton_invert(
                      Cplx(inf, 0.0), Cplx(0.5, 0.0), [](Cplx z) { return std::tan(z); },
                      [](Cplx z) { Cplx t = std::tan(z); return 1.0 + t * t; }, 1e-12, 50),
                  Error);
  // Seeding on the pole itself cannot produce a usable iterate either.
  CHECK_THROWS_AS(newton_invert(
                      Cplx(2.0, 0.0), Cplx(M_PI, 0.0),
                      [](Cplx z) { return 1.0 / (z * std::sin(z)); },
                      [](Cplx z) {
                        Cplx sz = std::sin(z), cz = std::cos(z);
                        return -(sz + z * cz) / (z * sz * z * sz);
                      }, 1e-12, 50),
                  Error);
}

TEST_CASE("newton round trip over random targets") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    Cplx target(2.0 + unif(rng), unif(rng));
    Cplx z = newton_invert(
        target, std::sqrt(target), [](Cplx w) { return w * w; },
        [](Cplx w) { return 2.0 * w; }, 1e-12);
    CHECK(std::abs(z * z - target) <= 1e-11);
  }
}

TEST_CASE("sup_norm_on_disk on |z| and |z^2|") {
  Disk unit(Cplx(0, 0), 1.0);
  CHECK(sup_norm_on_disk([](Cplx z) { return z; }, unit, 64) == doctest::Approx(1.0));
  Disk d(Cplx(1, 0), 0.5);
  CHECK(sup_norm_on_disk([](Cplx z) { return z * z; }, d, 64) == doctest::Approx(2.25));
}

TEST_CASE("sup_norm_on_disk flags singularities") {
  Disk unit(Cplx(0, 0), 1.0);
  CHECK_THROWS_AS(sup_norm_on_disk([](Cplx z) { return 1.0 / (z - Cplx(1, 0)); }, unit, 64),
                  NonFiniteValue);
  CHECK_THROWS_AS(sup_norm_on_disk([](Cplx z) { return z; }, unit, 8), DomainError);
}

TEST_CASE("sup_norm_on_disk is monotone nondecreasing in samples") {
  Disk d(Cplx(0.3, -0.2), 1.3);
  auto g = [](Cplx z) { return z * z * z - Cplx(2.0, 1.0) * z + Cplx(0.5, 0.0); };
  double prev = 0.0;
  for (std::size_t s : {16, 32, 64, 128, 256, 512}) {
    double v = sup_norm_on_disk(g, d, s);
    CHECK(v >= prev * (1.0 - 1e-12));
    prev = std::max(prev, v);
  }
}

TEST_CASE("Disk containment open/closed") {
  Disk d(Cplx(0, 0), 1.0);
  CHECK(d.contains(Cplx(0.99, 0)));
  CHECK(!d.contains(Cplx(1.0, 0)));
  CHECK(d.contains_closed(Cplx(1.0, 0)));
  CHECK_THROWS_AS(Disk(Cplx(0, 0), 0.0), DomainError);
}
