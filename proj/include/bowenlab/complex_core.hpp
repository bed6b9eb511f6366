#ifndef BOWENLAB_COMPLEX_CORE_HPP
#define BOWENLAB_COMPLEX_CORE_HPP

#include <cmath>
#include <complex>
#include <functional>

#include "bowenlab/errors.hpp"

namespace bowenlab {

using Cplx = std::complex<double>;
using AnalyticFn = std::function<Cplx(Cplx)>;

inline bool is_finite(Cplx z) {
  return std::isfinite(z.real()) && std::isfinite(z.imag());
}

// Open disk B(center, radius). radius must be positive.
struct Disk {
  Cplx center;
  double radius = 0.0;

  Disk() = default;
  Disk(Cplx c, double r) : center(c), radius(r) {
    if (!(r > 0.0) || !is_finite(c)) throw DomainError("Disk: radius must be positive and center finite");
  }

  // Open containment |z - center| < radius.
  bool contains(Cplx z) const { return std::abs(z - center) < radius; }
  // Closed variant |z - center| <= radius.
  bool contains_closed(Cplx z) const { return std::abs(z - center) <= radius; }

  // i-th of n equispaced boundary points, starting on the positive real ray.
  Cplx boundary_point(std::size_t i, std::size_t n) const {
    double th = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n);
    return center + radius * Cplx(std::cos(th), std::sin(th));
  }

  bool intersects(const Disk& other) const {
    return std::abs(center - other.center) < radius + other.radius;
  }
};

// Solves eval(z) = target by damped Newton iteration from `seed`.
//
// Residual tolerance is absolute; when a full Newton step increases the
// residual the step is halved, up to 40 times. Throws DerivativeVanished
// when |deriv| falls below 1e-14 at an iterate (the local inverse is not
// univalent there) and NoConvergence when max_iter is exhausted.
Cplx newton_invert(Cplx target, Cplx seed, const AnalyticFn& eval,
                   const AnalyticFn& deriv, double tol = 1e-12, int max_iter = 64);

// Sup norm of a holomorphic g over the closed disk, estimated as the max of
// |g| at `samples` equispaced boundary points (maximum modulus principle:
// the true sup lives on the boundary, and this is a lower estimate of it).
// Throws NonFiniteValue if any sample is non-finite, which signals a
// singularity on or inside the disk.
double sup_norm_on_disk(const AnalyticFn& g, const Disk& d, std::size_t samples = 128);

}  // namespace bowenlab

#endif  // BOWENLAB_COMPLEX_CORE_HPP
