#include "bowenlab/complex_core.hpp"

#include <limits>
#include <sstream>

namespace bowenlab {

namespace {
constexpr double kDerivFloor = 1e-14;
constexpr int kMaxHalvings = 40;
}  // namespace

Cplx newton_invert(Cplx target, Cplx seed, const AnalyticFn& eval,
                   const AnalyticFn& deriv, double tol, int max_iter) {
  if (!is_finite(target) || !is_finite(seed))
    throw DomainError("newton_invert: non-finite target or seed");

  Cplx z = seed;
  Cplx fz = eval(z);
  if (!is_finite(fz)) throw NonFiniteValue("newton_invert: eval non-finite at seed");
  double res = std::abs(fz - target);

  for (int it = 0; it < max_iter; ++it) {
    if (res <= tol) return z;
    Cplx dz = deriv(z);
    if (!is_finite(dz)) throw NonFiniteValue("newton_invert: deriv non-finite");
    if (std::abs(dz) < kDerivFloor)
      throw DerivativeVanished("newton_invert: derivative below 1e-14 (near a critical point)");

    Cplx step = (fz - target) / dz;
    double scale = 1.0;
    Cplx z_next;
    Cplx f_next;
    double res_next = 0.0;
    int halvings = 0;
    for (;;) {
      z_next = z - scale * step;
      f_next = eval(z_next);
      res_next = is_finite(f_next) ? std::abs(f_next - target)
                                   : std::numeric_limits<double>::infinity();
      if (res_next < res || halvings >= kMaxHalvings) break;
      scale *= 0.5;
      ++halvings;
    }
    if (!(res_next < res)) {
      // Degenerate: no descent direction even after damping.
      std::ostringstream os;
      os << "newton_invert: stalled at residual " << res;
      throw NoConvergence(os.str(), res);
    }
    z = z_next;
    fz = f_next;
    res = res_next;
  }
  if (res <= tol) return z;
  std::ostringstream os;
  os << "newton_invert: " << max_iter << " iterations exhausted, residual " << res;
  throw NoConvergence(os.str(), res);
}

double sup_norm_on_disk(const AnalyticFn& g, const Disk& d, std::size_t samples) {
  if (samples < 16) throw DomainError("sup_norm_on_disk: need at least 16 samples");
  double best = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    Cplx v = g(d.boundary_point(i, samples));
    if (!is_finite(v))
      throw NonFiniteValue("sup_norm_on_disk: non-finite sample (singularity on or inside the disk)");
    best = std::max(best, std::abs(v));
  }
  return best;
}

}  // namespace bowenlab
