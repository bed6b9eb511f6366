#include "bowenlab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace bowenlab {

Cplx sample_limit_point(const NcifsSystem& sys, const SymbolicAddress& addr) {
  const std::size_t d = addr.depth();
  if (d == 0) return sys.level(1).codomain().center;
  for (std::size_t k = 1; k <= d; ++k)
    if (addr.word[k - 1] >= sys.level(k).size())
      throw InvalidAddress("sample_limit_point: index out of range at level " +
                           std::to_string(k));
  Cplx z = sys.level(d).domain().center;
  for (std::size_t k = d; k >= 1; --k) {
    z = sys.level(k).branches()[addr.word[k - 1]]->value(z);
    if (k == 1) break;
  }
  return z;
}

std::vector<SymbolicAddress> sample_addresses(const NcifsSystem& sys, std::size_t depth,
                                              std::size_t count, std::uint64_t seed) {
  std::vector<SymbolicAddress> out;
  std::vector<std::size_t> sizes(depth);
  for (std::size_t k = 0; k < depth; ++k) sizes[k] = sys.level(k + 1).size();

  // Mixed-radix enumeration with a large odd stride walks the word space
  // evenly without repeats for small counts.
  std::size_t half = (count + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    SymbolicAddress a;
    std::size_t x = i * 2654435761u;
    for (std::size_t k = 0; k < depth; ++k) {
      a.word.push_back(x % sizes[k]);
      x /= sizes[k] ? sizes[k] : 1;
    }
    out.push_back(std::move(a));
  }
  std::mt19937_64 rng(seed);
  while (out.size() < count) {
    SymbolicAddress a;
    for (std::size_t k = 0; k < depth; ++k)
      a.word.push_back(rng() % sizes[k]);
    out.push_back(std::move(a));
  }
  return out;
}

OrbitTrace forward_orbit(const Family& fam, const PerturbationSequence& seq, Cplx z0,
                         std::size_t steps, double escape_threshold) {
  OrbitTrace trace;
  trace.start = z0;
  Cplx z = z0;
  double deriv = 1.0;
  for (std::size_t j = 1; j <= steps; ++j) {
    PerturbationStep st = seq.step(j);
    Cplx dz, fz;
    try {
      dz = fam.derivative(z, st);
      fz = fam.value(z, st);
    } catch (const PoleHit&) {
      trace.truncated_by_pole = true;
      break;
    }
    deriv *= std::abs(dz);
    if (!std::isfinite(deriv)) {
      trace.truncated_by_pole = true;
      break;
    }
    z = fz;
    trace.iterates.push_back(z);
    trace.derivative_moduli.push_back(deriv);
  }
  if (escape_threshold > 0.0 && !trace.iterates.empty()) {
    double min_mod = HUGE_VAL;
    for (Cplx w : trace.iterates) min_mod = std::min(min_mod, std::abs(w));
    if (min_mod > escape_threshold) trace.escaped_past = min_mod;
  }
  return trace;
}

std::vector<Cplx> forward_pole_schedule(const NcifsSystem& sys, const SymbolicAddress& addr) {
  std::vector<Cplx> schedule;
  for (std::size_t k = 1; k <= addr.depth(); ++k) {
    const auto& branch = sys.level(k).branches().at(addr.word[k - 1]);
    if (const auto* comp = dynamic_cast<const CompositeMap*>(branch.get())) {
      for (const auto& f : comp->factors())
        if (const auto* ib = dynamic_cast<const InverseBranch*>(f.get()))
          schedule.push_back(ib->domain().center);
    } else if (const auto* ib = dynamic_cast<const InverseBranch*>(branch.get())) {
      schedule.push_back(ib->domain().center);
    }
  }
  return schedule;
}

EscapeWitness escape_witness(const NcifsSystem& sys, const SymbolicAddress& addr,
                             const Family& fam, const PerturbationSequence& seq) {
  EscapeWitness w;
  w.schedule = forward_pole_schedule(sys, addr);
  const std::size_t d = addr.depth();
  if (d == 0) throw InvalidAddress("escape_witness: empty address");

  // Backward pullback chain: apply each inverse-branch factor innermost
  // first, recording every intermediate point.
  std::vector<Cplx> chain;  // chain[i] after i+1 factor applications
  Cplx z = sys.level(d).domain().center;
  for (std::size_t k = d; k >= 1; --k) {
    const auto& branch = sys.level(k).branches().at(addr.word[k - 1]);
    if (const auto* comp = dynamic_cast<const CompositeMap*>(branch.get())) {
      for (auto it = comp->factors().rbegin(); it != comp->factors().rend(); ++it) {
        z = (*it)->value(z);
        chain.push_back(z);
      }
    } else {
      z = branch->value(z);
      chain.push_back(z);
    }
    if (k == 1) break;
  }
  const std::size_t m = chain.size();
  w.start = chain.back();  // z* = F^0

  // Forward orbit: F^j(z*) = chain[m-1-j] for j < m, F^m = the starting
  // center. Verify each step against the forward map and accumulate the
  // chain-rule derivative.
  Cplx prev = w.start;
  double deriv = 1.0;
  w.min_modulus = HUGE_VAL;
  for (std::size_t j = 1; j <= m; ++j) {
    Cplx yj = (j < m) ? chain[m - 1 - j] : sys.level(d).domain().center;
    PerturbationStep st = seq.step(j);
    Cplx fwd = fam.value(prev, st);
    double dmod = std::abs(fam.derivative(prev, st));
    deriv *= dmod;
    w.max_forward_residual =
        std::max(w.max_forward_residual, std::abs(fwd - yj) / (1.0 + std::abs(yj)));
    w.noise_floor = std::max(
        w.noise_floor, (3.0 * 2.3e-16 * dmod * (1.0 + std::abs(prev)) +
                        1e-12 * (1.0 + std::abs(yj))) /
                           (1.0 + std::abs(yj)));
    w.orbit.push_back(yj);
    w.derivative_moduli.push_back(deriv);
    w.min_modulus = std::min(w.min_modulus, std::abs(yj));
    if (j <= w.schedule.size())
      w.max_pole_distance =
          std::max(w.max_pole_distance, std::abs(yj - w.schedule[j - 1]));
    prev = yj;
  }
  return w;
}

bool derivative_blowup_audit(const NcifsSystem& sys,
                             const std::vector<SymbolicAddress>& addresses,
                             const Family& fam, const PerturbationSequence& seq) {
  if (addresses.empty()) return false;

  for (const auto& addr : addresses) {
    if (addr.depth() < 4) return false;

    // Boundedness disk: every construction set lies within this radius.
    double bound = 0.0;
    for (std::size_t k = 1; k <= addr.depth(); ++k) {
      const auto& lev = sys.level(k);
      bound = std::max(bound, std::abs(lev.domain().center) + lev.domain().radius);
      bound = std::max(bound, std::abs(lev.codomain().center) + lev.codomain().radius);
    }
    for (Cplx p : forward_pole_schedule(sys, addr))
      bound = std::max(bound, std::abs(p) + 1.0);

    EscapeWitness w;
    try {
      w = escape_witness(sys, addr, fam, seq);
    } catch (const Error&) {
      return false;
    }
    // The pullback chain must actually be an orbit of the forward maps.
    if (w.max_forward_residual > w.residual_threshold()) return false;
    for (std::size_t j = 2; j < w.derivative_moduli.size(); ++j)
      if (!(w.derivative_moduli[j] > w.derivative_moduli[j - 1])) return false;
    if (!(w.derivative_moduli.back() > 1e3)) return false;
    for (Cplx y : w.orbit)
      if (std::abs(y) > bound + 1e-6) return false;
  }
  return true;
}

double moran_oracle(const std::vector<double>& ratios) {
  if (ratios.empty()) throw DomainError("moran_oracle: need at least one ratio");
  for (double r : ratios)
    if (!(r > 0.0) || !(r < 1.0)) throw DomainError("moran_oracle: ratios must lie in (0,1)");
  auto excess = [&](double t) {
    double s = 0.0;
    for (double r : ratios) s += std::pow(r, t);
    return s - 1.0;
  };
  if (ratios.size() == 1) return 0.0;
  double lo = 0.0, hi = 2.0;
  while (excess(hi) > 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    double mid = 0.5 * (lo + hi);
    (excess(mid) >= 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace bowenlab
