#include "bowenlab/constructions.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "bowenlab/parallel.hpp"
#include "bowenlab/pole_catalog.hpp"

namespace bowenlab {

namespace {
constexpr double kPi = M_PI;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}
}  // namespace

double BuiltSystem::constant(const std::string& name) const {
  for (const auto& c : constants)
    if (c.name == name) return c.value;
  throw DomainError("BuiltSystem: no constant named " + name);
}

bool BuiltSystem::has_constant(const std::string& name) const {
  for (const auto& c : constants)
    if (c.name == name) return true;
  return false;
}

// =====================================================================================
// b-point stream: preimages of b in modulus order, with their (pole, root) seeds
// =====================================================================================

namespace {

struct BPoint {
  Cplx location;
  PoleRecord pole;
  int root = 1;
};

class BPointStream {
public:
  BPointStream(const Family& fam, Cplx b) : fam_(fam), b_(b) {}

  BPoint next() {
    // Preimages of b sit within O(|c_a / b|^{1/m}) of their pole, so modulus
    // order is settled once the pole frontier has moved one pole gap past
    // the smallest buffered candidate.
    for (;;) {
      if (!buffer_.empty()) {
        double settle = frontier_ - fam_.pole_gap();
        auto smallest = std::min_element(
            buffer_.begin(), buffer_.end(), [](const BPoint& x, const BPoint& y) {
              return std::abs(x.location) < std::abs(y.location);
            });
        if (std::abs(smallest->location) < settle) {
          BPoint out = *smallest;
          buffer_.erase(smallest);
          return out;
        }
      }
      refill();
    }
  }

private:
  void refill() {
    PoleRecord p = fam_.pole_by_rank(pole_rank_++);
    frontier_ = std::abs(p.location);
    Cplx ratio = p.laurent_coeff / b_;
    Cplx root = std::exp(std::log(ratio) / static_cast<double>(p.multiplicity));
    for (int j = 1; j <= p.multiplicity; ++j) {
      Cplx rot = std::exp(Cplx(0.0, 2.0 * kPi * j / p.multiplicity));
      Cplx seed = p.location + root * rot;
      try {
        Cplx z = newton_invert(
            b_, seed, [this](Cplx w) { return fam_.value(w); },
            [this](Cplx w) { return fam_.derivative(w); },
            1e-12 * (1.0 + std::abs(b_)), 80);
        buffer_.push_back({z, p, j});
      } catch (const Error&) {
        // A seed can straddle two basins near the origin; drop it.
      }
    }
  }

  Family fam_;
  Cplx b_;
  std::size_t pole_rank_ = 0;
  double frontier_ = 0.0;
  std::vector<BPoint> buffer_;
};

// Perturbed pole-return branch psi o phi for one b-point.
struct MayerBranchParts {
  std::shared_ptr<const InverseBranch> phi;
  std::shared_ptr<const InverseBranch> psi;
  MapPtr composite;
};

}  // namespace

// =====================================================================================
// return-map construction
// =====================================================================================

namespace {

struct MayerGeometry {
  PoleRecord pole_b;
  double s0 = 0.0, s1 = 0.0;
  double eps_budget = 0.0, delta_budget = 0.0;
  double growth_Q = 0.0, cmp_L = 0.0;
  double R0 = 0.0, R1 = 0.0, R2 = 0.0;
  std::size_t M1 = 0;
  std::vector<BPoint> bpoints;  // from rank M1
};

double default_s0(const Family& fam, const PoleRecord& b) {
  // Keep U* = B(b, 2 s0) clear of the singular values and inside the pole's
  // own Laurent-dominated zone.
  double to_sing = fam.sing_distance(b.location);
  double local_gap = HUGE_VAL;
  for (std::size_t k = 0; k < 64; ++k) {
    PoleRecord p = fam.pole_by_rank(k);
    if (std::abs(p.location - b.location) < 1e-12) continue;
    local_gap = std::min(local_gap, std::abs(p.location - b.location));
    if (std::abs(p.location) > 4.0 * std::abs(b.location) + 16.0) break;
  }
  return std::min(0.26 * to_sing, 0.15 * local_gap);
}

// Comparability constant of |f0'(w)| against both |w-b|^{-(q+1)} and
// |f0(w)|^{1+1/q} on the punctured disk around b.
double audit_mayer_L(const Family& fam, const PoleRecord& b, double s0, double s1, int q) {
  double worst = 1.0;
  // |f0'(w)| |w-b|^{q+1} should be pinned near |q c_L|; measure the spread.
  for (double r : {s1, 0.25 * s0, 0.5 * s0, s0, 1.6 * s0}) {
    for (std::size_t i = 0; i < 64; ++i) {
      Cplx w = b.location + r * std::exp(Cplx(0.0, 2.0 * kPi * i / 64.0));
      double fp = std::abs(fam.derivative(w));
      double fv = std::abs(fam.value(w));
      double ratio1 = fp * std::pow(r, q + 1) / (q * std::abs(b.laurent_coeff));
      double ratio2 = fp / std::pow(fv, 1.0 + 1.0 / q) *
                      std::pow(std::abs(b.laurent_coeff), 1.0 / q) / q;
      for (double x : {ratio1, 1.0 / ratio1, ratio2, 1.0 / ratio2})
        worst = std::max(worst, x);
    }
  }
  return 1.5 * worst;
}

MayerGeometry resolve_mayer_geometry(const MayerConfig& cfg) {
  const Family& fam = cfg.fam;
  if (!fam.numeric()) throw Unsupported("build_mayer: family has no numerical services");
  const int q = fam.mayer_q();
  MayerGeometry g;
  g.pole_b = fam.mayer_pole();

  if (!(cfg.koebe_K >= 1.0)) throw ConfigInfeasible("build_mayer: koebe_K must be >= 1");
  g.s0 = cfg.s0 > 0.0 ? cfg.s0 : default_s0(fam, g.pole_b);
  if (fam.sing_distance(g.pole_b.location) <= 2.0 * g.s0)
    throw ConfigInfeasible("build_mayer: B(b, 2 s0) meets the singular values");
  double s1_max = g.s0 / (16.0 * cfg.koebe_K * cfg.koebe_K);
  g.s1 = cfg.s1 > 0.0 ? cfg.s1 : 0.95 * s1_max;
  if (!(g.s1 < s1_max))
    throw ConfigInfeasible("build_mayer: need s1 < s0 / (16 K^2); got s1 = " + fmt(g.s1) +
                           " with bound " + fmt(s1_max));

  double mod_b = std::abs(g.pole_b.location);
  double quad = (-1.0 + std::sqrt(1.0 + 4.0 * (g.s0 - g.s1) / (1.0 + g.s1 + mod_b))) / 2.0;
  g.delta_budget =
      0.98 * std::min({g.s0 / (8.0 * mod_b), g.s0 / 8.0, 0.5, quad});

  g.growth_Q = fam.mayer_growth_scale(g.s0);
  g.cmp_L = audit_mayer_L(fam, g.pole_b, g.s0, g.s1, q);

  Disk u0(g.pole_b.location, g.s0);
  g.R0 = 1.1 * sup_norm_on_disk([&fam](Cplx z) { return fam.value(z); }, u0, 64);

  // R1: values beyond it return into U1 under the pole branch.
  g.R1 = std::max(g.R0, 1.25 * std::abs(g.pole_b.laurent_coeff) / std::pow(g.s1, q));
  for (std::size_t i = 0; i < 8; ++i) {
    Cplx w = g.R1 * std::exp(Cplx(0.0, 2.0 * kPi * i / 8.0));
    Cplx ratio = g.pole_b.laurent_coeff / w;
    Cplx seed = g.pole_b.location + std::exp(std::log(ratio) / static_cast<double>(q));
    Cplx z = newton_invert(
        w, seed, [&fam](Cplx y) { return fam.value(y); },
        [&fam](Cplx y) { return fam.derivative(y); }, 1e-12 * (1.0 + std::abs(w)), 80);
    if (!(std::abs(z - g.pole_b.location) < g.s1))
      throw ConfigInfeasible("build_mayer: return branch misses U1 at |w| = R1");
  }
  g.R2 = 3.0 * g.R1;

  g.eps_budget = 0.98 * std::min(g.s1 / 2.0, g.R1);
  cfg.perturb.require_within(g.eps_budget, g.delta_budget);
  // The shift budget is capped by the gain budget only when gains actually
  // move (additive-only sequences take the gain ball as large as needed).
  if (!cfg.perturb.additive_only() && cfg.perturb.epsilon() > cfg.perturb.delta())
    throw ConfigInfeasible("build_mayer: need epsilon <= delta when gains are perturbed");
  return g;
}

// First b-point rank whose branch keeps U0 beyond R2, then the branch block.
void collect_bpoints(const MayerConfig& cfg, MayerGeometry& g, std::size_t count) {
  const Family& fam = cfg.fam;
  BPointStream stream(fam, g.pole_b.location);
  Disk u0(g.pole_b.location, g.s0);
  std::size_t rank = 0;
  std::optional<std::size_t> m1;
  while (g.bpoints.size() < count) {
    BPoint bp = stream.next();
    ++rank;
    if (rank > 4096 + 4 * count)
      throw ConfigInfeasible("build_mayer: could not locate M1 within the b-point budget");
    if (!m1) {
      if (std::abs(bp.location) < g.R2 + g.s0) continue;
      // Image audit: the whole branch image of U0 stays beyond R2.
      InverseBranch phi(fam, bp.pole, bp.root, u0);
      double min_mod = HUGE_VAL;
      for (std::size_t i = 0; i < 16; ++i)
        min_mod = std::min(min_mod, std::abs(phi.value(u0.boundary_point(i, 16))));
      if (min_mod <= g.R2) continue;
      m1 = rank - 1;
    }
    g.bpoints.push_back(bp);
  }
  g.M1 = *m1;
}

MayerBranchParts make_mayer_branch(const Family& fam, const MayerGeometry& g,
                                   const BPoint& bp, const Disk& u1,
                                   const PerturbationStep& step_phi,
                                   const PerturbationStep& step_psi, int q) {
  MayerBranchParts parts;
  parts.phi = std::make_shared<const InverseBranch>(fam, bp.pole, bp.root, u1, step_phi);

  // (U1 - c)/lambda must land inside U0 for the unperturbed branch data to
  // apply.
  for (std::size_t i = 0; i < 16; ++i) {
    Cplx w = u1.boundary_point(i, 16);
    Cplx pulled = (w - step_phi.shift) / step_phi.gain;
    if (!(std::abs(pulled - g.pole_b.location) < g.s0))
      throw ConfigInfeasible("build_mayer: perturbed U1 escapes U0");
  }

  // Domain for the return factor: a disk around the b-point wide enough for
  // the outgoing branch's image.
  double reach = 0.0;
  for (std::size_t i = 0; i < 16; ++i) {
    Cplx img = parts.phi->value(u1.boundary_point(i, 16));
    reach = std::max(reach, std::abs(img - bp.location));
  }
  reach = std::max(reach * 1.4, 1e-6 * (1.0 + std::abs(bp.location)));
  Disk omega(bp.location, reach);
  parts.psi = std::make_shared<const InverseBranch>(fam, g.pole_b, q, omega, step_psi);
  parts.composite = std::make_shared<CompositeMap>(std::vector<MapPtr>{parts.psi, parts.phi});
  return parts;
}

}  // namespace

MayerSchedule mayer_branch_schedule(const MayerConfig& cfg, double t) {
  MayerGeometry g = resolve_mayer_geometry(cfg);
  const Family& fam = cfg.fam;
  const int q = fam.mayer_q();
  double expo = t * (fam.mayer_alpha() + 1.0 + 1.0 / q);
  MayerSchedule sched;
  sched.threshold = std::pow(2.0, 1.0 + 2.0 * (4.0 + 2.0 / q)) * cfg.koebe_K * cfg.koebe_K *
                    g.growth_Q * g.growth_Q * g.cmp_L;

  BPointStream stream(fam, g.pole_b.location);
  std::size_t rank = 0;
  bool past_m1 = false;
  double window_start_sum = 0.0;
  std::size_t window_count = 0;
  while (sched.achieved_sum < sched.threshold) {
    BPoint bp = stream.next();
    ++rank;
    if (!past_m1) {
      if (std::abs(bp.location) < g.R2 + g.s0) continue;
      past_m1 = true;
    }
    sched.achieved_sum += std::pow(std::abs(bp.location), -expo);
    ++sched.branch_count;
    if (sched.branch_count > cfg.numerics.pole_budget)
      throw ScheduleInfeasible("mayer_branch_schedule: b-point budget exhausted",
                               sched.achieved_sum, sched.branch_count);
    if (++window_count == cfg.numerics.stagnation_window) {
      double gain = sched.achieved_sum - window_start_sum;
      if (gain < cfg.numerics.stagnation_rel * sched.achieved_sum)
        throw ScheduleInfeasible("mayer_branch_schedule: partial sums stagnated",
                                 sched.achieved_sum, sched.branch_count);
      window_start_sum = sched.achieved_sum;
      window_count = 0;
    }
  }
  return sched;
}

BuiltSystem build_mayer(const MayerConfig& cfg) {
  const Family fam = cfg.fam;
  const int q = fam.mayer_q();
  MayerGeometry g = resolve_mayer_geometry(cfg);

  std::size_t count = cfg.branch_count;
  std::optional<MayerSchedule> sched;
  if (cfg.t_target) {
    MayerConfig probe = cfg;
    sched = mayer_branch_schedule(probe, *cfg.t_target);
    count = sched->branch_count;
  }
  if (count == 0) throw ConfigInfeasible("build_mayer: need at least one branch");
  if (count > cfg.numerics.level_branch_cap)
    throw ConfigInfeasible("build_mayer: branch count exceeds the per-level cap");
  collect_bpoints(cfg, g, count);

  const Disk u1(g.pole_b.location, g.s1);
  const PerturbationSequence perturb = cfg.perturb;
  const bool autonomous = perturb.mode() == PerturbMode::Zero;
  const auto bpoints = g.bpoints;
  const PoleRecord pole_b = g.pole_b;
  const MayerGeometry geom = g;

  auto make_level = [fam, geom, bpoints, u1, perturb, q](std::size_t n) {
    PerturbationStep step_phi = perturb.step(2 * n);
    PerturbationStep step_psi = perturb.step(2 * n - 1);
    std::vector<MapPtr> branches(bpoints.size());
    std::vector<std::string> fail(bpoints.size());
    parallel_for(bpoints.size(), [&](std::size_t i) {
      try {
        branches[i] =
            make_mayer_branch(fam, geom, bpoints[i], u1, step_phi, step_psi, q).composite;
      } catch (const Error& e) {
        fail[i] = e.what();
      }
    });
    for (std::size_t i = 0; i < branches.size(); ++i)
      if (!branches[i])
        throw ConfigInfeasible("build_mayer: branch " + std::to_string(i) + " at level " +
                               std::to_string(n) + ": " + fail[i]);
    return NcifsLevel(n, u1, u1, std::move(branches));
  };

  std::shared_ptr<NcifsSystem> sys;
  if (autonomous) {
    NcifsLevel proto = make_level(1);
    sys = std::make_shared<NcifsSystem>(
        [proto](std::size_t) { return proto; }, cfg.koebe_K, true, "mayer/" + fam.name());
  } else {
    sys = std::make_shared<NcifsSystem>(make_level, cfg.koebe_K, true,
                                        "mayer/" + fam.name() + "/perturbed");
  }

  BuiltSystem built;
  built.system = sys;
  built.theoretical_target = mayer_dimension(fam.order(), fam.mayer_alpha(), q);

  // Build-time audits: containment, open set condition, distortion.
  const std::size_t audit_levels = autonomous ? 1 : 3;
  for (std::size_t n = 1; n <= audit_levels; ++n) {
    const NcifsLevel& lev = sys->level(n);
    for (const auto& br : lev.branches()) {
      for (std::size_t i = 0; i < 8; ++i) {
        Cplx img = br->value(u1.boundary_point(i, 8));
        if (!(std::abs(img - g.pole_b.location) <= g.s1))
          throw ConfigInfeasible("build_mayer: branch image escapes U1");
      }
    }
    if (!audit_open_set_condition(lev, cfg.koebe_K, cfg.numerics.audit_samples))
      throw ConfigInfeasible("build_mayer: open set condition failed at level " +
                             std::to_string(n));
  }
  built.audit_notes.push_back("open-set-condition: pass (levels 1.." +
                              std::to_string(audit_levels) + ")");
  built.audit_notes.push_back("image-containment: pass (gamma(U1) inside U1)");
  double distortion = audit_distortion(*sys, audit_levels, 32);
  if (distortion > cfg.koebe_K)
    throw ConfigInfeasible("build_mayer: measured distortion " + fmt(distortion) +
                           " exceeds configured K " + fmt(cfg.koebe_K));
  built.audit_notes.push_back("distortion: measured " + fmt(distortion) +
                              " <= configured " + fmt(cfg.koebe_K));

  auto push = [&](const std::string& name, double value, const std::string& prov) {
    built.constants.push_back({name, value, prov});
  };
  push("q", q, "analytic");
  push("b_modulus", std::abs(pole_b.location), "analytic");
  push("alpha", fam.mayer_alpha(), "analytic");
  push("s0", g.s0, cfg.s0 > 0.0 ? "user" : "analytic");
  push("s1", g.s1, cfg.s1 > 0.0 ? "user" : "analytic");
  push("koebe_K", cfg.koebe_K, "user");
  push("epsilon_budget", g.eps_budget, "audited");
  push("delta_budget", g.delta_budget, "audited");
  push("growth_Q", g.growth_Q, "analytic");
  push("comparability_L", g.cmp_L, "audited");
  push("R0", g.R0, "audited");
  push("R1", g.R1, "audited");
  push("R2", g.R2, "audited");
  push("M1", static_cast<double>(g.M1), "audited");
  push("branch_count", static_cast<double>(count), cfg.t_target ? "audited" : "user");
  push("distortion_measured", distortion, "audited");
  if (sched) {
    push("schedule_threshold", sched->threshold, "analytic");
    push("schedule_achieved", sched->achieved_sum, "audited");
  }
  for (const auto& bp : g.bpoints)
    built.branch_anchor_moduli.push_back(std::abs(bp.location));
  return built;
}

// =====================================================================================
// pole ladder (shared by the escape-style builders)
// =====================================================================================

PoleLadder resolve_ladder(const Family& fam, double S, const NumericOptions& numerics) {
  if (!fam.numeric()) throw Unsupported("resolve_ladder: family has no numerical services");
  PoleLadder lad;

  // Stand-off: distance from principal poles to the singular set. The
  // catalogue families have this distance growing with |a|, so the minimum
  // sits among the first poles; audit a prefix.
  double min_standoff = HUGE_VAL;
  {
    PoleCursor cursor(fam, {0.0, std::nullopt, true});
    for (std::size_t i = 0; i < 256; ++i) {
      PoleRecord p = cursor.next();
      min_standoff = std::min(min_standoff, fam.sing_distance(p.location));
    }
  }
  lad.standoff_R_star = 0.49 * min_standoff;
  lad.separation_R_dagger = 0.499 * fam.pole_gap();
  lad.S_star = std::min(2.0 * lad.standoff_R_star, lad.separation_R_dagger);
  lad.S = S > 0.0 ? S : 0.45 * lad.S_star;
  if (!(lad.S > 0.0) || !(lad.S < lad.S_star / 2.0))
    throw ConfigInfeasible("resolve_ladder: need 0 < S < S*/2; S* = " + fmt(lad.S_star));

  // Covering radius: B_{R0} inside f0(B(a, S*)), worst over the first poles.
  {
    PoleCursor cursor(fam, {0.0, std::nullopt, true});
    double worst = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      PoleRecord p = cursor.next();
      Disk d(p.location, lad.S_star);
      worst = std::max(worst,
                       sup_norm_on_disk([&fam](Cplx z) { return fam.value(z); }, d, 32));
    }
    lad.R0 = 1.1 * worst;
  }
  lad.R1 = lad.R0;

  // R2: large enough that the pole-side component of {|f0| > R2} fits in
  // B(a, S) for the poles in play.
  {
    double need = 0.0;
    PoleCursor cursor(fam, {0.0, std::nullopt, true});
    for (std::size_t i = 0; i < 8; ++i) {
      PoleRecord p = cursor.next();
      need = std::max(need, std::abs(p.laurent_coeff) *
                                std::pow(1.3 / lad.S, p.multiplicity));
    }
    lad.R2 = std::max({lad.R1, 0.75, need});
  }

  // Comparability constant of the inverse-branch derivative law, audited at
  // the evaluation geometry the constructions use.
  {
    PoleCursor base_cursor(fam, {2.0 * lad.R2, fam.dominant_multiplicity(), true});
    PoleRecord a0 = base_cursor.next();
    double beta = fam.coeff_exponent();
    double worst = 1.0;
    PoleCursor cursor(fam, {2.0 * lad.R2, fam.dominant_multiplicity(), true});
    for (std::size_t i = 0; i < 48; ++i) {
      PoleRecord a = cursor.next();
      if (std::abs(a.location - a0.location) < 1e-12) continue;
      int m = a.multiplicity;
      InverseBranch br(fam, a, m, Disk(a0.location, lad.S));
      for (std::size_t s = 0; s < 8; ++s) {
        Cplx z = a0.location + lad.S * std::exp(Cplx(0.0, 2.0 * kPi * s / 8.0));
        double law = std::pow(std::abs(z), -(m + 1.0) / m) *
                     std::pow(std::abs(a.location), -beta / m);
        double ratio = std::abs(br.derivative(z)) / law;
        worst = std::max({worst, ratio, 1.0 / ratio});
      }
    }
    lad.comparability_K = worst;
  }

  // Diameter law for the pole-side components of {|f0| > R}.
  {
    double worst = 1.0;
    double R_ref = std::max(2.0 * lad.standoff_R_star, 2.0 * lad.R2);
    PoleCursor cursor(fam, {2.0 * lad.R2, std::nullopt, true});
    for (std::size_t i = 0; i < 12; ++i) {
      PoleRecord a = cursor.next();
      int m = a.multiplicity;
      double max_r = 0.0;
      for (std::size_t s = 0; s < 8; ++s) {
        Cplx dir = std::exp(Cplx(0.0, 2.0 * kPi * s / 8.0));
        double lo = 1e-9, hi = lad.S;
        // |f0| decreases moving away from the pole along the ray.
        for (int it = 0; it < 50; ++it) {
          double mid = 0.5 * (lo + hi);
          double v = std::abs(fam.value(a.location + mid * dir));
          (v > R_ref ? lo : hi) = mid;
        }
        max_r = std::max(max_r, lo);
      }
      double law = std::pow(R_ref, -1.0 / m) *
                   std::pow(std::abs(a.location), -fam.coeff_exponent() / m);
      worst = std::max(worst, 2.0 * max_r / law);
    }
    lad.diam_L = 1.5 * worst;
  }
  (void)numerics;
  return lad;
}

// =====================================================================================
// stationary two-step construction (KU affine)
// =====================================================================================

namespace {

// Accumulates sum |a_n|^{-expo} over a pole stream until `threshold`,
// guarding with the budget and the stagnation heuristic.
struct ScheduleAccumulator {
  double threshold;
  std::size_t budget;
  std::size_t window;
  double rel;

  double sum = 0.0;
  std::size_t consumed = 0;
  double window_start = 0.0;
  std::size_t window_count = 0;

  // Returns true once the threshold is reached after adding this modulus.
  bool add(double modulus, double expo, const char* what) {
    sum += std::pow(modulus, -expo);
    ++consumed;
    if (sum >= threshold) return true;
    if (consumed > budget)
      throw ScheduleInfeasible(std::string(what) + ": pole budget exhausted", sum, consumed);
    if (++window_count == window) {
      if (sum - window_start < rel * sum)
        throw ScheduleInfeasible(std::string(what) + ": partial sums stagnated", sum,
                                 consumed);
      window_start = sum;
      window_count = 0;
    }
    return false;
  }
};

}  // namespace

KuAffineSchedule ku_affine_schedule(const KuAffineConfig& cfg) {
  const Family& fam = cfg.fam;
  if (!fam.numeric()) throw Unsupported("build_ku_affine: family has no numerical services");
  if (!(cfg.t_target >= 0.0)) throw ConfigInfeasible("build_ku_affine: t_target must be >= 0");
  KuAffineSchedule out;
  out.ladder = resolve_ladder(fam, cfg.S, cfg.numerics);
  const PoleLadder& lad = out.ladder;

  const int mstar = fam.dominant_multiplicity();
  const double beta = fam.coeff_exponent();
  const double rho = fam.order();
  const double crit = theoretical_dimension(rho, beta, mstar);
  const double expo = cfg.t_target * (beta + mstar + 1.0) / mstar;
  out.schedule_K = 1.5 * lad.comparability_K;

  double min_mod = std::max(2.0 * lad.R2, 1.0);
  PoleCursor cursor(fam, {min_mod, mstar, true});
  out.base_pole = cursor.next();
  out.threshold = 2.0 * std::pow(out.schedule_K, 3.0 * crit) *
                  std::pow(std::abs(out.base_pole.location), rho);

  if (cfg.branch_count) {
    out.branch_count = *cfg.branch_count;
    for (std::size_t i = 0; i < out.branch_count; ++i) {
      PoleRecord a = cursor.next();
      out.achieved += std::pow(std::abs(a.location), -expo);
      out.alphabet_max_modulus = std::abs(a.location);
    }
  } else if (cfg.t_target == 0.0) {
    // Degenerate exponent: one branch realises the zero-dimensional witness.
    PoleRecord a = cursor.next();
    out.branch_count = 1;
    out.achieved = 1.0;
    out.alphabet_max_modulus = std::abs(a.location);
  } else {
    ScheduleAccumulator acc{out.threshold, cfg.numerics.pole_budget,
                            cfg.numerics.stagnation_window, cfg.numerics.stagnation_rel};
    for (;;) {
      PoleRecord a = cursor.next();
      out.alphabet_max_modulus = std::abs(a.location);
      ++out.branch_count;
      if (acc.add(std::abs(a.location), expo, "build_ku_affine")) break;
    }
    out.achieved = acc.sum;
  }

  double amax = out.alphabet_max_modulus;
  double delta_budget = 0.98 * std::min((lad.S_star - 2.0 * lad.S) / (2.0 * lad.S),
                                        (-1.0 + std::sqrt(1.0 + 2.0 * lad.S_star /
                                                                    (1.0 + amax))) /
                                            2.0);
  while (delta_budget > 1e-13 &&
         (1.0 + delta_budget) * (delta_budget * (1.0 + amax) + lad.S) >= lad.S_star / 2.0)
    delta_budget *= 0.9;
  // A vanishing budget is legitimate (large alphabets force delta_t -> 0);
  // perturbed configs are rejected by the budget check, unperturbed ones run.
  if (delta_budget <= 1e-13) delta_budget = 0.0;
  out.delta_budget = delta_budget;
  out.eps_budget = 0.98 * delta_budget;
  return out;
}

BuiltSystem build_ku_affine(const KuAffineConfig& cfg) {
  const Family fam = cfg.fam;
  KuAffineSchedule sched = ku_affine_schedule(cfg);
  const PoleLadder& lad = sched.ladder;

  const int mstar = fam.dominant_multiplicity();
  const double beta = fam.coeff_exponent();
  const double rho = fam.order();
  const double crit = theoretical_dimension(rho, beta, mstar);
  const double k_sched = sched.schedule_K;
  const double threshold = sched.threshold;
  const double achieved = sched.achieved;

  if (sched.branch_count > cfg.numerics.level_branch_cap)
    throw ConfigInfeasible("build_ku_affine: alphabet exceeds the per-level cap");
  double min_mod = std::max(2.0 * lad.R2, 1.0);
  PoleCursor cursor(fam, {min_mod, mstar, true});
  PoleRecord a0 = cursor.next();
  std::vector<PoleRecord> alphabet;
  for (std::size_t i = 0; i < sched.branch_count; ++i) alphabet.push_back(cursor.next());

  double amax = std::abs(alphabet.back().location);
  double delta_budget = sched.delta_budget;
  double eps_budget = sched.eps_budget;
  cfg.perturb.require_within(eps_budget, delta_budget);
  if (!cfg.perturb.additive_only() && cfg.perturb.epsilon() > cfg.perturb.delta())
    throw ConfigInfeasible("build_ku_affine: need epsilon <= delta when gains are perturbed");

  const Disk base(a0.location, lad.S);
  const PerturbationSequence perturb = cfg.perturb;
  const bool autonomous = perturb.mode() == PerturbMode::Zero;
  const double S = lad.S;

  auto make_level = [fam, alphabet, a0, base, perturb, S](std::size_t n) {
    PerturbationStep inner_step = perturb.step(2 * n);
    PerturbationStep outer_step = perturb.step(2 * n - 1);
    std::vector<MapPtr> branches(alphabet.size());
    parallel_for(alphabet.size(), [&](std::size_t i) {
      const PoleRecord& a = alphabet[i];
      auto inner = std::make_shared<const InverseBranch>(fam, a, a.multiplicity, base,
                                                         inner_step);
      auto outer = std::make_shared<const InverseBranch>(
          fam, a0, a0.multiplicity, Disk(a.location, S), outer_step);
      branches[i] = std::make_shared<CompositeMap>(std::vector<MapPtr>{outer, inner});
    });
    return NcifsLevel(n, base, base, std::move(branches));
  };

  std::shared_ptr<NcifsSystem> sys;
  if (autonomous) {
    NcifsLevel proto = make_level(1);
    sys = std::make_shared<NcifsSystem>([proto](std::size_t) { return proto; }, 1.0,
                                        true, "ku-affine/" + fam.name());
  } else {
    sys = std::make_shared<NcifsSystem>(make_level, 1.0, true,
                                        "ku-affine/" + fam.name() + "/perturbed");
  }

  BuiltSystem built;
  built.system = sys;
  built.theoretical_target = crit;

  // Audits on the first level(s): image containment, open set condition,
  // distortion, and the scheduled level-sum lower bound.
  const std::size_t audit_levels = autonomous ? 1 : 2;
  for (std::size_t n = 1; n <= audit_levels; ++n) {
    const NcifsLevel& lev = sys->level(n);
    for (std::size_t i = 0; i < lev.size(); i += std::max<std::size_t>(1, lev.size() / 64)) {
      const auto* comp = dynamic_cast<const CompositeMap*>(lev.branches()[i].get());
      const auto* inner = dynamic_cast<const InverseBranch*>(comp->factors()[1].get());
      for (std::size_t s = 0; s < 8; ++s) {
        Cplx z = base.boundary_point(s, 8);
        Cplx mid = inner->value(z);
        if (!(std::abs(mid - inner->pole().location) <= S))
          throw ConfigInfeasible("build_ku_affine: inner image escapes B(a, S)");
        Cplx img = lev.branches()[i]->value(z);
        if (!(std::abs(img - a0.location) <= S))
          throw ConfigInfeasible("build_ku_affine: branch image escapes B(a0, S)");
      }
    }
    if (!audit_open_set_condition(lev, 1.5, cfg.numerics.audit_samples))
      throw ConfigInfeasible("build_ku_affine: open set condition failed");
  }
  built.audit_notes.push_back("open-set-condition: pass");
  built.audit_notes.push_back("image-containment: pass (B(a0,S) -> B(a,S) -> B(a0,S))");

  double distortion = audit_distortion(*sys, audit_levels, 32);
  sys->set_distortion_constant(std::max(1.05, 1.15 * distortion));
  built.audit_notes.push_back("distortion: measured " + fmt(distortion) +
                              ", system constant " + fmt(sys->distortion_constant()));
  {
    // Pullback scale of the deepest branch vs the ulp of its pole: beyond a
    // ratio of a few percent the branch derivative data turns noisy and the
    // recorded distortion widens (kept conservative).
    const PoleRecord& deep = alphabet.back();
    double scale = std::abs(deep.laurent_coeff) /
                   std::pow(std::abs(a0.location) + lad.S, deep.multiplicity);
    double ratio = 2.3e-16 * std::abs(deep.location) / std::max(scale, 1e-300);
    built.audit_notes.push_back("pullback resolution at the deepest pole: " + fmt(ratio) +
                                " of the branch scale");
  }

  double z1 = level_sum(sys->level(1), cfg.t_target, cfg.numerics.level_samples);
  double bound = 2.0 *
                 std::pow(k_sched, 3.0 * crit - 2.0 * cfg.t_target) *
                 std::pow(std::abs(a0.location),
                          (crit - cfg.t_target) * (beta + mstar + 1.0) / mstar);
  built.audit_notes.push_back(std::string("level-sum bound: Z_(1)(t) = ") + fmt(z1) +
                              (z1 >= bound ? " >= " : " < ") + fmt(bound) +
                              (z1 >= bound ? " (pass)" : " (FAIL)"));

  auto push = [&](const std::string& name, double value, const std::string& prov) {
    built.constants.push_back({name, value, prov});
  };
  push("S_star", lad.S_star, "audited");
  push("S", lad.S, cfg.S > 0.0 ? "user" : "audited");
  push("R_star", lad.standoff_R_star, "audited");
  push("R_dagger", lad.separation_R_dagger, "analytic");
  push("R0", lad.R0, "audited");
  push("R2", lad.R2, "audited");
  push("comparability_K", lad.comparability_K, "audited");
  push("schedule_K", k_sched, "audited");
  push("a0_modulus", std::abs(a0.location), "analytic");
  push("N_t", static_cast<double>(alphabet.size()), cfg.branch_count ? "user" : "audited");
  push("t_target", cfg.t_target, "user");
  push("schedule_threshold", threshold, "analytic");
  push("schedule_achieved", achieved, "audited");
  push("epsilon_budget", eps_budget, "audited");
  push("delta_budget", delta_budget, "audited");
  push("alphabet_max_modulus", amax, "analytic");
  push("distortion_measured", distortion, "audited");
  for (const auto& a : alphabet)
    built.branch_anchor_moduli.push_back(std::abs(a.location));
  return built;
}

// =====================================================================================
// non-stationary escape construction (KU escape)
// =====================================================================================

namespace {

// Schedule state shared by the level maker: pole moduli, xi boundaries, and
// the running sum of the block currently being scheduled. xi_step is the
// least index whose block sum reaches the step's threshold, so feeding past
// a crossing (during lazy level probes) must remember where the crossing
// happened.
struct EscapeState {
  explicit EscapeState(Family f) : fam(std::move(f)) {}

  Family fam;
  PoleLadder lad;
  double t = 0.0;
  double expo = 0.0;
  double k_sched = 1.0;
  double rho = 0.0;
  NumericOptions numerics;

  std::vector<PoleRecord> poles;  // SP enumeration: a_0, a_1, ...
  std::unique_ptr<PoleCursor> cursor;
  std::vector<std::size_t> xi{0};  // xi_0 = 0
  std::vector<double> block_sums;
  std::vector<double> thresholds;

  double open_sum = 0.0;                   // sum over xi.back()+1 .. open_upto
  std::size_t open_upto = 0;               // = xi.back() until fed
  std::optional<std::size_t> open_crossing;  // first index reaching the threshold
  double open_need = 0.0;
  bool open_started = false;

  const PoleRecord& pole(std::size_t j) {
    while (poles.size() <= j) {
      if (poles.size() >= numerics.pole_budget)
        throw ScheduleInfeasible("build_ku_escape: pole budget exhausted while enumerating",
                                 open_sum, poles.size());
      poles.push_back(cursor->next());
    }
    return poles[j];
  }

  double threshold_for(std::size_t step) {
    return 2.0 *
           std::pow(k_sched, 4.0 * theoretical_dimension(rho, fam.coeff_exponent(),
                                                         fam.dominant_multiplicity())) *
           std::pow(std::abs(pole(step).location), 2.0 * rho);
  }

  void begin_block() {
    open_sum = 0.0;
    open_upto = xi.back();
    open_crossing.reset();
    open_need = threshold_for(xi.size());
    open_started = true;
  }

  void feed_one() {
    if (!open_started) begin_block();
    ++open_upto;
    open_sum += std::pow(std::abs(pole(open_upto).location), -expo);
    if (!open_crossing && open_sum >= open_need) open_crossing = open_upto;
  }

  // Ensures xi_k is known; throws ScheduleInfeasible when out of reach.
  void ensure_xi(std::size_t k) {
    while (xi.size() <= k) {
      if (!open_started) begin_block();
      std::size_t step = xi.size();
      std::size_t window_start_j = open_upto;
      double window_start_sum = open_sum;
      while (!open_crossing) {
        feed_one();
        if (open_upto - window_start_j >= numerics.stagnation_window) {
          if (open_sum - window_start_sum < numerics.stagnation_rel * open_sum)
            throw ScheduleInfeasible("build_ku_escape: xi_" + std::to_string(step) +
                                         " search stagnated",
                                     open_sum, open_upto);
          window_start_j = open_upto;
          window_start_sum = open_sum;
        }
      }
      std::size_t crossing = *open_crossing;
      std::size_t fed_past = open_upto;
      xi.push_back(crossing);
      block_sums.push_back(open_sum);
      thresholds.push_back(open_need);
      // Poles fed beyond the crossing belong to the next block; replay them
      // against the new threshold.
      begin_block();
      while (open_upto < fed_past) feed_one();
    }
  }

  // True when alphabets may grow to top index `top` while remaining inside
  // the block that follows xi_k.
  bool still_open(std::size_t k, std::size_t top) {
    ensure_xi(k);
    if (xi.size() > k + 1) return top < xi[k + 1];
    if (!open_started) begin_block();
    while (open_upto < top && !open_crossing) feed_one();
    return !open_crossing || *open_crossing > top;
  }
};

}  // namespace

EscapeSchedule ku_escape_schedule(const KuEscapeConfig& cfg, std::size_t min_steps) {
  if (!cfg.perturb.additive_only())
    throw ConfigInfeasible("build_ku_escape: only additive perturbations are admissible");
  const Family& fam = cfg.fam;
  if (fam.infinity_is_asymptotic())
    throw ConfigInfeasible("build_ku_escape: infinity must not be an asymptotic value");
  PoleLadder lad = resolve_ladder(fam, cfg.S, cfg.numerics);

  EscapeState st(fam);
  st.lad = lad;
  st.t = cfg.t_target;
  st.expo = cfg.t_target * (fam.coeff_exponent() + fam.dominant_multiplicity() + 1.0) /
            fam.dominant_multiplicity();
  st.k_sched = 1.5 * lad.comparability_K;
  st.rho = fam.order();
  st.numerics = cfg.numerics;
  double min_mod = std::max(2.0 * lad.R2, 1.0);
  st.cursor = std::make_unique<PoleCursor>(
      fam, PoleCursor::Options{min_mod, fam.dominant_multiplicity(), true});

  st.ensure_xi(min_steps);
  EscapeSchedule out;
  out.xi.assign(st.xi.begin(), st.xi.end());
  out.block_sums = st.block_sums;
  out.thresholds = st.thresholds;
  for (const auto& p : st.poles) out.pole_moduli.push_back(std::abs(p.location));
  return out;
}

BuiltSystem build_ku_escape(const KuEscapeConfig& cfg) {
  if (!cfg.perturb.additive_only())
    throw ConfigInfeasible("build_ku_escape: only additive perturbations are admissible");
  const Family fam = cfg.fam;
  if (!fam.numeric()) throw Unsupported("build_ku_escape: family has no numerical services");
  if (fam.infinity_is_asymptotic())
    throw ConfigInfeasible("build_ku_escape: infinity must not be an asymptotic value");

  PoleLadder lad = resolve_ladder(fam, cfg.S, cfg.numerics);
  double eps_budget = 0.98 * (lad.S_star - 2.0 * lad.S);
  cfg.perturb.require_within(eps_budget, 0.0);

  auto st = std::make_shared<EscapeState>(fam);
  st->lad = lad;
  st->t = cfg.t_target;
  st->expo = cfg.t_target * (fam.coeff_exponent() + fam.dominant_multiplicity() + 1.0) /
             fam.dominant_multiplicity();
  st->k_sched = 1.5 * lad.comparability_K;
  st->rho = fam.order();
  st->numerics = cfg.numerics;
  double min_mod = std::max(2.0 * lad.R2, 1.0);
  st->cursor = std::make_unique<PoleCursor>(
      fam, PoleCursor::Options{min_mod, fam.dominant_multiplicity(), true});
  st->ensure_xi(1);

  const double S = lad.S;
  const PerturbationSequence perturb = cfg.perturb;

  // Level n sits in block k with alpha_k <= n < alpha_{k+1},
  // alpha_1 = 1, alpha_{k+1} = alpha_k + (xi_{k+1} - xi_k).
  auto locate_block = [st](std::size_t n) {
    std::size_t k = 1, alpha_k = 1;
    for (;;) {
      st->ensure_xi(k);
      // Tentative end of block k needs xi_{k+1}; probe lazily.
      std::size_t j = n - alpha_k;  // in-block offset if n is in block k
      std::size_t top = st->xi[k] + j;
      if (st->still_open(k, top)) return std::make_tuple(k, alpha_k, j);
      st->ensure_xi(k + 1);
      std::size_t len = st->xi[k + 1] - st->xi[k];
      if (n < alpha_k + len) return std::make_tuple(k, alpha_k, j);
      alpha_k += len;
      ++k;
    }
  };

  auto make_level = [st, perturb, S, locate_block, cap = cfg.numerics.level_branch_cap](
                        std::size_t n) {
    auto [k, alpha_k, j] = locate_block(n);
    // Alphabet {xi_{k-1}+1, ..., xi_k + j}; at the block boundary j = 0.
    std::size_t lo = st->xi[k - 1] + 1;
    std::size_t hi = st->xi[k] + j;
    if (hi - lo + 1 > cap)
      throw ConfigInfeasible("build_ku_escape: level alphabet exceeds the cap; "
                             "lower t_target or raise the cap");
    const PoleRecord a_k = st->pole(k);
    const PoleRecord a_km1 = st->pole(k - 1);
    const bool boundary = (j == 0);
    const std::size_t T = 2 * n + k;
    Disk domain(a_k.location, S);
    Disk codomain(boundary ? a_km1.location : a_k.location, S);

    std::vector<MapPtr> branches(hi - lo + 1);
    std::vector<PoleRecord> targets(hi - lo + 1);
    for (std::size_t i = lo; i <= hi; ++i) targets[i - lo] = st->pole(i);
    const Family famc = st->fam;
    parallel_for(branches.size(), [&](std::size_t idx) {
      const PoleRecord& a_i = targets[idx];
      // innermost: time T, pole a_i, domain B(a_k, S)
      auto inner = std::make_shared<const InverseBranch>(
          famc, a_i, a_i.multiplicity, domain, perturb.step(T));
      // middle: time T-1, pole a_k, domain B(a_i, S)
      auto middle = std::make_shared<const InverseBranch>(
          famc, a_k, a_k.multiplicity, Disk(a_i.location, S), perturb.step(T - 1));
      std::vector<MapPtr> factors;
      if (boundary) {
        auto outer = std::make_shared<const InverseBranch>(
            famc, a_km1, a_km1.multiplicity, domain, perturb.step(T - 2));
        factors = {outer, middle, inner};
      } else {
        factors = {middle, inner};
      }
      branches[idx] = std::make_shared<CompositeMap>(std::move(factors));
    });
    return NcifsLevel(n, domain, codomain, std::move(branches));
  };

  auto sys = std::make_shared<NcifsSystem>(make_level, 1.0, false,
                                           "ku-escape/" + fam.name());

  BuiltSystem built;
  built.system = sys;
  built.theoretical_target =
      theoretical_dimension(fam.order(), fam.coeff_exponent(), fam.dominant_multiplicity());

  // Audits on the first two levels.
  for (std::size_t n = 1; n <= 2; ++n) {
    const NcifsLevel& lev = sys->level(n);
    const Disk& dom = lev.domain();
    for (std::size_t i = 0; i < lev.size(); i += std::max<std::size_t>(1, lev.size() / 32)) {
      for (std::size_t s = 0; s < 4; ++s) {
        Cplx img = lev.branches()[i]->value(dom.boundary_point(s, 4));
        if (!(std::abs(img - lev.codomain().center) <= S))
          throw ConfigInfeasible("build_ku_escape: branch image escapes the codomain disk");
      }
    }
    if (!audit_open_set_condition(lev, 1.5, cfg.numerics.audit_samples))
      throw ConfigInfeasible("build_ku_escape: open set condition failed");
    double zn = level_sum(lev, cfg.t_target, 64);
    built.audit_notes.push_back("level " + std::to_string(n) + ": Z_(n)(t) = " + fmt(zn) +
                                (zn >= 2.0 ? " >= 2 (pass)" : " < 2 (FAIL)"));
  }
  double distortion = audit_distortion(*sys, 2, 16);
  sys->set_distortion_constant(std::max(1.05, 1.15 * distortion));
  double subexp_c = 0.0;
  for (std::size_t n = 1; n <= 2; ++n)
    subexp_c = std::max(subexp_c, static_cast<double>(sys->level(n).size()) / n);
  built.audit_notes.push_back("alphabets grow by at most one per level; #I(n)/n <= " +
                              fmt(subexp_c) + " over the audited prefix");
  built.audit_notes.push_back("diameter: constant 2S across levels");

  auto push = [&](const std::string& name, double value, const std::string& prov) {
    built.constants.push_back({name, value, prov});
  };
  push("subexp_C", subexp_c, "audited");
  push("S_star", lad.S_star, "audited");
  push("S", lad.S, cfg.S > 0.0 ? "user" : "audited");
  push("R_star", lad.standoff_R_star, "audited");
  push("R0", lad.R0, "audited");
  push("R2", lad.R2, "audited");
  push("comparability_K", lad.comparability_K, "audited");
  push("schedule_K", st->k_sched, "audited");
  push("epsilon_budget", eps_budget, "audited");
  push("t_target", cfg.t_target, "user");
  push("xi_1", static_cast<double>(st->xi[1]), "audited");
  push("a0_modulus", std::abs(st->pole(0).location), "analytic");
  push("distortion_measured", distortion, "audited");
  for (std::size_t i = 0; i <= std::min<std::size_t>(st->xi[1], 32); ++i)
    built.branch_anchor_moduli.push_back(std::abs(st->pole(i).location));
  return built;
}

// =====================================================================================
// cover sums and the supercritical radius
// =====================================================================================

CoverSumReport escape_cover_sum(const Family& fam, double t, double S,
                                const std::vector<PoleRecord>& alphabet, std::size_t n_max,
                                const PerturbationSequence& perturb,
                                const NumericOptions& numerics) {
  if (!(t > 0.0)) throw DomainError("escape_cover_sum: t must be positive");
  CoverSumReport rep;
  rep.t = t;
  const int M = fam.max_multiplicity();
  const double beta = fam.coeff_exponent();
  const double K = fam.comparability_seed();
  // Catalogue diameter-law scale: resolve_ladder audits it at <= 1.5 for the
  // simple-pole families, and the sigma_direct enumeration cross-checks the
  // whole chain.
  const double L = 1.5;

  double sum = 0.0;
  for (const auto& a : alphabet) {
    double mod = std::abs(a.location);
    if (mod < 1.0) continue;
    sum += std::pow(mod, -t * (beta + M + 1.0) / M);
    rep.alphabet_lo = rep.alphabet_lo == 0.0 ? mod : std::min(rep.alphabet_lo, mod);
    rep.alphabet_hi = std::max(rep.alphabet_hi, mod);
  }
  rep.alphabet_size = alphabet.size();
  rep.per_level_factor = M * std::pow(K, t) * sum;

  double prefix = std::pow(L, t) * std::pow(2.0 / S, t / M);
  for (std::size_t n = 1; n <= n_max; ++n) {
    rep.levels.push_back(n);
    rep.sigma_analytic.push_back(prefix * std::pow(rep.per_level_factor, n));
  }

  // Direct enumeration of composite image diameters for shallow levels and
  // small alphabets.
  if (!alphabet.empty() && alphabet.size() <= 6 && fam.numeric()) {
    double R = 8.0 * rep.alphabet_hi;
    std::size_t words_cap = 4000;
    for (std::size_t n = 1; n <= std::min<std::size_t>(3, n_max); ++n) {
      double sigma = 0.0;
      std::size_t words = 0;
      // Words (a_0, j_0, ..., a_{n-1}, j_{n-1}, a_n).
      std::vector<std::size_t> w(n + 1, 0);
      std::vector<int> jj(n, 1);
      bool overflow = false;
      std::function<void(std::size_t)> rec = [&](std::size_t depth) {
        if (overflow) return;
        if (depth == n) {
          if (++words > words_cap) { overflow = true; return; }
          const PoleRecord& an = alphabet[w[n]];
          double rn = 1.2 * std::pow(2.0 * std::abs(an.laurent_coeff) / R,
                                     1.0 / an.multiplicity);
          // Map 8 boundary points of B(a_n, rn) through the word.
          std::vector<Cplx> pts;
          for (std::size_t s = 0; s < 8; ++s)
            pts.push_back(an.location + rn * std::exp(Cplx(0.0, 2.0 * kPi * s / 8.0)));
          try {
            for (std::size_t d = n; d-- > 0;) {
              InverseBranch br(fam, alphabet[w[d]], jj[d],
                               Disk(alphabet[w[d + 1]].location,
                                    std::max(rn * 2.0, 0.45 * fam.pole_gap())),
                               perturb.step(d + 1));
              for (auto& p : pts) p = br.value(p);
            }
            double diam = 0.0;
            for (std::size_t x = 0; x < pts.size(); ++x)
              for (std::size_t y = 0; y < x; ++y)
                diam = std::max(diam, std::abs(pts[x] - pts[y]));
            sigma += std::pow(diam, t);
          } catch (const Error&) {
            // Branch chain not realizable for this word; contributes nothing.
          }
          return;
        }
        for (w[depth] = 0; w[depth] < alphabet.size() && !overflow; ++w[depth])
          for (jj[depth] = 1; jj[depth] <= alphabet[w[depth]].multiplicity && !overflow;
               ++jj[depth])
            rec(depth + 1);
      };
      rec(0);
      if (!overflow) {
        while (rep.sigma_direct.size() + 1 < n) rep.sigma_direct.push_back(0.0);
        rep.sigma_direct.push_back(sigma);
      }
    }
  }
  (void)numerics;
  return rep;
}

double select_R3(const Family& fam, double t, std::size_t pole_budget,
                 const NumericOptions& numerics) {
  const int M = fam.max_multiplicity();
  const double beta = fam.coeff_exponent();
  const double K = fam.comparability_seed();
  const double u = t * (beta + M + 1.0) / M;
  const double target = 1.0 / (M * std::pow(K, t));
  if (!(t > theoretical_dimension(fam.order(), beta, M) * 0.999))
    throw NotSupercritical("select_R3: t is at or below rho M/(beta+M+1)");

  // Catalogue the poles once.
  std::vector<double> mods;
  mods.reserve(pole_budget);
  PoleCursor cursor(fam, {1.0, std::nullopt, false});
  for (std::size_t i = 0; i < pole_budget; ++i)
    mods.push_back(std::abs(cursor.next().location));
  double r_cat = mods.back();

  // Fitted counting function n(r) ~ C r^rho_hat for the beyond-catalogue tail.
  std::vector<PoleRecord> fit_poles;
  std::size_t fit_n = std::min<std::size_t>(mods.size(), 20000);
  std::size_t stride = std::max<std::size_t>(1, mods.size() / fit_n);
  for (std::size_t i = 0; i < mods.size(); i += stride) {
    PoleRecord p;
    p.location = Cplx(mods[i], 0.0);
    fit_poles.push_back(p);
  }
  ExponentEstimate est = estimate_order(fit_poles);
  double rho_hat = est.rho_hat;
  if (u <= rho_hat)
    throw NotSupercritical("select_R3: fitted counting exponent " + fmt(rho_hat) +
                           " is not below the sum exponent " + fmt(u));
  double c_hat = static_cast<double>(mods.size()) / std::pow(r_cat, rho_hat);
  double tail_correction = c_hat * rho_hat * std::pow(r_cat, rho_hat - u) / (u - rho_hat);

  // Suffix sums over the catalogue.
  std::vector<double> suffix(mods.size() + 1, 0.0);
  for (std::size_t i = mods.size(); i-- > 0;)
    suffix[i] = suffix[i + 1] + std::pow(mods[i], -u);

  for (std::size_t i = 0; i < mods.size(); ++i) {
    double tail = suffix[i + 1] + tail_correction;
    if (M * std::pow(K, t) * tail <= 1.0) {
      (void)target;
      (void)numerics;
      return mods[i];
    }
  }
  throw NotSupercritical("select_R3: tail estimate stays above the bound over the whole "
                         "catalogue (achieved " +
                         fmt(M * std::pow(K, t) * (suffix[mods.size()] + tail_correction)) +
                         ")");
}

ThresholdScan threshold_scan(const Family& fam, double t_lo, double t_hi, double step,
                             std::size_t pole_budget) {
  ThresholdScan scan;
  std::vector<double> mods;
  mods.reserve(pole_budget);
  PoleCursor cursor(fam, {1.0, std::nullopt, false});
  for (std::size_t i = 0; i < pole_budget; ++i)
    mods.push_back(std::abs(cursor.next().location));
  const std::size_t half = mods.size() / 2;
  const int M = fam.max_multiplicity();
  const double beta = fam.coeff_exponent();

  for (double t = t_lo; t <= t_hi + 1e-12; t += step) {
    double u = t * (beta + M + 1.0) / M;
    double s_half = 0.0, s_full = 0.0;
    for (std::size_t i = 0; i < mods.size(); ++i) {
      double term = std::pow(mods[i], -u);
      if (i < half) s_half += term;
      s_full += term;
    }
    double growth = (s_full - s_half) / s_half;
    scan.t_values.push_back(t);
    scan.growth.push_back(growth);
    scan.convergent.push_back(growth < 0.05);
  }
  scan.detected_transition = scan.t_values.back();
  for (std::size_t i = 1; i < scan.t_values.size(); ++i) {
    if (scan.convergent[i] && !scan.convergent[i - 1]) {
      scan.detected_transition = 0.5 * (scan.t_values[i] + scan.t_values[i - 1]);
      break;
    }
  }
  return scan;
}

// =====================================================================================
// perturbation stability
// =====================================================================================

StabilityAudit audit_perturbation_stability(const NcifsSystem& perturbed,
                                            const NcifsSystem& unperturbed, double t,
                                            std::size_t levels, double delta) {
  StabilityAudit audit;
  audit.bracket_lo = std::pow(1.0 - delta, 2.0 * t);
  audit.bracket_hi = std::pow(1.0 + delta, 2.0 * t);
  audit.within = true;
  for (std::size_t n = 1; n <= levels; ++n) {
    const NcifsLevel& lp = perturbed.level(n);
    const NcifsLevel& lu = unperturbed.level(n);
    if (lp.size() != lu.size())
      throw DomainError("audit_perturbation_stability: level sizes differ");
    double sp = 0.0, su = 0.0;
    for (std::size_t i = 0; i < lp.size(); ++i) {
      // Probe: the perturbed image of the domain center under the inner
      // factor's step; the unperturbed twin probes the center itself.
      const auto* comp = dynamic_cast<const CompositeMap*>(lp.branches()[i].get());
      Cplx probe = lp.domain().center;
      if (comp) {
        const auto* inner =
            dynamic_cast<const InverseBranch*>(comp->factors().back().get());
        if (inner)
          probe = inner->step().gain * lp.domain().center + inner->step().shift;
      }
      sp += std::pow(std::abs(lp.branches()[i]->derivative(probe)), t);
      su += std::pow(std::abs(lu.branches()[i]->derivative(lu.domain().center)), t);
    }
    double ratio = sp / su;
    audit.level_ratios.push_back(ratio);
    if (!(ratio >= 0.95 * audit.bracket_lo && ratio <= 1.05 * audit.bracket_hi))
      audit.within = false;
  }
  return audit;
}

}  // namespace bowenlab
