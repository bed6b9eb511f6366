#include "bowenlab/ncifs.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "bowenlab/errors.hpp"
#include "bowenlab/families.hpp"
#include "bowenlab/parallel.hpp"

namespace bowenlab {

std::string to_string(ZnMethod m) {
  return m == ZnMethod::ExactEnumeration ? "exact" : "product-bound";
}

// --- NcifsLevel -----------------------------------------------------------------

NcifsLevel::NcifsLevel(std::size_t index_n, Disk domain, Disk codomain,
                       std::vector<MapPtr> branches)
    : index_(index_n), domain_(domain), codomain_(codomain), branches_(std::move(branches)) {}

const std::vector<double>& NcifsLevel::branch_sup_norms(std::size_t samples) const {
  std::lock_guard<std::mutex> lock(cache_->mu);
  if (cache_->samples == samples && cache_->sups.size() == branches_.size())
    return cache_->sups;
  cache_->samples = samples;
  cache_->sups.assign(branches_.size(), 0.0);
  const Disk& d = domain_;
  auto& sups = cache_->sups;
  const auto& branches = branches_;
  parallel_for(branches.size(), [&](std::size_t i) {
    const ConformalMap& b = *branches[i];
    sups[i] = sup_norm_on_disk([&b](Cplx z) { return b.derivative(z); }, d, samples);
  });
  return sups;
}

// --- NcifsSystem -----------------------------------------------------------------

NcifsSystem::NcifsSystem(LevelMaker maker, double distortion_constant, bool stationary,
                         std::string provenance)
    : maker_(std::move(maker)), distortion_K_(distortion_constant),
      stationary_(stationary), provenance_(std::move(provenance)) {
  if (!(distortion_K_ >= 1.0))
    throw DomainError("NcifsSystem: distortion constant must be >= 1");
}

const NcifsLevel& NcifsSystem::level(std::size_t n) const {
  if (n == 0) throw DomainError("NcifsSystem::level: levels are indexed from 1");
  std::lock_guard<std::mutex> lock(mu_);
  while (levels_.size() < n) levels_.push_back(maker_(levels_.size() + 1));
  return levels_[n - 1];
}

std::size_t NcifsSystem::generated_levels() const {
  std::lock_guard<std::mutex> lock(mu_);
  return levels_.size();
}

void NcifsSystem::set_distortion_constant(double K) {
  if (!(K >= 1.0)) throw DomainError("set_distortion_constant: K must be >= 1");
  distortion_K_ = K;
}

std::optional<std::size_t> NcifsSystem::word_count(std::size_t n, std::size_t cap) const {
  std::size_t words = 1;
  for (std::size_t k = 1; k <= n; ++k) {
    std::size_t sz = level(k).size();
    if (sz == 0) return 0;
    if (words > cap / sz) return std::nullopt;
    words *= sz;
  }
  return words;
}

const std::vector<double>& NcifsSystem::word_sup_norms(std::size_t n, std::size_t word_cap,
                                                       std::size_t samples) const {
  if (n == 0) throw DomainError("word_sup_norms: depth must be >= 1");
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = word_sups_.find(n);
    if (it != word_sups_.end()) return it->second;
  }
  auto words = word_count(n, word_cap);
  if (!words)
    throw WordBudgetExceeded("word_sup_norms: word count exceeds the budget", word_cap);

  // Pre-generate the levels so the recursion below runs lock-free.
  std::vector<const NcifsLevel*> levs(n + 1, nullptr);
  for (std::size_t k = 1; k <= n; ++k) levs[k] = &level(k);

  // Lexicographic word index: w_1 varies slowest. The composite applies the
  // level-n branch first, so the recursion walks levels n..1 and words with a
  // common suffix share their pullback points.
  std::vector<std::size_t> stride(n + 1, 1);
  for (std::size_t k = n - 1; k >= 1; --k) {
    stride[k] = stride[k + 1] * levs[k + 1]->size();
    if (k == 1) break;
  }

  std::vector<double> sups(*words, 0.0);

  std::function<void(std::size_t, const std::vector<Cplx>&, const std::vector<double>&,
                     std::size_t)>
      walk = [&](std::size_t k, const std::vector<Cplx>& pts,
                 const std::vector<double>& dmod, std::size_t offset) {
        const NcifsLevel& lev = *levs[k];
        for (std::size_t i = 0; i < lev.size(); ++i) {
          const ConformalMap& b = *lev.branches()[i];
          std::vector<Cplx> npts(pts.size());
          std::vector<double> nd(pts.size());
          double sup = 0.0;
          for (std::size_t s = 0; s < pts.size(); ++s) {
            nd[s] = dmod[s] * std::abs(b.derivative(pts[s]));
            npts[s] = b.value(pts[s]);
            sup = std::max(sup, nd[s]);
          }
          std::size_t off = offset + i * stride[k];
          if (k == 1)
            sups[off] = sup;
          else
            walk(k - 1, npts, nd, off);
        }
      };

  std::vector<Cplx> pts(samples);
  const Disk& xn = levs[n]->domain();
  for (std::size_t s = 0; s < samples; ++s) pts[s] = xn.boundary_point(s, samples);
  std::vector<double> ones(samples, 1.0);

  if (n == 1) {
    walk(1, pts, ones, 0);
  } else {
    // Parallelise over the innermost level; each subtree writes a disjoint
    // strided index set, so the result does not depend on scheduling.
    const NcifsLevel& lev_n = *levs[n];
    parallel_for(lev_n.size(), [&](std::size_t i) {
      const ConformalMap& b = *lev_n.branches()[i];
      std::vector<Cplx> npts(samples);
      std::vector<double> nd(samples);
      for (std::size_t s = 0; s < samples; ++s) {
        nd[s] = std::abs(b.derivative(pts[s]));
        npts[s] = b.value(pts[s]);
      }
      walk(n - 1, npts, nd, i * stride[n]);
    });
  }

  std::lock_guard<std::mutex> lock(mu_);
  auto [it, ignored] = word_sups_.emplace(n, std::move(sups));
  return it->second;
}

// --- partition sums ----------------------------------------------------------------

double level_sum(const NcifsLevel& level, double t, std::size_t samples) {
  if (t < 0.0) throw DomainError("level_sum: t must be nonnegative");
  const auto& sups = level.branch_sup_norms(samples);
  return chunked_sum(sups.size(), [&](std::size_t i) { return std::pow(sups[i], t); });
}

double exact_Zn(const NcifsSystem& sys, std::size_t n, double t, std::size_t word_cap) {
  const auto& sups = sys.word_sup_norms(n, word_cap);
  return chunked_sum(sups.size(), [&](std::size_t i) { return std::pow(sups[i], t); });
}

double product_lower_bound(const NcifsSystem& sys, std::size_t n, double t) {
  double log_prod = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    double zk = level_sum(sys.level(k), t);
    if (zk <= 0.0) return 0.0;
    log_prod += std::log(zk);
  }
  double total = -static_cast<double>(n) * t * std::log(sys.distortion_constant()) + log_prod;
  return std::exp(total);
}

PressureEstimate lower_pressure(const NcifsSystem& sys, double t, std::size_t max_depth,
                                std::size_t word_cap) {
  if (max_depth < 4) throw DomainError("lower_pressure: max_depth must be at least 4");
  PressureEstimate est;
  est.t = t;
  for (std::size_t n = 1; n <= max_depth; ++n) {
    double zn;
    ZnMethod method;
    if (sys.word_count(n, word_cap)) {
      zn = exact_Zn(sys, n, t, word_cap);
      method = ZnMethod::ExactEnumeration;
    } else {
      zn = product_lower_bound(sys, n, t);
      method = ZnMethod::ProductLowerBound;
    }
    est.depths.push_back(n);
    est.log_Zn_over_n.push_back(std::log(zn) / static_cast<double>(n));
    est.methods.push_back(method);
  }
  double p = HUGE_VAL;
  for (std::size_t i = est.depths.size() >= 3 ? est.depths.size() - 3 : 0;
       i < est.depths.size(); ++i)
    p = std::min(p, est.log_Zn_over_n[i]);
  est.lower_pressure = p;
  return est;
}

DimensionReport bowen_dimension(const NcifsSystem& sys, double t_lo, double t_hi, double tol,
                                std::size_t max_depth, std::size_t word_cap) {
  if (!(t_lo >= 0.0) || !(t_hi > t_lo)) throw DomainError("bowen_dimension: bad bracket");
  if (!(tol > 0.0)) throw DomainError("bowen_dimension: tol must be positive");

  DimensionReport report;
  report.system_provenance = sys.provenance();

  auto pressure_at = [&](double t) {
    PressureEstimate p = lower_pressure(sys, t, max_depth, word_cap);
    report.t_grid.push_back(t);
    report.pressures.push_back(p);
    return p.lower_pressure;
  };

  double p_lo = pressure_at(t_lo);
  if (p_lo < 0.0) {
    if (t_lo <= tol) {
      // Pressure already negative arbitrarily close to 0: the Bowen value
      // collapses to 0 (e.g. a single-branch system).
      report.bowen_bracket = {0.0, t_lo};
      return report;
    }
    throw NoSignChange("bowen_dimension: pressure negative at the lower bracket end");
  }
  double p_hi = pressure_at(t_hi);
  if (p_hi >= 0.0)
    throw NoSignChange("bowen_dimension: pressure nonnegative at the upper bracket end");

  double lo = t_lo, hi = t_hi;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (pressure_at(mid) >= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  report.bowen_bracket = {lo, hi};
  return report;
}

// --- audits -------------------------------------------------------------------------

namespace {

// Structural disjointness for composite branches: strip outer factors that
// are identical across the level; at the first splitting stage, if all
// factors invert the same forward map (equal perturbation step) over
// pairwise-disjoint domain disks, the composite images are disjoint --
// phi_i(x) = phi_j(y) would force, under the shared forward maps, a point in
// two disjoint domains. This route stays valid when the images sit closer
// together than the inversion tolerance can resolve.
bool structural_disjointness(const NcifsLevel& level) {
  const auto& branches = level.branches();
  if (branches.size() < 2) return true;

  std::vector<std::vector<const InverseBranch*>> factors(branches.size());
  std::size_t len = 0;
  for (std::size_t i = 0; i < branches.size(); ++i) {
    const auto* comp = dynamic_cast<const CompositeMap*>(branches[i].get());
    if (!comp) return false;
    for (const auto& f : comp->factors()) {
      const auto* ib = dynamic_cast<const InverseBranch*>(f.get());
      if (!ib) return false;
      factors[i].push_back(ib);
    }
    if (i == 0)
      len = factors[i].size();
    else if (factors[i].size() != len)
      return false;
  }

  auto same_key = [](const InverseBranch* a, const InverseBranch* b) {
    return a->pole().location == b->pole().location &&
           a->root_index() == b->root_index() &&
           a->domain().center == b->domain().center &&
           a->domain().radius == b->domain().radius &&
           a->step().shift == b->step().shift && a->step().gain == b->step().gain;
  };

  for (std::size_t stage = 0; stage < len; ++stage) {
    bool shared = true;
    for (std::size_t i = 1; i < branches.size() && shared; ++i)
      shared = same_key(factors[0][stage], factors[i][stage]);
    if (shared) continue;

    // Splitting stage: require one forward map and disjoint domains.
    for (std::size_t i = 1; i < branches.size(); ++i) {
      if (factors[i][stage]->step().shift != factors[0][stage]->step().shift ||
          factors[i][stage]->step().gain != factors[0][stage]->step().gain)
        return false;
    }
    std::vector<std::size_t> order(branches.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const Disk& da = factors[a][stage]->domain();
      const Disk& db = factors[b][stage]->domain();
      return da.center.real() - da.radius < db.center.real() - db.radius;
    });
    double max_r = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i)
      max_r = std::max(max_r, factors[order[i]][stage]->domain().radius);
    for (std::size_t i = 0; i < order.size(); ++i) {
      const Disk& a = factors[order[i]][stage]->domain();
      for (std::size_t j = i + 1; j < order.size(); ++j) {
        const Disk& b = factors[order[j]][stage]->domain();
        if (b.center.real() - b.radius > a.center.real() + a.radius + 2.0 * max_r) break;
        if (a.intersects(b)) return false;
      }
    }
    return true;
  }
  return false;  // all factors identical: duplicated branches
}

}  // namespace

bool audit_open_set_condition(const NcifsLevel& level, double distortion_K,
                              std::size_t samples) {
  struct Enclosure {
    Cplx center;
    double radius;
  };
  const std::size_t nb = level.size();
  if (structural_disjointness(level)) return true;
  std::vector<Enclosure> enc(nb);
  const Disk& dom = level.domain();
  std::vector<bool> bad(nb, false);
  const auto& branches = level.branches();
  parallel_for(nb, [&](std::size_t i) {
    const ConformalMap& b = *branches[i];
    Cplx c = b.value(dom.center);
    double r = distortion_K * dom.radius * std::abs(b.derivative(dom.center));
    // The enclosure must actually contain the sampled boundary image; if the
    // distortion estimate was optimistic, grow it to the empirical radius.
    double emp = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      Cplx img = b.value(dom.boundary_point(s, samples));
      emp = std::max(emp, std::abs(img - c));
    }
    if (!std::isfinite(emp)) { bad[i] = true; return; }
    enc[i] = {c, std::max(r, 1.25 * emp)};
  });
  for (bool b : bad)
    if (b) return false;

  // Sweep by real coordinate; disjoint neighbourhood systems exit early.
  std::vector<std::size_t> order(nb);
  for (std::size_t i = 0; i < nb; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b2) {
    return enc[a].center.real() - enc[a].radius < enc[b2].center.real() - enc[b2].radius;
  });
  double max_radius = 0.0;
  for (const auto& e : enc) max_radius = std::max(max_radius, e.radius);
  for (std::size_t i = 0; i < nb; ++i) {
    const auto& a = enc[order[i]];
    for (std::size_t j = i + 1; j < nb; ++j) {
      const auto& b2 = enc[order[j]];
      if (b2.center.real() - b2.radius > a.center.real() + a.radius + 2.0 * max_radius)
        break;
      if (std::abs(a.center - b2.center) < a.radius + b2.radius) return false;
    }
  }
  return true;
}

ContractionAudit audit_uniform_contraction(const NcifsSystem& sys, std::size_t levels,
                                           std::size_t window, std::size_t words_per_window,
                                           std::uint64_t seed) {
  ContractionAudit audit;
  audit.window = window;
  if (levels < window) return audit;
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  const std::size_t samples = 16;
  for (std::size_t start = 1; start + window - 1 <= levels; ++start) {
    const Disk& dom = sys.level(start + window - 1).domain();
    for (std::size_t w = 0; w < words_per_window; ++w) {
      // Random word across the window; composite derivative sampled on the
      // innermost domain boundary.
      std::vector<std::size_t> word(window);
      for (std::size_t k = 0; k < window; ++k) {
        std::size_t sz = sys.level(start + k).size();
        word[k] = rng() % sz;
      }
      double sup = 0.0;
      for (std::size_t s = 0; s < samples; ++s) {
        Cplx z = dom.boundary_point(s, samples);
        double d = 1.0;
        for (std::size_t k = window; k-- > 0;) {
          const ConformalMap& b = *sys.level(start + k).branches()[word[k]];
          d *= std::abs(b.derivative(z));
          z = b.value(z);
        }
        sup = std::max(sup, d);
      }
      worst = std::max(worst, sup);
    }
    ++audit.levels_checked;
  }
  audit.uniform = worst < 1.0;
  audit.beta = std::pow(worst, 1.0 / static_cast<double>(window));
  return audit;
}

double audit_distortion(const NcifsSystem& sys, std::size_t levels, std::size_t samples) {
  double worst = 1.0;
  for (std::size_t n = 1; n <= levels; ++n) {
    const NcifsLevel& lev = sys.level(n);
    const Disk& dom = lev.domain();
    std::vector<double> ratios(lev.size(), 1.0);
    const auto& branches = lev.branches();
    parallel_for(lev.size(), [&](std::size_t i) {
      const ConformalMap& b = *branches[i];
      double hi = 0.0, lo = HUGE_VAL;
      for (std::size_t s = 0; s < samples; ++s) {
        double d = std::abs(b.derivative(dom.boundary_point(s, samples)));
        hi = std::max(hi, d);
        lo = std::min(lo, d);
      }
      double dc = std::abs(b.derivative(dom.center));
      hi = std::max(hi, dc);
      lo = std::min(lo, dc);
      ratios[i] = (lo > 0.0) ? hi / lo : HUGE_VAL;
    });
    for (double r : ratios) worst = std::max(worst, r);
  }
  return worst;
}

namespace {
NcifsSystem::LevelMaker similarity_maker(const std::vector<double>& ratios) {
  if (ratios.empty()) throw DomainError("make_similarity_system: need at least one ratio");
  for (double r : ratios)
    if (!(r > 0.0) || !(r < 1.0))
      throw DomainError("make_similarity_system: ratios must lie in (0,1)");
  std::vector<MapPtr> branches;
  const std::size_t n = ratios.size();
  for (std::size_t i = 0; i < n; ++i) {
    double th = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n);
    Cplx center = (n == 1) ? Cplx(0.0, 0.0)
                           : 0.7 * Cplx(std::cos(th), std::sin(th)) * (1.0 - ratios[i]);
    branches.push_back(std::make_shared<Similarity>(Cplx(ratios[i], 0.0), center));
  }
  Disk d(Cplx(0.0, 0.0), 1.0);
  NcifsLevel lev(1, d, d, branches);
  return [lev](std::size_t) { return lev; };
}
}  // namespace

NcifsSystem make_similarity_system(const std::vector<double>& ratios) {
  return NcifsSystem(similarity_maker(ratios), 1.0, true, "similarity");
}

std::shared_ptr<NcifsSystem> make_similarity_system_shared(const std::vector<double>& ratios) {
  return std::make_shared<NcifsSystem>(similarity_maker(ratios), 1.0, true, "similarity");
}

}  // namespace bowenlab
