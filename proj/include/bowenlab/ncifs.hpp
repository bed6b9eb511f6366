#ifndef BOWENLAB_NCIFS_HPP
#define BOWENLAB_NCIFS_HPP

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "bowenlab/conformal_map.hpp"

namespace bowenlab {

// One time-step of the system: finitely many contraction branches mapping
// `domain` (X_n) into `codomain` (X_{n-1}).
class NcifsLevel {
public:
  NcifsLevel() = default;
  NcifsLevel(std::size_t index_n, Disk domain, Disk codomain, std::vector<MapPtr> branches);

  std::size_t index() const { return index_; }
  const Disk& domain() const { return domain_; }
  const Disk& codomain() const { return codomain_; }
  const std::vector<MapPtr>& branches() const { return branches_; }
  std::size_t size() const { return branches_.size(); }

  // Per-branch derivative sup norms over the domain (boundary-sampled);
  // computed once and shared across copies of the level.
  const std::vector<double>& branch_sup_norms(std::size_t samples = 128) const;

private:
  struct SupCache {
    std::mutex mu;
    std::size_t samples = 0;
    std::vector<double> sups;
  };

  std::size_t index_ = 1;
  Disk domain_{Cplx(0, 0), 1.0};
  Disk codomain_{Cplx(0, 0), 1.0};
  std::vector<MapPtr> branches_;
  std::shared_ptr<SupCache> cache_ = std::make_shared<SupCache>();
};

// A (possibly non-stationary) sequence of levels, generated lazily.
class NcifsSystem {
public:
  using LevelMaker = std::function<NcifsLevel(std::size_t)>;  // n >= 1

  NcifsSystem(LevelMaker maker, double distortion_constant, bool stationary,
              std::string provenance = {});

  const NcifsLevel& level(std::size_t n) const;
  std::size_t generated_levels() const;

  double distortion_constant() const { return distortion_K_; }
  void set_distortion_constant(double K);
  bool stationary() const { return stationary_; }
  const std::string& provenance() const { return provenance_; }

  // Derivative sup norms of all length-n words, in lexicographic word order
  // (outer level 1 index varies slowest). Cached per depth; throws
  // WordBudgetExceeded when the word count would exceed word_cap.
  const std::vector<double>& word_sup_norms(std::size_t n, std::size_t word_cap,
                                            std::size_t samples = 64) const;
  // Number of length-n words, capped; nullopt if it overflows the cap.
  std::optional<std::size_t> word_count(std::size_t n, std::size_t cap) const;

private:
  LevelMaker maker_;
  double distortion_K_ = 81.0;
  bool stationary_ = false;
  std::string provenance_;
  mutable std::mutex mu_;
  mutable std::vector<NcifsLevel> levels_;
  mutable std::map<std::size_t, std::vector<double>> word_sups_;
};

enum class ZnMethod { ExactEnumeration, ProductLowerBound };

std::string to_string(ZnMethod m);

struct PressureEstimate {
  double t = 0.0;
  std::vector<std::size_t> depths;
  std::vector<double> log_Zn_over_n;
  std::vector<ZnMethod> methods;
  double lower_pressure = 0.0;  // min over the last three depths
};

struct DimensionReport {
  std::pair<double, double> bowen_bracket{0.0, 0.0};
  std::vector<double> t_grid;
  std::vector<PressureEstimate> pressures;
  std::string system_provenance;
  std::optional<double> theoretical_target;
};

// Z_(n)(t): sum over the level's branches of (derivative sup norm)^t.
double level_sum(const NcifsLevel& level, double t, std::size_t samples = 128);

// Z_n(t) by full enumeration of length-n words.
double exact_Zn(const NcifsSystem& sys, std::size_t n, double t, std::size_t word_cap);

// K^{-nt} * Z_(1)(t) ... Z_(n)(t); a lower bound for Z_n(t) by bounded
// distortion.
double product_lower_bound(const NcifsSystem& sys, std::size_t n, double t);

// (1/n) log Z_n(t) across depths up to max_depth; exact enumeration while the
// word count stays within word_cap, the product bound beyond. The reported
// lower_pressure is the min over the last three depths (finite liminf proxy).
PressureEstimate lower_pressure(const NcifsSystem& sys, double t, std::size_t max_depth,
                                std::size_t word_cap);

// Bisection on the sign of lower_pressure. Pressure must be >= 0 at t_lo and
// < 0 at t_hi (throws NoSignChange otherwise, except for the degenerate case
// where pressure is already negative at a t_lo below tol, which collapses the
// bracket to [0, t_lo]).
DimensionReport bowen_dimension(const NcifsSystem& sys, double t_lo, double t_hi,
                                double tol, std::size_t max_depth, std::size_t word_cap);

// Open set condition: pairwise disjointness of branch-image enclosures
// B(phi(c), K r |phi'(c)|), validated against boundary samples.
bool audit_open_set_condition(const NcifsLevel& level, double distortion_K,
                              std::size_t samples = 32);

struct ContractionAudit {
  bool uniform = false;       // all sampled depth-`window` composites contract
  double beta = 1.0;          // max composite sup-norm ^ (1/window)
  std::size_t window = 3;
  std::size_t levels_checked = 0;
};

// Samples composite derivative sup norms over sliding windows of `window`
// consecutive levels.
ContractionAudit audit_uniform_contraction(const NcifsSystem& sys, std::size_t levels,
                                           std::size_t window = 3,
                                           std::size_t words_per_window = 64,
                                           std::uint64_t seed = 7);

// Measured distortion: max over branches (and sampled 2-level composites) of
// sup|phi'| / inf|phi'| over the domain boundary.
double audit_distortion(const NcifsSystem& sys, std::size_t levels, std::size_t samples = 64);

// Convenience: a similarity system on D(0, 1) with the given ratios
// (test/oracle support; offsets spread on a circle, may overlap for large
// ratio sets -- the partition sums do not depend on offsets).
NcifsSystem make_similarity_system(const std::vector<double>& ratios);
std::shared_ptr<NcifsSystem> make_similarity_system_shared(const std::vector<double>& ratios);

}  // namespace bowenlab

#endif  // BOWENLAB_NCIFS_HPP
