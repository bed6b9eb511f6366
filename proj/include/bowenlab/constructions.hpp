#ifndef BOWENLAB_CONSTRUCTIONS_HPP
#define BOWENLAB_CONSTRUCTIONS_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bowenlab/families.hpp"
#include "bowenlab/ncifs.hpp"

namespace bowenlab {

struct NumericOptions {
  std::size_t level_samples = 128;
  std::size_t word_samples = 64;
  std::size_t audit_samples = 32;
  std::size_t pole_budget = 200000;
  // Schedule stagnation: stop when a run of `stagnation_window` consecutive
  // poles improves the running sum by less than `stagnation_rel` relative.
  std::size_t stagnation_window = 1024;
  double stagnation_rel = 1e-6;
  // Hard cap on branches materialised per level.
  std::size_t level_branch_cap = 100000;
};

struct NamedConstant {
  std::string name;
  double value = 0.0;
  std::string provenance;  // "analytic" | "audited" | "user"
};

// A constructed system together with the fully resolved constant ledger and
// the audit outcomes that were checked at build time.
struct BuiltSystem {
  std::shared_ptr<NcifsSystem> system;
  std::vector<NamedConstant> constants;
  std::vector<std::string> audit_notes;
  std::optional<double> theoretical_target;
  // Moduli of the branch anchors (b-points, alphabet poles) in branch order;
  // the schedule predicates are monotone sums over these.
  std::vector<double> branch_anchor_moduli;

  double constant(const std::string& name) const;
  bool has_constant(const std::string& name) const;
};

// --- return-map (Mayer) construction ------------------------------------------------

struct MayerConfig {
  Family fam = Family::tan_power(1);
  double s0 = 0.0;       // 0 = per-family default
  double s1 = 0.0;       // 0 = 0.95 * s0 / (16 K^2)
  double koebe_K = 1.15; // distortion scale for the radius inequality; 81 = classical
  std::size_t branch_count = 16;          // used when t_target is unset
  std::optional<double> t_target;         // branch count from the divergence threshold
  PerturbationSequence perturb = PerturbationSequence::zero();
  NumericOptions numerics;
};

// Stationary system of pole-return branches psi_m o phi_m on the closed disk
// B(b, s1): out to the m-th preimage of b and back into the pole's
// neighbourhood. Throws ConfigInfeasible when the radius/perturbation ledger
// cannot be satisfied, ScheduleInfeasible when t_target's branch-count
// threshold is out of reach.
BuiltSystem build_mayer(const MayerConfig& cfg);

// Number of branches needed at exponent t by the divergence threshold
// sum |z_m|^{-t(alpha+1+1/q)} >= 2^{1+2(4+2/q)} K^2 Q^2 L, plus the partial
// sums; exposed for the monotonicity checks.
struct MayerSchedule {
  std::size_t branch_count = 0;
  double threshold = 0.0;
  double achieved_sum = 0.0;
};
MayerSchedule mayer_branch_schedule(const MayerConfig& cfg, double t);

// --- pole ladder constants shared by the two escape-style builders -------------------

struct PoleLadder {
  double standoff_R_star = 0.0;  // dist(Sing, principal poles) > 2 R*
  double separation_R_dagger = 0.0;
  double S_star = 0.0;           // min(2 R*, R_dagger)
  double S = 0.0;
  double R0 = 0.0, R1 = 0.0, R2 = 0.0;
  double comparability_K = 1.0;  // audited constant of the branch-derivative law
  double diam_L = 1.0;           // audited constant of the component-diameter law
};

// Resolves and audits the radius ladder for a family; S = 0 picks 0.45 S*.
PoleLadder resolve_ladder(const Family& fam, double S, const NumericOptions& numerics);

// --- stationary two-step system (KU affine) ------------------------------------------

struct KuAffineConfig {
  Family fam = Family::z_sin_z();
  double S = 0.0;  // 0 = auto
  double t_target = 0.3;
  std::optional<std::size_t> branch_count;  // overrides the schedule
  PerturbationSequence perturb = PerturbationSequence::zero();
  NumericOptions numerics;
};

BuiltSystem build_ku_affine(const KuAffineConfig& cfg);

// Schedule only: the branch count N_t demanded by the divergence threshold,
// with the resolved ladder and perturbation budgets, but no branch
// materialisation (N_t can exceed what a level can hold).
struct KuAffineSchedule {
  std::size_t branch_count = 0;
  double threshold = 0.0;
  double achieved = 0.0;
  PoleRecord base_pole;
  double alphabet_max_modulus = 0.0;
  double eps_budget = 0.0, delta_budget = 0.0;
  PoleLadder ladder;
  double schedule_K = 1.0;
};
KuAffineSchedule ku_affine_schedule(const KuAffineConfig& cfg);

// --- non-stationary escape system (KU escape) -----------------------------------------

struct KuEscapeConfig {
  Family fam = Family::z_sin_z();
  double S = 0.0;
  double t_target = 0.1;
  PerturbationSequence perturb = PerturbationSequence::zero();  // additive only
  NumericOptions numerics;
};

struct EscapeSchedule {
  std::vector<std::size_t> xi;          // xi_0 = 0 < xi_1 < ...
  std::vector<double> block_sums;       // per schedule step
  std::vector<double> thresholds;
  std::vector<double> pole_moduli;      // |a_j| for consumed indices
};

BuiltSystem build_ku_escape(const KuEscapeConfig& cfg);

// Schedule only (no branch materialisation); computes as many xi_k as the
// pole budget allows, at least `min_steps` of them or throws
// ScheduleInfeasible.
EscapeSchedule ku_escape_schedule(const KuEscapeConfig& cfg, std::size_t min_steps);

// --- escaping-set cover sums (upper bound) --------------------------------------------

struct CoverSumReport {
  double t = 0.0;
  double per_level_factor = 0.0;  // M K^t sum_{a in I} |a|^{-t (beta+M+1)/M}
  std::vector<std::size_t> levels;
  std::vector<double> sigma_analytic;   // L^t (2/S)^{t/M} factor^n
  std::vector<double> sigma_direct;     // direct enumeration, small n only
  std::size_t alphabet_size = 0;
  double alphabet_lo = 0.0, alphabet_hi = 0.0;
};

CoverSumReport escape_cover_sum(const Family& fam, double t, double S,
                                const std::vector<PoleRecord>& alphabet, std::size_t n_max,
                                const PerturbationSequence& perturb,
                                const NumericOptions& numerics = {});

// Least catalogued pole modulus R such that the tail sum over |a| > R
// (catalogue part plus an integral tail correction from the fitted counting
// exponent) satisfies M K^t sum |a|^{-t(beta+M+1)/M} <= 1. Throws
// NotSupercritical when no such R can be exhibited within the budget.
double select_R3(const Family& fam, double t, std::size_t pole_budget,
                 const NumericOptions& numerics = {});

// Convergence/divergence classifier on the cover-sum exponent: for each t on
// the grid, compares the partial per-level factor at half and full budget;
// growth below 5% counts as convergent. Returns the detected transition
// (midpoint between the last divergent and first convergent grid point).
struct ThresholdScan {
  std::vector<double> t_values;
  std::vector<double> growth;      // relative growth when the budget doubles
  std::vector<bool> convergent;
  double detected_transition = 0.0;
};
ThresholdScan threshold_scan(const Family& fam, double t_lo, double t_hi, double step,
                             std::size_t pole_budget);

// --- perturbation stability audit ------------------------------------------------------

struct StabilityAudit {
  std::vector<double> level_ratios;  // perturbed / unperturbed probe sums
  double bracket_lo = 1.0, bracket_hi = 1.0;
  bool within = false;  // all ratios inside the bracket with 5% slack
};

// Compares per-level probe sums (branch derivatives at the perturbed image of
// the domain center) of a perturbed system against its unperturbed twin.
StabilityAudit audit_perturbation_stability(const NcifsSystem& perturbed,
                                            const NcifsSystem& unperturbed, double t,
                                            std::size_t levels, double delta);

}  // namespace bowenlab

#endif  // BOWENLAB_CONSTRUCTIONS_HPP
