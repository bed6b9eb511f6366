#ifndef BOWENLAB_FAMILIES_HPP
#define BOWENLAB_FAMILIES_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bowenlab/complex_core.hpp"
#include "bowenlab/conformal_map.hpp"

namespace bowenlab {

enum class FamilyId { TanPower, ZSinZ, ZCosSqrtZ, RationalExp, FormulaOnly };

std::string to_string(FamilyId id);

// --- perturbations -----------------------------------------------------------

// One step of an affine perturbation: z -> gain * f0(z) + shift.
struct PerturbationStep {
  Cplx shift{0.0, 0.0};  // additive part
  Cplx gain{1.0, 0.0};   // multiplicative part

  static PerturbationStep identity() { return {}; }
  bool is_identity() const { return shift == Cplx(0.0, 0.0) && gain == Cplx(1.0, 0.0); }
};

enum class PerturbMode { Zero, ConstantShift, RandomInBall, UserList };

std::string to_string(PerturbMode m);

// A deterministic sequence of perturbation steps, indexed from n = 1.
class PerturbationSequence {
public:
  static PerturbationSequence zero();
  static PerturbationSequence constant_shift(Cplx c);
  // |shift| < epsilon and gain, gain^-1 in B(1, delta); reproducible from seed.
  static PerturbationSequence random_in_ball(double epsilon, double delta, std::uint64_t seed);
  static PerturbationSequence user_list(std::vector<PerturbationStep> steps);

  PerturbationStep step(std::size_t n) const;

  PerturbMode mode() const { return mode_; }
  double epsilon() const { return epsilon_; }
  double delta() const { return delta_; }
  std::uint64_t rng_seed() const { return seed_; }
  bool additive_only() const;

  // Throws ConfigInfeasible if the sequence can exceed the given budgets.
  void require_within(double epsilon_budget, double delta_budget) const;

private:
  PerturbMode mode_ = PerturbMode::Zero;
  double epsilon_ = 0.0;
  double delta_ = 0.0;
  std::uint64_t seed_ = 0;
  std::vector<PerturbationStep> steps_;
};

// --- poles -------------------------------------------------------------------

struct PoleRecord {
  Cplx location;          // a
  int multiplicity = 1;   // m(a)
  Cplx laurent_coeff;     // c with f0(z) ~ c / (z-a)^m(a)
  std::size_t index = 0;  // rank in modulus order over the full pole set
  // Member of the co-finite subset the constructions draw from (far enough
  // from singular values, multiplicity within the family bound).
  bool principal = true;
};

// --- the catalog -------------------------------------------------------------

struct RationalExpData;  // roots/coefficients of R for f = R(e^{freq z})

// A meromorphic family from the closed-form catalog: evaluation, derivative,
// pole enumeration and local inverse branches near poles, plus the analytic
// metadata the constructions need. Copyable value type.
class Family {
public:
  // mu * tan(z)^m. Poles pi/2 + k pi, all of multiplicity m.
  static Family tan_power(int m, Cplx mu = Cplx(1.0, 0.0));
  // 1 / (z sin z). Poles n pi, simple except the double pole at 0.
  static Family z_sin_z();
  // 1 / (z cos sqrt(z)). Poles 0 and ((2n+1) pi / 2)^2, all simple.
  static Family z_cos_sqrt_z();
  // R(e^{freq z}) with R = P/Q given by coefficient lists (ascending powers).
  // Q must have simple nonzero roots and deg P <= deg Q, R(0), R(inf) finite.
  static Family rational_exp(std::vector<Cplx> num, std::vector<Cplx> den,
                             Cplx freq = Cplx(0.0, 1.0));
  // Metadata-only entry; numerical services throw Unsupported.
  static Family formula_only(double order, double coeff_exponent, int max_mult,
                             int dominant_mult, int mayer_q, double mayer_alpha,
                             bool divergence_type = true);

  FamilyId id() const { return id_; }
  std::string name() const;
  bool numeric() const { return id_ != FamilyId::FormulaOnly; }

  // analytic metadata
  double order() const { return order_; }                       // growth order
  double coeff_exponent() const { return coeff_exponent_; }     // decay of |laurent| ~ |a|^-this
  int max_multiplicity() const { return max_multiplicity_; }    // bound over principal poles
  int dominant_multiplicity() const { return dominant_multiplicity_; }
  bool divergence_type() const { return divergence_type_; }
  bool infinity_is_asymptotic() const { return infinity_asymptotic_; }
  int mayer_q() const { return mayer_q_; }
  double mayer_alpha() const { return mayer_alpha_; }
  // Growth scale Q with |f0'| <= Q |z|^alpha on preimages of B(b, s0).
  double mayer_growth_scale(double s0) const;
  // Seed value for the inverse-branch comparability constant; audits refine it.
  double comparability_seed() const { return comparability_seed_; }

  // singular-value geometry: all singular values lie either in the listed
  // points or inside |w| <= sing_cluster_radius.
  const std::vector<Cplx>& sing_points() const { return sing_points_; }
  double sing_cluster_radius() const { return sing_cluster_radius_; }
  // Distance from w to the singular set (lower estimate).
  double sing_distance(Cplx w) const;
  // Min distance between distinct poles over the whole catalog.
  double pole_gap() const { return pole_gap_; }

  // numerical services (throw Unsupported for FormulaOnly)
  Cplx value(Cplx z, const PerturbationStep& s = PerturbationStep::identity()) const;
  Cplx derivative(Cplx z, const PerturbationStep& s = PerturbationStep::identity()) const;
  double nearest_pole_distance(Cplx z) const;

  // k-th pole in nondecreasing modulus order, k >= 0.
  PoleRecord pole_by_rank(std::size_t k) const;
  // All poles with |a| <= max_modulus, sorted by modulus.
  std::vector<PoleRecord> poles_up_to(double max_modulus) const;
  // The distinguished pole for the return-map construction: first principal
  // pole (smallest modulus) with multiplicity mayer_q.
  PoleRecord mayer_pole() const;

  // b-points: solutions of f0(z) = b, k-th in modulus order. Used by the
  // return-map construction; closed-form seed refined by Newton.
  Cplx preimage_by_rank(Cplx b, std::size_t k) const;

private:
  Family() = default;
  double mayer_pole_modulus_helper() const;

  FamilyId id_ = FamilyId::FormulaOnly;
  int power_ = 1;
  Cplx scale_{1.0, 0.0};
  std::shared_ptr<const RationalExpData> rational_;

  double order_ = 0.0;
  double coeff_exponent_ = 0.0;
  int max_multiplicity_ = 1;
  int dominant_multiplicity_ = 1;
  bool divergence_type_ = false;
  bool infinity_asymptotic_ = false;
  int mayer_q_ = 1;
  double mayer_alpha_ = 0.0;
  double comparability_seed_ = 1.25;

  std::vector<Cplx> sing_points_;
  double sing_cluster_radius_ = 0.0;
  double pole_gap_ = 0.0;
};

// Streams poles in modulus order, optionally filtered. Cheap closed-form
// state; used by the schedule searches, which may consume millions of poles.
class PoleCursor {
public:
  struct Options {
    double min_modulus = 0.0;          // strictly greater than
    std::optional<int> multiplicity;   // exact match
    bool principal_only = false;
  };

  PoleCursor(const Family& fam, Options opt);
  PoleRecord next();

private:
  Family fam_;
  Options opt_;
  std::size_t rank_ = 0;
};

// --- local inverse branches ----------------------------------------------------

// Holomorphic inverse branch of a perturbed family map near a pole: sends a
// disk of large values back into a neighborhood of the pole. The j-th of the
// m(a) branches picks the principal m-th root rotated by 2 pi j / m.
class InverseBranch final : public ConformalMap {
public:
  // Throws BranchDomainInvalid when j is out of range or the (shifted,
  // rescaled) domain comes too close to the singular values of f0
  // (checked at 32 boundary samples).
  InverseBranch(Family fam, PoleRecord pole, int root_index, Disk domain,
                PerturbationStep step = PerturbationStep::identity());

  Cplx value(Cplx w) const override;
  Cplx derivative(Cplx w) const override;

  const Disk& domain() const { return domain_; }
  const PoleRecord& pole() const { return pole_; }
  int root_index() const { return root_index_; }
  const PerturbationStep& step() const { return step_; }

private:
  Cplx seed_for(Cplx pulled_back) const;

  Family fam_;
  PoleRecord pole_;
  int root_index_ = 1;
  Disk domain_;
  PerturbationStep step_;
};

// local_branch per the module contract; returns a shared branch handle.
std::shared_ptr<const InverseBranch> local_branch(
    const Family& fam, const PerturbationStep& step, const PoleRecord& pole,
    int j, const Disk& domain);

// --- closed-form dimension targets --------------------------------------------

// rho * M / (beta + M + 1): the escaping-set dimension value.
double theoretical_dimension(double rho, double beta, int M);

// rho / (alpha + 1 + 1/q): the radial-set lower bound.
double mayer_dimension(double rho, double alpha, int q);

}  // namespace bowenlab

#endif  // BOWENLAB_FAMILIES_HPP
