#ifndef BOWENLAB_VERIFY_HPP
#define BOWENLAB_VERIFY_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "bowenlab/families.hpp"
#include "bowenlab/ncifs.hpp"

namespace bowenlab {

// A word w_1 w_2 ... w_d of branch indices, w_k indexing level k's alphabet.
struct SymbolicAddress {
  std::vector<std::size_t> word;
  std::size_t depth() const { return word.size(); }
};

// phi_{w_1} o ... o phi_{w_d} applied to the center of X_d. Depth 0 returns
// the center of X_0. Throws InvalidAddress for out-of-range indices.
Cplx sample_limit_point(const NcifsSystem& sys, const SymbolicAddress& addr);

// Deterministic address sample: the first half enumerates words in
// mixed-radix order (low-discrepancy across the alphabet), the second half is
// seeded uniform.
std::vector<SymbolicAddress> sample_addresses(const NcifsSystem& sys, std::size_t depth,
                                              std::size_t count, std::uint64_t seed = 17);

struct OrbitTrace {
  Cplx start;
  std::vector<Cplx> iterates;              // F^1(z0), F^2(z0), ...
  std::vector<double> derivative_moduli;   // |(F^j)'(z0)| by the chain rule
  std::optional<double> escaped_past;      // min |F^j| when it beats the threshold
  bool truncated_by_pole = false;
};

// Iterates the perturbed family from z0. A PoleHit truncates the trace, it
// does not fail it.
OrbitTrace forward_orbit(const Family& fam, const PerturbationSequence& seq, Cplx z0,
                         std::size_t steps, double escape_threshold = 0.0);

// Forward pole schedule of a constructed address: one disk-center per forward
// step, read off the inverse-branch factors (outermost level first).
std::vector<Cplx> forward_pole_schedule(const NcifsSystem& sys, const SymbolicAddress& addr);

// Forward orbit of a constructed limit point, computed by the stable
// backward pullback (naive forward iteration loses the orbit after a few
// steps: the per-step expansion multiplies the Newton tolerance past O(1)).
// Each step is verified against the forward functional equation
// f_j(y_{j-1}) = y_j; max_forward_residual records the worst relative error.
struct EscapeWitness {
  Cplx start;                             // the limit point z*
  std::vector<Cplx> orbit;                // F^1(z*), ..., F^m(z*)
  std::vector<double> derivative_moduli;  // |(F^j)'(z*)| by the chain rule
  std::vector<Cplx> schedule;             // scheduled pole per forward step
  double max_forward_residual = 0.0;
  // Relative evaluation-noise floor of the forward checks (derivative times
  // ulp of the argument); residuals should be compared against
  // max(1e-7, ~30x this).
  double noise_floor = 0.0;
  double min_modulus = 0.0;
  double max_pole_distance = 0.0;

  double residual_threshold() const { return std::max(1e-7, 30.0 * noise_floor); }
};

EscapeWitness escape_witness(const NcifsSystem& sys, const SymbolicAddress& addr,
                             const Family& fam, const PerturbationSequence& seq);

// Derivative-blowup criterion: every sampled limit point must have forward
// derivative moduli strictly increasing beyond the second step and above 1e3
// by the final recorded step, with the orbit staying inside the construction
// disks (bound inferred from the generated levels).
bool derivative_blowup_audit(const NcifsSystem& sys,
                             const std::vector<SymbolicAddress>& addresses,
                             const Family& fam, const PerturbationSequence& seq);

// The unique t with sum ratios^t = 1 (bisection to 1e-12): the exact
// Hausdorff dimension of a separated self-similar system.
double moran_oracle(const std::vector<double>& ratios);

}  // namespace bowenlab

#endif  // BOWENLAB_VERIFY_HPP
