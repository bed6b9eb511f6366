#ifndef BOWENLAB_POLE_CATALOG_HPP
#define BOWENLAB_POLE_CATALOG_HPP

#include <optional>
#include <vector>

#include "bowenlab/families.hpp"

namespace bowenlab {

struct BorelSum {
  double exponent_t = 0.0;
  double max_modulus = 0.0;
  double partial_sum = 0.0;
  std::size_t term_count = 0;
};

enum class ExponentMethod { CountingRegression, SumRatio };

struct ExponentEstimate {
  double rho_hat = 0.0;
  double ci_halfwidth = 0.0;
  ExponentMethod method = ExponentMethod::CountingRegression;
  double sample_lo = 0.0;
  double sample_hi = 0.0;
};

// Sum of |a|^-t over the given poles, skipping |a| < 1 and, when
// restrict_mult is set, any pole of a different multiplicity. `poles` must be
// sorted by modulus. Deterministic chunked reduction (chunk 1024).
BorelSum borel_partial_sum(const std::vector<PoleRecord>& poles, double t,
                           std::optional<int> restrict_mult = std::nullopt);

// Least-squares slope of log #\{|a| <= r\} against log r over dyadic
// checkpoints. Needs at least 50 poles.
ExponentEstimate estimate_order(const std::vector<PoleRecord>& poles);

// Largest multiplicity whose pole sub-family still has counting exponent rho
// (within 0.1); falls back to the largest multiplicity with at least 50
// members. The family metadata stays authoritative; this is a cross-check.
int detect_mult_star(const std::vector<PoleRecord>& poles, double rho);

}  // namespace bowenlab

#endif  // BOWENLAB_POLE_CATALOG_HPP
