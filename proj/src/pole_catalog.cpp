#include "bowenlab/pole_catalog.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>

#include "bowenlab/parallel.hpp"

namespace bowenlab {

BorelSum borel_partial_sum(const std::vector<PoleRecord>& poles, double t,
                           std::optional<int> restrict_mult) {
  if (!(t > 0.0)) throw DomainError("borel_partial_sum: t must be positive");
  BorelSum out;
  out.exponent_t = t;
  std::size_t count = 0;
  for (const auto& p : poles) {
    double mod = std::abs(p.location);
    out.max_modulus = std::max(out.max_modulus, mod);
    if (mod < 1.0) continue;
    if (restrict_mult && p.multiplicity != *restrict_mult) continue;
    ++count;
  }
  // Collect the participating moduli once so the chunked reduction has a
  // fixed indexing regardless of filters.
  std::vector<double> mods;
  mods.reserve(count);
  for (const auto& p : poles) {
    double mod = std::abs(p.location);
    if (mod < 1.0) continue;
    if (restrict_mult && p.multiplicity != *restrict_mult) continue;
    mods.push_back(mod);
  }
  out.term_count = mods.size();
  out.partial_sum =
      chunked_sum(mods.size(), [&](std::size_t i) { return std::pow(mods[i], -t); });
  return out;
}

namespace {

struct Fit {
  double slope;
  double stderr_slope;
};

// Least squares y = a + b x with slope standard error.
Fit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = x[static_cast<std::size_t>(i)];
    b(i) = y[static_cast<std::size_t>(i)];
  }
  Eigen::Vector2d coef = A.colPivHouseholderQr().solve(b);
  Eigen::VectorXd resid = b - A * coef;
  double dof = std::max<double>(1.0, static_cast<double>(n - 2));
  double sigma2 = resid.squaredNorm() / dof;
  double sxx = (A.col(1).array() - A.col(1).mean()).square().sum();
  double se = std::sqrt(sigma2 / std::max(sxx, 1e-300));
  return {coef(1), se};
}

ExponentEstimate regression_estimate(const std::vector<double>& moduli) {
  // Dyadic checkpoints r, r/2, r/4, ... keeping at least 8 poles per
  // checkpoint so the log-count is stable.
  std::vector<double> sorted = moduli;
  std::sort(sorted.begin(), sorted.end());
  double r_hi = sorted.back();
  std::vector<double> xs, ys;
  for (double r = r_hi; ; r /= 2.0) {
    auto it = std::upper_bound(sorted.begin(), sorted.end(), r);
    auto cnt = static_cast<std::size_t>(it - sorted.begin());
    if (cnt < 8) break;
    xs.push_back(std::log(r));
    ys.push_back(std::log(static_cast<double>(cnt)));
    if (xs.size() > 60) break;
  }
  if (xs.size() < 3)
    throw InsufficientData("estimate_order: too few dyadic checkpoints");
  Fit f = fit_line(xs, ys);
  ExponentEstimate est;
  est.rho_hat = f.slope;
  est.ci_halfwidth = 2.0 * f.stderr_slope;
  est.method = ExponentMethod::CountingRegression;
  est.sample_lo = sorted.front();
  est.sample_hi = sorted.back();
  return est;
}

}  // namespace

ExponentEstimate estimate_order(const std::vector<PoleRecord>& poles) {
  if (poles.size() < 50)
    throw InsufficientData("estimate_order: need at least 50 poles");
  std::vector<double> moduli;
  moduli.reserve(poles.size());
  for (const auto& p : poles) {
    double m = std::abs(p.location);
    if (m > 0.0) moduli.push_back(m);
  }
  ExponentEstimate est = regression_estimate(moduli);
  if (!(est.rho_hat > 0.0))
    throw InsufficientData("estimate_order: nonpositive fitted exponent");
  return est;
}

int detect_mult_star(const std::vector<PoleRecord>& poles, double rho) {
  if (!(rho > 0.0)) throw DomainError("detect_mult_star: rho must be positive");
  std::map<int, std::vector<double>> by_mult;
  for (const auto& p : poles) by_mult[p.multiplicity].push_back(std::abs(p.location));

  int best = 0;
  for (const auto& [mult, mods] : by_mult) {
    if (mods.size() < 50) continue;
    try {
      ExponentEstimate est = regression_estimate(mods);
      if (std::abs(est.rho_hat - rho) <= 0.1) best = std::max(best, mult);
    } catch (const InsufficientData&) {
    }
  }
  if (best > 0) return best;
  // Fallback: largest multiplicity that is populated at all.
  for (auto it = by_mult.rbegin(); it != by_mult.rend(); ++it)
    if (it->second.size() >= 50) return it->first;
  throw InsufficientData("detect_mult_star: no multiplicity class has 50 members");
}

}  // namespace bowenlab
