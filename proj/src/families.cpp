#include "bowenlab/families.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace bowenlab {

namespace {

constexpr double kPi = M_PI;

// splitmix64; used to derive per-step RNG states so that step(n) is
// reproducible and order-independent.
std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_double(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Uniform point in the open disk of the given radius.
Cplx disk_sample(std::uint64_t state, double radius) {
  double u = unit_double(splitmix(state));
  double v = unit_double(splitmix(state + 0x632be59bd9b4e019ULL));
  double r = radius * std::sqrt(u) * 0.999999;
  double th = 2.0 * kPi * v;
  return Cplx(r * std::cos(th), r * std::sin(th));
}

// Newton on a real function; the family factories use it to locate critical
// points once, at construction.
double real_newton(const std::function<double(double)>& f,
                   const std::function<double(double)>& df, double x0) {
  double x = x0;
  for (int i = 0; i < 80; ++i) {
    double fx = f(x);
    double d = df(x);
    if (std::abs(d) < 1e-300) break;
    double step = fx / d;
    x -= step;
    if (std::abs(step) < 1e-14 * (1.0 + std::abs(x))) break;
  }
  return x;
}

// Roots of a polynomial with ascending coefficients, via the companion
// matrix. Degree is small (rational-exponential catalog entries).
std::vector<Cplx> poly_roots(std::vector<Cplx> c) {
  while (!c.empty() && std::abs(c.back()) == 0.0) c.pop_back();
  if (c.size() < 2) return {};
  const std::size_t n = c.size() - 1;
  Eigen::MatrixXcd comp = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t i = 0; i + 1 < n; ++i) comp(i + 1, i) = 1.0;
  for (std::size_t i = 0; i < n; ++i) comp(i, n - 1) = -c[i] / c[n];
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(comp, false);
  std::vector<Cplx> roots(n);
  for (std::size_t i = 0; i < n; ++i) roots[i] = es.eigenvalues()(static_cast<Eigen::Index>(i));
  return roots;
}

Cplx poly_eval(const std::vector<Cplx>& c, Cplx w) {
  Cplx v{0.0, 0.0};
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * w + *it;
  return v;
}

Cplx poly_deriv_eval(const std::vector<Cplx>& c, Cplx w) {
  Cplx v{0.0, 0.0};
  for (std::size_t i = c.size(); i-- > 1;)
    v = v * w + static_cast<double>(i) * c[i];
  return v;
}

// Residual tolerance for inverting f0(z) = target: double-precision
// evaluation of the catalogue maps floors out at ~1e-15 relative, so the
// absolute residual scales with the target.
double invert_tol(Cplx target) { return 1e-12 * (1.0 + std::abs(target)); }

Cplx ipow(Cplx base, int m) {
  Cplx r{1.0, 0.0};
  for (int i = 0; i < m; ++i) r *= base;
  return r;
}

}  // namespace

std::string to_string(FamilyId id) {
  switch (id) {
    case FamilyId::TanPower: return "tan";
    case FamilyId::ZSinZ: return "zsinz";
    case FamilyId::ZCosSqrtZ: return "zcossqrtz";
    case FamilyId::RationalExp: return "rational-exp";
    case FamilyId::FormulaOnly: return "formula-only";
  }
  return "?";
}

std::string to_string(PerturbMode m) {
  switch (m) {
    case PerturbMode::Zero: return "zero";
    case PerturbMode::ConstantShift: return "constant";
    case PerturbMode::RandomInBall: return "random";
    case PerturbMode::UserList: return "list";
  }
  return "?";
}

// --- PerturbationSequence ------------------------------------------------------

PerturbationSequence PerturbationSequence::zero() { return PerturbationSequence(); }

PerturbationSequence PerturbationSequence::constant_shift(Cplx c) {
  PerturbationSequence s;
  s.mode_ = PerturbMode::ConstantShift;
  s.epsilon_ = std::nextafter(std::abs(c), HUGE_VAL);
  s.steps_ = {PerturbationStep{c, Cplx(1.0, 0.0)}};
  return s;
}

PerturbationSequence PerturbationSequence::random_in_ball(double epsilon, double delta,
                                                          std::uint64_t seed) {
  if (epsilon < 0.0 || delta < 0.0 || delta >= 1.0)
    throw DomainError("random_in_ball: need epsilon >= 0 and 0 <= delta < 1");
  PerturbationSequence s;
  s.mode_ = PerturbMode::RandomInBall;
  s.epsilon_ = epsilon;
  s.delta_ = delta;
  s.seed_ = seed;
  return s;
}

PerturbationSequence PerturbationSequence::user_list(std::vector<PerturbationStep> steps) {
  PerturbationSequence s;
  s.mode_ = PerturbMode::UserList;
  for (const auto& st : steps) {
    s.epsilon_ = std::max(s.epsilon_, std::abs(st.shift));
    double d = std::max(std::abs(st.gain - 1.0),
                        std::abs(st.gain) > 0 ? std::abs(1.0 / st.gain - 1.0) : HUGE_VAL);
    s.delta_ = std::max(s.delta_, d);
  }
  s.epsilon_ = std::nextafter(s.epsilon_, HUGE_VAL);
  s.delta_ = std::nextafter(s.delta_, HUGE_VAL);
  s.steps_ = std::move(steps);
  return s;
}

PerturbationStep PerturbationSequence::step(std::size_t n) const {
  if (n == 0) throw DomainError("PerturbationSequence::step: steps are indexed from 1");
  switch (mode_) {
    case PerturbMode::Zero:
      return PerturbationStep::identity();
    case PerturbMode::ConstantShift:
      return steps_.front();
    case PerturbMode::UserList:
      if (steps_.empty()) return PerturbationStep::identity();
      return steps_[std::min(n - 1, steps_.size() - 1)];
    case PerturbMode::RandomInBall: {
      std::uint64_t base = splitmix(seed_ ^ (0x100000001b3ULL * n));
      PerturbationStep st;
      st.shift = disk_sample(base, epsilon_);
      // |gain - 1| < delta/(1+delta) guarantees gain and 1/gain in B(1, delta).
      st.gain = Cplx(1.0, 0.0) +
                disk_sample(splitmix(base + 1), delta_ / (1.0 + delta_));
      return st;
    }
  }
  return PerturbationStep::identity();
}

bool PerturbationSequence::additive_only() const {
  if (mode_ == PerturbMode::Zero || mode_ == PerturbMode::ConstantShift) return true;
  if (mode_ == PerturbMode::RandomInBall) return delta_ == 0.0;
  for (const auto& st : steps_)
    if (st.gain != Cplx(1.0, 0.0)) return false;
  return true;
}

void PerturbationSequence::require_within(double epsilon_budget, double delta_budget) const {
  if (epsilon_ > epsilon_budget || delta_ > delta_budget) {
    std::ostringstream os;
    os << "perturbation budget exceeded: epsilon " << epsilon_ << " vs " << epsilon_budget
       << ", delta " << delta_ << " vs " << delta_budget;
    throw ConfigInfeasible(os.str());
  }
}

// --- RationalExp data ----------------------------------------------------------

struct RationalExpData {
  std::vector<Cplx> num, den;
  Cplx freq;
  std::vector<Cplx> den_roots;
  std::vector<Cplx> line_base;  // Log(root)/freq
  Cplx period;                  // 2 pi i / freq
  std::vector<Cplx> laurent;    // per root
};

// --- factories ------------------------------------------------------------------

Family Family::tan_power(int m, Cplx mu) {
  if (m < 1) throw DomainError("tan_power: m >= 1 required");
  if (std::abs(mu) == 0.0) throw DomainError("tan_power: mu must be nonzero");
  Family f;
  f.id_ = FamilyId::TanPower;
  f.power_ = m;
  f.scale_ = mu;
  f.order_ = 1.0;
  f.coeff_exponent_ = 0.0;
  f.max_multiplicity_ = m;
  f.dominant_multiplicity_ = m;
  f.divergence_type_ = true;
  f.infinity_asymptotic_ = false;
  f.mayer_q_ = m;
  f.mayer_alpha_ = 0.0;
  f.comparability_seed_ = 1.25;
  // Asymptotic values mu*(+-i)^m; the critical value 0 appears for m >= 2.
  f.sing_points_ = {mu * ipow(Cplx(0.0, 1.0), m), mu * ipow(Cplx(0.0, -1.0), m)};
  if (m >= 2) f.sing_points_.push_back(Cplx(0.0, 0.0));
  f.sing_cluster_radius_ = 0.0;
  f.pole_gap_ = kPi;
  return f;
}

Family Family::z_sin_z() {
  Family f;
  f.id_ = FamilyId::ZSinZ;
  f.order_ = 1.0;
  f.coeff_exponent_ = 1.0;
  f.max_multiplicity_ = 1;  // over the principal set; the pole at 0 is double
  f.dominant_multiplicity_ = 1;
  f.divergence_type_ = true;
  f.infinity_asymptotic_ = false;
  f.mayer_q_ = 1;
  f.mayer_alpha_ = 1.0;
  f.comparability_seed_ = 1.25;
  // Singular values: the asymptotic value 0 plus critical values at the real
  // roots of sin x + x cos x = 0; moduli fall off like 2/((2n+1) pi).
  f.sing_points_.push_back(Cplx(0.0, 0.0));
  for (int n = 0; n < 8; ++n) {
    double guess = (2 * n + 1) * kPi / 2.0 + 0.4;
    double x = real_newton(
        [](double t) { return std::sin(t) + t * std::cos(t); },
        [](double t) { return 2.0 * std::cos(t) - t * std::sin(t); }, guess);
    double v = 1.0 / (x * std::sin(x));
    f.sing_points_.push_back(Cplx(v, 0.0));
    f.sing_points_.push_back(Cplx(-v, 0.0));
  }
  f.sing_cluster_radius_ = 1.3 * 2.0 / (17.0 * kPi);
  f.pole_gap_ = kPi;
  return f;
}

Family Family::z_cos_sqrt_z() {
  Family f;
  f.id_ = FamilyId::ZCosSqrtZ;
  f.order_ = 0.5;
  f.coeff_exponent_ = 0.5;
  f.max_multiplicity_ = 1;
  f.dominant_multiplicity_ = 1;
  f.divergence_type_ = true;
  f.infinity_asymptotic_ = false;
  f.mayer_q_ = 1;
  f.mayer_alpha_ = 0.5;
  f.comparability_seed_ = 1.25;
  // Critical points solve cot x = x/2 with x = sqrt(z); values ~ 1/(n pi)^2.
  f.sing_points_.push_back(Cplx(0.0, 0.0));
  for (int n = 0; n < 8; ++n) {
    double guess = (n == 0) ? 1.1 : n * kPi + 2.0 / (n * kPi);
    double x = real_newton(
        [](double t) { return std::cos(t) - 0.5 * t * std::sin(t); },
        [](double t) { return -1.5 * std::sin(t) - 0.5 * t * std::cos(t); }, guess);
    double v = 1.0 / (x * x * std::cos(x));
    f.sing_points_.push_back(Cplx(v, 0.0));
  }
  f.sing_cluster_radius_ = 1.3 / std::pow(8.0 * kPi, 2.0);
  f.pole_gap_ = std::pow(kPi / 2.0, 2.0);  // distance from 0 to the first pole
  return f;
}

Family Family::rational_exp(std::vector<Cplx> num, std::vector<Cplx> den, Cplx freq) {
  if (std::abs(freq) == 0.0) throw DomainError("rational_exp: freq must be nonzero");
  while (!num.empty() && std::abs(num.back()) == 0.0) num.pop_back();
  while (!den.empty() && std::abs(den.back()) == 0.0) den.pop_back();
  if (den.size() < 2) throw Unsupported("rational_exp: denominator must have positive degree");
  if (num.size() > den.size())
    throw Unsupported("rational_exp: R(inf) must be finite (deg P <= deg Q)");
  if (std::abs(den.front()) == 0.0)
    throw Unsupported("rational_exp: R(0) must be finite (Q(0) != 0)");

  auto data = std::make_shared<RationalExpData>();
  data->num = num;
  data->den = den;
  data->freq = freq;
  data->den_roots = poly_roots(den);
  for (std::size_t i = 0; i < data->den_roots.size(); ++i) {
    Cplx p = data->den_roots[i];
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(p - data->den_roots[j]) < 1e-8 * (1.0 + std::abs(p)))
        throw Unsupported("rational_exp: repeated denominator roots are not catalogued");
    if (std::abs(poly_eval(num, p)) < 1e-12)
      throw Unsupported("rational_exp: common root of P and Q");
    data->line_base.push_back(std::log(p) / freq);
    data->laurent.push_back(poly_eval(num, p) / (poly_deriv_eval(den, p) * p * freq));
  }
  data->period = Cplx(0.0, 2.0 * kPi) / freq;

  Family f;
  f.id_ = FamilyId::RationalExp;
  f.rational_ = data;
  f.order_ = 1.0;
  f.coeff_exponent_ = 0.0;
  f.max_multiplicity_ = 1;
  f.dominant_multiplicity_ = 1;
  f.divergence_type_ = true;
  f.infinity_asymptotic_ = false;
  f.mayer_q_ = 1;
  f.mayer_alpha_ = 0.0;  // periodic
  f.comparability_seed_ = 1.5;

  // Singular values: R(0), R(inf) and the critical values of R.
  f.sing_points_.push_back(poly_eval(num, Cplx(0, 0)) / poly_eval(den, Cplx(0, 0)));
  if (num.size() == den.size())
    f.sing_points_.push_back(num.back() / den.back());
  else
    f.sing_points_.push_back(Cplx(0.0, 0.0));
  // roots of P'Q - PQ'
  {
    std::vector<Cplx> pq(num.size() + den.size(), Cplx(0, 0));
    auto add_prod = [&](const std::vector<Cplx>& a_deriv_of, const std::vector<Cplx>& b,
                        double sign) {
      for (std::size_t i = 1; i < a_deriv_of.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
          pq[i - 1 + j] += sign * static_cast<double>(i) * a_deriv_of[i] * b[j];
    };
    add_prod(num, den, 1.0);
    add_prod(den, num, -1.0);
    for (Cplx w : poly_roots(pq)) {
      Cplx qv = poly_eval(den, w);
      if (std::abs(qv) > 1e-10)
        f.sing_points_.push_back(poly_eval(num, w) / qv);
    }
  }
  f.sing_cluster_radius_ = 0.0;

  // Pole geometry is periodic; audit the gap over three periods.
  {
    std::vector<Cplx> locs;
    double span = 3.0 * std::abs(data->period);
    for (std::size_t i = 0; i < data->line_base.size(); ++i)
      for (int k = -4; k <= 4; ++k) {
        Cplx z = data->line_base[i] + static_cast<double>(k) * data->period;
        if (std::abs(z) <= span + 2.0 * std::abs(data->period)) locs.push_back(z);
      }
    double gap = HUGE_VAL;
    for (std::size_t i = 0; i < locs.size(); ++i)
      for (std::size_t j = 0; j < i; ++j) gap = std::min(gap, std::abs(locs[i] - locs[j]));
    f.pole_gap_ = gap;
  }
  if (!(f.pole_gap_ > 1e-6)) throw Unsupported("rational_exp: poles too close together");
  return f;
}

Family Family::formula_only(double order, double coeff_exponent, int max_mult,
                            int dominant_mult, int mayer_q, double mayer_alpha,
                            bool divergence_type) {
  if (!(order > 0.0)) throw DomainError("formula_only: order must be positive");
  if (dominant_mult < 1 || dominant_mult > max_mult)
    throw DomainError("formula_only: need 1 <= M* <= M");
  if (!(mayer_alpha > -1.0 - 1.0 / mayer_q))
    throw DomainError("formula_only: alpha must exceed -1 - 1/q");
  Family f;
  f.id_ = FamilyId::FormulaOnly;
  f.order_ = order;
  f.coeff_exponent_ = coeff_exponent;
  f.max_multiplicity_ = max_mult;
  f.dominant_multiplicity_ = dominant_mult;
  f.mayer_q_ = mayer_q;
  f.mayer_alpha_ = mayer_alpha;
  f.divergence_type_ = divergence_type;
  return f;
}

std::string Family::name() const { return to_string(id_); }

double Family::mayer_growth_scale(double s0) const {
  double b = std::abs(mayer_pole_modulus_helper());
  switch (id_) {
    case FamilyId::TanPower: {
      double v = std::pow((b + s0) / std::abs(scale_), 1.0 / power_);
      return 1.2 * power_ * std::abs(scale_) * std::pow(v, power_ - 1) * (1.0 + v * v);
    }
    case FamilyId::ZSinZ:
      return 1.5 * std::pow(b + s0, 2.0);
    case FamilyId::ZCosSqrtZ:
      return 1.0 * std::pow(b + s0, 2.0);  // |f'| ~ |w|^2 sqrt|z| / 2
    case FamilyId::RationalExp: {
      // Sampled over the first few return branches; periodic so the sup
      // stabilizes quickly.
      double q = 0.0;
      PoleRecord b_pole = mayer_pole();
      for (std::size_t k = 0; k < 24; ++k) {
        Cplx zb;
        try {
          zb = preimage_by_rank(b_pole.location, k);
        } catch (const Error&) {
          break;
        }
        double ratio = std::abs(derivative(zb)) / std::pow(std::abs(zb), mayer_alpha_);
        q = std::max(q, ratio);
      }
      if (q == 0.0) throw Unsupported("mayer_growth_scale: no return branches found");
      return 1.5 * q;
    }
    case FamilyId::FormulaOnly:
      throw Unsupported("mayer_growth_scale: formula-only family");
  }
  throw Unsupported("mayer_growth_scale");
}

double Family::mayer_pole_modulus_helper() const {
  switch (id_) {
    case FamilyId::TanPower: return kPi / 2.0;
    case FamilyId::ZSinZ: return kPi;
    case FamilyId::ZCosSqrtZ: return std::pow(1.5 * kPi, 2.0);
    case FamilyId::RationalExp: return std::abs(mayer_pole().location);
    case FamilyId::FormulaOnly: break;
  }
  throw Unsupported("formula-only family has no catalogued poles");
}

double Family::sing_distance(Cplx w) const {
  double d = HUGE_VAL;
  for (Cplx s : sing_points_) d = std::min(d, std::abs(w - s));
  if (sing_cluster_radius_ > 0.0)
    d = std::min(d, std::max(0.0, std::abs(w) - sing_cluster_radius_));
  return d;
}

// --- evaluation -----------------------------------------------------------------

namespace {
Cplx tan_cplx(Cplx z) {
  // std::tan overflows for large |Im z|; clamp to the asymptotic value.
  if (z.imag() > 20.0) return Cplx(0.0, 1.0);
  if (z.imag() < -20.0) return Cplx(0.0, -1.0);
  return std::tan(z);
}
}  // namespace

Cplx Family::value(Cplx z, const PerturbationStep& s) const {
  Cplx base;
  switch (id_) {
    case FamilyId::TanPower:
      base = scale_ * ipow(tan_cplx(z), power_);
      break;
    case FamilyId::ZSinZ:
      base = 1.0 / (z * std::sin(z));
      break;
    case FamilyId::ZCosSqrtZ:
      base = 1.0 / (z * std::cos(std::sqrt(z)));
      break;
    case FamilyId::RationalExp: {
      Cplx w = std::exp(rational_->freq * z);
      base = poly_eval(rational_->num, w) / poly_eval(rational_->den, w);
      break;
    }
    case FamilyId::FormulaOnly:
      throw Unsupported("value: formula-only family has no numerical services");
  }
  if (!is_finite(base) || std::abs(base) > 1e250 || nearest_pole_distance(z) < 1e-13)
    throw PoleHit("value: evaluation point is (numerically) a pole");
  return s.gain * base + s.shift;
}

Cplx Family::derivative(Cplx z, const PerturbationStep& s) const {
  Cplx d;
  switch (id_) {
    case FamilyId::TanPower: {
      Cplx t = tan_cplx(z);
      d = scale_ * static_cast<double>(power_) * ipow(t, power_ - 1) * (1.0 + t * t);
      break;
    }
    case FamilyId::ZSinZ: {
      Cplx sz = std::sin(z), cz = std::cos(z);
      Cplx den = z * sz;
      d = -(sz + z * cz) / (den * den);
      break;
    }
    case FamilyId::ZCosSqrtZ: {
      Cplx x = std::sqrt(z);
      Cplx c = std::cos(x);
      Cplx zc_prime = c - 0.5 * x * std::sin(x);  // d/dz (z cos sqrt z)
      Cplx den = z * c;
      d = -zc_prime / (den * den);
      break;
    }
    case FamilyId::RationalExp: {
      Cplx w = std::exp(rational_->freq * z);
      Cplx p = poly_eval(rational_->num, w), q = poly_eval(rational_->den, w);
      Cplx dp = poly_deriv_eval(rational_->num, w), dq = poly_deriv_eval(rational_->den, w);
      d = (dp * q - p * dq) / (q * q) * rational_->freq * w;
      break;
    }
    case FamilyId::FormulaOnly:
      throw Unsupported("derivative: formula-only family has no numerical services");
  }
  if (!is_finite(d) || std::abs(d) > 1e250 || nearest_pole_distance(z) < 1e-13)
    throw PoleHit("derivative: evaluation point is (numerically) a pole");
  return s.gain * d;
}

double Family::nearest_pole_distance(Cplx z) const {
  switch (id_) {
    case FamilyId::TanPower: {
      double k = std::round(z.real() / kPi - 0.5);
      double d = HUGE_VAL;
      for (double kk : {k - 1.0, k, k + 1.0})
        d = std::min(d, std::abs(z - Cplx((kk + 0.5) * kPi, 0.0)));
      return d;
    }
    case FamilyId::ZSinZ: {
      double k = std::round(z.real() / kPi);
      double d = HUGE_VAL;
      for (double kk : {k - 1.0, k, k + 1.0})
        d = std::min(d, std::abs(z - Cplx(kk * kPi, 0.0)));
      return d;
    }
    case FamilyId::ZCosSqrtZ: {
      double x = std::abs(std::sqrt(z).real());
      double n = std::round((2.0 * x / kPi - 1.0) / 2.0);
      double d = std::abs(z);  // the pole at 0
      for (double nn : {n - 1.0, n, n + 1.0}) {
        if (nn < 0) continue;
        double a = std::pow((2.0 * nn + 1.0) * kPi / 2.0, 2.0);
        d = std::min(d, std::abs(z - Cplx(a, 0.0)));
      }
      return d;
    }
    case FamilyId::RationalExp: {
      double d = HUGE_VAL;
      for (Cplx base : rational_->line_base) {
        Cplx rel = (z - base) / rational_->period;
        double k = std::round(rel.real());
        for (double kk : {k - 1.0, k, k + 1.0})
          d = std::min(d, std::abs(z - (base + kk * rational_->period)));
      }
      return d;
    }
    case FamilyId::FormulaOnly:
      throw Unsupported("nearest_pole_distance: formula-only family");
  }
  throw Unsupported("nearest_pole_distance");
}

// --- pole enumeration -------------------------------------------------------------

PoleRecord Family::pole_by_rank(std::size_t k) const {
  PoleRecord r;
  r.index = k;
  switch (id_) {
    case FamilyId::TanPower: {
      std::size_t ring = k / 2;
      double sign = (k % 2 == 0) ? 1.0 : -1.0;
      r.location = Cplx(sign * (kPi / 2.0 + static_cast<double>(ring) * kPi), 0.0);
      r.multiplicity = power_;
      r.laurent_coeff = scale_ * ((power_ % 2 == 0) ? 1.0 : -1.0);
      r.principal = true;
      return r;
    }
    case FamilyId::ZSinZ: {
      if (k == 0) {
        r.location = Cplx(0.0, 0.0);
        r.multiplicity = 2;
        r.laurent_coeff = Cplx(1.0, 0.0);
        r.principal = false;  // double pole, excluded from the co-finite set
        return r;
      }
      std::size_t n = (k + 1) / 2;
      double sign = (k % 2 == 1) ? 1.0 : -1.0;
      double a = sign * static_cast<double>(n) * kPi;
      r.location = Cplx(a, 0.0);
      r.multiplicity = 1;
      r.laurent_coeff = Cplx(((n % 2 == 0) ? 1.0 : -1.0) / a, 0.0);
      r.principal = true;
      return r;
    }
    case FamilyId::ZCosSqrtZ: {
      if (k == 0) {
        r.location = Cplx(0.0, 0.0);
        r.multiplicity = 1;
        r.laurent_coeff = Cplx(1.0, 0.0);
        r.principal = false;  // sits on the asymptotic value's doorstep
        return r;
      }
      std::size_t n = k - 1;
      double x = (2.0 * static_cast<double>(n) + 1.0) * kPi / 2.0;
      r.location = Cplx(x * x, 0.0);
      r.multiplicity = 1;
      // c = -2 sqrt(a) / (a sin sqrt(a)) with sin sqrt(a) = (-1)^n
      double s = (n % 2 == 0) ? 1.0 : -1.0;
      r.laurent_coeff = Cplx(-2.0 * s / x, 0.0);
      // The first pole is too close to the largest critical value; it is
      // kept out of the principal set (the set is co-finite either way).
      r.principal = (n >= 1);
      return r;
    }
    case FamilyId::RationalExp: {
      // Merge the per-root pole lines by modulus.
      auto& d = *rational_;
      using Cand = std::pair<double, std::pair<std::size_t, long>>;
      std::priority_queue<Cand, std::vector<Cand>, std::greater<Cand>> heap;
      auto loc = [&](std::size_t i, long kk) {
        return d.line_base[i] + static_cast<double>(kk) * d.period;
      };
      for (std::size_t i = 0; i < d.line_base.size(); ++i) {
        // Closest lattice index to the origin on line i, plus neighbours.
        Cplx rel = -d.line_base[i] / d.period;
        long k0 = std::lround(rel.real());
        for (long kk : {k0 - 1, k0, k0 + 1})
          heap.push({std::abs(loc(i, kk)), {i, kk}});
      }
      std::vector<std::pair<std::size_t, long>> seen;
      std::size_t emitted = 0;
      while (!heap.empty()) {
        auto [mod, key] = heap.top();
        heap.pop();
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
        seen.push_back(key);
        auto [i, kk] = key;
        for (long nk : {kk - 1, kk + 1})
          if (std::find(seen.begin(), seen.end(), std::make_pair(i, nk)) == seen.end())
            heap.push({std::abs(loc(i, nk)), {i, nk}});
        if (emitted == k) {
          r.location = loc(i, kk);
          r.multiplicity = 1;
          r.laurent_coeff = d.laurent[i];
          r.principal = true;
          return r;
        }
        ++emitted;
      }
      throw Unsupported("pole_by_rank: exhausted rational-exp pole lines");
    }
    case FamilyId::FormulaOnly:
      throw Unsupported("pole_by_rank: formula-only family");
  }
  throw Unsupported("pole_by_rank");
}

std::vector<PoleRecord> Family::poles_up_to(double max_modulus) const {
  std::vector<PoleRecord> out;
  for (std::size_t k = 0;; ++k) {
    PoleRecord p = pole_by_rank(k);
    if (std::abs(p.location) > max_modulus) break;
    out.push_back(p);
  }
  return out;
}

PoleRecord Family::mayer_pole() const {
  for (std::size_t k = 0; k < 64; ++k) {
    PoleRecord p = pole_by_rank(k);
    if (p.principal && p.multiplicity == mayer_q_) return p;
  }
  throw Unsupported("mayer_pole: no principal pole with the requested multiplicity");
}

PoleCursor::PoleCursor(const Family& fam, Options opt) : fam_(fam), opt_(opt) {}

PoleRecord PoleCursor::next() {
  for (;;) {
    PoleRecord p = fam_.pole_by_rank(rank_++);
    if (std::abs(p.location) <= opt_.min_modulus) continue;
    if (opt_.multiplicity && p.multiplicity != *opt_.multiplicity) continue;
    if (opt_.principal_only && !p.principal) continue;
    return p;
  }
}

// --- b-points -------------------------------------------------------------------

Cplx Family::preimage_by_rank(Cplx b, std::size_t k) const {
  if (!numeric()) throw Unsupported("preimage_by_rank: formula-only family");
  // Every preimage of a (large-ish) value b sits near a pole: f0 ~ c/(z-a)^m
  // gives z ~ a + (c/b)^{1/m}. Gather candidates near poles of successive
  // rank, refine by Newton, sort by modulus.
  std::vector<Cplx> candidates;
  std::size_t need = k + 1;
  std::size_t pole_rank = 0;
  auto f = [&](Cplx z) { return value(z); };
  auto df = [&](Cplx z) { return derivative(z); };
  while (candidates.size() < need + 2 * static_cast<std::size_t>(max_multiplicity_) + 4) {
    PoleRecord p = pole_by_rank(pole_rank++);
    int m = p.multiplicity;
    Cplx ratio = p.laurent_coeff / b;
    Cplx root = std::exp(std::log(ratio) / static_cast<double>(m));
    for (int j = 0; j < m; ++j) {
      Cplx rot = std::exp(Cplx(0.0, 2.0 * kPi * j / m));
      Cplx seed = p.location + root * rot;
      try {
        candidates.push_back(newton_invert(b, seed, f, df, invert_tol(b), 80));
      } catch (const Error&) {
        // Seed fell in a bad spot (e.g. midway between poles); skip.
      }
    }
    if (pole_rank > 16 * need + 64)
      throw NoConvergence("preimage_by_rank: could not collect enough preimages", 0.0);
  }
  // Deduplicate (two seeds can converge to the same point).
  std::sort(candidates.begin(), candidates.end(), [](Cplx a, Cplx c) {
    return std::abs(a) < std::abs(c);
  });
  std::vector<Cplx> unique;
  for (Cplx z : candidates) {
    bool dup = false;
    for (Cplx u : unique)
      if (std::abs(u - z) < 1e-8 * (1.0 + std::abs(z))) { dup = true; break; }
    if (!dup) unique.push_back(z);
  }
  if (k >= unique.size())
    throw NoConvergence("preimage_by_rank: rank beyond collected preimages", 0.0);
  return unique[k];
}

// --- inverse branches -------------------------------------------------------------

InverseBranch::InverseBranch(Family fam, PoleRecord pole, int root_index, Disk domain,
                             PerturbationStep step)
    : fam_(std::move(fam)), pole_(pole), root_index_(root_index), domain_(domain),
      step_(step) {
  if (root_index_ < 1 || root_index_ > pole_.multiplicity)
    throw BranchDomainInvalid("local_branch: root index out of range for this pole");
  if (!fam_.numeric()) throw Unsupported("local_branch: formula-only family");

  // The pulled-back domain must stay clear of the singular values of f0,
  // otherwise the branch cannot be continued over all of it.
  const double standoff = std::max(0.02, 0.05 * domain_.radius);
  for (std::size_t i = 0; i < 32; ++i) {
    Cplx w = domain_.boundary_point(i, 32);
    Cplx pulled = (w - step_.shift) / step_.gain;
    if (fam_.sing_distance(pulled) <= standoff)
      throw BranchDomainInvalid("local_branch: domain meets the singular-value stand-off");
  }
  Cplx center_pulled = (domain_.center - step_.shift) / step_.gain;
  if (fam_.sing_distance(center_pulled) <= standoff)
    throw BranchDomainInvalid("local_branch: domain meets the singular-value stand-off");

  // Univalence proxy: the branch must evaluate with a nonvanishing
  // derivative over the domain boundary.
  try {
    for (std::size_t i = 0; i < 32; ++i) {
      Cplx w = domain_.boundary_point(i, 32);
      Cplx z = value(w);
      Cplx d = fam_.derivative(z);
      if (std::abs(d) < 1e-14)
        throw DerivativeVanished("local_branch: derivative vanished on the domain");
    }
  } catch (const BranchDomainInvalid&) {
    throw;
  } catch (const Error& e) {
    throw BranchDomainInvalid(std::string("local_branch: boundary audit failed: ") + e.what());
  }
}

Cplx InverseBranch::seed_for(Cplx pulled_back) const {
  int m = pole_.multiplicity;
  Cplx ratio = pole_.laurent_coeff / pulled_back;
  Cplx root = std::exp(std::log(ratio) / static_cast<double>(m));
  Cplx rot = std::exp(Cplx(0.0, 2.0 * kPi * root_index_ / m));
  return pole_.location + root * rot;
}

Cplx InverseBranch::value(Cplx w) const {
  Cplx pulled = (w - step_.shift) / step_.gain;
  Cplx seed = seed_for(pulled);
  // Attainable residual scales with |f0'| * ulp(z) near far-out poles.
  double dscale = 1.0;
  try {
    dscale = std::abs(fam_.derivative(seed));
  } catch (const Error&) {
  }
  double tol = std::max(invert_tol(pulled),
                        64.0 * 2.3e-16 * dscale * (1.0 + std::abs(pole_.location)));
  return newton_invert(
      pulled, seed, [this](Cplx z) { return fam_.value(z); },
      [this](Cplx z) { return fam_.derivative(z); }, tol, 80);
}

Cplx InverseBranch::derivative(Cplx w) const {
  Cplx z = value(w);
  return 1.0 / (step_.gain * fam_.derivative(z));
}

std::shared_ptr<const InverseBranch> local_branch(const Family& fam,
                                                  const PerturbationStep& step,
                                                  const PoleRecord& pole, int j,
                                                  const Disk& domain) {
  return std::make_shared<const InverseBranch>(fam, pole, j, domain, step);
}

// --- dimension formulas ------------------------------------------------------------

double theoretical_dimension(double rho, double beta, int M) {
  if (!(rho > 0.0)) throw DomainError("theoretical_dimension: rho must be positive");
  if (beta < 0.0) throw DomainError("theoretical_dimension: beta must be nonnegative");
  if (M < 1) throw DomainError("theoretical_dimension: M must be at least 1");
  return rho * M / (beta + M + 1.0);
}

double mayer_dimension(double rho, double alpha, int q) {
  if (q < 1) throw DomainError("mayer_dimension: q must be at least 1");
  double denom = alpha + 1.0 + 1.0 / q;
  if (!(denom > 0.0)) throw DomainError("mayer_dimension: alpha + 1 + 1/q must be positive");
  return rho / denom;
}

}  // namespace bowenlab
