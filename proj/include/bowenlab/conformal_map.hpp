#ifndef BOWENLAB_CONFORMAL_MAP_HPP
#define BOWENLAB_CONFORMAL_MAP_HPP

#include <memory>
#include <vector>

#include "bowenlab/complex_core.hpp"

namespace bowenlab {

// A conformal contraction branch: value and derivative at a point of its
// domain. Implementations must be pure (safe to call concurrently).
class ConformalMap {
public:
  virtual ~ConformalMap() = default;
  virtual Cplx value(Cplx z) const = 0;
  virtual Cplx derivative(Cplx z) const = 0;
};

using MapPtr = std::shared_ptr<const ConformalMap>;

// z -> ratio * z + offset. Exact derivative, used by the engine-validation
// oracles and synthetic test systems.
class Similarity final : public ConformalMap {
public:
  Similarity(Cplx ratio, Cplx offset) : ratio_(ratio), offset_(offset) {}
  Cplx value(Cplx z) const override { return ratio_ * z + offset_; }
  Cplx derivative(Cplx) const override { return ratio_; }

private:
  Cplx ratio_;
  Cplx offset_;
};

// Composition outer(...(inner(z))). Factors are stored outermost first.
class CompositeMap final : public ConformalMap {
public:
  explicit CompositeMap(std::vector<MapPtr> factors) : factors_(std::move(factors)) {}

  Cplx value(Cplx z) const override {
    for (auto it = factors_.rbegin(); it != factors_.rend(); ++it) z = (*it)->value(z);
    return z;
  }

  Cplx derivative(Cplx z) const override {
    Cplx d{1.0, 0.0};
    for (auto it = factors_.rbegin(); it != factors_.rend(); ++it) {
      d *= (*it)->derivative(z);
      z = (*it)->value(z);
    }
    return d;
  }

  const std::vector<MapPtr>& factors() const { return factors_; }

private:
  std::vector<MapPtr> factors_;
};

}  // namespace bowenlab

#endif  // BOWENLAB_CONFORMAL_MAP_HPP
