#pragma once

#include <cmath>
#include <utility>

#include "sal/common.hpp"

namespace sal {

// Per-covariate transport weights. Feasible set: every entry >= 1 and the
// smallest entry equal to 1, so the cheapest direction always has unit cost.
class CovariateWeights {
 public:
  explicit CovariateWeights(Vector w) : w_(std::move(w)) { validate(); }

  static CovariateWeights ones(Index d) {
    require(d >= 1, "CovariateWeights: dimension must be positive");
    return CovariateWeights(Vector::Ones(d));
  }

  const Vector& vec() const { return w_; }
  Index dim() const { return w_.size(); }
  double operator[](Index i) const { return w_[i]; }

 private:
  void validate() const {
    require(w_.size() >= 1, "CovariateWeights: dimension must be positive");
    require(w_.allFinite(), "CovariateWeights: non-finite entry");
    require(w_.minCoeff() >= 1.0 - 1e-12, "CovariateWeights: entries must be >= 1");
    require(w_.minCoeff() <= 1.0 + 1e-12, "CovariateWeights: smallest entry must equal 1");
  }

  Vector w_;
};

// Squared weighted displacement: sum_i (w_i * (x1_i - x2_i))^2.
inline double cost_w(const Eigen::Ref<const Vector>& x1, const Eigen::Ref<const Vector>& x2,
                     const CovariateWeights& w) {
  require(x1.size() == x2.size() && x1.size() == w.dim(), "cost_w: dimension mismatch");
  return (w.vec().array() * (x1 - x2).array()).square().sum();
}

// d cost_w / d x1 = 2 w_i^2 (x1_i - x2_i).
inline Vector grad_cost_x1(const Eigen::Ref<const Vector>& x1, const Eigen::Ref<const Vector>& x2,
                           const CovariateWeights& w) {
  require(x1.size() == x2.size() && x1.size() == w.dim(), "grad_cost_x1: dimension mismatch");
  return 2.0 * (w.vec().array().square() * (x1 - x2).array()).matrix();
}

// Exact Euclidean projection onto the feasible set. Clamping to >= 1 is the
// unconstrained-optimal move; when no raw entry was <= 1 the min(w)=1 face is
// reached by pinning the coordinate whose raw value is closest to 1 (lowest
// index on ties).
inline CovariateWeights project_weights(const Eigen::Ref<const Vector>& raw) {
  require(raw.size() >= 1, "project_weights: dimension must be positive");
  require(raw.allFinite(), "project_weights: non-finite entry");
  Vector w = raw.cwiseMax(1.0);
  if (w.minCoeff() > 1.0) {
    Index pin = 0;
    for (Index i = 1; i < raw.size(); ++i) {
      if (raw[i] < raw[pin]) pin = i;
    }
    w[pin] = 1.0;
  }
  return CovariateWeights(std::move(w));
}

}  // namespace sal
