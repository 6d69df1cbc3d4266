#pragma once

#include <cmath>
#include <string>

#include "sal/cost.hpp"
#include "sal/model.hpp"

namespace sal {

struct AdversaryConfig {
  int ascent_steps = 8;
  double step_size_x = 0.05;
  double lambda = 1.0;
  double early_stop_tol = 1e-7;

  void validate() const {
    require(ascent_steps >= 1, "AdversaryConfig: ascent_steps must be >= 1");
    require(step_size_x > 0.0, "AdversaryConfig: step_size_x must be > 0");
    require(lambda >= 0.0, "AdversaryConfig: lambda must be >= 0");
    require(early_stop_tol >= 0.0, "AdversaryConfig: early_stop_tol must be >= 0");
  }
};

struct PerturbationTrace {
  Matrix x_tilde;     // n x d, the perturbed inputs
  Matrix dxtilde_dw;  // n x d, diagonal sensitivity of x_tilde to the weights
};

namespace detail {

// at most this many step halvings before the ascent gives up on a sample
inline constexpr int kMaxHalvings = 48;

}  // namespace detail

// Per-sample gradient ascent on loss(theta; x~, y) - lambda * cost_w(x~, x0),
// preconditioned by the transport metric: the raw gradient is divided by w^2
// elementwise, which makes the quadratic cost term isotropic in the scaled
// displacement w (x~ - x0) and keeps heavily weighted coordinates from
// stalling the shared backtracking step. Each sample is independent. A step
// is only accepted if the penalized objective does not decrease; otherwise
// the sample's step size is halved. After every accepted step the trace row
// picks up -2 * eps * lambda * (x~ - x0) / w, the first-order sensitivity of
// the new iterate to the weights (at the stationary point the accumulated
// sensitivity tracks d x~*/dw = -2 (x~* - x0) / w).
inline PerturbationTrace perturb_batch(const LinearModel& m, LossKind kind, const Matrix& X,
                                       const Vector& y, const CovariateWeights& w,
                                       const AdversaryConfig& cfg) {
  cfg.validate();
  require(X.rows() == y.size(), "perturb_batch: X rows and y length differ");
  require(X.cols() == m.dim() && X.cols() == w.dim(), "perturb_batch: dimension mismatch");
  require(X.allFinite() && y.allFinite(), "perturb_batch: non-finite input data");

  const Index n = X.rows();
  const Index d = X.cols();
  PerturbationTrace trace;
  trace.x_tilde.resize(n, d);
  trace.dxtilde_dw = Matrix::Zero(n, d);
  const Vector inv_w = w.vec().cwiseInverse();
  const Vector inv_w2 = inv_w.cwiseProduct(inv_w);

  for (Index i = 0; i < n; ++i) {
    const Vector x0 = X.row(i).transpose();
    Vector xt = x0;
    double eps = cfg.step_size_x;
    double obj = loss(m, kind, xt, y[i]);  // cost term is zero at x0

    for (int k = 0; k < cfg.ascent_steps; ++k) {
      const Vector g =
          (grad_x(m, kind, xt, y[i]) - cfg.lambda * grad_cost_x1(xt, x0, w))
              .cwiseProduct(inv_w2);
      Vector cand;
      double cand_obj = 0.0;
      bool accepted = false;
      for (int h = 0; h <= detail::kMaxHalvings; ++h) {
        cand = xt + eps * g;
        if (cand.allFinite()) {
          cand_obj = loss(m, kind, cand, y[i]) - cfg.lambda * cost_w(cand, x0, w);
          if (std::isfinite(cand_obj) && cand_obj >= obj) {
            accepted = true;
            break;
          }
        }
        eps *= 0.5;
      }
      if (!accepted) break;

      const double step_norm = (eps * g).lpNorm<Eigen::Infinity>();
      xt = cand;
      obj = cand_obj;
      trace.dxtilde_dw.row(i) +=
          (-2.0 * eps * cfg.lambda) * (xt - x0).cwiseProduct(inv_w).transpose();
      if (step_norm < cfg.early_stop_tol) break;
    }

    if (!xt.allFinite() || !std::isfinite(obj)) {
      throw std::runtime_error("perturb_batch: non-finite state at sample " + std::to_string(i));
    }
    trace.x_tilde.row(i) = xt.transpose();
  }
  return trace;
}

// Mean penalized objective of the perturbed batch:
// (1/n) sum_i [ loss(theta; x~_i, y_i) - lambda * cost_w(x~_i, x_i) ].
inline double surrogate_loss(const LinearModel& m, LossKind kind, const PerturbationTrace& trace,
                             const Matrix& X, const Vector& y, const CovariateWeights& w,
                             double lambda) {
  require(trace.x_tilde.rows() == X.rows() && trace.x_tilde.cols() == X.cols(),
          "surrogate_loss: trace and batch shapes differ");
  require(X.rows() == y.size(), "surrogate_loss: X rows and y length differ");
  require(X.rows() > 0, "surrogate_loss: empty batch");
  double acc = 0.0;
  for (Index i = 0; i < X.rows(); ++i) {
    acc += loss(m, kind, trace.x_tilde.row(i).transpose(), y[i]) -
           lambda * cost_w(trace.x_tilde.row(i).transpose(), X.row(i).transpose(), w);
  }
  return acc / static_cast<double>(X.rows());
}

}  // namespace sal
