#pragma once

#include "sal/adversary.hpp"
#include "sal/dataset.hpp"

namespace sal {

// Empirical robustness radius: mean transport cost the adversary actually
// spends against this model at penalty lambda. The model is then certified
// against every distribution within this radius of the empirical one.
inline double empirical_radius(const LinearModel& m, LossKind kind, const CovariateWeights& w,
                               double lambda, const std::vector<EnvDataset>& envs,
                               const AdversaryConfig& cfg) {
  Matrix X;
  Vector y;
  pool_envs(envs, X, y);
  AdversaryConfig run_cfg = cfg;
  run_cfg.lambda = lambda;
  const PerturbationTrace trace = perturb_batch(m, kind, X, y, w, run_cfg);
  double acc = 0.0;
  for (Index i = 0; i < X.rows(); ++i) {
    acc += cost_w(trace.x_tilde.row(i).transpose(), X.row(i).transpose(), w);
  }
  return acc / static_cast<double>(X.rows());
}

}  // namespace sal
