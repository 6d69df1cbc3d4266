#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sal/adversary.hpp"
#include "sal/certificate.hpp"
#include "sal/cost.hpp"
#include "sal/dataset.hpp"
#include "sal/model.hpp"

namespace sal {

struct SalHyperParams {
  int outer_iters = 10;    // alternations between the theta phase and the w phase
  int theta_iters = 20;    // gradient steps on theta per outer iteration
  int w_iters = 1;         // weight steps per outer iteration (0 freezes w)
  int ascent_steps = 8;    // adversary budget per theta step
  double step_x = 0.05;
  double step_theta = 0.05;
  double step_w = 0.1;
  double lambda = 1.0;     // transport penalty
  double alpha = 1.0;      // weight of the cross-environment stability margin
  bool fit_intercept = false;
  std::uint64_t seed = 0;

  void validate() const {
    require(outer_iters >= 1, "SalHyperParams: outer_iters must be >= 1");
    require(theta_iters >= 0, "SalHyperParams: theta_iters must be >= 0");
    require(w_iters >= 0, "SalHyperParams: w_iters must be >= 0");
    require(ascent_steps >= 1, "SalHyperParams: ascent_steps must be >= 1");
    require(step_x > 0.0 && step_theta > 0.0 && step_w > 0.0,
            "SalHyperParams: step sizes must be > 0");
    require(lambda >= 0.0, "SalHyperParams: lambda must be >= 0");
    require(alpha >= 0.0, "SalHyperParams: alpha must be >= 0");
  }

  AdversaryConfig adversary() const { return {ascent_steps, step_x, lambda, 1e-7}; }
};

// First-order sensitivities accumulated over one outer iteration's theta
// phase. dtheta_dxtilde keeps one d x d block per pooled sample, the running
// sum of -step_theta/n * d(grad_theta mean loss)/d(x~_i) across theta steps;
// the full d x (n*d) Jacobian is never materialized.
struct JacobianTraces {
  Vector dR_dtheta;
  std::vector<Matrix> dtheta_dxtilde;
  Matrix dxtilde_dw;

  Index samples() const { return static_cast<Index>(dtheta_dxtilde.size()); }

  void reset(Index n, Index d) {
    dR_dtheta = Vector::Zero(d);
    dtheta_dxtilde.assign(static_cast<std::size_t>(n), Matrix::Zero(d, d));
    dxtilde_dw = Matrix::Zero(n, d);
  }
};

struct OuterRecord {
  double objective;                 // R at the end of the theta phase
  std::vector<double> env_losses;   // clean per-environment mean losses
  Vector weights;                   // w after this iteration's update
  double radius;                    // empirical robustness radius
};

struct SalModel {
  LinearModel model;
  CovariateWeights weights;
  std::vector<OuterRecord> history;
};

inline std::vector<double> env_mean_losses(const LinearModel& m, LossKind kind,
                                           const std::vector<EnvDataset>& envs) {
  validate_envs(envs, "env_mean_losses");
  std::vector<double> out;
  out.reserve(envs.size());
  for (const auto& e : envs) out.push_back(mean_loss(m, kind, e.X, e.y));
  return out;
}

// R(theta) = mean of clean per-environment losses plus alpha times the
// worst-case gap between two environments (max minus min; zero for a single
// environment).
inline double compute_R(const LinearModel& m, const std::vector<EnvDataset>& envs, double alpha,
                        LossKind kind) {
  const std::vector<double> losses = env_mean_losses(m, kind, envs);
  double sum = 0.0, lo = losses.front(), hi = losses.front();
  for (double v : losses) {
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return sum / static_cast<double>(losses.size()) + alpha * (hi - lo);
}

inline Vector dR_dtheta(const LinearModel& m, const std::vector<EnvDataset>& envs, double alpha,
                        LossKind kind) {
  validate_envs(envs, "dR_dtheta");
  const Index d = m.dim();
  Vector mean_term = Vector::Zero(d);
  std::size_t hi = 0, lo = 0;
  std::vector<double> losses(envs.size());
  std::vector<Vector> grads(envs.size());
  for (std::size_t e = 0; e < envs.size(); ++e) {
    losses[e] = mean_loss(m, kind, envs[e].X, envs[e].y);
    grads[e] = mean_grad_theta(m, kind, envs[e].X, envs[e].y);
    mean_term += grads[e];
    if (losses[e] > losses[hi]) hi = e;
    if (losses[e] < losses[lo]) lo = e;
  }
  mean_term /= static_cast<double>(envs.size());
  return mean_term + alpha * (grads[hi] - grads[lo]);
}

namespace detail {

// Mixed second derivative of the per-sample loss: d(grad_theta)/d(x~) =
// a * I + b * x~ theta^T with loss-specific scalars a, b.
inline void loss_curvature_scalars(LossKind kind, double score, double y, double& a, double& b) {
  switch (kind) {
    case LossKind::Absolute: {
      const double r = score - y;
      a = (r > 0.0) ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
      b = 0.0;
      return;
    }
    case LossKind::Squared:
      a = 2.0 * (score - y);
      b = 2.0;
      return;
    case LossKind::LogLoss: {
      const double p = sigmoid(score);
      a = p - y;
      b = p * (1.0 - p);
      return;
    }
  }
  throw std::logic_error("loss_curvature_scalars: unknown LossKind");
}

}  // namespace detail

// The theta phase of one outer iteration: theta_iters rounds of (re-perturb,
// one gradient step on the perturbed pool), accumulating both sensitivity
// traces along the way. dR_dtheta is evaluated at the returned theta on the
// clean environments.
inline std::pair<LinearModel, JacobianTraces> theta_inner_loop(
    LinearModel model, const CovariateWeights& w, const std::vector<EnvDataset>& envs,
    const SalHyperParams& hp, LossKind kind) {
  hp.validate();
  Matrix X;
  Vector y;
  pool_envs(envs, X, y);
  require(model.dim() == X.cols(), "theta_inner_loop: model dimension mismatch");
  require(w.dim() == X.cols(), "theta_inner_loop: weight dimension mismatch");

  const Index n = X.rows();
  const Index d = X.cols();
  JacobianTraces traces;
  traces.reset(n, d);
  const AdversaryConfig adv = hp.adversary();
  const double scale = -hp.step_theta / static_cast<double>(n);

  for (int j = 0; j < hp.theta_iters; ++j) {
    const PerturbationTrace trace = perturb_batch(model, kind, X, y, w, adv);
    traces.dxtilde_dw += trace.dxtilde_dw;

    Vector g = Vector::Zero(d);
    double g_b = 0.0;
    for (Index i = 0; i < n; ++i) {
      const Vector xt = trace.x_tilde.row(i).transpose();
      const double s = linear_score(model, xt);
      double a, b;
      detail::loss_curvature_scalars(kind, s, y[i], a, b);
      Matrix& block = traces.dtheta_dxtilde[static_cast<std::size_t>(i)];
      block.diagonal().array() += scale * a;
      if (b != 0.0) block.noalias() += (scale * b) * xt * model.theta.transpose();
      const double ds = detail::dloss_dscore(kind, s, y[i]);
      g += ds * xt;
      g_b += ds;
    }
    model.theta -= (hp.step_theta / static_cast<double>(n)) * g;
    if (hp.fit_intercept) {
      model.intercept = model.intercept.value_or(0.0) -
                        hp.step_theta * g_b / static_cast<double>(n);
    }
    if (!model.theta.allFinite()) {
      throw std::runtime_error("theta_inner_loop: theta diverged at step " + std::to_string(j));
    }
  }

  traces.dR_dtheta = dR_dtheta(model, envs, hp.alpha, kind);
  return {std::move(model), std::move(traces)};
}

// Chain rule through the recorded traces:
// dR/dw_j = sum_i [ (dtheta_dxtilde_i)^T dR/dtheta ]_j * dxtilde_dw_{ij}.
inline Vector grad_R_wrt_w(const JacobianTraces& traces, const std::vector<EnvDataset>& envs,
                           const LinearModel& m, double alpha, LossKind kind) {
  Index pooled = 0;
  for (const auto& e : envs) pooled += e.n();
  require(traces.samples() == pooled, "grad_R_wrt_w: traces and environments disagree on n");
  require(traces.dxtilde_dw.rows() == pooled, "grad_R_wrt_w: malformed traces");

  const Vector v = dR_dtheta(m, envs, alpha, kind);
  Vector out = Vector::Zero(m.dim());
  for (Index i = 0; i < pooled; ++i) {
    const Vector pushed = traces.dtheta_dxtilde[static_cast<std::size_t>(i)].transpose() * v;
    out += pushed.cwiseProduct(traces.dxtilde_dw.row(i).transpose());
  }
  return out;
}

// Frozen mid-training state: the weights and traces of one theta phase plus
// the theta that phase started from, so alternative weight candidates can be
// scored by replaying the phase.
struct SalSnapshot {
  LinearModel theta_start;
  LinearModel model;  // after the captured theta phase
  CovariateWeights weights = CovariateWeights::ones(1);
  JacobianTraces traces;
  std::vector<EnvDataset> envs;
  SalHyperParams hyper;
  LossKind loss = LossKind::Squared;
};

// Full alternating scheme: theta phase, then w_iters weight steps against the
// frozen traces, then projection back onto the feasible weight set.
inline SalModel train_sal(const std::vector<EnvDataset>& envs, const SalHyperParams& hp,
                          LossKind kind,
                          TaskKind task = TaskKind::Regression) {
  hp.validate();
  validate_envs(envs, "train_sal");
  if (kind == LossKind::LogLoss) task = TaskKind::BinaryClassification;
  const Index d = envs.front().dim();

  LinearModel model{Vector::Zero(d), task, std::nullopt};
  if (hp.fit_intercept) model.intercept = 0.0;
  CovariateWeights w = CovariateWeights::ones(d);
  std::vector<OuterRecord> history;
  history.reserve(static_cast<std::size_t>(hp.outer_iters));

  for (int t = 0; t < hp.outer_iters; ++t) {
    auto [next, traces] = theta_inner_loop(std::move(model), w, envs, hp, kind);
    model = std::move(next);

    const double R = compute_R(model, envs, hp.alpha, kind);
    if (hp.w_iters > 0) {
      const Vector g_w = grad_R_wrt_w(traces, envs, model, hp.alpha, kind);
      Vector wv = w.vec();
      for (int s = 0; s < hp.w_iters; ++s) wv -= hp.step_w * g_w;
      w = project_weights(wv);
    }

    OuterRecord rec;
    rec.objective = R;
    rec.env_losses = env_mean_losses(model, kind, envs);
    rec.weights = w.vec();
    rec.radius = empirical_radius(model, kind, w, hp.lambda, envs, hp.adversary());
    history.push_back(std::move(rec));
  }

  return {std::move(model), std::move(w), std::move(history)};
}

// Runs outer_before full outer iterations, then captures one more theta
// phase without applying its weight update.
inline SalSnapshot make_snapshot(const std::vector<EnvDataset>& envs, const SalHyperParams& hp,
                                 LossKind kind, int outer_before,
                                 TaskKind task = TaskKind::Regression) {
  hp.validate();
  validate_envs(envs, "make_snapshot");
  require(outer_before >= 0, "make_snapshot: outer_before must be >= 0");
  if (kind == LossKind::LogLoss) task = TaskKind::BinaryClassification;
  const Index d = envs.front().dim();

  LinearModel model{Vector::Zero(d), task, std::nullopt};
  if (hp.fit_intercept) model.intercept = 0.0;
  CovariateWeights w = CovariateWeights::ones(d);

  for (int t = 0; t < outer_before; ++t) {
    auto [next, traces] = theta_inner_loop(std::move(model), w, envs, hp, kind);
    model = std::move(next);
    if (hp.w_iters > 0) {
      const Vector g_w = grad_R_wrt_w(traces, envs, model, hp.alpha, kind);
      Vector wv = w.vec();
      for (int s = 0; s < hp.w_iters; ++s) wv -= hp.step_w * g_w;
      w = project_weights(wv);
    }
  }

  SalSnapshot snap;
  snap.theta_start = model;
  snap.weights = w;
  snap.envs = envs;
  snap.hyper = hp;
  snap.loss = kind;
  auto [after, traces] = theta_inner_loop(std::move(model), w, envs, hp, kind);
  snap.model = std::move(after);
  snap.traces = std::move(traces);
  return snap;
}

}  // namespace sal
