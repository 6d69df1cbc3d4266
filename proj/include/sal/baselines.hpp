#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "sal/dataset.hpp"
#include "sal/model.hpp"
#include "sal/sal_trainer.hpp"

namespace sal {

struct GdOptions {
  int max_iters = 5000;
  double step = 0.0;        // <= 0 chooses a curvature-based step automatically
  double grad_tol = 1e-10;  // stop once the update direction's inf-norm falls below
  bool fit_intercept = false;

  void validate() const {
    require(max_iters >= 1, "GdOptions: max_iters must be >= 1");
    require(grad_tol >= 0.0, "GdOptions: grad_tol must be >= 0");
  }
};

namespace detail {

// Largest eigenvalue of X^T X / n (plus the intercept column when fitted);
// the usual smoothness constant for least squares up to the loss factor.
inline double design_curvature(const Matrix& X, bool fit_intercept) {
  const Index n = X.rows();
  const Index d = X.cols();
  Matrix gram(d + (fit_intercept ? 1 : 0), d + (fit_intercept ? 1 : 0));
  gram.topLeftCorner(d, d) = X.transpose() * X / static_cast<double>(n);
  if (fit_intercept) {
    const Vector colmean = X.colwise().mean().transpose();
    gram.topRightCorner(d, 1) = colmean;
    gram.bottomLeftCorner(1, d) = colmean.transpose();
    gram(d, d) = 1.0;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  return std::max(es.eigenvalues().maxCoeff(), 1e-12);
}

inline double auto_step(LossKind kind, const Matrix& X, bool fit_intercept) {
  const double curv = design_curvature(X, fit_intercept);
  switch (kind) {
    case LossKind::Squared:
      return 1.0 / (2.0 * curv);
    case LossKind::LogLoss:
      return 1.0 / (0.25 * curv);
    case LossKind::Absolute:
      // no global smoothness constant; reuse the least-squares scale
      return 1.0 / (2.0 * curv);
  }
  throw std::logic_error("auto_step: unknown LossKind");
}

inline TaskKind task_for(LossKind kind) {
  return kind == LossKind::LogLoss ? TaskKind::BinaryClassification : TaskKind::Regression;
}

}  // namespace detail

// Plain gradient descent on the pooled mean loss.
inline LinearModel train_erm(const std::vector<EnvDataset>& envs, LossKind kind,
                             const GdOptions& opts = {}) {
  opts.validate();
  Matrix X;
  Vector y;
  pool_envs(envs, X, y);
  LinearModel m{Vector::Zero(X.cols()), detail::task_for(kind), std::nullopt};
  if (opts.fit_intercept) m.intercept = 0.0;
  const double step = opts.step > 0.0 ? opts.step : detail::auto_step(kind, X, opts.fit_intercept);

  for (int it = 0; it < opts.max_iters; ++it) {
    const Vector g = mean_grad_theta(m, kind, X, y);
    const double gb = opts.fit_intercept ? mean_dloss_dscore(m, kind, X, y) : 0.0;
    if (std::max(g.lpNorm<Eigen::Infinity>(), std::abs(gb)) < opts.grad_tol) break;
    m.theta -= step * g;
    if (opts.fit_intercept) m.intercept = *m.intercept - step * gb;
    if (!m.theta.allFinite()) {
      throw std::runtime_error("train_erm: diverged at iteration " + std::to_string(it));
    }
  }
  return m;
}

namespace detail {

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// Monotone descent loop shared by the penalized trainers: a step is accepted
// only if the full objective does not increase, otherwise the step is halved.
template <typename ObjFn, typename StepFn>
LinearModel descend(LinearModel m, double step, int max_iters, double grad_tol, ObjFn&& objective,
                    StepFn&& propose, const char* who) {
  double obj = objective(m);
  for (int it = 0; it < max_iters; ++it) {
    bool accepted = false;
    LinearModel cand;
    for (int h = 0; h <= 60; ++h) {
      cand = propose(m, step);
      const double cand_obj = objective(cand);
      if (std::isfinite(cand_obj) && cand_obj <= obj + 1e-15 * std::abs(obj)) {
        accepted = true;
        obj = cand_obj;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double moved = (cand.theta - m.theta).lpNorm<Eigen::Infinity>();
    const double moved_b = std::abs(cand.intercept.value_or(0.0) - m.intercept.value_or(0.0));
    m = std::move(cand);
    if (std::max(moved, moved_b) < grad_tol * step) break;
  }
  if (!m.theta.allFinite()) throw std::runtime_error(std::string(who) + ": diverged");
  return m;
}

}  // namespace detail

// Proximal gradient on mean loss + reg * ||theta||_1 (intercept unpenalized).
inline LinearModel train_lasso(const std::vector<EnvDataset>& envs, LossKind kind, double reg,
                               const GdOptions& opts = {}) {
  opts.validate();
  require(reg >= 0.0, "train_lasso: reg must be >= 0");
  Matrix X;
  Vector y;
  pool_envs(envs, X, y);
  LinearModel m{Vector::Zero(X.cols()), detail::task_for(kind), std::nullopt};
  if (opts.fit_intercept) m.intercept = 0.0;
  const double step0 = opts.step > 0.0 ? opts.step : detail::auto_step(kind, X, opts.fit_intercept);

  auto objective = [&](const LinearModel& c) {
    return mean_loss(c, kind, X, y) + reg * c.theta.lpNorm<1>();
  };
  auto propose = [&](const LinearModel& c, double step) {
    LinearModel next = c;
    const Vector g = mean_grad_theta(c, kind, X, y);
    for (Index j = 0; j < next.theta.size(); ++j) {
      next.theta[j] = detail::soft_threshold(c.theta[j] - step * g[j], step * reg);
    }
    if (opts.fit_intercept) {
      next.intercept = *c.intercept - step * mean_dloss_dscore(c, kind, X, y);
    }
    return next;
  };
  return detail::descend(std::move(m), step0, opts.max_iters, opts.grad_tol, objective, propose,
                         "train_lasso");
}

// Gradient descent on mean loss + reg * ||theta||_2^2 (intercept unpenalized).
inline LinearModel train_ridge(const std::vector<EnvDataset>& envs, LossKind kind, double reg,
                               const GdOptions& opts = {}) {
  opts.validate();
  require(reg >= 0.0, "train_ridge: reg must be >= 0");
  Matrix X;
  Vector y;
  pool_envs(envs, X, y);
  LinearModel m{Vector::Zero(X.cols()), detail::task_for(kind), std::nullopt};
  if (opts.fit_intercept) m.intercept = 0.0;
  const double step0 =
      opts.step > 0.0 ? opts.step
                      : 1.0 / (1.0 / detail::auto_step(kind, X, opts.fit_intercept) + 2.0 * reg);

  auto objective = [&](const LinearModel& c) {
    return mean_loss(c, kind, X, y) + reg * c.theta.squaredNorm();
  };
  auto propose = [&](const LinearModel& c, double step) {
    LinearModel next = c;
    next.theta = c.theta - step * (mean_grad_theta(c, kind, X, y) + 2.0 * reg * c.theta);
    if (opts.fit_intercept) {
      next.intercept = *c.intercept - step * mean_dloss_dscore(c, kind, X, y);
    }
    return next;
  };
  return detail::descend(std::move(m), step0, opts.max_iters, opts.grad_tol, objective, propose,
                         "train_ridge");
}

// The robustness baseline: the full adversarial scheme with frozen uniform
// weights. Shares every code path with train_sal.
inline SalModel train_wdrl(const std::vector<EnvDataset>& envs, const SalHyperParams& hp,
                           LossKind kind, TaskKind task = TaskKind::Regression) {
  SalHyperParams frozen = hp;
  frozen.w_iters = 0;
  return train_sal(envs, frozen, kind, task);
}

// Derivative of the environment's mean loss in a scalar multiplier on the
// score, at multiplier 1: mean of dloss/dscore * score.
inline double irm_penalty(const LinearModel& m, LossKind kind, const EnvDataset& env) {
  require(env.n() > 0, "irm_penalty: empty environment");
  double acc = 0.0;
  for (Index i = 0; i < env.n(); ++i) {
    detail::check_loss_inputs(m, kind, env.y[i]);
    const double s = linear_score(m, env.X.row(i).transpose());
    acc += detail::dloss_dscore(kind, s, env.y[i]) * s;
  }
  return acc / static_cast<double>(env.n());
}

namespace detail {

// d irm_penalty / d theta (and intercept slot last when fitted)
inline Vector irm_penalty_grad(const LinearModel& m, LossKind kind, const EnvDataset& env,
                               double& grad_b) {
  Vector g = Vector::Zero(m.dim());
  grad_b = 0.0;
  for (Index i = 0; i < env.n(); ++i) {
    const Vector x = env.X.row(i).transpose();
    const double s = linear_score(m, x);
    double a = 0.0, ds = 0.0;
    switch (kind) {
      case LossKind::Squared:
        ds = 2.0 * (s - env.y[i]);
        a = ds + 2.0 * s;  // d/ds of (2(s-y)s)
        break;
      case LossKind::LogLoss: {
        const double p = sigmoid(s);
        ds = p - env.y[i];
        a = p * (1.0 - p) * s + ds;
        break;
      }
      case LossKind::Absolute: {
        const double r = s - env.y[i];
        ds = (r > 0.0) ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
        a = ds;
        break;
      }
    }
    g += a * x;
    grad_b += a;
  }
  g /= static_cast<double>(env.n());
  grad_b /= static_cast<double>(env.n());
  return g;
}

}  // namespace detail

// Invariant-penalty baseline: sum over environments of mean loss plus
// reg times the squared scalar-multiplier derivative of that loss.
inline LinearModel train_irm(const std::vector<EnvDataset>& envs, LossKind kind, double reg,
                             const GdOptions& opts = {}) {
  opts.validate();
  require(reg >= 0.0, "train_irm: reg must be >= 0");
  validate_envs(envs, "train_irm");
  Matrix X;
  Vector y;
  pool_envs(envs, X, y);
  LinearModel m{Vector::Zero(X.cols()), detail::task_for(kind), std::nullopt};
  if (opts.fit_intercept) m.intercept = 0.0;
  const double step0 =
      (opts.step > 0.0 ? opts.step : detail::auto_step(kind, X, opts.fit_intercept)) /
      static_cast<double>(envs.size());

  auto objective = [&](const LinearModel& c) {
    double obj = 0.0;
    for (const auto& e : envs) {
      const double pen = irm_penalty(c, kind, e);
      obj += mean_loss(c, kind, e.X, e.y) + reg * pen * pen;
    }
    return obj;
  };
  auto propose = [&](const LinearModel& c, double step) {
    Vector g = Vector::Zero(c.dim());
    double gb = 0.0;
    for (const auto& e : envs) {
      g += mean_grad_theta(c, kind, e.X, e.y);
      if (opts.fit_intercept) gb += mean_dloss_dscore(c, kind, e.X, e.y);
      const double pen = irm_penalty(c, kind, e);
      double pen_gb = 0.0;
      g += 2.0 * reg * pen * detail::irm_penalty_grad(c, kind, e, pen_gb);
      if (opts.fit_intercept) gb += 2.0 * reg * pen * pen_gb;
    }
    LinearModel next = c;
    next.theta = c.theta - step * g;
    if (opts.fit_intercept) next.intercept = *c.intercept - step * gb;
    return next;
  };
  return detail::descend(std::move(m), step0, opts.max_iters, opts.grad_tol, objective, propose,
                         "train_irm");
}

enum class ValidationMetric : int { MeanLoss, Accuracy };

struct GridSearchSpec {
  std::vector<double> grid;
  double validation_fraction = 0.2;
  ValidationMetric metric = ValidationMetric::MeanLoss;
  LossKind loss = LossKind::Squared;  // loss used by the MeanLoss metric
  std::uint64_t seed = 0;
};

struct GridSearchResult {
  double best_value = 0.0;
  LinearModel best_model;
  std::vector<std::pair<double, double>> scores;  // (candidate, validation metric)
};

namespace detail {

inline void split_validation(const std::vector<EnvDataset>& envs, double fraction,
                             std::uint64_t seed, std::vector<EnvDataset>& train,
                             Matrix& val_X, Vector& val_y) {
  validate_envs(envs, "grid_search");
  require(fraction > 0.0 && fraction < 1.0, "grid_search: validation_fraction must be in (0,1)");
  std::vector<Matrix> vx;
  std::vector<Vector> vy;
  Index val_total = 0;
  for (std::size_t e = 0; e < envs.size(); ++e) {
    const Index n = envs[e].n();
    const Index n_val = static_cast<Index>(std::llround(fraction * static_cast<double>(n)));
    require(n_val >= 1 && n_val < n,
            "grid_search: degenerate validation split in environment " + envs[e].env_id);
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    auto rng = make_rng(seed, "validation-split", e);
    std::shuffle(idx.begin(), idx.end(), rng);

    EnvDataset tr;
    tr.env_id = envs[e].env_id;
    tr.meta = envs[e].meta;
    tr.meta.acceptance_probs.clear();
    tr.X.resize(n - n_val, envs[e].dim());
    tr.y.resize(n - n_val);
    Matrix vxe(n_val, envs[e].dim());
    Vector vye(n_val);
    for (Index i = 0; i < n_val; ++i) {
      vxe.row(i) = envs[e].X.row(idx[static_cast<std::size_t>(i)]);
      vye[i] = envs[e].y[idx[static_cast<std::size_t>(i)]];
    }
    for (Index i = n_val; i < n; ++i) {
      tr.X.row(i - n_val) = envs[e].X.row(idx[static_cast<std::size_t>(i)]);
      tr.y[i - n_val] = envs[e].y[idx[static_cast<std::size_t>(i)]];
    }
    train.push_back(std::move(tr));
    vx.push_back(std::move(vxe));
    vy.push_back(std::move(vye));
    val_total += n_val;
  }
  val_X.resize(val_total, envs.front().dim());
  val_y.resize(val_total);
  Index at = 0;
  for (std::size_t e = 0; e < vx.size(); ++e) {
    val_X.middleRows(at, vx[e].rows()) = vx[e];
    val_y.segment(at, vy[e].size()) = vy[e];
    at += vx[e].rows();
  }
}

}  // namespace detail

// Picks the grid value whose trained model scores best on an i.i.d.
// validation split of the training environments. The winner is independent
// of the order candidates are listed in.
template <typename TrainFn>
GridSearchResult grid_search(TrainFn&& train_fn, const std::vector<EnvDataset>& envs,
                             const GridSearchSpec& spec) {
  require(!spec.grid.empty(), "grid_search: empty grid");
  std::vector<EnvDataset> train;
  Matrix val_X;
  Vector val_y;
  detail::split_validation(envs, spec.validation_fraction, spec.seed, train, val_X, val_y);

  std::vector<double> grid = spec.grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  GridSearchResult result;
  double best = std::numeric_limits<double>::infinity();
  for (double value : grid) {
    const LinearModel m = train_fn(train, value);
    double score = 0.0;
    if (spec.metric == ValidationMetric::MeanLoss) {
      score = mean_loss(m, spec.loss, val_X, val_y);
    } else {
      require(m.task == TaskKind::BinaryClassification,
              "grid_search: Accuracy metric needs a classification model");
      Index wrong = 0;
      for (Index i = 0; i < val_X.rows(); ++i) {
        const double p = predict(m, val_X.row(i).transpose());
        const double label = p >= 0.5 ? 1.0 : 0.0;
        if (label != val_y[i]) ++wrong;
      }
      score = static_cast<double>(wrong) / static_cast<double>(val_X.rows());
    }
    result.scores.emplace_back(value, score);
    if (score < best) {
      best = score;
      result.best_value = value;
      result.best_model = m;
    }
  }
  return result;
}

}  // namespace sal
