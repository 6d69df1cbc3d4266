#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sal/dataset.hpp"
#include "sal/model.hpp"
#include "sal/sal_trainer.hpp"

namespace sal {

enum class EnvMetric : int { Rmse, Mae, ErrorRate };

inline EnvMetric default_metric(TaskKind task) {
  return task == TaskKind::Regression ? EnvMetric::Rmse : EnvMetric::ErrorRate;
}

inline std::pair<double, double> mean_std_error(const std::vector<double>& env_losses) {
  require(env_losses.size() >= 2, "mean_std_error: needs at least two environments");
  double mean = 0.0;
  for (double v : env_losses) mean += v;
  mean /= static_cast<double>(env_losses.size());
  double ss = 0.0;
  for (double v : env_losses) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(env_losses.size() - 1))};
}

inline double env_loss(const LinearModel& m, const EnvDataset& env, EnvMetric metric) {
  require(env.n() > 0, "env_loss: empty environment");
  require(env.dim() == m.dim(), "env_loss: dimension mismatch");
  switch (metric) {
    case EnvMetric::Rmse: {
      double ss = 0.0;
      for (Index i = 0; i < env.n(); ++i) {
        const double r = linear_score(m, env.X.row(i).transpose()) - env.y[i];
        ss += r * r;
      }
      return std::sqrt(ss / static_cast<double>(env.n()));
    }
    case EnvMetric::Mae: {
      double acc = 0.0;
      for (Index i = 0; i < env.n(); ++i) {
        acc += std::abs(linear_score(m, env.X.row(i).transpose()) - env.y[i]);
      }
      return acc / static_cast<double>(env.n());
    }
    case EnvMetric::ErrorRate: {
      require(m.task == TaskKind::BinaryClassification,
              "env_loss: ErrorRate needs a classification model");
      Index wrong = 0;
      for (Index i = 0; i < env.n(); ++i) {
        const double label = predict(m, env.X.row(i).transpose()) >= 0.5 ? 1.0 : 0.0;
        if (label != env.y[i]) ++wrong;
      }
      return static_cast<double>(wrong) / static_cast<double>(env.n());
    }
  }
  throw std::logic_error("env_loss: unknown metric");
}

// Mean over samples of max(p, 1-p): how sure the classifier claims to be.
inline double confidence(const LinearModel& m, const EnvDataset& env) {
  require(m.task == TaskKind::BinaryClassification, "confidence: needs a classification model");
  require(env.n() > 0, "confidence: empty environment");
  double acc = 0.0;
  for (Index i = 0; i < env.n(); ++i) {
    const double p = predict(m, env.X.row(i).transpose());
    acc += std::max(p, 1.0 - p);
  }
  return acc / static_cast<double>(env.n());
}

struct MetricsReport {
  std::vector<std::string> env_ids;
  std::vector<double> env_losses;
  double mean_error = 0.0;
  double std_error = 0.0;
  std::optional<double> mean_accuracy;    // classification only
  std::optional<double> mean_confidence;  // classification only
};

inline MetricsReport evaluate(const LinearModel& m, const std::vector<EnvDataset>& envs,
                              EnvMetric metric) {
  validate_envs(envs, "evaluate");
  MetricsReport rep;
  for (const auto& e : envs) {
    rep.env_ids.push_back(e.env_id);
    rep.env_losses.push_back(env_loss(m, e, metric));
  }
  if (envs.size() >= 2) {
    std::tie(rep.mean_error, rep.std_error) = mean_std_error(rep.env_losses);
  } else {
    rep.mean_error = rep.env_losses.front();
    rep.std_error = 0.0;
  }
  if (m.task == TaskKind::BinaryClassification) {
    double acc = 0.0, conf = 0.0;
    for (const auto& e : envs) {
      acc += 1.0 - env_loss(m, e, EnvMetric::ErrorRate);
      conf += confidence(m, e);
    }
    rep.mean_accuracy = acc / static_cast<double>(envs.size());
    rep.mean_confidence = conf / static_cast<double>(envs.size());
  }
  return rep;
}

// Scores the approximate weight gradient against random directions: take one
// projected step along the negative gradient, replay the captured theta
// phase, and measure the drop in R; then do the same for n random directions
// of the same pre-projection step norm. Returns the fraction of random
// directions whose drop is smaller, counting exact ties as half a win, so a
// state where every direction is equivalent scores 0.5 rather than 0.
inline double gradient_direction_test(const SalSnapshot& snap, int n_directions,
                                      std::uint64_t seed) {
  require(n_directions >= 1, "gradient_direction_test: n_directions must be >= 1");
  const Vector g = grad_R_wrt_w(snap.traces, snap.envs, snap.model, snap.hyper.alpha, snap.loss);
  const double R0 = compute_R(snap.model, snap.envs, snap.hyper.alpha, snap.loss);

  auto refit_drop = [&](const Vector& raw_w) {
    const CovariateWeights w = project_weights(raw_w);
    auto [refit, traces] = theta_inner_loop(snap.theta_start, w, snap.envs, snap.hyper, snap.loss);
    (void)traces;
    return R0 - compute_R(refit, snap.envs, snap.hyper.alpha, snap.loss);
  };

  const Vector ref_step = -snap.hyper.step_w * g;
  const double drop_ref = refit_drop(snap.weights.vec() + ref_step);
  // a zero gradient leaves the reference in place; random candidates still
  // move, by the nominal step size
  double norm = ref_step.norm();
  if (norm == 0.0) norm = snap.hyper.step_w;

  double beaten = 0.0;
  const Index d = snap.weights.dim();
  for (int k = 0; k < n_directions; ++k) {
    auto rng = make_rng(seed, "direction", static_cast<std::uint64_t>(k));
    std::normal_distribution<double> nd(0.0, 1.0);
    Vector u(d);
    double un = 0.0;
    do {
      for (Index i = 0; i < d; ++i) u[i] = nd(rng);
      un = u.norm();
    } while (un < 1e-12);
    u *= norm / un;
    const double drop = refit_drop(snap.weights.vec() + u);
    if (drop < drop_ref) {
      beaten += 1.0;
    } else if (drop == drop_ref) {
      beaten += 0.5;
    }
  }
  return beaten / static_cast<double>(n_directions);
}

}  // namespace sal
