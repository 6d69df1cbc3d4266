#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "sal/common.hpp"

namespace sal {

enum class TaskKind : int { Regression, BinaryClassification };
enum class LossKind : int { Absolute, Squared, LogLoss };

// probabilities are clamped away from {0,1} so log-loss stays finite
inline constexpr double kProbFloor = 1e-12;

struct LinearModel {
  Vector theta;
  TaskKind task = TaskKind::Regression;
  std::optional<double> intercept;

  Index dim() const { return theta.size(); }
};

inline double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

inline double clamp_prob(double p) {
  return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

inline double linear_score(const LinearModel& m, const Eigen::Ref<const Vector>& x) {
  require(m.theta.size() == x.size(), "linear_score: dimension mismatch between theta and x");
  double s = m.theta.dot(x);
  if (m.intercept) s += *m.intercept;
  return s;
}

// Regression: the linear score. Classification: P(y=1|x), strictly inside (0,1).
inline double predict(const LinearModel& m, const Eigen::Ref<const Vector>& x) {
  const double s = linear_score(m, x);
  if (m.task == TaskKind::Regression) return s;
  return clamp_prob(sigmoid(s));
}

namespace detail {

inline void check_loss_inputs(const LinearModel& m, LossKind kind, double y) {
  if (kind == LossKind::LogLoss) {
    require(m.task == TaskKind::BinaryClassification,
            "loss: LogLoss requires a BinaryClassification model");
    require(y == 0.0 || y == 1.0, "loss: LogLoss labels must be exactly 0 or 1");
  }
}

inline double loss_from_score(LossKind kind, double s, double y) {
  switch (kind) {
    case LossKind::Absolute:
      return std::abs(s - y);
    case LossKind::Squared: {
      const double r = s - y;
      return r * r;
    }
    case LossKind::LogLoss: {
      const double p = clamp_prob(sigmoid(s));
      return -y * std::log(p) - (1.0 - y) * std::log(1.0 - p);
    }
  }
  throw std::logic_error("loss_from_score: unknown LossKind");
}

// d loss / d score; the Absolute kink uses the zero subgradient
inline double dloss_dscore(LossKind kind, double s, double y) {
  switch (kind) {
    case LossKind::Absolute: {
      const double r = s - y;
      if (r > 0.0) return 1.0;
      if (r < 0.0) return -1.0;
      return 0.0;
    }
    case LossKind::Squared:
      return 2.0 * (s - y);
    case LossKind::LogLoss:
      return sigmoid(s) - y;
  }
  throw std::logic_error("dloss_dscore: unknown LossKind");
}

}  // namespace detail

inline double loss(const LinearModel& m, LossKind kind, const Eigen::Ref<const Vector>& x,
                   double y) {
  detail::check_loss_inputs(m, kind, y);
  return detail::loss_from_score(kind, linear_score(m, x), y);
}

inline Vector grad_theta(const LinearModel& m, LossKind kind, const Eigen::Ref<const Vector>& x,
                         double y) {
  detail::check_loss_inputs(m, kind, y);
  return detail::dloss_dscore(kind, linear_score(m, x), y) * x;
}

inline Vector grad_x(const LinearModel& m, LossKind kind, const Eigen::Ref<const Vector>& x,
                     double y) {
  detail::check_loss_inputs(m, kind, y);
  return detail::dloss_dscore(kind, linear_score(m, x), y) * m.theta;
}

inline double mean_loss(const LinearModel& m, LossKind kind, const Matrix& X, const Vector& y) {
  require(X.rows() == y.size(), "mean_loss: X rows and y length differ");
  require(X.rows() > 0, "mean_loss: empty batch");
  double acc = 0.0;
  for (Index i = 0; i < X.rows(); ++i) acc += loss(m, kind, X.row(i).transpose(), y[i]);
  return acc / static_cast<double>(X.rows());
}

inline Vector mean_grad_theta(const LinearModel& m, LossKind kind, const Matrix& X,
                              const Vector& y) {
  require(X.rows() == y.size(), "mean_grad_theta: X rows and y length differ");
  require(X.rows() > 0, "mean_grad_theta: empty batch");
  Vector g = Vector::Zero(m.dim());
  for (Index i = 0; i < X.rows(); ++i) g += grad_theta(m, kind, X.row(i).transpose(), y[i]);
  return g / static_cast<double>(X.rows());
}

// mean d loss / d score over a batch; drives intercept updates
inline double mean_dloss_dscore(const LinearModel& m, LossKind kind, const Matrix& X,
                                const Vector& y) {
  require(X.rows() == y.size(), "mean_dloss_dscore: X rows and y length differ");
  require(X.rows() > 0, "mean_dloss_dscore: empty batch");
  double acc = 0.0;
  for (Index i = 0; i < X.rows(); ++i) {
    detail::check_loss_inputs(m, kind, y[i]);
    acc += detail::dloss_dscore(kind, linear_score(m, X.row(i).transpose()), y[i]);
  }
  return acc / static_cast<double>(X.rows());
}

}  // namespace sal
