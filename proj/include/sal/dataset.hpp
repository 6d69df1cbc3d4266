#pragma once

#include <map>
#include <string>
#include <vector>

#include "sal/common.hpp"

namespace sal {

// Generator parameters and per-sample audit values attached to a dataset.
struct EnvMeta {
  std::map<std::string, double> params;
  std::vector<double> acceptance_probs;  // empty unless produced by rejection sampling
};

struct EnvDataset {
  Matrix X;            // n x d
  Vector y;            // n
  std::string env_id;
  EnvMeta meta;

  Index n() const { return X.rows(); }
  Index dim() const { return X.cols(); }
};

inline void validate_envs(const std::vector<EnvDataset>& envs, const std::string& where) {
  require(!envs.empty(), where + ": no environments given");
  const Index d = envs.front().dim();
  for (const auto& e : envs) {
    require(e.dim() == d, where + ": environments disagree on dimension");
    require(e.X.rows() == e.y.size(), where + ": X rows and y length differ in " + e.env_id);
    require(e.n() > 0, where + ": empty environment " + e.env_id);
    require(e.X.allFinite() && e.y.allFinite(), where + ": non-finite data in " + e.env_id);
  }
}

// Row-concatenates every environment, preserving order.
inline void pool_envs(const std::vector<EnvDataset>& envs, Matrix& X, Vector& y) {
  validate_envs(envs, "pool_envs");
  Index n = 0;
  for (const auto& e : envs) n += e.n();
  X.resize(n, envs.front().dim());
  y.resize(n);
  Index at = 0;
  for (const auto& e : envs) {
    X.middleRows(at, e.n()) = e.X;
    y.segment(at, e.n()) = e.y;
    at += e.n();
  }
}

}  // namespace sal
