#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sal/dataset.hpp"

namespace sal {

// How to read the scale parameter of the scalar noise terms.
enum class NoiseScale : int { StdDev, Variance };

inline double noise_sd(double param, NoiseScale mode) {
  require(param >= 0.0, "noise_sd: negative noise scale");
  return mode == NoiseScale::StdDev ? param : std::sqrt(param);
}

namespace detail {

inline std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace detail

// Two-covariate example: a stable cause S and a descendant V of the target
// whose coupling alpha varies across environments.
//   S ~ N(0, 0.5),  Y = 5 S + S^2 + N(0, 0.1),  V = alpha Y + N(0, 1.0)
inline std::vector<EnvDataset> gen_toy(const std::vector<double>& alphas,
                                       const std::vector<Index>& counts, std::uint64_t seed,
                                       NoiseScale mode = NoiseScale::StdDev) {
  require(!alphas.empty(), "gen_toy: no environments requested");
  require(alphas.size() == counts.size(), "gen_toy: alphas and counts differ in length");
  std::vector<EnvDataset> envs;
  envs.reserve(alphas.size());
  const double sd_s = noise_sd(0.5, mode);
  const double sd_y = noise_sd(0.1, mode);
  const double sd_v = noise_sd(1.0, mode);
  for (std::size_t e = 0; e < alphas.size(); ++e) {
    require(counts[e] >= 1, "gen_toy: environment size must be >= 1");
    auto rng = make_rng(seed, "toy-env", e);
    std::normal_distribution<double> nd(0.0, 1.0);
    EnvDataset env;
    env.env_id = "alpha=" + detail::fmt_num(alphas[e]);
    env.X.resize(counts[e], 2);
    env.y.resize(counts[e]);
    for (Index i = 0; i < counts[e]; ++i) {
      const double s = sd_s * nd(rng);
      const double y = 5.0 * s + s * s + sd_y * nd(rng);
      const double v = alphas[e] * y + sd_v * nd(rng);
      env.X(i, 0) = s;
      env.X(i, 1) = v;
      env.y[i] = y;
    }
    env.meta.params = {{"alpha", alphas[e]}, {"n", static_cast<double>(counts[e])}};
    envs.push_back(std::move(env));
  }
  return envs;
}

// The training split used throughout the two-covariate experiments:
// 180 samples at alpha = 1 and 20 at alpha = -0.1.
inline std::vector<EnvDataset> gen_toy_training(std::uint64_t seed,
                                                NoiseScale mode = NoiseScale::StdDev) {
  return gen_toy({1.0, -0.1}, {180, 20}, seed, mode);
}

inline const std::vector<double>& toy_test_alphas() {
  static const std::vector<double> alphas{-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0};
  return alphas;
}

struct SelectionBiasConfig {
  Index n = 2000;          // training samples (both environments together)
  Index n_s = 5;           // stable covariates
  Index n_v = 5;           // unstable covariates
  Index n_b = 1;           // how many unstable covariates drive the selection
  double r = 2.0;          // selection strength of the majority environment
  double minority_r = -1.1;
  double kappa = 0.95;     // majority fraction
  double beta = 1.0;       // weight of the cubic misspecification term
  bool classification = false;
  Index test_n = 1000;     // per test environment
  std::vector<double> test_r = {-3.0, -2.0, -1.7, -1.5, -1.3, 1.3, 1.5, 1.7, 2.0, 3.0};
  NoiseScale mode = NoiseScale::StdDev;
  std::uint64_t seed = 0;

  void validate() const {
    require(n >= 2, "SelectionBiasConfig: n must be >= 2");
    require(n_s >= 3, "SelectionBiasConfig: n_s must be >= 3 (cubic term needs S1 S2 S3)");
    require(n_v >= 1, "SelectionBiasConfig: n_v must be >= 1");
    require(n_b >= 0 && n_b <= n_v, "SelectionBiasConfig: n_b must lie in [0, n_v]");
    require(std::abs(r) > 1.0, "SelectionBiasConfig: |r| must exceed 1");
    require(std::abs(minority_r) > 1.0, "SelectionBiasConfig: |minority_r| must exceed 1");
    for (double t : test_r) require(std::abs(t) > 1.0, "SelectionBiasConfig: |test r| must exceed 1");
    require(kappa > 0.0 && kappa < 1.0, "SelectionBiasConfig: kappa must be in (0,1)");
    require(test_n >= 1, "SelectionBiasConfig: test_n must be >= 1");
  }
};

struct SelectionBiasData {
  std::vector<EnvDataset> train;  // majority environment first
  std::vector<EnvDataset> test;
};

// Repeating coefficient pattern for the stable covariates.
inline Vector stable_coefficients(Index n_s) {
  static const double pattern[6] = {1.0 / 3.0, -2.0 / 3.0, 1.0, -1.0 / 3.0, 2.0 / 3.0, -1.0};
  Vector theta(n_s);
  for (Index i = 0; i < n_s; ++i) theta[i] = pattern[i % 6];
  return theta;
}

namespace detail {

// Rejection-samples one selection-biased environment. Acceptance probability
// of a candidate point: prod over the first n_b unstable covariates of
// |r| ^ (-5 |f(s) - sign(r) v|), with f the noise-free target.
inline EnvDataset gen_selection_env(const SelectionBiasConfig& cfg, double r, Index quota,
                                    const std::string& env_id, std::uint64_t env_seed) {
  auto rng = std::mt19937_64(env_seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Vector theta_s = stable_coefficients(cfg.n_s);
  const double sd_eps = noise_sd(0.3, cfg.mode);
  const double sign_r = r > 0.0 ? 1.0 : -1.0;
  const double abs_r = std::abs(r);

  EnvDataset env;
  env.env_id = env_id;
  env.X.resize(quota, cfg.n_s + cfg.n_v);
  env.y.resize(quota);
  env.meta.params = {{"r", r},
                     {"beta", cfg.beta},
                     {"n_s", static_cast<double>(cfg.n_s)},
                     {"n_v", static_cast<double>(cfg.n_v)},
                     {"n_b", static_cast<double>(cfg.n_b)},
                     {"classification", cfg.classification ? 1.0 : 0.0}};
  env.meta.acceptance_probs.reserve(static_cast<std::size_t>(quota));

  Index kept = 0;
  std::uint64_t proposals = 0;
  Vector z(cfg.n_s + 1), s(cfg.n_s), v(cfg.n_v);
  while (kept < quota) {
    ++proposals;
    for (Index i = 0; i < cfg.n_s + 1; ++i) z[i] = nd(rng);
    for (Index i = 0; i < cfg.n_s; ++i) s[i] = 0.8 * z[i] + 0.2 * z[i + 1];
    for (Index i = 0; i < cfg.n_v; ++i) v[i] = nd(rng);
    const double f = theta_s.dot(s) + cfg.beta * s[0] * s[1] * s[2];
    double p_hat = 1.0;
    for (Index i = 0; i < cfg.n_b; ++i) {
      p_hat *= std::pow(abs_r, -5.0 * std::abs(f - sign_r * v[i]));
    }
    const double mu = unif(rng);
    if (mu <= p_hat) {
      env.X.row(kept).head(cfg.n_s) = s.transpose();
      env.X.row(kept).tail(cfg.n_v) = v.transpose();
      const double noisy = f + sd_eps * nd(rng);
      env.y[kept] = cfg.classification ? (noisy >= 0.0 ? 1.0 : 0.0) : noisy;
      env.meta.acceptance_probs.push_back(p_hat);
      ++kept;
    }
    if (proposals >= 1000000 && static_cast<double>(kept) < 1e-6 * static_cast<double>(proposals)) {
      throw std::runtime_error("gen_selection_bias: acceptance rate below 1e-6 for r = " +
                               fmt_num(r));
    }
  }
  return env;
}

}  // namespace detail

// Training data is an exact kappa mixture of a majority environment at the
// configured r and a minority environment at minority_r; tests sweep r.
inline SelectionBiasData gen_selection_bias(const SelectionBiasConfig& cfg) {
  cfg.validate();
  SelectionBiasData data;
  const Index n_major = static_cast<Index>(
      std::ceil(cfg.kappa * static_cast<double>(cfg.n) - 1e-9));
  const Index n_minor = cfg.n - n_major;
  require(n_major >= 1 && n_minor >= 1,
          "gen_selection_bias: kappa leaves an empty training environment");

  data.train.push_back(detail::gen_selection_env(cfg, cfg.r, n_major,
                                                 "train_r=" + detail::fmt_num(cfg.r),
                                                 derive_seed(cfg.seed, "selection-train", 0)));
  data.train.push_back(detail::gen_selection_env(
      cfg, cfg.minority_r, n_minor, "train_r=" + detail::fmt_num(cfg.minority_r),
      derive_seed(cfg.seed, "selection-train", 1)));
  for (std::size_t i = 0; i < cfg.test_r.size(); ++i) {
    data.test.push_back(detail::gen_selection_env(
        cfg, cfg.test_r[i], cfg.test_n, "test_r=" + detail::fmt_num(cfg.test_r[i]),
        derive_seed(cfg.seed, "selection-test", i)));
  }
  return data;
}

struct AntiCausalConfig {
  Index n = 1000;  // per environment
  Index n_s = 5;
  Index n_v = 5;
  double beta = 0.1;
  int train_envs = 3;
  std::vector<Vector> means;    // per-component means (dim n_s)
  std::vector<double> sigmas;   // per-component noise sd on the unstable block
  std::vector<Vector> mixture;  // per-environment simplex over components; empty = one-hot
  NoiseScale mode = NoiseScale::StdDev;
  std::uint64_t seed = 0;

  // Component means [0,0,0,±1,±1] with unstable noise 0.2/0.5/1.0 on the
  // training side and 3..15 on the test side, one component per environment.
  static AntiCausalConfig defaults() {
    AntiCausalConfig cfg;
    cfg.means.assign(10, Vector::Zero(5));
    cfg.means[0] << 0, 0, 0, 1, 1;
    cfg.means[1] << 0, 0, 0, 1, -1;
    cfg.means[2] << 0, 0, 0, -1, 1;
    for (int e = 3; e < 10; ++e) cfg.means[e] << 0, 0, 0, -1, -1;
    cfg.sigmas = {0.2, 0.5, 1.0, 3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0};
    return cfg;
  }

  std::size_t env_count() const { return mixture.empty() ? means.size() : mixture.size(); }

  void validate() const {
    require(n >= 1, "AntiCausalConfig: n must be >= 1");
    require(n_s >= 3, "AntiCausalConfig: n_s must be >= 3 (cubic term needs S1 S2 S3)");
    require(n_v >= 1, "AntiCausalConfig: n_v must be >= 1");
    require(!means.empty() && means.size() == sigmas.size(),
            "AntiCausalConfig: means and sigmas must list every component");
    require(train_envs >= 1 && train_envs < static_cast<int>(env_count()),
            "AntiCausalConfig: train_envs must leave at least one test environment");
    for (const auto& mu : means) {
      require(mu.size() == n_s, "AntiCausalConfig: mean dimension differs from n_s");
    }
    for (double s : sigmas) require(s >= 0.0, "AntiCausalConfig: negative sigma");
    for (const auto& z : mixture) {
      require(z.size() == static_cast<Index>(means.size()),
              "AntiCausalConfig: mixture weights must cover every component");
      require(z.minCoeff() >= 0.0 && std::abs(z.sum() - 1.0) < 1e-9,
              "AntiCausalConfig: mixture weights must form a simplex vector");
    }
  }
};

struct AntiCausalData {
  std::vector<EnvDataset> train;
  std::vector<EnvDataset> test;
  Vector theta_s;  // the run's stable coefficients
  Vector theta_v;  // the run's anti-causal couplings
};

// The target causes the unstable block: Y = theta_s . S + beta S1 S2 S3 + eps,
// V = theta_v Y + noise whose scale grows across environments.
inline AntiCausalData gen_anticausal(const AntiCausalConfig& cfg) {
  cfg.validate();
  AntiCausalData data;

  auto coef_rng = make_rng(cfg.seed, "anticausal-coef");
  std::normal_distribution<double> nd(0.0, 1.0);
  data.theta_s.resize(cfg.n_s);
  for (Index i = 0; i < cfg.n_s; ++i) data.theta_s[i] = 1.0 + nd(coef_rng);
  data.theta_v.resize(cfg.n_v);
  const double sd_tv = noise_sd(0.1, cfg.mode);
  for (Index i = 0; i < cfg.n_v; ++i) data.theta_v[i] = sd_tv * nd(coef_rng);
  const double sd_eps = noise_sd(0.3, cfg.mode);

  for (std::size_t e = 0; e < cfg.env_count(); ++e) {
    auto rng = make_rng(cfg.seed, "anticausal-env", e);
    std::normal_distribution<double> nde(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    EnvDataset env;
    env.env_id = "e" + std::to_string(e + 1);
    env.X.resize(cfg.n, cfg.n_s + cfg.n_v);
    env.y.resize(cfg.n);
    for (Index i = 0; i < cfg.n; ++i) {
      std::size_t k = e;
      if (!cfg.mixture.empty()) {
        double u = unif(rng), acc = 0.0;
        for (k = 0; k + 1 < cfg.means.size(); ++k) {
          acc += cfg.mixture[e][static_cast<Index>(k)];
          if (u <= acc) break;
        }
      }
      Vector s = cfg.means[k];
      for (Index j = 0; j < cfg.n_s; ++j) s[j] += nde(rng);
      const double y = data.theta_s.dot(s) + cfg.beta * s[0] * s[1] * s[2] + sd_eps * nde(rng);
      env.X.row(i).head(cfg.n_s) = s.transpose();
      for (Index j = 0; j < cfg.n_v; ++j) {
        env.X(i, cfg.n_s + j) = data.theta_v[j] * y + cfg.sigmas[k] * nde(rng);
      }
      env.y[i] = y;
    }
    env.meta.params = {{"beta", cfg.beta},
                       {"n_s", static_cast<double>(cfg.n_s)},
                       {"n_v", static_cast<double>(cfg.n_v)}};
    if (cfg.mixture.empty()) env.meta.params["sigma"] = cfg.sigmas[e];
    if (static_cast<int>(e) < cfg.train_envs) {
      data.train.push_back(std::move(env));
    } else {
      data.test.push_back(std::move(env));
    }
  }
  return data;
}

}  // namespace sal
