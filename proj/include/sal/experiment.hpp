#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sal/baselines.hpp"
#include "sal/dataio.hpp"
#include "sal/datagen.hpp"
#include "sal/evalx.hpp"
#include "sal/sal_trainer.hpp"

namespace sal {

// ---------------------------------------------------------------------------
// flat key = value configuration files
// ---------------------------------------------------------------------------

class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig from_string(const std::string& text, const std::string& origin = "<string>") {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string t = detail::trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      require(eq != std::string::npos,
              origin + ": line " + std::to_string(line_no) + " is not key = value");
      const std::string key = detail::trim(t.substr(0, eq));
      require(!key.empty(), origin + ": empty key on line " + std::to_string(line_no));
      cfg.kv_[key] = detail::trim(t.substr(eq + 1));
    }
    return cfg;
  }

  static KvConfig from_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str(), path);
  }

  bool has(const std::string& key) const { return kv_.count(key) == 1; }
  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

  std::string get_str(const std::string& key, const std::string& fallback) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  double get_num(const std::string& key, double fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    double v = 0.0;
    require(detail::parse_double(it->second, v), "config: " + key + " is not a number");
    return v;
  }

  int get_int(const std::string& key, int fallback) const {
    const double v = get_num(key, static_cast<double>(fallback));
    require(v == static_cast<double>(static_cast<long long>(v)),
            "config: " + key + " is not an integer");
    return static_cast<int>(v);
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      return std::stoull(it->second);
    } catch (const std::exception&) {
      throw std::invalid_argument("config: " + key + " is not an unsigned integer");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::invalid_argument("config: " + key + " is not a boolean");
  }

  std::vector<double> get_num_list(const std::string& key, std::vector<double> fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<double> out;
    std::istringstream in(it->second);
    std::string item;
    while (std::getline(in, item, ',')) {
      double v = 0.0;
      require(detail::parse_double(item, v), "config: " + key + " has a non-numeric entry");
      out.push_back(v);
    }
    require(!out.empty(), "config: " + key + " is an empty list");
    return out;
  }

  std::vector<std::string> get_str_list(const std::string& key,
                                        std::vector<std::string> fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<std::string> out;
    std::istringstream in(it->second);
    std::string item;
    while (std::getline(in, item, ',')) {
      const std::string t = detail::trim(item);
      if (!t.empty()) out.push_back(t);
    }
    return out;
  }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : kv_) out.push_back(k);
    return out;
  }

  std::string serialize() const {
    std::ostringstream out;
    for (const auto& [k, v] : kv_) out << k << " = " << v << "\n";
    return out.str();
  }

 private:
  std::map<std::string, std::string> kv_;
};

// ---------------------------------------------------------------------------
// methods and experiment configuration
// ---------------------------------------------------------------------------

enum class Method : int { Sal, Wdrl, Erm, Irm, Lasso, Ridge };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::Sal: return "sal";
    case Method::Wdrl: return "wdrl";
    case Method::Erm: return "erm";
    case Method::Irm: return "irm";
    case Method::Lasso: return "lasso";
    case Method::Ridge: return "ridge";
  }
  throw std::logic_error("method_name: unknown method");
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::Sal, Method::Wdrl, Method::Erm, Method::Irm, Method::Lasso,
                   Method::Ridge}) {
    if (method_name(m) == s) return m;
  }
  throw std::invalid_argument("unknown method: " + s);
}

inline const std::vector<double>& default_grid(Method m) {
  static const std::vector<double> irm{0.01, 0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0};
  static const std::vector<double> wdrl{0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 100.0};
  static const std::vector<double> l1l2{1e-3, 1e-2, 1e-1, 1.0, 10.0};
  switch (m) {
    case Method::Irm: return irm;
    case Method::Sal:
    case Method::Wdrl: return wdrl;
    case Method::Lasso:
    case Method::Ridge: return l1l2;
    case Method::Erm: break;
  }
  throw std::invalid_argument("no default grid for " + method_name(m));
}

struct ExperimentConfig {
  std::string generator = "selection_bias";  // toy | selection_bias | anticausal | csv
  std::vector<Method> methods = {Method::Sal, Method::Erm};
  int runs = 1;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  LossKind loss = LossKind::Squared;
  EnvMetric metric = EnvMetric::Mae;
  NoiseScale noise_mode = NoiseScale::StdDev;

  // generator knobs
  SelectionBiasConfig selection;
  AntiCausalConfig anticausal = AntiCausalConfig::defaults();
  Index toy_train_n1 = 180;
  Index toy_train_n2 = 20;
  Index toy_test_n = 1000;

  // adversarial training knobs
  SalHyperParams hyper;
  double wdrl_lambda = 0.0;  // 0 means: use hyper.lambda
  std::vector<double> sweep_lambda;

  // baseline knobs
  GdOptions gd;
  double irm_reg = 1.0;
  double lasso_reg = 0.01;
  double ridge_reg = 0.01;
  std::vector<Method> grid_for;
  std::map<Method, std::vector<double>> grids;
  double validation_fraction = 0.2;

  // csv route
  std::string csv_path;
  std::string schema_path;
  std::vector<double> env_edges;
  std::vector<std::string> env_categories;
  std::vector<std::string> csv_train_envs;
  std::vector<std::string> csv_test_envs;
  bool csv_normalize = true;
};

namespace detail {

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys{
      "generator", "methods", "method", "runs", "seed", "out", "loss", "metric",
      "noise_as_variance",
      // selection bias
      "n", "n_s", "n_v", "n_b", "r", "minority_r", "kappa", "beta", "classification", "test_n",
      "test_r",
      // toy
      "toy_train_n1", "toy_train_n2",
      // anticausal
      "anticausal_n", "anticausal_train_envs",
      // sal
      "lambda", "alpha", "outer_iters", "theta_iters", "w_iters", "ascent_steps", "step_x",
      "step_theta", "step_w", "intercept", "wdrl_lambda", "sweep_lambda",
      // baselines
      "gd_iters", "gd_step", "gd_tol", "irm_reg", "lasso_reg", "ridge_reg", "grid_for",
      "irm_grid", "lasso_grid", "ridge_grid", "wdrl_grid", "sal_grid", "validation_fraction",
      // csv
      "csv_path", "schema_path", "env_edges", "env_categories", "csv_train_envs",
      "csv_test_envs", "normalize"};
  return keys;
}

inline LossKind parse_loss(const std::string& s) {
  if (s == "absolute") return LossKind::Absolute;
  if (s == "squared") return LossKind::Squared;
  if (s == "logloss") return LossKind::LogLoss;
  throw std::invalid_argument("unknown loss: " + s);
}

inline std::string loss_name(LossKind k) {
  switch (k) {
    case LossKind::Absolute: return "absolute";
    case LossKind::Squared: return "squared";
    case LossKind::LogLoss: return "logloss";
  }
  throw std::logic_error("loss_name: unknown loss");
}

inline EnvMetric parse_metric(const std::string& s) {
  if (s == "rmse") return EnvMetric::Rmse;
  if (s == "mae") return EnvMetric::Mae;
  if (s == "error_rate") return EnvMetric::ErrorRate;
  throw std::invalid_argument("unknown metric: " + s);
}

inline std::string metric_name(EnvMetric m) {
  switch (m) {
    case EnvMetric::Rmse: return "rmse";
    case EnvMetric::Mae: return "mae";
    case EnvMetric::ErrorRate: return "error_rate";
  }
  throw std::logic_error("metric_name: unknown metric");
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const KvConfig& kv) {
  for (const auto& key : kv.keys()) {
    require(detail::known_config_keys().count(key) == 1, "config: unknown key '" + key + "'");
  }
  ExperimentConfig cfg;
  cfg.generator = kv.get_str("generator", cfg.generator);
  require(cfg.generator == "toy" || cfg.generator == "selection_bias" ||
              cfg.generator == "anticausal" || cfg.generator == "csv",
          "config: unknown generator '" + cfg.generator + "'");

  if (kv.has("methods") || kv.has("method")) {
    cfg.methods.clear();
    const std::string key = kv.has("methods") ? "methods" : "method";
    for (const auto& name : kv.get_str_list(key, {})) cfg.methods.push_back(parse_method(name));
    require(!cfg.methods.empty(), "config: no methods listed");
  }
  cfg.runs = kv.get_int("runs", cfg.runs);
  require(cfg.runs >= 1, "config: runs must be >= 1");
  cfg.seed = kv.get_u64("seed", cfg.seed);
  cfg.out_dir = kv.get_str("out", cfg.out_dir);
  cfg.noise_mode =
      kv.get_bool("noise_as_variance", false) ? NoiseScale::Variance : NoiseScale::StdDev;

  // selection-bias knobs double as the generic generator knobs
  cfg.selection.n = kv.get_int("n", static_cast<int>(cfg.selection.n));
  cfg.selection.n_s = kv.get_int("n_s", static_cast<int>(cfg.selection.n_s));
  cfg.selection.n_v = kv.get_int("n_v", static_cast<int>(cfg.selection.n_v));
  cfg.selection.n_b = kv.get_int("n_b", static_cast<int>(cfg.selection.n_b));
  cfg.selection.r = kv.get_num("r", cfg.selection.r);
  cfg.selection.minority_r = kv.get_num("minority_r", cfg.selection.minority_r);
  cfg.selection.kappa = kv.get_num("kappa", cfg.selection.kappa);
  cfg.selection.beta = kv.get_num("beta", cfg.selection.beta);
  cfg.selection.classification = kv.get_bool("classification", cfg.selection.classification);
  cfg.selection.test_n = kv.get_int("test_n", static_cast<int>(cfg.selection.test_n));
  cfg.selection.test_r = kv.get_num_list("test_r", cfg.selection.test_r);
  cfg.selection.mode = cfg.noise_mode;

  cfg.toy_train_n1 = kv.get_int("toy_train_n1", static_cast<int>(cfg.toy_train_n1));
  cfg.toy_train_n2 = kv.get_int("toy_train_n2", static_cast<int>(cfg.toy_train_n2));
  cfg.toy_test_n = kv.get_int("test_n", static_cast<int>(cfg.toy_test_n));

  cfg.anticausal.n = kv.get_int("anticausal_n", static_cast<int>(cfg.anticausal.n));
  cfg.anticausal.n_s = kv.get_int("n_s", static_cast<int>(cfg.anticausal.n_s));
  cfg.anticausal.n_v = kv.get_int("n_v", static_cast<int>(cfg.anticausal.n_v));
  cfg.anticausal.beta =
      cfg.generator == "anticausal" ? kv.get_num("beta", cfg.anticausal.beta) : cfg.anticausal.beta;
  cfg.anticausal.train_envs = kv.get_int("anticausal_train_envs", cfg.anticausal.train_envs);
  cfg.anticausal.mode = cfg.noise_mode;

  // loss and metric defaults depend on the task shape
  const bool classification = cfg.selection.classification && cfg.generator == "selection_bias";
  LossKind default_loss = LossKind::Squared;
  EnvMetric default_metric = EnvMetric::Mae;
  if (cfg.generator == "toy") {
    default_loss = LossKind::Absolute;
    default_metric = EnvMetric::Rmse;
  }
  if (classification) {
    default_loss = LossKind::LogLoss;
    default_metric = EnvMetric::ErrorRate;
  }
  if (cfg.generator == "csv") default_metric = EnvMetric::Rmse;
  cfg.loss = detail::parse_loss(kv.get_str("loss", detail::loss_name(default_loss)));
  cfg.metric = detail::parse_metric(kv.get_str("metric", detail::metric_name(default_metric)));

  cfg.hyper.lambda = kv.get_num("lambda", cfg.hyper.lambda);
  cfg.hyper.alpha = kv.get_num("alpha", cfg.hyper.alpha);
  cfg.hyper.outer_iters = kv.get_int("outer_iters", cfg.hyper.outer_iters);
  cfg.hyper.theta_iters = kv.get_int("theta_iters", cfg.hyper.theta_iters);
  cfg.hyper.w_iters = kv.get_int("w_iters", cfg.hyper.w_iters);
  cfg.hyper.ascent_steps = kv.get_int("ascent_steps", cfg.hyper.ascent_steps);
  cfg.hyper.step_x = kv.get_num("step_x", cfg.hyper.step_x);
  cfg.hyper.step_theta = kv.get_num("step_theta", cfg.hyper.step_theta);
  cfg.hyper.step_w = kv.get_num("step_w", cfg.hyper.step_w);
  cfg.hyper.fit_intercept = kv.get_bool("intercept", cfg.hyper.fit_intercept);
  cfg.hyper.validate();
  cfg.wdrl_lambda = kv.get_num("wdrl_lambda", cfg.wdrl_lambda);
  if (kv.has("sweep_lambda")) cfg.sweep_lambda = kv.get_num_list("sweep_lambda", {});

  cfg.gd.max_iters = kv.get_int("gd_iters", cfg.gd.max_iters);
  cfg.gd.step = kv.get_num("gd_step", cfg.gd.step);
  cfg.gd.grad_tol = kv.get_num("gd_tol", cfg.gd.grad_tol);
  cfg.gd.fit_intercept = cfg.hyper.fit_intercept;
  cfg.irm_reg = kv.get_num("irm_reg", cfg.irm_reg);
  cfg.lasso_reg = kv.get_num("lasso_reg", cfg.lasso_reg);
  cfg.ridge_reg = kv.get_num("ridge_reg", cfg.ridge_reg);
  for (const auto& name : kv.get_str_list("grid_for", {})) {
    cfg.grid_for.push_back(parse_method(name));
  }
  for (Method m : {Method::Sal, Method::Wdrl, Method::Irm, Method::Lasso, Method::Ridge}) {
    const std::string key = method_name(m) + "_grid";
    if (kv.has(key)) cfg.grids[m] = kv.get_num_list(key, {});
  }
  cfg.validation_fraction = kv.get_num("validation_fraction", cfg.validation_fraction);

  cfg.csv_path = kv.get_str("csv_path", cfg.csv_path);
  cfg.schema_path = kv.get_str("schema_path", cfg.schema_path);
  if (kv.has("env_edges")) cfg.env_edges = kv.get_num_list("env_edges", {});
  cfg.env_categories = kv.get_str_list("env_categories", cfg.env_categories);
  cfg.csv_train_envs = kv.get_str_list("csv_train_envs", cfg.csv_train_envs);
  cfg.csv_test_envs = kv.get_str_list("csv_test_envs", cfg.csv_test_envs);
  cfg.csv_normalize = kv.get_bool("normalize", cfg.csv_normalize);
  if (cfg.generator == "csv") {
    require(!cfg.csv_path.empty(), "config: csv generator needs csv_path");
    require(!cfg.schema_path.empty(), "config: csv generator needs schema_path");
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// file helpers
// ---------------------------------------------------------------------------

namespace detail {

// write to a sibling temp file, then rename into place
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.parent_path() / (path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp);
    require(out.good(), "atomic_write: cannot open " + tmp.string());
    out << content;
    require(out.good(), "atomic_write: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string opt_cell(const std::optional<double>& v) {
  return v ? fmt_full(*v) : std::string();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// model files
// ---------------------------------------------------------------------------

struct StoredModel {
  LinearModel model;
  std::optional<Vector> weights;
  LossKind loss = LossKind::Squared;
};

inline void save_model(const std::string& path, const StoredModel& sm) {
  std::ostringstream out;
  out << "task = "
      << (sm.model.task == TaskKind::Regression ? "regression" : "classification") << "\n";
  out << "loss = " << detail::loss_name(sm.loss) << "\n";
  out << "theta = ";
  for (Index i = 0; i < sm.model.dim(); ++i) {
    out << (i ? "," : "") << detail::fmt_full(sm.model.theta[i]);
  }
  out << "\n";
  out << "intercept = "
      << (sm.model.intercept ? detail::fmt_full(*sm.model.intercept) : std::string("none"))
      << "\n";
  if (sm.weights) {
    out << "weights = ";
    for (Index i = 0; i < sm.weights->size(); ++i) {
      out << (i ? "," : "") << detail::fmt_full((*sm.weights)[i]);
    }
    out << "\n";
  }
  detail::atomic_write(path, out.str());
}

inline StoredModel load_model(const std::string& path) {
  const KvConfig kv = KvConfig::from_file(path);
  StoredModel sm;
  const std::string task = kv.get_str("task", "");
  require(task == "regression" || task == "classification", path + ": bad or missing task");
  sm.model.task =
      task == "regression" ? TaskKind::Regression : TaskKind::BinaryClassification;
  sm.loss = detail::parse_loss(kv.get_str("loss", "squared"));
  const std::vector<double> theta = kv.get_num_list("theta", {});
  require(!theta.empty(), path + ": missing theta");
  sm.model.theta = Eigen::Map<const Vector>(theta.data(), static_cast<Index>(theta.size()));
  const std::string b = kv.get_str("intercept", "none");
  if (b != "none") {
    double v = 0.0;
    require(detail::parse_double(b, v), path + ": bad intercept");
    sm.model.intercept = v;
  }
  if (kv.has("weights")) {
    const std::vector<double> w = kv.get_num_list("weights", {});
    require(w.size() == theta.size(), path + ": weights and theta lengths differ");
    sm.weights = Eigen::Map<const Vector>(w.data(), static_cast<Index>(w.size()));
  }
  return sm;
}

// ---------------------------------------------------------------------------
// experiment driver
// ---------------------------------------------------------------------------

struct GeneratedData {
  std::vector<EnvDataset> train;
  std::vector<EnvDataset> test;
};

// Instantiates the configured generator for one run seed. The csv route is
// deterministic across runs.
inline GeneratedData generate_data(const ExperimentConfig& cfg, std::uint64_t run_seed);

struct SummaryRow {
  Method method = Method::Erm;
  double param = 0.0;  // the method's robustness or regularization knob
  double mean_error = 0.0;
  double std_error = 0.0;
  std::optional<double> accuracy;
  std::optional<double> confidence;
  std::optional<double> radius;
};

struct ExperimentResult {
  std::vector<SummaryRow> summary;
  std::filesystem::path runs_csv;
  std::filesystem::path summary_csv;
  std::filesystem::path coeffs_csv;
  std::filesystem::path manifest;
};

namespace detail {

struct TrainedRun {
  LinearModel model;
  double param = 0.0;
  std::optional<double> radius;
};

inline TrainedRun train_one(const ExperimentConfig& cfg, Method method, double lambda_override,
                            const std::vector<EnvDataset>& train, std::uint64_t run_seed) {
  TrainedRun out;
  SalHyperParams hp = cfg.hyper;
  hp.seed = run_seed;
  GdOptions gd = cfg.gd;

  const bool gridded = std::count(cfg.grid_for.begin(), cfg.grid_for.end(), method) > 0;
  auto grid_of = [&](Method m) {
    const auto it = cfg.grids.find(m);
    return it != cfg.grids.end() ? it->second : default_grid(m);
  };
  auto pick = [&](auto&& train_fn, Method m, double fixed) {
    if (!gridded) return fixed;
    GridSearchSpec spec;
    spec.grid = grid_of(m);
    spec.validation_fraction = cfg.validation_fraction;
    spec.metric = cfg.loss == LossKind::LogLoss ? ValidationMetric::Accuracy
                                                : ValidationMetric::MeanLoss;
    spec.loss = cfg.loss;
    spec.seed = derive_seed(run_seed, "grid", static_cast<std::uint64_t>(m));
    return grid_search(train_fn, train, spec).best_value;
  };

  switch (method) {
    case Method::Erm: {
      out.model = train_erm(train, cfg.loss, gd);
      out.param = 0.0;
      return out;
    }
    case Method::Lasso: {
      auto fn = [&](const std::vector<EnvDataset>& tr, double v) {
        return train_lasso(tr, cfg.loss, v, gd);
      };
      out.param = lambda_override > 0.0 ? lambda_override : pick(fn, method, cfg.lasso_reg);
      out.model = train_lasso(train, cfg.loss, out.param, gd);
      return out;
    }
    case Method::Ridge: {
      auto fn = [&](const std::vector<EnvDataset>& tr, double v) {
        return train_ridge(tr, cfg.loss, v, gd);
      };
      out.param = lambda_override > 0.0 ? lambda_override : pick(fn, method, cfg.ridge_reg);
      out.model = train_ridge(train, cfg.loss, out.param, gd);
      return out;
    }
    case Method::Irm: {
      auto fn = [&](const std::vector<EnvDataset>& tr, double v) {
        return train_irm(tr, cfg.loss, v, gd);
      };
      out.param = lambda_override > 0.0 ? lambda_override : pick(fn, method, cfg.irm_reg);
      out.model = train_irm(train, cfg.loss, out.param, gd);
      return out;
    }
    case Method::Wdrl: {
      auto fn = [&](const std::vector<EnvDataset>& tr, double v) {
        SalHyperParams h = hp;
        h.lambda = v;
        return train_wdrl(tr, h, cfg.loss).model;
      };
      const double fixed = cfg.wdrl_lambda > 0.0 ? cfg.wdrl_lambda : hp.lambda;
      out.param = lambda_override > 0.0 ? lambda_override : pick(fn, method, fixed);
      hp.lambda = out.param;
      SalModel sm = train_wdrl(train, hp, cfg.loss);
      out.model = std::move(sm.model);
      out.radius = sm.history.empty() ? 0.0 : sm.history.back().radius;
      return out;
    }
    case Method::Sal: {
      auto fn = [&](const std::vector<EnvDataset>& tr, double v) {
        SalHyperParams h = hp;
        h.lambda = v;
        return train_sal(tr, h, cfg.loss).model;
      };
      out.param = lambda_override > 0.0 ? lambda_override : pick(fn, method, hp.lambda);
      hp.lambda = out.param;
      SalModel sm = train_sal(train, hp, cfg.loss);
      out.model = std::move(sm.model);
      out.radius = sm.history.empty() ? 0.0 : sm.history.back().radius;
      return out;
    }
  }
  throw std::logic_error("train_one: unknown method");
}

}  // namespace detail

inline GeneratedData generate_data(const ExperimentConfig& cfg, std::uint64_t run_seed) {
  GeneratedData data;
  if (cfg.generator == "toy") {
    data.train = gen_toy({1.0, -0.1}, {cfg.toy_train_n1, cfg.toy_train_n2},
                         derive_seed(run_seed, "toy-train"), cfg.noise_mode);
    std::vector<Index> counts(toy_test_alphas().size(), cfg.toy_test_n);
    data.test =
        gen_toy(toy_test_alphas(), counts, derive_seed(run_seed, "toy-test"), cfg.noise_mode);
  } else if (cfg.generator == "selection_bias") {
    SelectionBiasConfig sc = cfg.selection;
    sc.seed = run_seed;
    SelectionBiasData d = gen_selection_bias(sc);
    data.train = std::move(d.train);
    data.test = std::move(d.test);
  } else if (cfg.generator == "anticausal") {
    AntiCausalConfig ac = cfg.anticausal;
    ac.seed = run_seed;
    AntiCausalData d = gen_anticausal(ac);
    data.train = std::move(d.train);
    data.test = std::move(d.test);
  } else if (cfg.generator == "csv") {
    TableSchema schema;
    {
      // schema files are flat key = value too: target, environment,
      // features, categorical.<col> = cat1,cat2
      const KvConfig kv = KvConfig::from_file(cfg.schema_path);
      schema.target = kv.get_str("target", "");
      schema.environment = kv.get_str("environment", "");
      for (const auto& f : kv.get_str_list("features", {})) schema.features.push_back(f);
      for (const auto& key : kv.keys()) {
        if (key.rfind("categorical.", 0) == 0) {
          schema.categorical[key.substr(12)] = kv.get_str_list(key, {});
        }
      }
    }
    Table table = load_csv(cfg.csv_path, schema);
    if (cfg.csv_normalize) normalize(table);
    SplitResult split = cfg.env_edges.empty() ? split_environments(table, cfg.env_categories)
                                              : split_environments(table, cfg.env_edges);
    require(!split.envs.empty(), "csv: environment split produced no environments");
    auto wants = [](const std::vector<std::string>& list, const std::string& id) {
      return std::count(list.begin(), list.end(), id) > 0;
    };
    for (auto& env : split.envs) {
      if (!cfg.csv_train_envs.empty() && wants(cfg.csv_train_envs, env.env_id)) {
        data.train.push_back(std::move(env));
      } else if (!cfg.csv_test_envs.empty() && wants(cfg.csv_test_envs, env.env_id)) {
        data.test.push_back(std::move(env));
      } else if (cfg.csv_train_envs.empty()) {
        data.train.push_back(std::move(env));
      }
    }
    require(!data.train.empty(), "csv: no training environments selected");
    if (data.test.empty()) data.test = data.train;
  } else {
    throw std::invalid_argument("generate_data: unknown generator " + cfg.generator);
  }
  return data;
}

// Runs every configured method over `runs` freshly seeded datasets and writes
// runs.csv, summary.csv, coeffs.csv and manifest.txt into the output
// directory. Identical configurations produce byte-identical files.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  require(!cfg.methods.empty(), "run_experiment: no methods configured");
  std::filesystem::create_directories(cfg.out_dir);

  std::vector<double> lambdas = cfg.sweep_lambda;
  if (lambdas.empty()) lambdas.push_back(0.0);  // 0 means: the configured knob

  std::ostringstream runs_out, coeffs_out;
  runs_out << "method,param,run,env_id,loss,accuracy,confidence\n";
  coeffs_out << "method,param,run,coef,value\n";

  struct Agg {
    double mean = 0.0, stdv = 0.0, acc = 0.0, conf = 0.0, radius = 0.0;
    int n_acc = 0, n_radius = 0;
    double param = 0.0;
  };
  std::vector<std::vector<Agg>> agg(cfg.methods.size(), std::vector<Agg>(lambdas.size()));

  for (int run = 0; run < cfg.runs; ++run) {
    const std::uint64_t run_seed = derive_seed(cfg.seed, "run", static_cast<std::uint64_t>(run));
    const GeneratedData data = generate_data(cfg, run_seed);
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      const Method method = cfg.methods[mi];
      for (std::size_t li = 0; li < lambdas.size(); ++li) {
        const detail::TrainedRun tr =
            detail::train_one(cfg, method, lambdas[li], data.train, run_seed);
        const MetricsReport rep = evaluate(tr.model, data.test, cfg.metric);

        for (std::size_t e = 0; e < rep.env_ids.size(); ++e) {
          runs_out << method_name(method) << "," << detail::fmt_full(tr.param) << "," << run
                   << "," << rep.env_ids[e] << "," << detail::fmt_full(rep.env_losses[e]) << ","
                   << detail::opt_cell(rep.mean_accuracy) << ","
                   << detail::opt_cell(rep.mean_confidence) << "\n";
        }
        for (Index j = 0; j < tr.model.dim(); ++j) {
          coeffs_out << method_name(method) << "," << detail::fmt_full(tr.param) << "," << run
                     << ",x" << j << "," << detail::fmt_full(tr.model.theta[j]) << "\n";
        }
        Agg& a = agg[mi][li];
        a.param = tr.param;
        a.mean += rep.mean_error;
        a.stdv += rep.std_error;
        if (rep.mean_accuracy) {
          a.acc += *rep.mean_accuracy;
          a.conf += *rep.mean_confidence;
          ++a.n_acc;
        }
        if (tr.radius) {
          a.radius += *tr.radius;
          ++a.n_radius;
        }
      }
    }
  }

  ExperimentResult result;
  std::ostringstream summary_out;
  summary_out << "method,param,mean_error,std_error,accuracy,confidence,radius\n";
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
      const Agg& a = agg[mi][li];
      SummaryRow row;
      row.method = cfg.methods[mi];
      row.param = a.param;
      row.mean_error = a.mean / cfg.runs;
      row.std_error = a.stdv / cfg.runs;
      if (a.n_acc > 0) {
        row.accuracy = a.acc / a.n_acc;
        row.confidence = a.conf / a.n_acc;
      }
      if (a.n_radius > 0) row.radius = a.radius / a.n_radius;
      summary_out << method_name(row.method) << "," << detail::fmt_full(row.param) << ","
                  << detail::fmt_full(row.mean_error) << "," << detail::fmt_full(row.std_error)
                  << "," << detail::opt_cell(row.accuracy) << ","
                  << detail::opt_cell(row.confidence) << "," << detail::opt_cell(row.radius)
                  << "\n";
      result.summary.push_back(std::move(row));
    }
  }

  std::ostringstream manifest;
  manifest << "# resolved configuration\n";
  manifest << "generator = " << cfg.generator << "\n";
  manifest << "loss = " << detail::loss_name(cfg.loss) << "\n";
  manifest << "metric = " << detail::metric_name(cfg.metric) << "\n";
  manifest << "runs = " << cfg.runs << "\n";
  manifest << "seed = " << cfg.seed << "\n";
  manifest << "methods = ";
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    manifest << (i ? "," : "") << method_name(cfg.methods[i]);
  }
  manifest << "\n";
  manifest << "lambda = " << detail::fmt_full(cfg.hyper.lambda) << "\n";
  manifest << "alpha = " << detail::fmt_full(cfg.hyper.alpha) << "\n";
  manifest << "outer_iters = " << cfg.hyper.outer_iters << "\n";
  manifest << "theta_iters = " << cfg.hyper.theta_iters << "\n";
  manifest << "w_iters = " << cfg.hyper.w_iters << "\n";
  manifest << "ascent_steps = " << cfg.hyper.ascent_steps << "\n";
  manifest << "step_x = " << detail::fmt_full(cfg.hyper.step_x) << "\n";
  manifest << "step_theta = " << detail::fmt_full(cfg.hyper.step_theta) << "\n";
  manifest << "step_w = " << detail::fmt_full(cfg.hyper.step_w) << "\n";
  manifest << "# per-run seeds\n";
  for (int run = 0; run < cfg.runs; ++run) {
    manifest << "run_seed_" << run << " = "
             << derive_seed(cfg.seed, "run", static_cast<std::uint64_t>(run)) << "\n";
  }

  const std::filesystem::path dir(cfg.out_dir);
  result.runs_csv = dir / "runs.csv";
  result.summary_csv = dir / "summary.csv";
  result.coeffs_csv = dir / "coeffs.csv";
  result.manifest = dir / "manifest.txt";
  detail::atomic_write(result.runs_csv, runs_out.str());
  detail::atomic_write(result.summary_csv, summary_out.str());
  detail::atomic_write(result.coeffs_csv, coeffs_out.str());
  detail::atomic_write(result.manifest, manifest.str());
  return result;
}

// ---------------------------------------------------------------------------
// plot data
// ---------------------------------------------------------------------------

// Flattens a summary.csv ("error") or coeffs.csv ("coefficient") into a
// long-format series,x,y table ready for any plotting tool.
inline void emit_plot_data(const std::string& in_path, const std::string& kind,
                           const std::string& out_path) {
  std::ifstream in(in_path);
  require(in.good(), "emit_plot_data: cannot open " + in_path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "emit_plot_data: empty file " + in_path);
  const auto header = detail::split_csv_line(line);

  std::ostringstream out;
  out << "series,x,y\n";
  if (kind == "error") {
    require(header.size() >= 4 && header[0] == "method" && header[1] == "param" &&
                header[2] == "mean_error",
            "emit_plot_data: " + in_path + " is not a summary file");
    while (std::getline(in, line)) {
      if (detail::trim(line).empty()) continue;
      const auto cells = detail::split_csv_line(line);
      require(cells.size() == header.size(), "emit_plot_data: malformed row in " + in_path);
      out << cells[0] << "," << cells[1] << "," << cells[2] << "\n";
    }
  } else if (kind == "coefficient") {
    require(header.size() == 5 && header[0] == "method" && header[3] == "coef",
            "emit_plot_data: " + in_path + " is not a coefficients file");
    // mean |coef| over runs per (method, param, coef)
    std::map<std::string, std::pair<double, int>> acc;
    std::vector<std::string> order;
    while (std::getline(in, line)) {
      if (detail::trim(line).empty()) continue;
      const auto cells = detail::split_csv_line(line);
      require(cells.size() == 5, "emit_plot_data: malformed row in " + in_path);
      double v = 0.0;
      require(detail::parse_double(cells[4], v), "emit_plot_data: bad value in " + in_path);
      const std::string key = cells[0] + ":" + cells[3] + "," + cells[1];
      if (acc.find(key) == acc.end()) order.push_back(key);
      acc[key].first += std::abs(v);
      acc[key].second += 1;
    }
    for (const auto& key : order) {
      const auto& [sum, count] = acc[key];
      out << key << "," << detail::fmt_full(sum / count) << "\n";
    }
  } else {
    throw std::invalid_argument("emit_plot_data: unknown kind '" + kind + "'");
  }
  detail::atomic_write(out_path, out.str());
}

}  // namespace sal
