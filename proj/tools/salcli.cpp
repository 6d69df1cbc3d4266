// Command-line front end: data generation, training, evaluation, benchmark
// tables, the robustness certificate and the weight-gradient direction check.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sal/sal.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> runs;
  std::optional<std::string> methods;
  std::optional<double> lambda;
  std::optional<double> alpha;
  std::optional<int> outer_iters;
  std::optional<std::string> generator;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("-c,--config", flags.config, "key = value configuration file");
  cmd->add_option("--seed", flags.seed, "override the master seed");
  cmd->add_option("-o,--out", flags.out, "override the output location");
  cmd->add_option("--runs", flags.runs, "override the number of repetitions");
  cmd->add_option("--method,--methods", flags.methods, "override the method list");
  cmd->add_option("--lambda", flags.lambda, "override the transport penalty");
  cmd->add_option("--alpha", flags.alpha, "override the stability margin weight");
  cmd->add_option("--outer-iters", flags.outer_iters, "override the outer iteration count");
  cmd->add_option("--generator", flags.generator, "override the data generator");
}

sal::ExperimentConfig resolve(const CommonFlags& flags) {
  sal::KvConfig kv =
      flags.config.empty() ? sal::KvConfig() : sal::KvConfig::from_file(flags.config);
  if (flags.seed) kv.set("seed", std::to_string(*flags.seed));
  if (flags.out) kv.set("out", *flags.out);
  if (flags.runs) kv.set("runs", std::to_string(*flags.runs));
  if (flags.methods) kv.set("methods", *flags.methods);
  if (flags.lambda) kv.set("lambda", sal::detail::fmt_full(*flags.lambda));
  if (flags.alpha) kv.set("alpha", sal::detail::fmt_full(*flags.alpha));
  if (flags.outer_iters) kv.set("outer_iters", std::to_string(*flags.outer_iters));
  if (flags.generator) kv.set("generator", *flags.generator);
  return sal::parse_experiment_config(kv);
}

std::vector<sal::EnvDataset> load_or_generate(const sal::ExperimentConfig& cfg,
                                              const std::string& data_csv, bool test_split) {
  if (!data_csv.empty()) return sal::read_envs_csv(data_csv);
  const sal::GeneratedData data = sal::generate_data(cfg, sal::derive_seed(cfg.seed, "run", 0));
  return test_split ? data.test : data.train;
}

void print_report(const sal::MetricsReport& rep) {
  for (std::size_t e = 0; e < rep.env_ids.size(); ++e) {
    std::printf("  env %-24s error %.6f\n", rep.env_ids[e].c_str(), rep.env_losses[e]);
  }
  std::printf("mean_error %.6f  std_error %.6f\n", rep.mean_error, rep.std_error);
  if (rep.mean_accuracy) {
    std::printf("accuracy %.6f  confidence %.6f\n", *rep.mean_accuracy, *rep.mean_confidence);
  }
}

int cmd_generate(const CommonFlags& flags) {
  const sal::ExperimentConfig cfg = resolve(flags);
  const sal::GeneratedData data =
      sal::generate_data(cfg, sal::derive_seed(cfg.seed, "run", 0));
  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  sal::write_envs_csv((dir / "train.csv").string(), data.train);
  sal::write_envs_csv((dir / "test.csv").string(), data.test);
  std::printf("wrote %zu training and %zu test environments under %s\n", data.train.size(),
              data.test.size(), dir.string().c_str());
  return 0;
}

int cmd_train(const CommonFlags& flags, const std::string& model_out) {
  const sal::ExperimentConfig cfg = resolve(flags);
  const std::uint64_t run_seed = sal::derive_seed(cfg.seed, "run", 0);
  const sal::GeneratedData data = sal::generate_data(cfg, run_seed);
  const sal::Method method = cfg.methods.front();
  const sal::detail::TrainedRun tr =
      sal::detail::train_one(cfg, method, 0.0, data.train, run_seed);

  std::printf("method %s  knob %.6g\n", sal::method_name(method).c_str(), tr.param);
  std::printf("theta");
  for (sal::Index j = 0; j < tr.model.dim(); ++j) std::printf(" %+.6f", tr.model.theta[j]);
  std::printf("\n");
  if (tr.model.intercept) std::printf("intercept %+.6f\n", *tr.model.intercept);
  if (tr.radius) std::printf("perturbation_radius %.6f\n", *tr.radius);

  sal::StoredModel sm;
  sm.model = tr.model;
  sm.loss = cfg.loss;
  if (method == sal::Method::Sal) {
    sal::SalHyperParams hp = cfg.hyper;
    hp.seed = run_seed;
    hp.lambda = tr.param;
    const sal::SalModel full = sal::train_sal(data.train, hp, cfg.loss);
    sm.weights = full.weights.vec();
    std::printf("weights");
    for (sal::Index j = 0; j < sm.weights->size(); ++j) std::printf(" %.4f", (*sm.weights)[j]);
    std::printf("\n");
  }
  const std::string path = model_out.empty()
                               ? (std::filesystem::path(cfg.out_dir) / "model.txt").string()
                               : model_out;
  std::filesystem::create_directories(std::filesystem::path(path).parent_path().empty()
                                          ? "."
                                          : std::filesystem::path(path).parent_path().string());
  sal::save_model(path, sm);
  std::printf("model written to %s\n", path.c_str());
  return 0;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& model_path,
                 const std::string& data_csv) {
  const sal::ExperimentConfig cfg = resolve(flags);
  const sal::StoredModel sm = sal::load_model(model_path);
  const std::vector<sal::EnvDataset> envs = load_or_generate(cfg, data_csv, true);
  print_report(sal::evaluate(sm.model, envs, cfg.metric));
  return 0;
}

int cmd_benchmark(const CommonFlags& flags) {
  const sal::ExperimentConfig cfg = resolve(flags);
  const sal::ExperimentResult result = sal::run_experiment(cfg);
  std::printf("%-8s %-12s %-12s %-12s %-10s %-10s %-10s\n", "method", "param", "mean_error",
              "std_error", "accuracy", "confidence", "radius");
  for (const sal::SummaryRow& row : result.summary) {
    auto cell = [](const std::optional<double>& v) {
      char buf[32];
      if (v) {
        std::snprintf(buf, sizeof buf, "%-10.4f", *v);
      } else {
        std::snprintf(buf, sizeof buf, "%-10s", "-");
      }
      return std::string(buf);
    };
    std::printf("%-8s %-12.6g %-12.6f %-12.6f %s %s %s\n",
                sal::method_name(row.method).c_str(), row.param, row.mean_error, row.std_error,
                cell(row.accuracy).c_str(), cell(row.confidence).c_str(),
                cell(row.radius).c_str());
  }
  std::printf("artifacts: %s %s %s %s\n", result.runs_csv.string().c_str(),
              result.summary_csv.string().c_str(), result.coeffs_csv.string().c_str(),
              result.manifest.string().c_str());
  return 0;
}

int cmd_grad_check(const CommonFlags& flags, int directions, int outer_before) {
  const sal::ExperimentConfig cfg = resolve(flags);
  const std::uint64_t run_seed = sal::derive_seed(cfg.seed, "run", 0);
  const sal::GeneratedData data = sal::generate_data(cfg, run_seed);
  sal::SalHyperParams hp = cfg.hyper;
  hp.seed = run_seed;
  const sal::SalSnapshot snap = sal::make_snapshot(data.train, hp, cfg.loss, outer_before);
  const double frac = sal::gradient_direction_test(snap, directions,
                                                   sal::derive_seed(cfg.seed, "grad-check"));
  std::printf("gradient direction beats %.4f of %d random directions\n", frac, directions);
  return 0;
}

int cmd_certify(const CommonFlags& flags, const std::string& model_path,
                const std::string& data_csv) {
  const sal::ExperimentConfig cfg = resolve(flags);
  const sal::StoredModel sm = sal::load_model(model_path);
  const std::vector<sal::EnvDataset> envs = load_or_generate(cfg, data_csv, false);
  const sal::Index d = envs.front().dim();
  sal::require(sm.model.dim() == d, "certify: model dimension does not match the data");
  const sal::CovariateWeights w =
      sm.weights ? sal::CovariateWeights(*sm.weights) : sal::CovariateWeights::ones(d);
  const double rho = sal::empirical_radius(sm.model, sm.loss, w, cfg.hyper.lambda, envs,
                                           cfg.hyper.adversary());
  std::printf("lambda %.6g  empirical_radius %.6f\n", cfg.hyper.lambda, rho);
  return 0;
}

int cmd_plot_data(const std::string& in_path, const std::string& kind,
                  const std::string& out_path) {
  sal::emit_plot_data(in_path, kind, out_path);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stable adversarial learning toolkit"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string model_path, data_csv, model_out, plot_in, plot_kind, plot_out;
  int directions = 1000, outer_before = 0;

  CLI::App* generate = app.add_subcommand("generate", "write train/test environment CSVs");
  add_common(generate, flags);

  CLI::App* train = app.add_subcommand("train", "fit one method and save the model");
  add_common(train, flags);
  train->add_option("--model-out", model_out, "model file path (default <out>/model.txt)");

  CLI::App* evaluate = app.add_subcommand("evaluate", "score a saved model across environments");
  add_common(evaluate, flags);
  evaluate->add_option("--model", model_path, "model file")->required();
  evaluate->add_option("--data", data_csv, "environment CSV (default: generated test split)");

  CLI::App* benchmark = app.add_subcommand("benchmark", "run the configured method table");
  add_common(benchmark, flags);

  CLI::App* grad = app.add_subcommand("grad-check", "weight gradient direction test");
  add_common(grad, flags);
  grad->add_option("--directions", directions, "random directions to compare against");
  grad->add_option("--outer-before", outer_before, "outer iterations before the probe");

  CLI::App* certify = app.add_subcommand("certify", "empirical perturbation radius of a model");
  add_common(certify, flags);
  certify->add_option("--model", model_path, "model file")->required();
  certify->add_option("--data", data_csv, "environment CSV (default: generated training split)");

  CLI::App* plot = app.add_subcommand("plot-data", "flatten result tables for plotting");
  plot->add_option("--in", plot_in, "summary.csv or coeffs.csv")->required();
  plot->add_option("--kind", plot_kind, "error | coefficient")->required();
  plot->add_option("--out", plot_out, "output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (generate->parsed()) return cmd_generate(flags);
    if (train->parsed()) return cmd_train(flags, model_out);
    if (evaluate->parsed()) return cmd_evaluate(flags, model_path, data_csv);
    if (benchmark->parsed()) return cmd_benchmark(flags);
    if (grad->parsed()) return cmd_grad_check(flags, directions, outer_before);
    if (certify->parsed()) return cmd_certify(flags, model_path, data_csv);
    if (plot->parsed()) return cmd_plot_data(plot_in, plot_kind, plot_out);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error [%s]: %s\n", stage.c_str(), ex.what());
    return 1;
  }
  std::fprintf(stderr, "error: no subcommand handled\n");
  return 1;
}
