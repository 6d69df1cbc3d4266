#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sal/experiment.hpp"

using namespace sal;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "sal_experiment_tests" / name;
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::filesystem::path write_file(const std::string& name, const std::string& content) {
  const auto path = scratch_dir("files") / name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("key-value configs parse comments, lists and scalars", "[experiment]") {
  const KvConfig kv = KvConfig::from_string(
      "# a comment\n"
      "\n"
      "  lambda = 2.5\n"
      "methods = sal, erm\n"
      "runs=3\n"
      "intercept = true\n"
      "sweep_lambda = 0.5,1,2\n");
  CHECK(kv.get_num("lambda", 0.0) == 2.5);
  CHECK(kv.get_int("runs", 0) == 3);
  CHECK(kv.get_bool("intercept", false));
  CHECK(kv.get_str("missing", "fallback") == "fallback");
  const auto list = kv.get_num_list("sweep_lambda", {});
  REQUIRE(list.size() == 3);
  CHECK(list[1] == 1.0);
  const auto names = kv.get_str_list("methods", {});
  REQUIRE(names.size() == 2);
  CHECK(names[0] == "sal");
  CHECK(names[1] == "erm");

  CHECK_THROWS_WITH(KvConfig::from_string("novalue\n"), ContainsSubstring("line 1"));
  CHECK_THROWS_AS(KvConfig::from_string("runs = many\n").get_int("runs", 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(KvConfig::from_string("runs = 2.5\n").get_int("runs", 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(KvConfig::from_string("flag = yep\n").get_bool("flag", false),
                  std::invalid_argument);
}

TEST_CASE("experiment configs reject unknown keys and resolve defaults", "[experiment]") {
  CHECK_THROWS_WITH(parse_experiment_config(KvConfig::from_string("lamda = 2\n")),
                    ContainsSubstring("unknown key 'lamda'"));
  CHECK_THROWS_WITH(parse_experiment_config(KvConfig::from_string("generator = cosmic\n")),
                    ContainsSubstring("unknown generator"));
  CHECK_THROWS_AS(parse_experiment_config(KvConfig::from_string("methods = sal,voodoo\n")),
                  std::invalid_argument);

  const ExperimentConfig toy =
      parse_experiment_config(KvConfig::from_string("generator = toy\n"));
  CHECK(toy.loss == LossKind::Absolute);
  CHECK(toy.metric == EnvMetric::Rmse);

  const ExperimentConfig sel =
      parse_experiment_config(KvConfig::from_string("generator = selection_bias\n"));
  CHECK(sel.loss == LossKind::Squared);
  CHECK(sel.metric == EnvMetric::Mae);

  const ExperimentConfig cls = parse_experiment_config(
      KvConfig::from_string("generator = selection_bias\nclassification = true\n"));
  CHECK(cls.loss == LossKind::LogLoss);
  CHECK(cls.metric == EnvMetric::ErrorRate);

  const ExperimentConfig overridden = parse_experiment_config(
      KvConfig::from_string("generator = toy\nloss = squared\nmetric = mae\nlambda = 4\n"));
  CHECK(overridden.loss == LossKind::Squared);
  CHECK(overridden.metric == EnvMetric::Mae);
  CHECK(overridden.hyper.lambda == 4.0);
}

TEST_CASE("method names round-trip", "[experiment]") {
  for (Method m : {Method::Sal, Method::Wdrl, Method::Erm, Method::Irm, Method::Lasso,
                   Method::Ridge}) {
    CHECK(parse_method(method_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_method("boosting"), std::invalid_argument);
}

TEST_CASE("experiment runs write a complete, reproducible report", "[experiment]") {
  auto config_for = [](const std::filesystem::path& out) {
    KvConfig kv = KvConfig::from_string(
        "generator = toy\n"
        "methods = erm,ridge\n"
        "ridge_reg = 0.05\n"
        "runs = 2\n"
        "seed = 11\n"
        "test_n = 60\n"
        "toy_train_n1 = 50\n"
        "toy_train_n2 = 10\n"
        "gd_iters = 400\n");
    kv.set("out", out.string());
    return parse_experiment_config(kv);
  };

  const auto dir_a = scratch_dir("report_a");
  const ExperimentResult res = run_experiment(config_for(dir_a));

  REQUIRE(res.summary.size() == 2);
  CHECK(res.summary[0].method == Method::Erm);
  CHECK(res.summary[1].method == Method::Ridge);
  CHECK(res.summary[1].param == 0.05);
  for (const SummaryRow& row : res.summary) {
    CHECK(row.mean_error > 0.0);
    CHECK(row.std_error >= 0.0);
    CHECK_FALSE(row.accuracy.has_value());
  }
  CHECK(std::filesystem::exists(res.runs_csv));
  CHECK(std::filesystem::exists(res.summary_csv));
  CHECK(std::filesystem::exists(res.coeffs_csv));
  CHECK(std::filesystem::exists(res.manifest));

  const std::string runs_text = slurp(res.runs_csv);
  CHECK(runs_text.rfind("method,param,run,env_id,loss,accuracy,confidence\n", 0) == 0);
  // 2 methods x 2 runs x 9 toy test environments plus the header
  CHECK(std::count(runs_text.begin(), runs_text.end(), '\n') == 37);

  // the same configuration reproduces every artifact byte for byte
  const auto dir_b = scratch_dir("report_b");
  const ExperimentResult rerun = run_experiment(config_for(dir_b));
  CHECK(slurp(rerun.runs_csv) == runs_text);
  CHECK(slurp(rerun.summary_csv) == slurp(res.summary_csv));
  CHECK(slurp(rerun.coeffs_csv) == slurp(res.coeffs_csv));
}

TEST_CASE("lambda sweeps produce one row per method and value", "[experiment]") {
  KvConfig kv = KvConfig::from_string(
      "generator = toy\n"
      "methods = wdrl\n"
      "runs = 1\n"
      "seed = 5\n"
      "test_n = 30\n"
      "toy_train_n1 = 40\n"
      "toy_train_n2 = 10\n"
      "sweep_lambda = 0.5,5\n"
      "outer_iters = 1\n"
      "theta_iters = 3\n"
      "ascent_steps = 2\n");
  kv.set("out", scratch_dir("sweep").string());
  const ExperimentResult res = run_experiment(parse_experiment_config(kv));

  REQUIRE(res.summary.size() == 2);
  CHECK(res.summary[0].param == 0.5);
  CHECK(res.summary[1].param == 5.0);
  for (const SummaryRow& row : res.summary) {
    REQUIRE(row.radius.has_value());
    CHECK(*row.radius >= 0.0);
  }
}

TEST_CASE("plot data flattens summaries and coefficient tables", "[experiment]") {
  SECTION("error curves come straight from the summary") {
    const auto in = write_file("summary.csv",
                               "method,param,mean_error,std_error,accuracy,confidence,radius\n"
                               "sal,0.5,1.25,0.1,,,2\n"
                               "sal,5,0.75,0.2,,,0.1\n");
    const auto out = scratch_dir("plots") / "err.csv";
    emit_plot_data(in.string(), "error", out.string());
    CHECK(slurp(out) ==
          "series,x,y\n"
          "sal,0.5,1.25\n"
          "sal,5,0.75\n");
  }
  SECTION("coefficient curves average magnitudes over runs") {
    const auto in = write_file("coeffs.csv",
                               "method,param,run,coef,value\n"
                               "sal,2,0,x0,4\n"
                               "sal,2,1,x0,-2\n"
                               "sal,2,0,x1,0.5\n"
                               "sal,2,1,x1,0.5\n");
    const auto out = scratch_dir("plots") / "coef.csv";
    emit_plot_data(in.string(), "coefficient", out.string());
    CHECK(slurp(out) ==
          "series,x,y\n"
          "sal:x0,2,3\n"
          "sal:x1,2,0.5\n");
  }
  SECTION("bad inputs are refused") {
    const auto in = write_file("notasummary.csv", "a,b\n1,2\n");
    CHECK_THROWS_WITH(emit_plot_data(in.string(), "error", "/tmp/never.csv"),
                      ContainsSubstring("not a summary"));
    CHECK_THROWS_WITH(emit_plot_data("/no/such/file.csv", "error", "/tmp/never.csv"),
                      ContainsSubstring("cannot open"));
    const auto ok = write_file("ok_summary.csv", "method,param,mean_error,std_error\n");
    CHECK_THROWS_WITH(emit_plot_data(ok.string(), "surprise", "/tmp/never.csv"),
                      ContainsSubstring("unknown kind"));
  }
}

TEST_CASE("model files round-trip exactly", "[experiment]") {
  StoredModel sm;
  sm.model.theta.resize(3);
  sm.model.theta << 1.0 / 3.0, -2.75, 5e-17;
  sm.model.task = TaskKind::BinaryClassification;
  sm.model.intercept = 0.125;
  sm.loss = LossKind::LogLoss;
  Vector w(3);
  w << 1.0, 2.5, 1.0;
  sm.weights = w;

  const auto path = scratch_dir("models") / "m.txt";
  save_model(path.string(), sm);
  const StoredModel back = load_model(path.string());

  CHECK(back.model.task == TaskKind::BinaryClassification);
  CHECK(back.loss == LossKind::LogLoss);
  CHECK((back.model.theta - sm.model.theta).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(back.model.intercept.has_value());
  CHECK(*back.model.intercept == 0.125);
  REQUIRE(back.weights.has_value());
  CHECK((*back.weights - w).cwiseAbs().maxCoeff() == 0.0);

  StoredModel plain;
  plain.model.theta = Vector::Ones(2);
  plain.model.task = TaskKind::Regression;
  const auto path2 = scratch_dir("models") / "plain.txt";
  save_model(path2.string(), plain);
  const StoredModel back2 = load_model(path2.string());
  CHECK_FALSE(back2.model.intercept.has_value());
  CHECK_FALSE(back2.weights.has_value());

  const auto broken = write_file("broken_model.txt", "task = regression\n");
  CHECK_THROWS_WITH(load_model(broken.string()), ContainsSubstring("missing theta"));
}

TEST_CASE("csv-backed experiments pick train and test environments", "[experiment]") {
  const auto csv = write_file("env_data.csv",
                              "y,f1,f2,region\n"
                              "1,0.5,1,north\n"
                              "2,1.5,0,north\n"
                              "3,2.5,1,south\n"
                              "4,3.5,0,south\n"
                              "5,4.5,1,east\n"
                              "6,5.5,0,east\n");
  const auto schema = write_file("env_schema.conf",
                                 "target = y\n"
                                 "environment = region\n"
                                 "features = f1,f2\n");
  KvConfig kv = KvConfig::from_string(
      "generator = csv\n"
      "env_categories = north,south,east\n"
      "csv_train_envs = north,south\n"
      "csv_test_envs = east\n"
      "normalize = false\n");
  kv.set("csv_path", csv.string());
  kv.set("schema_path", schema.string());
  const ExperimentConfig cfg = parse_experiment_config(kv);
  const GeneratedData data = generate_data(cfg, 1);

  REQUIRE(data.train.size() == 2);
  REQUIRE(data.test.size() == 1);
  CHECK(data.train[0].env_id == "north");
  CHECK(data.train[1].env_id == "south");
  CHECK(data.test[0].env_id == "east");
  CHECK(data.train[0].X(0, 0) == 0.5);  // normalize = false keeps raw values

  // the same call twice is identical for file-backed data
  const GeneratedData again = generate_data(cfg, 99);
  CHECK((again.train[0].X - data.train[0].X).cwiseAbs().maxCoeff() == 0.0);
}
