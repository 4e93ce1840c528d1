// Command-line front end: train, predict, explain, evaluate and cv.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lire/lire.hpp"

namespace {

using lire::Json;

struct TrainFlags {
  std::string data;
  std::string label;
  std::string positive;
  double gamma = 0.001;
  double lambda = 1.0;
  std::size_t trees = 100;
  std::size_t max_depth = 3;
  std::size_t max_iter = 5000;
  std::string init = "best";
  double l1_gamma = 0.001;
  std::uint64_t seed = 0;
  std::string out;
  std::string record;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--data", f.data, "training CSV (header row required)")->required();
  cmd->add_option("--label", f.label, "name of the label column")->required();
  cmd->add_option("--positive", f.positive, "label value treated as the +1 class")->required();
  cmd->add_option("--gamma", f.gamma, "support-size penalty (l1 penalty for rulefit)")
      ->capture_default_str();
  cmd->add_option("--lambda", f.lambda, "local-support penalty")->capture_default_str();
  cmd->add_option("--trees", f.trees, "trees in the rule-generating forest")->capture_default_str();
  cmd->add_option("--max-depth", f.max_depth, "maximum tree depth")->capture_default_str();
  cmd->add_option("--max-iter", f.max_iter, "outer iterations of the local search")
      ->capture_default_str();
  cmd->add_option("--init", f.init, "initial weights")
      ->check(CLI::IsMember({"best", "l1", "zeros"}))
      ->capture_default_str();
  cmd->add_option("--l1-gamma", f.l1_gamma, "l1 penalty of the initializer")->capture_default_str();
  cmd->add_option("--seed", f.seed, "random seed")->capture_default_str();
  cmd->add_option("--record", f.record, "write a JSON run record to this path");
}

lire::PipelineConfig pipeline_config(const TrainFlags& f, lire::Method method) {
  lire::PipelineConfig c;
  c.method = method;
  c.trees = f.trees;
  c.max_depth = f.max_depth;
  c.seed = f.seed;
  c.fit.gamma = f.gamma;
  c.fit.lambda = f.lambda;
  c.fit.max_iter = f.max_iter;
  c.fit.init = lire::parse_init(f.init);
  c.fit.l1_gamma = f.l1_gamma;
  c.fit.seed = f.seed;
  c.fit.validate();
  return c;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw lire::DataError("cli", "cannot write '" + path + "'");
  out << text;
  if (!out) throw lire::DataError("cli", "write failed for '" + path + "'");
}

std::string format_optional(const std::optional<double>& v) {
  return v ? fmt::format("{:.4f}", *v) : std::string("n/a");
}

void print_metrics(const char* title, const lire::MetricsReport& m) {
  fmt::print("{}: accuracy {:.4f}  f1 {:.4f}  auc {}  #Support {}  #LocalSupport {:.4f}  ratio {:.4f}\n",
             title, m.accuracy, m.f1, format_optional(m.auc), m.n_support, m.avg_local_support,
             m.support_ratio);
}

int cmd_train(const TrainFlags& f, const std::string& method_flag) {
  const lire::Method method = lire::parse_method(method_flag);
  const lire::PipelineConfig config = pipeline_config(f, method);
  const lire::Sample sample = lire::load_csv(f.data, f.label, f.positive);
  const lire::TrainOutcome result = lire::train(sample, config);
  lire::save(result.model, f.out);

  fmt::print("rules extracted: {}  distinct rules: {}\n", result.extracted, result.pool_size);
  fmt::print("#Support: {}\n", result.model.rules().size());
  if (result.report) {
    fmt::print("iterations: {} ({})  deletions: {}  swaps: {}\n", result.report->iterations_run,
               lire::termination_name(result.report->termination), result.report->deletions,
               result.report->swaps);
  }
  print_metrics("train", result.train_metrics);
  fmt::print("model written to {}\n", f.out);
  if (result.model.rules().empty()) {
    fmt::print(stderr, "warning: empty support; the model predicts a constant label\n");
  }
  if (!f.record.empty()) {
    Json rec;
    rec["command"] = "train";
    rec["config"] = result.model.config();
    rec["data"] = f.data;
    rec["seed"] = f.seed;
    rec["rules_extracted"] = result.extracted;
    rec["rule_pool"] = result.pool_size;
    rec["train"] = lire::metrics_to_json(result.train_metrics);
    if (result.report) {
      rec["iterations"] = result.report->iterations_run;
      rec["termination"] = lire::termination_name(result.report->termination);
    }
    rec["seconds"] = result.seconds;
    rec["outputs"] = {f.out};
    write_text(f.record, rec.dump(2) + "\n");
  }
  return 0;
}

struct ModelData {
  lire::RuleEnsembleModel model;
  lire::EncodedTable table;
};

ModelData load_model_and_data(const std::string& model_path, const std::string& data_path) {
  ModelData md{lire::load(model_path), {}};
  md.table = lire::load_csv_with_schema(data_path, md.model.schema());
  return md;
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out_path) {
  const ModelData md = load_model_and_data(model_path, data_path);
  const auto& schema = md.model.schema();
  std::string csv = "row,prediction,label,score,local_support\n";
  std::size_t correct = 0;
  for (std::size_t n = 0; n < md.table.rows; ++n) {
    const auto x = md.table.row(n);
    const double score = lire::decision_score(md.model, x);
    const int label = lire::sign_label(score);
    const std::string& name = label > 0 ? schema.label.positive : schema.label.negative;
    csv += fmt::format("{},{},{},{},{}\n", n, label, lire::csv::quote(name), score,
                       lire::local_support_size(md.model, x));
    if (md.table.labels && (*md.table.labels)[n] == label) ++correct;
  }
  write_text(out_path, csv);
  fmt::print("{} predictions written to {}\n", md.table.rows, out_path);
  if (md.table.labels) {
    fmt::print("accuracy {:.4f}\n", static_cast<double>(correct) / static_cast<double>(md.table.rows));
  }
  return 0;
}

int cmd_explain(const std::string& model_path, const std::string& data_path,
                std::optional<std::size_t> row, const std::string& format) {
  const ModelData md = load_model_and_data(model_path, data_path);
  std::vector<std::size_t> rows;
  if (row) {
    if (*row >= md.table.rows) {
      throw lire::UsageError("cli", fmt::format("row {} out of range (data has {} rows)", *row,
                                                md.table.rows));
    }
    rows.push_back(*row);
  } else {
    for (std::size_t n = 0; n < md.table.rows; ++n) rows.push_back(n);
  }
  if (format == "json") {
    Json all = Json::array();
    for (std::size_t n : rows) {
      Json j;
      j["row"] = n;
      const Json e = lire::explanation_to_json(lire::explain(md.model, md.table.row(n)),
                                               md.model.schema());
      for (auto it = e.begin(); it != e.end(); ++it) j[it.key()] = it.value();
      all.push_back(std::move(j));
    }
    Json doc;
    doc["explanations"] = std::move(all);
    fmt::print("{}\n", doc.dump(2));
  } else {
    for (std::size_t n : rows) {
      fmt::print("row {}\n{}", n,
                 lire::explanation_to_text(lire::explain(md.model, md.table.row(n)),
                                           md.model.schema()));
    }
  }
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_path,
                 const std::string& format) {
  const ModelData md = load_model_and_data(model_path, data_path);
  if (!md.table.labels) {
    throw lire::DataError("cli", "label column '" + md.model.schema().label.column +
                                     "' is required for evaluation");
  }
  const auto m = lire::evaluate(md.model, md.table.values, md.table.cols, *md.table.labels);
  if (format == "json") {
    fmt::print("{}\n", lire::metrics_to_json(m).dump(2));
  } else {
    print_metrics("test", m);
  }
  return 0;
}

struct CvFlags {
  std::size_t folds = 10;
  std::vector<double> grid_gamma;
  std::vector<double> grid_lambda;
  std::optional<double> lambda_ratio;
  std::vector<std::string> methods{"lire"};
  bool tune = false;
  double validation_fraction = 0.2;
};

std::vector<lire::GridPoint> lire_grid(const TrainFlags& f, const CvFlags& cv) {
  std::vector<double> gammas = cv.grid_gamma;
  if (gammas.empty()) {
    if (cv.tune) {
      if (cv.lambda_ratio || !cv.grid_lambda.empty()) {
        for (const auto& p : lire::default_lire_grid()) gammas.push_back(p.gamma);
      } else {
        return lire::default_lire_grid();
      }
    } else {
      gammas.push_back(f.gamma);
    }
  }
  std::vector<lire::GridPoint> grid;
  if (cv.lambda_ratio) {
    for (double g : gammas) grid.push_back({g, *cv.lambda_ratio * g});
    return grid;
  }
  const std::vector<double> lambdas = cv.grid_lambda.empty() ? std::vector<double>{f.lambda}
                                                             : cv.grid_lambda;
  for (double g : gammas) {
    for (double l : lambdas) grid.push_back({g, l});
  }
  return grid;
}

std::vector<lire::GridPoint> rulefit_grid(const TrainFlags& f, const CvFlags& cv) {
  if (cv.grid_gamma.empty()) {
    return cv.tune ? lire::default_rulefit_grid() : std::vector<lire::GridPoint>{{f.gamma, 0.0}};
  }
  std::vector<lire::GridPoint> grid;
  for (double g : cv.grid_gamma) grid.push_back({g, 0.0});
  return grid;
}

int cmd_cv(const TrainFlags& f, const CvFlags& cv) {
  lire::CvSettings s;
  s.folds = cv.folds;
  s.methods.clear();
  for (const auto& m : cv.methods) s.methods.push_back(lire::parse_method(m));
  s.tune = cv.tune;
  s.validation_fraction = cv.validation_fraction;
  s.base = pipeline_config(f, lire::Method::kLire);
  s.lire_grid = lire_grid(f, cv);
  s.rulefit_grid = rulefit_grid(f, cv);
  for (const auto& p : s.lire_grid) {
    if (!(p.gamma >= 0.0) || !(p.lambda >= 0.0)) {
      throw lire::UsageError("cli", "grid values must be >= 0");
    }
  }

  const lire::Sample sample = lire::load_csv(f.data, f.label, f.positive);
  const lire::CvResult result = lire::cross_validate(sample, s);
  write_text(f.out, lire::cv_results_csv(result));
  const std::string timing = f.out + ".timing.csv";
  write_text(timing, lire::cv_timing_csv(result));

  for (const auto& sum : result.summary) {
    const std::string config =
        sum.point ? fmt::format("gamma={} lambda={}", sum.point->gamma, sum.point->lambda)
                  : std::string("tuned");
    fmt::print("{} {}: accuracy {:.4f} ± {:.4f}  #Support {:.2f} ± {:.2f}  #LocalSupport {:.3f} ± {:.3f}\n",
               lire::method_name(sum.method), config, sum.mean[0], sum.stdev[0], sum.mean[3],
               sum.stdev[3], sum.mean[4], sum.stdev[4]);
  }
  fmt::print("{} rows written to {} (timings in {})\n", result.rows.size(), f.out, timing);
  if (!f.record.empty()) {
    Json rec;
    rec["command"] = "cv";
    rec["config"] = lire::config_to_json(s.base);
    rec["folds"] = cv.folds;
    rec["tune"] = cv.tune;
    rec["data"] = f.data;
    rec["seed"] = f.seed;
    rec["rows"] = result.rows.size();
    rec["outputs"] = {f.out, timing};
    write_text(f.record, rec.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locally interpretable rule ensembles"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  std::string method = "lire";
  auto* train = app.add_subcommand("train", "fit a rule ensemble and save it as JSON");
  add_train_flags(train, train_flags);
  train->add_option("--out", train_flags.out, "model output path")->required();
  train->add_option("--method", method, "weight fitter")
      ->check(CLI::IsMember({"lire", "rulefit"}))
      ->capture_default_str();

  std::string model_path, data_path, out_path, format = "text";
  std::optional<std::size_t> row;
  auto* predict = app.add_subcommand("predict", "write predictions for every row");
  predict->add_option("--model", model_path)->required();
  predict->add_option("--data", data_path)->required();
  predict->add_option("--out", out_path)->required();

  auto* explain = app.add_subcommand("explain", "show the fired rules behind predictions");
  explain->add_option("--model", model_path)->required();
  explain->add_option("--data", data_path)->required();
  explain->add_option("--row", row, "0-based data row (default: all rows)");
  explain->add_option("--format", format)->check(CLI::IsMember({"text", "json"}))->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "metrics of a saved model on labelled data");
  evaluate->add_option("--model", model_path)->required();
  evaluate->add_option("--data", data_path)->required();
  evaluate->add_option("--format", format)->check(CLI::IsMember({"text", "json"}))->capture_default_str();

  TrainFlags cv_train;
  CvFlags cv_flags;
  auto* cv = app.add_subcommand("cv", "k-fold cross-validation over a hyperparameter grid");
  add_train_flags(cv, cv_train);
  cv->add_option("--out", cv_train.out, "results CSV path")->required();
  cv->add_option("--folds", cv_flags.folds)->capture_default_str();
  cv->add_option("--grid-gamma", cv_flags.grid_gamma, "gamma values")->delimiter(',');
  cv->add_option("--grid-lambda", cv_flags.grid_lambda, "lambda values")->delimiter(',');
  cv->add_option("--lambda-ratio", cv_flags.lambda_ratio, "use lambda = ratio * gamma");
  cv->add_option("--method", cv_flags.methods, "fitters to compare, e.g. lire,rulefit")
      ->delimiter(',')
      ->check(CLI::IsMember({"lire", "rulefit"}));
  cv->add_flag("--tune", cv_flags.tune, "pick gamma per fold by hold-out AUC");
  cv->add_option("--validation-fraction", cv_flags.validation_fraction)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(lire::ExitCode::kUsage);
  }

  try {
    if (*train) return cmd_train(train_flags, method);
    if (*predict) return cmd_predict(model_path, data_path, out_path);
    if (*explain) return cmd_explain(model_path, data_path, row, format);
    if (*evaluate) return cmd_evaluate(model_path, data_path, format);
    if (*cv) return cmd_cv(cv_train, cv_flags);
  } catch (const lire::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
