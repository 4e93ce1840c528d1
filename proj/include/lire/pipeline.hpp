#pragma once

// End-to-end training (forest, rule pool, weights), hold-out tuning and the
// k-fold cross-validation harness used by the command-line tool.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "lire/dataset.hpp"
#include "lire/error.hpp"
#include "lire/model.hpp"
#include "lire/optimizer.hpp"
#include "lire/parallel.hpp"
#include "lire/rules.hpp"
#include "lire/tree_ensemble.hpp"

namespace lire {

enum class Method { kLire, kRuleFit };

inline const char* method_name(Method m) { return m == Method::kLire ? "lire" : "rulefit"; }

inline Method parse_method(const std::string& s) {
  if (s == "lire") return Method::kLire;
  if (s == "rulefit") return Method::kRuleFit;
  throw UsageError("cli", "unknown method '" + s + "' (expected lire or rulefit)");
}

// Hyperparameters of one fit. For rulefit, gamma is the l1 penalty and
// lambda is unused.
struct GridPoint {
  double gamma = 0.001;
  double lambda = 1.0;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

struct PipelineConfig {
  Method method = Method::kLire;
  std::size_t trees = 100;
  std::size_t max_depth = 3;
  std::uint64_t seed = 0;
  FitConfig fit;  // gamma and lambda here are the ones used by train()
};

inline Json config_to_json(const PipelineConfig& c) {
  Json j;
  j["method"] = method_name(c.method);
  j["trees"] = c.trees;
  j["max_depth"] = c.max_depth;
  j["seed"] = c.seed;
  j["gamma"] = c.fit.gamma;
  j["lambda"] = c.fit.lambda;
  j["max_iter"] = c.fit.max_iter;
  j["init"] = init_name(c.fit.init);
  j["l1_gamma"] = c.fit.l1_gamma;
  j["weight_clamp"] = c.fit.weight_clamp;
  return j;
}

// Rule pool extracted from a forest trained on one sample.
struct RulePool {
  std::size_t extracted = 0;  // rules before deduplication
  RuleMatrix matrix;
};

inline RulePool build_rule_pool(const Sample& train, std::size_t trees, std::size_t max_depth,
                                std::uint64_t seed) {
  const Forest forest = fit_forest(train, trees, max_depth, seed);
  auto rules = decompose(forest);
  RulePool pool;
  pool.extracted = rules.size();
  pool.matrix = dedup_and_index(rules, train);
  if (pool.matrix.empty()) throw DataError("rule_extraction", "the forest produced no rules");
  return pool;
}

struct FitOutcome {
  RuleEnsembleModel model;
  std::optional<FitReport> report;  // lire only
  double seconds = 0.0;
};

// Fits weights for one grid point on an existing pool.
inline FitOutcome fit_on_pool(const RulePool& pool, const Sample& train, Method method,
                              const FitConfig& fit, const GridPoint& point,
                              const PipelineConfig& echo) {
  const auto start = std::chrono::steady_clock::now();
  FitConfig cfg = fit;
  cfg.gamma = point.gamma;
  cfg.lambda = point.lambda;
  PipelineConfig snapshot = echo;
  snapshot.method = method;
  snapshot.fit.gamma = point.gamma;
  snapshot.fit.lambda = point.lambda;
  FitOutcome out;
  if (method == Method::kLire) {
    FitResult r = fit_lire(pool.matrix, train.labels(), cfg);
    out.model = make_model(r.state, train.schema(), config_to_json(snapshot));
    out.report = std::move(r.report);
  } else {
    cfg.validate();
    WeightState state = fit_l1(pool.matrix, train.labels(), point.gamma, cfg.weight_clamp,
                               cfg.l1_tol, cfg.l1_max_cycles);
    Json j = config_to_json(snapshot);
    j.erase("lambda");
    j.erase("init");
    j.erase("l1_gamma");
    out.model = make_model(state, train.schema(), std::move(j));
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

struct TrainOutcome {
  RuleEnsembleModel model;
  std::optional<FitReport> report;
  std::size_t pool_size = 0;
  std::size_t extracted = 0;
  MetricsReport train_metrics;
  double seconds = 0.0;
};

inline TrainOutcome train(const Sample& sample, const PipelineConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const RulePool pool = build_rule_pool(sample, config.trees, config.max_depth, config.seed);
  FitOutcome fit = fit_on_pool(pool, sample, config.method, config.fit,
                               {config.fit.gamma, config.fit.lambda}, config);
  TrainOutcome out{std::move(fit.model), std::move(fit.report), pool.matrix.size(),
                   pool.extracted, {}, 0.0};
  out.train_metrics = evaluate(out.model, sample);
  out.model.set_metrics_at_train(out.train_metrics);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// Hyperparameter grids used for hold-out tuning.
inline std::vector<GridPoint> default_lire_grid() {
  std::vector<GridPoint> g;
  for (double gamma : {0.001, 0.002, 0.003, 0.004, 0.005}) g.push_back({gamma, 2.0 * gamma});
  return g;
}

inline std::vector<GridPoint> default_rulefit_grid() {
  std::vector<GridPoint> g;
  for (double gamma : {0.0005, 0.00075, 0.001, 0.0025, 0.005, 0.0075, 0.01, 0.025, 0.05}) {
    g.push_back({gamma, 0.0});
  }
  return g;
}

struct TuneResult {
  GridPoint best;
  std::vector<double> scores;  // validation AUC (accuracy if AUC is undefined), per grid point
};

// Splits `sample` into fit/validation parts, builds one rule pool on the fit
// part and picks the grid point with the best validation AUC; ties keep the
// earlier point.
inline TuneResult tune_holdout(const Sample& sample, Method method, const std::vector<GridPoint>& grid,
                               const PipelineConfig& config, double validation_fraction,
                               std::size_t threads = 1) {
  if (grid.empty()) throw UsageError("cli", "empty hyperparameter grid");
  const Split split = holdout_split(sample, validation_fraction, config.seed + 7919);
  const RulePool pool = build_rule_pool(split.train, config.trees, config.max_depth, config.seed);
  TuneResult result;
  result.scores.assign(grid.size(), 0.0);
  parallel_for(
      grid.size(),
      [&](std::size_t i) {
        const FitOutcome fit = fit_on_pool(pool, split.train, method, config.fit, grid[i], config);
        const MetricsReport m = evaluate(fit.model, split.test);
        result.scores[i] = m.auc.value_or(m.accuracy);
      },
      threads);
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (result.scores[i] > result.scores[best]) best = i;
  }
  result.best = grid[best];
  return result;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CvSettings {
  std::size_t folds = 10;
  std::vector<Method> methods{Method::kLire};
  // Fixed grid: every (gamma, lambda) pair is fitted on every fold.
  std::vector<GridPoint> lire_grid;
  std::vector<GridPoint> rulefit_grid;
  // Tuned mode: per fold, pick one point of the grid by hold-out AUC on the
  // training part and report only that point.
  bool tune = false;
  double validation_fraction = 0.2;
  PipelineConfig base;
};

struct CvRow {
  std::size_t fold = 0;
  Method method = Method::kLire;
  GridPoint point;
  MetricsReport test;
  std::size_t pool_size = 0;
  double fit_seconds = 0.0;
};

struct CvSummary {
  Method method = Method::kLire;
  std::optional<GridPoint> point;  // empty in tuned mode
  std::size_t count = 0;
  double mean[6] = {};
  double stdev[6] = {};
};

struct CvResult {
  std::vector<CvRow> rows;  // ordered by (fold, method, grid index)
  std::vector<CvSummary> summary;
};

inline constexpr const char* kCvMetricNames[6] = {"accuracy",          "f1",
                                                  "auc",               "n_support",
                                                  "avg_local_support", "support_ratio"};

namespace detail {

inline double metric_value(const MetricsReport& m, std::size_t k) {
  switch (k) {
    case 0: return m.accuracy;
    case 1: return m.f1;
    case 2: return m.auc.value_or(std::nan(""));
    case 3: return static_cast<double>(m.n_support);
    case 4: return m.avg_local_support;
    default: return m.support_ratio;
  }
}

inline const std::vector<GridPoint>& grid_for(const CvSettings& s, Method m) {
  return m == Method::kLire ? s.lire_grid : s.rulefit_grid;
}

inline std::vector<CvSummary> summarize(const std::vector<CvRow>& rows, const CvSettings& s) {
  std::vector<CvSummary> out;
  for (Method method : s.methods) {
    const auto& grid = grid_for(s, method);
    const std::size_t groups = s.tune ? 1 : grid.size();
    for (std::size_t g = 0; g < groups; ++g) {
      CvSummary sum;
      sum.method = method;
      if (!s.tune) sum.point = grid[g];
      for (std::size_t k = 0; k < 6; ++k) {
        std::vector<double> v;
        for (const auto& r : rows) {
          if (r.method != method || (!s.tune && !(r.point == grid[g]))) continue;
          const double x = metric_value(r.test, k);
          if (!std::isnan(x)) v.push_back(x);
        }
        if (k == 0) sum.count = v.size();
        if (v.empty()) {
          sum.mean[k] = sum.stdev[k] = std::nan("");
          continue;
        }
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        sum.mean[k] = mean;
        sum.stdev[k] = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
      }
      out.push_back(sum);
    }
  }
  return out;
}

}  // namespace detail

inline CvResult cross_validate(const Sample& sample, const CvSettings& settings) {
  if (settings.methods.empty()) throw UsageError("cli", "no method selected");
  for (Method m : settings.methods) {
    if (detail::grid_for(settings, m).empty()) throw UsageError("cli", "empty hyperparameter grid");
  }
  const std::vector<Split> folds = kfold_split(sample, settings.folds, settings.base.seed);
  const PipelineConfig& base = settings.base;

  // One task per (fold, method, grid slot); slots are grid points, or a single
  // tuned slot per method.
  struct Task {
    std::size_t fold;
    Method method;
    std::size_t slot;
  };
  std::vector<Task> tasks;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (Method m : settings.methods) {
      const std::size_t slots = settings.tune ? 1 : detail::grid_for(settings, m).size();
      for (std::size_t s = 0; s < slots; ++s) tasks.push_back({f, m, s});
    }
  }

  // Rule pools are shared by all tasks of a fold and built up front.
  std::vector<RulePool> pools(folds.size());
  parallel_for(folds.size(), [&](std::size_t f) {
    pools[f] = build_rule_pool(folds[f].train, base.trees, base.max_depth, base.seed + f);
  });

  std::vector<CvRow> rows(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t i) {
    const Task& t = tasks[i];
    const Split& split = folds[t.fold];
    PipelineConfig cfg = base;
    cfg.seed = base.seed + t.fold;
    cfg.method = t.method;
    GridPoint point;
    if (settings.tune) {
      point = tune_holdout(split.train, t.method, detail::grid_for(settings, t.method), cfg,
                           settings.validation_fraction)
                  .best;
    } else {
      point = detail::grid_for(settings, t.method)[t.slot];
    }
    const FitOutcome fit = fit_on_pool(pools[t.fold], split.train, t.method, cfg.fit, point, cfg);
    rows[i] = {t.fold, t.method, point, evaluate(fit.model, split.test), pools[t.fold].matrix.size(),
               fit.seconds};
  });

  CvResult result;
  result.summary = detail::summarize(rows, settings);
  result.rows = std::move(rows);
  return result;
}

namespace detail {

inline std::string csv_number(double x) {
  if (std::isnan(x)) return "";
  return fmt::format("{}", x);
}

}  // namespace detail

// Results table: one "fold" row per fit, then "mean" and "std" rows per
// configuration. Only quantities that are deterministic given the flags are
// written, so repeated runs produce identical bytes.
inline std::string cv_results_csv(const CvResult& r) {
  std::ostringstream out;
  out << "kind,fold,method,gamma,lambda,n_rules";
  for (const char* name : kCvMetricNames) out << ',' << name;
  out << '\n';
  for (const auto& row : r.rows) {
    out << "fold," << row.fold << ',' << method_name(row.method) << ','
        << detail::csv_number(row.point.gamma) << ','
        << (row.method == Method::kLire ? detail::csv_number(row.point.lambda) : "") << ','
        << row.pool_size;
    for (std::size_t k = 0; k < 6; ++k) out << ',' << detail::csv_number(detail::metric_value(row.test, k));
    out << '\n';
  }
  for (const auto& s : r.summary) {
    for (int which = 0; which < 2; ++which) {
      out << (which == 0 ? "mean" : "std") << ",," << method_name(s.method) << ',';
      if (s.point) {
        out << detail::csv_number(s.point->gamma) << ','
            << (s.method == Method::kLire ? detail::csv_number(s.point->lambda) : "");
      } else {
        out << "tuned,tuned";
      }
      out << ',';
      for (std::size_t k = 0; k < 6; ++k) {
        out << ',' << detail::csv_number(which == 0 ? s.mean[k] : s.stdev[k]);
      }
      out << '\n';
    }
  }
  return out.str();
}

// Wall-clock fit times, kept apart from the deterministic results table.
inline std::string cv_timing_csv(const CvResult& r) {
  std::string out = "fold,method,gamma,lambda,fit_seconds\n";
  for (const auto& row : r.rows) {
    out += fmt::format("{},{},{},{},{:.6f}\n", row.fold, method_name(row.method),
                       detail::csv_number(row.point.gamma),
                       row.method == Method::kLire ? detail::csv_number(row.point.lambda) : "",
                       row.fit_seconds);
  }
  return out;
}

}  // namespace lire
