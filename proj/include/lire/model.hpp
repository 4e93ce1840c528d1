#pragma once

// Frozen rule-ensemble classifier: prediction, exact per-row explanations,
// metrics and JSON persistence.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "lire/dataset.hpp"
#include "lire/error.hpp"
#include "lire/objective.hpp"
#include "lire/rules.hpp"

namespace lire {

using Json = nlohmann::ordered_json;

inline constexpr int kModelSchemaVersion = 1;

struct WeightedRule {
  Rule rule;
  double weight = 0.0;
};

struct MetricsReport {
  double accuracy = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;  // absent when the sample holds a single class
  std::size_t n_support = 0;
  double avg_local_support = 0.0;
  double support_ratio = 0.0;
};

class RuleEnsembleModel {
 public:
  RuleEnsembleModel() = default;

  RuleEnsembleModel(std::vector<WeightedRule> rules, double intercept, Schema schema,
                    Json config = Json::object(), std::string created_at = "")
      : rules_(std::move(rules)),
        intercept_(intercept),
        schema_(std::move(schema)),
        config_(std::move(config)),
        created_at_(std::move(created_at)) {
    validate();
  }

  const std::vector<WeightedRule>& rules() const { return rules_; }
  double intercept() const { return intercept_; }
  const Schema& schema() const { return schema_; }
  const Json& config() const { return config_; }
  const std::string& created_at() const { return created_at_; }
  std::size_t num_columns() const { return schema_.num_columns(); }

  const std::optional<MetricsReport>& metrics_at_train() const { return metrics_at_train_; }
  void set_metrics_at_train(MetricsReport m) { metrics_at_train_ = m; }

  // Drops rule i (used by masking checks).
  RuleEnsembleModel without_rule(std::size_t i) const {
    RuleEnsembleModel copy = *this;
    copy.rules_.erase(copy.rules_.begin() + static_cast<std::ptrdiff_t>(i));
    return copy;
  }

 private:
  void validate() const {
    if (!std::isfinite(intercept_)) throw DataError("model", "non-finite intercept");
    for (const auto& wr : rules_) {
      if (wr.weight == 0.0 || !std::isfinite(wr.weight)) {
        throw DataError("model", "stored rules must have finite nonzero weights");
      }
      for (const auto& c : wr.rule.conditions()) {
        if (c.feature >= schema_.num_columns()) {
          throw DataError("model", "rule refers to unknown column " + std::to_string(c.feature));
        }
        const bool categorical = schema_.is_categorical(c.feature);
        const bool equality = c.op == Op::kEq || c.op == Op::kNe;
        if (categorical != equality) {
          throw DataError("model", "operator does not match the kind of column '" +
                                       schema_.column_name(c.feature) + "'");
        }
      }
    }
  }

  std::vector<WeightedRule> rules_;
  double intercept_ = 0.0;
  Schema schema_;
  Json config_ = Json::object();
  std::string created_at_;
  std::optional<MetricsReport> metrics_at_train_;
};

// UTC timestamp; SOURCE_DATE_EPOCH pins it for reproducible artifacts.
inline std::string current_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      t = static_cast<std::time_t>(std::stoll(epoch));
    } catch (const std::exception&) {
    }
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Freezes the nonzero weights of a fitted state, largest |weight| first.
inline RuleEnsembleModel make_model(const WeightState& state, const Schema& schema,
                                    Json config = Json::object()) {
  std::vector<std::size_t> order = state.support();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(state.weight(a)) > std::abs(state.weight(b));
  });
  std::vector<WeightedRule> rules;
  rules.reserve(order.size());
  for (std::size_t m : order) rules.push_back({state.matrix().rule(m), state.weight(m)});
  return RuleEnsembleModel(std::move(rules), state.intercept(), schema, std::move(config),
                           current_timestamp());
}

namespace detail {

inline void check_dimension(const RuleEnsembleModel& model, std::span<const double> x) {
  if (x.size() != model.num_columns()) {
    throw UsageError("model", "input has " + std::to_string(x.size()) +
                                  " columns, model expects " +
                                  std::to_string(model.num_columns()));
  }
}

}  // namespace detail

inline double decision_score(const RuleEnsembleModel& model, std::span<const double> x) {
  detail::check_dimension(model, x);
  double score = model.intercept();
  for (const auto& wr : model.rules()) {
    if (wr.rule.evaluate(x)) score += wr.weight;
  }
  return score;
}

// sgn with sgn(0) = +1.
inline int sign_label(double score) { return score >= 0.0 ? 1 : -1; }

inline int predict(const RuleEnsembleModel& model, std::span<const double> x) {
  return sign_label(decision_score(model, x));
}

struct FiredRule {
  std::size_t index = 0;  // position in model.rules()
  std::string text;
  double weight = 0.0;
};

struct Explanation {
  std::vector<FiredRule> fired;
  double intercept = 0.0;
  double score = 0.0;
  int label = 1;
};

// The local support of x: exactly the stored rules that fire on it.
inline Explanation explain(const RuleEnsembleModel& model, std::span<const double> x) {
  detail::check_dimension(model, x);
  Explanation e;
  e.intercept = model.intercept();
  // Accumulated in the same order as decision_score so the two agree exactly.
  e.score = e.intercept;
  for (std::size_t i = 0; i < model.rules().size(); ++i) {
    const auto& wr = model.rules()[i];
    if (!wr.rule.evaluate(x)) continue;
    e.fired.push_back({i, render(wr.rule, &model.schema()), wr.weight});
    e.score += wr.weight;
  }
  e.label = sign_label(e.score);
  return e;
}

inline std::size_t local_support_size(const RuleEnsembleModel& model, std::span<const double> x) {
  std::size_t k = 0;
  for (const auto& wr : model.rules()) k += wr.rule.evaluate(x) ? 1 : 0;
  return k;
}

// Rank-statistic AUC with mid-ranks for tied scores.
inline std::optional<double> auc_score(std::span<const double> scores, std::span<const int> labels) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  double n_pos = 0.0, n_neg = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] > 0) pos_rank_sum += mid;
    }
    i = j;
  }
  for (int y : labels) (y > 0 ? n_pos : n_neg) += 1.0;
  if (n_pos == 0.0 || n_neg == 0.0) return std::nullopt;
  return (pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

inline MetricsReport evaluate(const RuleEnsembleModel& model, std::span<const double> values,
                              std::size_t cols, std::span<const int> labels) {
  const std::size_t n = labels.size();
  if (n == 0) throw UsageError("model", "cannot evaluate on an empty sample");
  if (values.size() != n * cols) throw UsageError("model", "feature matrix size mismatch");
  std::vector<double> scores(n);
  double correct = 0.0, tp = 0.0, fp = 0.0, fn = 0.0, local = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = values.subspan(i * cols, cols);
    detail::check_dimension(model, x);
    double score = model.intercept();
    for (const auto& wr : model.rules()) {
      if (wr.rule.evaluate(x)) {
        score += wr.weight;
        local += 1.0;
      }
    }
    scores[i] = score;
    const int pred = sign_label(score);
    correct += pred == labels[i] ? 1.0 : 0.0;
    if (pred > 0 && labels[i] > 0) tp += 1.0;
    if (pred > 0 && labels[i] < 0) fp += 1.0;
    if (pred < 0 && labels[i] > 0) fn += 1.0;
  }
  MetricsReport r;
  r.accuracy = correct / static_cast<double>(n);
  r.f1 = (2.0 * tp + fp + fn) > 0.0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;
  r.auc = auc_score(scores, labels);
  r.n_support = model.rules().size();
  r.avg_local_support = local / static_cast<double>(n);
  r.support_ratio = r.n_support == 0 ? 0.0 : r.avg_local_support / static_cast<double>(r.n_support);
  return r;
}

inline MetricsReport evaluate(const RuleEnsembleModel& model, const Sample& sample) {
  std::vector<double> values;
  values.reserve(sample.rows() * sample.cols());
  for (std::size_t n = 0; n < sample.rows(); ++n) {
    auto r = sample.row(n);
    values.insert(values.end(), r.begin(), r.end());
  }
  return evaluate(model, values, sample.cols(), sample.labels());
}

// ---------------------------------------------------------------------------
// JSON

inline Json metrics_to_json(const MetricsReport& m) {
  Json j;
  j["accuracy"] = m.accuracy;
  j["f1"] = m.f1;
  j["auc"] = m.auc ? Json(*m.auc) : Json(nullptr);
  j["n_support"] = m.n_support;
  j["avg_local_support"] = m.avg_local_support;
  j["support_ratio"] = m.support_ratio;
  return j;
}

inline MetricsReport metrics_from_json(const Json& j) {
  MetricsReport m;
  m.accuracy = j.at("accuracy").get<double>();
  m.f1 = j.at("f1").get<double>();
  if (!j.at("auc").is_null()) m.auc = j.at("auc").get<double>();
  m.n_support = j.at("n_support").get<std::size_t>();
  m.avg_local_support = j.at("avg_local_support").get<double>();
  m.support_ratio = j.at("support_ratio").get<double>();
  return m;
}

inline Json schema_to_json(const Schema& schema) {
  Json features = Json::array();
  for (const auto& f : schema.features) {
    Json jf;
    jf["name"] = f.name;
    jf["kind"] = f.kind == FeatureKind::kNumeric ? "numeric" : "categorical";
    if (f.kind == FeatureKind::kCategorical) jf["categories"] = f.categories;
    features.push_back(std::move(jf));
  }
  return features;
}

inline Schema schema_from_json(const Json& features, const Json& label) {
  Schema schema;
  for (const auto& jf : features) {
    FeatureSpec spec;
    spec.name = jf.at("name").get<std::string>();
    const auto kind = jf.at("kind").get<std::string>();
    if (kind == "numeric") {
      spec.kind = FeatureKind::kNumeric;
    } else if (kind == "categorical") {
      spec.kind = FeatureKind::kCategorical;
      spec.categories = jf.at("categories").get<std::vector<std::string>>();
      if (spec.categories.empty()) {
        throw DataError("model", "categorical feature '" + spec.name + "' has no categories");
      }
      auto sorted = spec.categories;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw DataError("model", "duplicate category in feature '" + spec.name + "'");
      }
    } else {
      throw DataError("model", "unknown feature kind '" + kind + "'");
    }
    const std::size_t index = schema.features.size();
    if (spec.kind == FeatureKind::kNumeric) {
      schema.columns.push_back({index, std::nullopt});
    } else {
      for (std::size_t k = 0; k < spec.categories.size(); ++k) schema.columns.push_back({index, k});
    }
    schema.features.push_back(std::move(spec));
  }
  schema.label.column = label.at("column").get<std::string>();
  schema.label.positive = label.at("positive").get<std::string>();
  schema.label.negative = label.at("negative").get<std::string>();
  return schema;
}

inline Json rule_to_json(const Rule& rule) {
  Json conds = Json::array();
  for (const auto& c : rule.conditions()) {
    Json jc;
    jc["feature"] = c.feature;
    jc["op"] = op_symbol(c.op);
    jc["value"] = c.value;
    conds.push_back(std::move(jc));
  }
  return conds;
}

inline Rule rule_from_json(const Json& conds) {
  std::vector<Condition> out;
  for (const auto& jc : conds) {
    out.push_back({jc.at("feature").get<std::size_t>(), parse_op(jc.at("op").get<std::string>()),
                   jc.at("value").get<double>()});
  }
  if (out.empty()) throw DataError("model", "rule without conditions");
  return Rule(std::move(out));
}

inline Json to_json(const RuleEnsembleModel& model) {
  Json j;
  j["version"] = kModelSchemaVersion;
  j["intercept"] = model.intercept();
  Json rules = Json::array();
  for (const auto& wr : model.rules()) {
    Json jr;
    jr["text"] = render(wr.rule, &model.schema());
    jr["conditions"] = rule_to_json(wr.rule);
    jr["weight"] = wr.weight;
    rules.push_back(std::move(jr));
  }
  j["rules"] = std::move(rules);
  j["features"] = schema_to_json(model.schema());
  j["label"] = {{"column", model.schema().label.column},
                {"positive", model.schema().label.positive},
                {"negative", model.schema().label.negative}};
  j["config"] = model.config();
  j["metrics_at_train"] =
      model.metrics_at_train() ? metrics_to_json(*model.metrics_at_train()) : Json(nullptr);
  j["created_at"] = model.created_at();
  return j;
}

inline RuleEnsembleModel from_json(const Json& j) {
  try {
    if (!j.is_object() || !j.contains("version")) throw DataError("model", "missing schema version");
    const int version = j.at("version").get<int>();
    if (version != kModelSchemaVersion) {
      throw DataError("model", "unsupported model schema version " + std::to_string(version));
    }
    Schema schema = schema_from_json(j.at("features"), j.at("label"));
    std::vector<WeightedRule> rules;
    for (const auto& jr : j.at("rules")) {
      rules.push_back({rule_from_json(jr.at("conditions")), jr.at("weight").get<double>()});
    }
    RuleEnsembleModel model(std::move(rules), j.at("intercept").get<double>(), std::move(schema),
                            j.value("config", Json::object()), j.value("created_at", std::string{}));
    if (j.contains("metrics_at_train") && !j.at("metrics_at_train").is_null()) {
      model.set_metrics_at_train(metrics_from_json(j.at("metrics_at_train")));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model", std::string("invalid model file: ") + e.what());
  }
}

inline std::string dump_model(const RuleEnsembleModel& model) { return to_json(model).dump(2) + "\n"; }

inline RuleEnsembleModel parse_model(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("model", "malformed JSON at byte offset " + std::to_string(e.byte) + ": " +
                                 e.what());
  }
  return from_json(j);
}

inline void save(const RuleEnsembleModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("model", "cannot write '" + path + "'");
  out << dump_model(model);
  if (!out) throw DataError("model", "write failed for '" + path + "'");
}

inline RuleEnsembleModel load(const std::string& path) {
  return parse_model(csv::read_file(path));
}

// ---------------------------------------------------------------------------
// Explanation rendering

inline Json explanation_to_json(const Explanation& e, const Schema& schema) {
  Json j;
  Json fired = Json::array();
  for (const auto& f : e.fired) fired.push_back({{"rule", f.text}, {"weight", f.weight}});
  j["fired"] = std::move(fired);
  j["intercept"] = e.intercept;
  j["score"] = e.score;
  j["label"] = e.label;
  j["prediction"] = e.label > 0 ? schema.label.positive : schema.label.negative;
  return j;
}

inline std::string explanation_to_text(const Explanation& e, const Schema& schema) {
  std::string out = fmt::format("prediction: {} ({})\n", e.label > 0 ? "+1" : "-1",
                                e.label > 0 ? schema.label.positive : schema.label.negative);
  out += fmt::format("local support: {} rule(s)\n", e.fired.size());
  for (const auto& f : e.fired) out += fmt::format("  * {:+}  {}\n", f.weight, f.text);
  std::string sum;
  for (const auto& f : e.fired) sum += fmt::format("{} + ", f.weight);
  out += fmt::format("score = {}{} (intercept) = {}\n", sum, e.intercept, e.score);
  return out;
}

}  // namespace lire
