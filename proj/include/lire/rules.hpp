#pragma once

// Conjunctive rules decomposed from decision trees, and the binary activation
// matrix the optimizer works on.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "lire/dataset.hpp"
#include "lire/error.hpp"
#include "lire/tree_ensemble.hpp"

namespace lire {

enum class Op { kLe, kGt, kEq, kNe };

inline const char* op_symbol(Op op) {
  switch (op) {
    case Op::kLe: return "<=";
    case Op::kGt: return ">";
    case Op::kEq: return "==";
    case Op::kNe: return "!=";
  }
  return "?";
}

inline Op parse_op(const std::string& s) {
  if (s == "<=") return Op::kLe;
  if (s == ">") return Op::kGt;
  if (s == "==") return Op::kEq;
  if (s == "!=") return Op::kNe;
  throw DataError("rule_extraction", "unknown operator '" + s + "'");
}

// kLe/kGt compare a numeric column against `value`; kEq/kNe test a one-hot
// column for 1 or 0 (value is 1).
struct Condition {
  std::size_t feature = 0;
  Op op = Op::kLe;
  double value = 0.0;

  bool holds(std::span<const double> x) const {
    const double v = x[feature];
    switch (op) {
      case Op::kLe: return v <= value;
      case Op::kGt: return v > value;
      case Op::kEq: return v > 0.5;
      case Op::kNe: return v <= 0.5;
    }
    return false;
  }

  friend bool operator==(const Condition&, const Condition&) = default;
};

class Rule {
 public:
  explicit Rule(std::vector<Condition> conditions) {
    if (conditions.empty()) throw UsageError("rule_extraction", "a rule needs a condition");
    for (const auto& c : conditions) add(c);
  }

  // Adds a conjunct, tightening an existing bound on the same column instead
  // of repeating it.
  void add(const Condition& c) {
    for (auto& existing : conditions_) {
      if (existing.feature != c.feature || existing.op != c.op) continue;
      if (c.op == Op::kLe) existing.value = std::min(existing.value, c.value);
      if (c.op == Op::kGt) existing.value = std::max(existing.value, c.value);
      return;
    }
    conditions_.push_back(c);
  }

  const std::vector<Condition>& conditions() const { return conditions_; }
  std::size_t length() const { return conditions_.size(); }

  bool evaluate(std::span<const double> x) const {
    for (const auto& c : conditions_) {
      if (!c.holds(x)) return false;
    }
    return true;
  }

  // Conditions sorted by (feature, op) for order-insensitive comparison.
  std::vector<Condition> normalized() const {
    auto out = conditions_;
    std::sort(out.begin(), out.end(), [](const Condition& a, const Condition& b) {
      if (a.feature != b.feature) return a.feature < b.feature;
      if (a.op != b.op) return a.op < b.op;
      return a.value < b.value;
    });
    return out;
  }

  friend bool operator==(const Rule&, const Rule&) = default;

 private:
  std::vector<Condition> conditions_;
};

inline int evaluate_rule(const Rule& rule, std::span<const double> x) {
  for (const auto& c : rule.conditions()) {
    if (c.feature >= x.size()) {
      throw UsageError("rule_extraction", "condition refers to column " +
                                              std::to_string(c.feature) + " but row has " +
                                              std::to_string(x.size()));
    }
  }
  return rule.evaluate(x) ? 1 : 0;
}

// "Age > 31 & Sex = Male" with the original feature names and categories.
inline std::string render_condition(const Condition& c, const Schema* schema) {
  const bool have_name = schema != nullptr && c.feature < schema->num_columns();
  const std::string name = have_name ? schema->feature_name(c.feature)
                                     : fmt::format("x{}", c.feature);
  switch (c.op) {
    case Op::kLe: return fmt::format("{} ≤ {}", name, c.value);
    case Op::kGt: return fmt::format("{} > {}", name, c.value);
    case Op::kEq:
    case Op::kNe: {
      const std::string cat = have_name && schema->is_categorical(c.feature)
                                  ? schema->category_label(c.feature)
                                  : std::string("1");
      return fmt::format("{} {} {}", name, c.op == Op::kEq ? "=" : "≠", cat);
    }
  }
  return {};
}

inline std::string render(const Rule& rule, const Schema* schema = nullptr) {
  std::string out;
  for (const auto& c : rule.conditions()) {
    if (!out.empty()) out += " & ";
    out += render_condition(c, schema);
  }
  return out;
}

namespace detail {

inline void collect_rules(const Tree& tree, int index, std::vector<Condition>& path,
                          std::vector<Rule>& out) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
  if (node.is_leaf) return;
  const bool category = node.kind == SplitKind::kCategory;
  const Condition go_left{node.feature, category ? Op::kNe : Op::kLe,
                          category ? 1.0 : node.threshold};
  const Condition go_right{node.feature, category ? Op::kEq : Op::kGt,
                           category ? 1.0 : node.threshold};
  for (const auto& [child, cond] : {std::pair{node.left, go_left}, std::pair{node.right, go_right}}) {
    path.push_back(cond);
    out.emplace_back(path);
    collect_rules(tree, child, path, out);
    path.pop_back();
  }
}

}  // namespace detail

// One rule per non-root node: the conjunction of branch decisions on the path
// from the root.
inline std::vector<Rule> decompose(const Tree& tree) {
  std::vector<Rule> rules;
  if (tree.nodes.empty()) return rules;
  std::vector<Condition> path;
  detail::collect_rules(tree, 0, path, rules);
  return rules;
}

inline std::vector<Rule> decompose(const Forest& forest) {
  if (forest.trees.empty()) throw UsageError("rule_extraction", "empty forest");
  std::vector<Rule> rules;
  for (const auto& tree : forest.trees) {
    auto part = decompose(tree);
    rules.insert(rules.end(), std::make_move_iterator(part.begin()),
                 std::make_move_iterator(part.end()));
  }
  return rules;
}

// Column-oriented activation structure: column m lists, in increasing order,
// the rows on which rule m fires.
class RuleMatrix {
 public:
  RuleMatrix() = default;
  RuleMatrix(std::size_t n_rows, std::vector<Rule> rules,
             std::vector<std::vector<std::uint32_t>> columns)
      : n_rows_(n_rows), rules_(std::move(rules)), columns_(std::move(columns)) {
    if (rules_.size() != columns_.size()) {
      throw UsageError("rule_extraction", "rule and column counts differ");
    }
    for (const auto& col : columns_) {
      if (col.empty()) throw UsageError("rule_extraction", "zero-coverage column");
      for (std::size_t i = 0; i < col.size(); ++i) {
        if (col[i] >= n_rows_ || (i > 0 && col[i] <= col[i - 1])) {
          throw UsageError("rule_extraction", "column indices must be increasing and in range");
        }
      }
    }
  }

  std::size_t rows() const { return n_rows_; }
  std::size_t size() const { return rules_.size(); }
  bool empty() const { return rules_.empty(); }

  const Rule& rule(std::size_t m) const { return rules_[m]; }
  const std::vector<Rule>& rules() const { return rules_; }
  std::span<const std::uint32_t> column(std::size_t m) const { return columns_[m]; }

  double coverage(std::size_t m) const {
    return static_cast<double>(columns_[m].size()) / static_cast<double>(n_rows_);
  }

 private:
  std::size_t n_rows_ = 0;
  std::vector<Rule> rules_;
  std::vector<std::vector<std::uint32_t>> columns_;
};

inline std::vector<std::uint32_t> activation(const Rule& rule, const Sample& sample) {
  std::vector<std::uint32_t> col;
  for (std::size_t n = 0; n < sample.rows(); ++n) {
    if (rule.evaluate(sample.row(n))) col.push_back(static_cast<std::uint32_t>(n));
  }
  return col;
}

// Collapses rules with identical activation vectors on `sample` (keeping the
// shortest, earliest on ties) and drops rules that never fire.
inline RuleMatrix dedup_and_index(const std::vector<Rule>& rules, const Sample& sample) {
  if (sample.rows() == 0) throw UsageError("rule_extraction", "empty sample");
  struct Hash {
    std::size_t operator()(const std::vector<std::uint32_t>& v) const {
      std::size_t h = v.size();
      for (auto x : v) h ^= std::hash<std::uint32_t>{}(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      return h;
    }
  };
  std::unordered_map<std::vector<std::uint32_t>, std::size_t, Hash> seen;
  std::vector<Rule> kept_rules;
  std::vector<std::vector<std::uint32_t>> kept_columns;
  for (const auto& rule : rules) {
    for (const auto& c : rule.conditions()) {
      if (c.feature >= sample.cols()) {
        throw UsageError("rule_extraction", "rule refers to a column outside the sample");
      }
    }
    auto col = activation(rule, sample);
    if (col.empty()) continue;
    auto [it, inserted] = seen.try_emplace(col, kept_rules.size());
    if (inserted) {
      kept_rules.push_back(rule);
      kept_columns.push_back(std::move(col));
    } else if (rule.length() < kept_rules[it->second].length()) {
      kept_rules[it->second] = rule;
    }
  }
  return RuleMatrix(sample.rows(), std::move(kept_rules), std::move(kept_columns));
}

}  // namespace lire
