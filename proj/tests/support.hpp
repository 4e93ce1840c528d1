#pragma once

// Shared fixtures for the unit and acceptance tests. Everything named
// `brute_*` recomputes a quantity from first principles without touching the
// library's caches, so it can serve as an independent reference.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lire/lire.hpp"

namespace lire_test {

inline std::shared_ptr<const lire::Schema> numeric_schema(std::size_t cols) {
  auto schema = std::make_shared<lire::Schema>();
  for (std::size_t d = 0; d < cols; ++d) {
    schema->features.push_back({"x" + std::to_string(d), lire::FeatureKind::kNumeric, {}});
    schema->columns.push_back({d, std::nullopt});
  }
  schema->label = {"y", "pos", "neg"};
  return schema;
}

inline lire::Sample numeric_sample(std::vector<double> values, std::size_t cols,
                                   std::vector<int> labels) {
  return lire::Sample(std::move(values), cols, std::move(labels), numeric_schema(cols));
}

// Rows of uniform [0,1) features; the label is +1 when any of three
// overlapping planted rules fires, flipped with probability `noise`.
inline lire::Sample planted_sample(std::size_t n, std::uint64_t seed, double noise = 0.1) {
  constexpr std::size_t kCols = 6;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> values(n * kCols);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    double* x = &values[i * kCols];
    for (std::size_t d = 0; d < kCols; ++d) x[d] = std::round(u(rng) * 1000.0) / 1000.0;
    const bool fired = (x[0] > 0.55 && x[1] <= 0.5) || (x[2] > 0.65 && x[0] > 0.3) ||
                       (x[3] <= 0.25 && x[4] > 0.4);
    labels[i] = fired ? 1 : -1;
    if (u(rng) < noise) labels[i] = -labels[i];
  }
  return numeric_sample(std::move(values), kCols, std::move(labels));
}

// Random activation matrix: each rule fires on each row with its own
// probability, with at least one row per rule.
inline lire::RuleMatrix random_matrix(std::mt19937_64& rng, std::size_t n_rows, std::size_t n_rules) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, n_rows - 1);
  std::vector<lire::Rule> rules;
  std::vector<std::vector<std::uint32_t>> cols;
  for (std::size_t m = 0; m < n_rules; ++m) {
    const double p = 0.05 + 0.9 * u(rng);
    std::vector<std::uint32_t> col;
    for (std::size_t n = 0; n < n_rows; ++n) {
      if (u(rng) < p) col.push_back(static_cast<std::uint32_t>(n));
    }
    if (col.empty()) col.push_back(static_cast<std::uint32_t>(pick(rng)));
    rules.emplace_back(std::vector<lire::Condition>{{m, lire::Op::kLe, 0.5}});
    cols.push_back(std::move(col));
  }
  return lire::RuleMatrix(n_rows, std::move(rules), std::move(cols));
}

inline std::vector<int> random_labels(std::mt19937_64& rng, std::size_t n) {
  std::bernoulli_distribution coin(0.5);
  std::vector<int> y(n);
  for (auto& v : y) v = coin(rng) ? 1 : -1;
  return y;
}

// Dense 0/1 activation table, indexed [row][rule].
inline std::vector<std::vector<int>> dense(const lire::RuleMatrix& m) {
  std::vector<std::vector<int>> a(m.rows(), std::vector<int>(m.size(), 0));
  for (std::size_t j = 0; j < m.size(); ++j) {
    for (auto n : m.column(j)) a[n][j] = 1;
  }
  return a;
}

struct BruteTerms {
  double risk = 0.0;
  double omega_global = 0.0;
  double omega_local = 0.0;
  double g(double gamma, double lambda) const {
    return risk + gamma * omega_global + lambda * omega_local;
  }
};

// The objective terms straight from the definitions, using a dense scan.
inline BruteTerms brute_terms(const std::vector<std::vector<int>>& act, const std::vector<int>& y,
                              const std::vector<double>& alpha, double intercept) {
  BruteTerms t;
  std::size_t k = 0;
  for (double a : alpha) k += a != 0.0 ? 1 : 0;
  t.omega_global = static_cast<double>(k);
  const double n = static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    double f = intercept;
    std::size_t local = 0;
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      if (act[i][j] && alpha[j] != 0.0) {
        f += alpha[j];
        ++local;
      }
    }
    t.risk += std::exp(-static_cast<double>(y[i]) * f) / n;
    if (k > 0) t.omega_local += static_cast<double>(local) / static_cast<double>(k) / n;
  }
  return t;
}

// The depth-2 example tree: the root tests x1 <= 31; its right child tests
// whether the one-hot column "x2 = 1" is set.
inline std::shared_ptr<const lire::Schema> example_tree_schema() {
  auto schema = std::make_shared<lire::Schema>();
  schema->features.push_back({"x1", lire::FeatureKind::kNumeric, {}});
  schema->features.push_back({"x2", lire::FeatureKind::kCategorical, {"1", "0"}});
  schema->columns = {{0, std::nullopt}, {1, 0}, {1, 1}};
  schema->label = {"y", "pos", "neg"};
  return schema;
}

inline lire::Tree example_tree() {
  lire::Tree t;
  auto node = [](int id, bool leaf, std::size_t feature, lire::SplitKind kind, double thr, int l,
                 int r, int depth) {
    lire::TreeNode n;
    n.id = id;
    n.is_leaf = leaf;
    n.feature = feature;
    n.kind = kind;
    n.threshold = thr;
    n.left = l;
    n.right = r;
    n.depth = depth;
    return n;
  };
  using lire::SplitKind;
  t.nodes = {node(0, false, 0, SplitKind::kThreshold, 31.0, 1, 2, 0),
             node(1, true, 0, SplitKind::kThreshold, 0.0, -1, -1, 1),
             node(2, false, 1, SplitKind::kCategory, 0.5, 3, 4, 1),
             node(3, true, 0, SplitKind::kThreshold, 0.0, -1, -1, 2),
             node(4, true, 0, SplitKind::kThreshold, 0.0, -1, -1, 2)};
  return t;
}

inline std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }
inline std::vector<int> to_vector(std::span<const int> s) { return {s.begin(), s.end()}; }

}  // namespace lire_test
