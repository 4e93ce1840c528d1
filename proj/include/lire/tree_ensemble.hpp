#pragma once

// Bagged CART classification trees (Gini impurity) used as a rule source.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "lire/dataset.hpp"
#include "lire/error.hpp"
#include "lire/parallel.hpp"

namespace lire {

enum class SplitKind {
  kThreshold,  // numeric: x <= t goes left, x > t goes right
  kCategory,   // one-hot column: column == 0 goes left, column == 1 goes right
};

struct TreeNode {
  int id = 0;
  bool is_leaf = true;
  std::size_t feature = 0;
  SplitKind kind = SplitKind::kThreshold;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int depth = 0;
  int prediction = 1;  // majority label of the training rows, ties to +1
};

// Nodes are stored in pre-order; node 0 is the root.
struct Tree {
  std::vector<TreeNode> nodes;

  const TreeNode& root() const { return nodes.front(); }

  int predict(std::span<const double> x) const {
    const TreeNode* node = &nodes.front();
    while (!node->is_leaf) {
      node = &nodes[static_cast<std::size_t>(x[node->feature] <= node->threshold ? node->left
                                                                                 : node->right)];
    }
    return node->prediction;
  }

  int depth() const {
    int d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
  }
};

struct Forest {
  std::vector<Tree> trees;
  std::size_t max_depth = 3;
  std::size_t n_trees = 0;
  std::uint64_t seed = 0;
};

// Gini impurity of a binary node, 2p(1-p).
inline double gini(double positives, double total) {
  if (total <= 0.0) return 0.0;
  const double p = positives / total;
  return 2.0 * p * (1.0 - p);
}

inline double gini_gain(double pos_left, double n_left, double pos_right, double n_right) {
  const double n = n_left + n_right;
  return gini(pos_left + pos_right, n) - (n_left / n) * gini(pos_left, n_left) -
         (n_right / n) * gini(pos_right, n_right);
}

// Parent impurity minus the size-weighted child impurities.
inline double split_gain(std::span<const int> labels_left, std::span<const int> labels_right) {
  if (labels_left.empty() || labels_right.empty()) {
    throw UsageError("tree_ensemble", "split_gain requires two non-empty sides");
  }
  auto positives = [](std::span<const int> ys) {
    return static_cast<double>(std::count(ys.begin(), ys.end(), 1));
  };
  return gini_gain(positives(labels_left), static_cast<double>(labels_left.size()),
                   positives(labels_right), static_cast<double>(labels_right.size()));
}

namespace detail {

struct SplitChoice {
  bool found = false;
  double gain = 0.0;
  std::size_t feature = 0;
  double threshold = 0.0;
};

constexpr double kGainTieTolerance = 1e-12;

inline bool better_split(const SplitChoice& cand, const SplitChoice& best) {
  if (!best.found) return true;
  if (cand.gain > best.gain + kGainTieTolerance) return true;
  if (cand.gain < best.gain - kGainTieTolerance) return false;
  if (cand.feature != best.feature) return cand.feature < best.feature;
  return cand.threshold < best.threshold;
}

class TreeBuilder {
 public:
  TreeBuilder(const Sample& sample, std::size_t max_depth, std::size_t max_features,
              std::mt19937_64& rng)
      : sample_(sample), max_depth_(max_depth), max_features_(max_features), rng_(rng) {
    features_.resize(sample.cols());
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  Tree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    for (std::size_t i = 0; i < tree_.nodes.size(); ++i) tree_.nodes[i].id = static_cast<int>(i);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> rows, int depth) {
    const int index = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::size_t pos = 0;
    for (std::size_t n : rows) pos += sample_.label(n) == 1 ? 1 : 0;
    {
      TreeNode& node = tree_.nodes.back();
      node.depth = depth;
      node.prediction = 2 * pos >= rows.size() ? 1 : -1;
    }
    if (static_cast<std::size_t>(depth) >= max_depth_ || pos == 0 || pos == rows.size()) {
      return index;
    }
    const SplitChoice split = find_split(rows, static_cast<double>(pos));
    if (!split.found) return index;

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t n : rows) {
      (sample_.at(n, split.feature) <= split.threshold ? left_rows : right_rows).push_back(n);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int left = grow(std::move(left_rows), depth + 1);
    const int right = grow(std::move(right_rows), depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(index)];
    node.is_leaf = false;
    node.feature = split.feature;
    node.kind = sample_.schema().is_categorical(split.feature) ? SplitKind::kCategory
                                                               : SplitKind::kThreshold;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return index;
  }

  // Visits features in random order until max_features have been examined
  // and at least one of them admits a split (or all are exhausted).
  SplitChoice find_split(const std::vector<std::size_t>& rows, double pos_total) {
    std::shuffle(features_.begin(), features_.end(), rng_);
    SplitChoice best;
    std::size_t visited = 0;
    for (std::size_t f : features_) {
      if (visited >= max_features_ && best.found) break;
      ++visited;
      if (sample_.schema().is_categorical(f)) {
        scan_binary(rows, pos_total, f, best);
      } else {
        scan_numeric(rows, pos_total, f, best);
      }
    }
    return best;
  }

  void scan_binary(const std::vector<std::size_t>& rows, double pos_total, std::size_t f,
                   SplitChoice& best) {
    double n_right = 0.0, pos_right = 0.0;
    for (std::size_t n : rows) {
      if (sample_.at(n, f) > 0.5) {
        n_right += 1.0;
        pos_right += sample_.label(n) == 1 ? 1.0 : 0.0;
      }
    }
    const double total = static_cast<double>(rows.size());
    if (n_right == 0.0 || n_right == total) return;
    SplitChoice cand{true, gini_gain(pos_total - pos_right, total - n_right, pos_right, n_right),
                     f, 0.5};
    if (better_split(cand, best)) best = cand;
  }

  void scan_numeric(const std::vector<std::size_t>& rows, double pos_total, std::size_t f,
                    SplitChoice& best) {
    buffer_.clear();
    for (std::size_t n : rows) buffer_.emplace_back(sample_.at(n, f), sample_.label(n));
    std::sort(buffer_.begin(), buffer_.end());
    const double total = static_cast<double>(buffer_.size());
    double n_left = 0.0, pos_left = 0.0;
    for (std::size_t i = 0; i + 1 < buffer_.size(); ++i) {
      n_left += 1.0;
      pos_left += buffer_[i].second == 1 ? 1.0 : 0.0;
      const double lo = buffer_[i].first;
      const double hi = buffer_[i + 1].first;
      if (lo == hi) continue;
      double threshold = lo + (hi - lo) / 2.0;
      if (!(threshold < hi)) threshold = lo;
      SplitChoice cand{true,
                       gini_gain(pos_left, n_left, pos_total - pos_left, total - n_left), f,
                       threshold};
      if (better_split(cand, best)) best = cand;
    }
  }

  const Sample& sample_;
  std::size_t max_depth_;
  std::size_t max_features_;
  std::mt19937_64& rng_;
  std::vector<std::size_t> features_;
  std::vector<std::pair<double, int>> buffer_;
  Tree tree_;
};

}  // namespace detail

// Fits one tree on the given (possibly repeated) row indices.
inline Tree fit_tree(const Sample& sample, std::vector<std::size_t> rows, std::size_t max_depth,
                     std::size_t max_features, std::mt19937_64& rng) {
  detail::TreeBuilder builder(sample, max_depth, max_features, rng);
  return builder.build(std::move(rows));
}

// Each tree sees a bootstrap resample of size N drawn with seed + tree index
// and considers ceil(sqrt(D)) random features per node.
inline Forest fit_forest(const Sample& sample, std::size_t n_trees, std::size_t max_depth,
                         std::uint64_t seed) {
  if (n_trees == 0) throw UsageError("tree_ensemble", "n_trees must be >= 1");
  if (max_depth == 0) throw UsageError("tree_ensemble", "max_depth must be >= 1");
  if (sample.rows() == 0) throw UsageError("tree_ensemble", "empty sample");

  const auto max_features =
      static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(sample.cols()))));
  Forest forest;
  forest.max_depth = max_depth;
  forest.n_trees = n_trees;
  forest.seed = seed;
  forest.trees.resize(n_trees);
  parallel_for(n_trees, [&](std::size_t t) {
    std::mt19937_64 rng(seed + t);
    std::uniform_int_distribution<std::size_t> pick(0, sample.rows() - 1);
    std::vector<std::size_t> rows(sample.rows());
    for (auto& r : rows) r = pick(rng);
    forest.trees[t] = fit_tree(sample, std::move(rows), max_depth, max_features, rng);
  });
  return forest;
}

}  // namespace lire
