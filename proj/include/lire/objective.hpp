#pragma once

// Exponential-loss risk plus the support-size and local-support regularizers,
// with an incrementally maintained loss cache.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lire/error.hpp"
#include "lire/rules.hpp"

namespace lire {

// Weights over the columns of a RuleMatrix plus an unpenalized intercept.
//
// Invariants maintained by every mutation:
//   losses[n]       = exp(-y_n * f(x_n)), f = intercept + sum_m alpha_m r_m(x_n)
//   support         = {m : alpha_m != 0}, sorted
//   local_counts[n] = |{m in support : r_m(x_n) = 1}|
// The state keeps references to the matrix and labels; both must outlive it.
class WeightState {
 public:
  // Cache entries outside this band trigger a from-scratch rebuild.
  static constexpr double kLossCeiling = 1e300;
  static constexpr double kLossFloor = 1e-300;

  WeightState(const RuleMatrix& matrix, std::span<const int> labels)
      : matrix_(&matrix),
        labels_(labels),
        alpha_(matrix.size(), 0.0),
        in_support_(matrix.size(), 0),
        losses_(labels.size(), 1.0),
        local_counts_(labels.size(), 0) {
    if (labels.size() != matrix.rows()) {
      throw UsageError("objective", "label count does not match rule matrix rows");
    }
  }

  const RuleMatrix& matrix() const { return *matrix_; }
  std::span<const int> labels() const { return labels_; }
  std::size_t rows() const { return labels_.size(); }
  std::size_t num_rules() const { return alpha_.size(); }

  std::span<const double> alpha() const { return alpha_; }
  double weight(std::size_t m) const { return alpha_[m]; }
  double intercept() const { return intercept_; }
  std::span<const double> losses() const { return losses_; }
  const std::vector<std::size_t>& support() const { return support_; }
  bool in_support(std::size_t m) const { return in_support_[m] != 0; }
  std::span<const std::uint32_t> local_counts() const { return local_counts_; }
  std::uint64_t local_count_total() const { return local_total_; }

  // Sets alpha_m; only the rows in column m are touched.
  void set_weight(std::size_t m, double w) {
    if (!std::isfinite(w)) throw NumericError("objective", "non-finite rule weight");
    const double old = alpha_[m];
    if (w == old) return;
    const double delta = w - old;
    const double up = std::exp(-delta);    // rows with y = +1
    const double down = std::exp(delta);   // rows with y = -1
    bool out_of_band = false;
    for (std::uint32_t n : matrix_->column(m)) {
      double& l = losses_[n];
      l *= labels_[n] > 0 ? up : down;
      out_of_band |= !(l < kLossCeiling && l > kLossFloor);
    }
    alpha_[m] = w;
    if ((old == 0.0) != (w == 0.0)) {
      const int step = w != 0.0 ? 1 : -1;
      for (std::uint32_t n : matrix_->column(m)) {
        local_counts_[n] = static_cast<std::uint32_t>(static_cast<int>(local_counts_[n]) + step);
      }
      const auto covered = static_cast<std::uint64_t>(matrix_->column(m).size());
      if (step > 0) {
        local_total_ += covered;
        support_.insert(std::upper_bound(support_.begin(), support_.end(), m), m);
        in_support_[m] = 1;
      } else {
        local_total_ -= covered;
        support_.erase(std::lower_bound(support_.begin(), support_.end(), m));
        in_support_[m] = 0;
      }
    }
    if (out_of_band) rebuild();
  }

  // Sets the intercept; touches every row and never the support.
  void set_intercept(double b) {
    if (!std::isfinite(b)) throw NumericError("objective", "non-finite intercept");
    if (b == intercept_) return;
    const double delta = b - intercept_;
    const double up = std::exp(-delta);
    const double down = std::exp(delta);
    bool out_of_band = false;
    for (std::size_t n = 0; n < losses_.size(); ++n) {
      losses_[n] *= labels_[n] > 0 ? up : down;
      out_of_band |= !(losses_[n] < kLossCeiling && losses_[n] > kLossFloor);
    }
    intercept_ = b;
    if (out_of_band) rebuild();
  }

  // Overwrites selected loss entries, used to undo a tentative change exactly.
  void restore(std::size_t m, double w, std::span<const double> column_losses) {
    const double old = alpha_[m];
    set_weight(m, w);
    if (old == w) return;
    const auto col = matrix_->column(m);
    for (std::size_t i = 0; i < col.size(); ++i) losses_[col[i]] = column_losses[i];
  }

  // Decision values f(x_n) recomputed from the weights.
  std::vector<double> scores() const {
    std::vector<double> f(rows(), intercept_);
    for (std::size_t m : support_) {
      for (std::uint32_t n : matrix_->column(m)) f[n] += alpha_[m];
    }
    return f;
  }

  // Recomputes the loss cache from the weights.
  void rebuild() {
    const auto f = scores();
    for (std::size_t n = 0; n < losses_.size(); ++n) {
      losses_[n] = std::exp(-static_cast<double>(labels_[n]) * f[n]);
    }
  }

 private:
  const RuleMatrix* matrix_;
  std::span<const int> labels_;
  std::vector<double> alpha_;
  double intercept_ = 0.0;
  std::vector<char> in_support_;
  std::vector<std::size_t> support_;
  std::vector<double> losses_;
  std::vector<std::uint32_t> local_counts_;
  std::uint64_t local_total_ = 0;
};

// Mean exponential loss.
inline double empirical_risk(const WeightState& state) {
  double sum = 0.0;
  for (double l : state.losses()) sum += l;
  return sum / static_cast<double>(state.rows());
}

inline std::size_t omega_global(const WeightState& state) { return state.support().size(); }

// Average over rows of |local support| / |support|; 0 for an empty support.
inline double omega_local(const WeightState& state) {
  const std::size_t k = state.support().size();
  if (k == 0) return 0.0;
  return static_cast<double>(state.local_count_total()) /
         (static_cast<double>(state.rows()) * static_cast<double>(k));
}

inline double regularizer(const WeightState& state, double gamma, double lambda) {
  return gamma * static_cast<double>(omega_global(state)) + lambda * omega_local(state);
}

inline double objective(const WeightState& state, double gamma, double lambda) {
  return empirical_risk(state) + regularizer(state, gamma, lambda);
}

// Increase of gamma*|supp| + lambda*Omega_L when rule m (currently zero) takes
// any nonzero weight.
inline double regularizer_delta_add(const WeightState& state, std::size_t m, double gamma,
                                    double lambda, double coverage) {
  if (state.in_support(m)) {
    throw UsageError("objective", "regularizer_delta_add requires a rule outside the support");
  }
  const double k = static_cast<double>(state.support().size());
  return gamma + lambda * (coverage - omega_local(state)) / (1.0 + k);
}

inline double regularizer_delta_add(const WeightState& state, std::size_t m, double gamma,
                                    double lambda) {
  return regularizer_delta_add(state, m, gamma, lambda, state.matrix().coverage(m));
}

inline void apply_weight_change(WeightState& state, std::size_t m, double new_weight) {
  state.set_weight(m, new_weight);
}

inline void apply_intercept_change(WeightState& state, double new_intercept) {
  state.set_intercept(new_intercept);
}

}  // namespace lire
