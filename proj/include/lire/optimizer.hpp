#pragma once

// Weight fitting: the closed-form coordinate update for the l0 + local-support
// objective, coordinate descent with local search, the l1 baseline, and a
// golden-section oracle for the coordinate problem.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lire/error.hpp"
#include "lire/golden_section.hpp"
#include "lire/objective.hpp"
#include "lire/rules.hpp"

namespace lire {

// kBest runs the search from both starting points and keeps the result with
// the lower objective.
enum class Init { kZeros, kL1, kBest };

inline const char* init_name(Init init) {
  switch (init) {
    case Init::kZeros: return "zeros";
    case Init::kL1: return "l1";
    case Init::kBest: return "best";
  }
  return "";
}

inline Init parse_init(const std::string& s) {
  if (s == "zeros") return Init::kZeros;
  if (s == "l1") return Init::kL1;
  if (s == "best") return Init::kBest;
  throw UsageError("optimizer", "unknown initializer '" + s + "'");
}

struct FitConfig {
  double gamma = 0.001;
  double lambda = 1.0;
  std::size_t max_iter = 5000;
  double finetune_tol = 1e-8;            // relative decrease of L
  std::size_t finetune_max_cycles = 1000;
  double weight_clamp = 20.0;            // bound on |alpha_m| and |intercept|
  Init init = Init::kBest;
  double l1_gamma = 0.001;
  double l1_tol = 1e-8;                  // relative decrease of the l1 objective
  std::size_t l1_max_cycles = 1000;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(gamma >= 0.0) || !(lambda >= 0.0) || !(l1_gamma >= 0.0)) {
      throw UsageError("optimizer", "gamma, lambda and l1_gamma must be >= 0");
    }
    if (max_iter == 0) throw UsageError("optimizer", "max_iter must be positive");
    if (!(finetune_tol > 0.0) || !(l1_tol > 0.0)) {
      throw UsageError("optimizer", "tolerances must be positive");
    }
    if (!(weight_clamp > 0.0) || !std::isfinite(weight_clamp)) {
      throw UsageError("optimizer", "weight clamp must be positive and finite");
    }
  }
};

// Result of one coordinate problem for a rule whose weight is currently zero.
//   eps       (1/N) * loss mass over rows the rule fires on
//   eps_minus fraction of that mass on rows with y = -1 (eps_plus = 1 - eps_minus)
//   penalty   regularizer increase C for making the weight nonzero
//   half_width B, defined only when 0 < C < 2 eps
struct CoordinateUpdate {
  std::size_t rule = 0;
  double eps = 0.0;
  double eps_minus = 0.0;
  double penalty = 0.0;
  std::optional<double> half_width;
  double new_weight = 0.0;
  double risk_decrease = 0.0;  // L(before) - L(after) at new_weight
};

enum class Termination { kConverged, kMaxIter };

inline const char* termination_name(Termination t) {
  return t == Termination::kConverged ? "converged" : "max_iter";
}

struct FitReport {
  std::size_t iterations_run = 0;
  std::vector<double> objective_trace;  // G after init, then after each outer iteration
  std::size_t support_size = 0;
  double seconds = 0.0;
  Termination termination = Termination::kConverged;
  std::size_t deletions = 0;
  std::size_t swaps = 0;
};

struct Swap {
  std::size_t removed = 0;
  std::size_t inserted = 0;
  double weight = 0.0;
};

// (1/N) * sum of cached losses over the fired rows, split by label.
struct LossMass {
  double positive = 0.0;
  double negative = 0.0;
};

inline LossMass fired_mass(const WeightState& state, std::size_t m) {
  double acc[2] = {0.0, 0.0};
  const auto losses = state.losses();
  const auto labels = state.labels();
  for (std::uint32_t n : state.matrix().column(m)) acc[labels[n] > 0 ? 1 : 0] += losses[n];
  const double inv_n = 1.0 / static_cast<double>(state.rows());
  return {acc[1] * inv_n, acc[0] * inv_n};
}

namespace detail {

inline double clamp_weight(double w, double clamp) { return std::clamp(w, -clamp, clamp); }

// Unpenalized exponential-loss minimizer for a coordinate with the given
// masses, relative to its current value.
inline double boosting_step(double positive, double negative, double clamp) {
  if (negative <= 0.0 && positive <= 0.0) return 0.0;
  if (negative <= 0.0) return clamp;
  if (positive <= 0.0) return -clamp;
  return clamp_weight(0.5 * std::log(positive / negative), clamp);
}

// Risk decrease of moving a zero coordinate to w.
inline double risk_decrease(double positive, double negative, double w) {
  return (positive + negative) - (positive * std::exp(-w) + negative * std::exp(w));
}

}  // namespace detail

// Closed-form minimizer of G along a rule whose weight is zero: the weight
// stays zero when eps_minus lies in [1/2 - B, 1/2 + B], and is otherwise the
// boosting weight (1/2) ln((1 - eps_minus) / eps_minus), clamped.
inline CoordinateUpdate analytic_update(const WeightState& state, std::size_t m, double gamma,
                                        double lambda, double clamp = 20.0) {
  if (state.weight(m) != 0.0) {
    throw UsageError("optimizer", "analytic_update requires alpha_m = 0");
  }
  CoordinateUpdate u;
  u.rule = m;
  const LossMass mass = fired_mass(state, m);
  u.eps = mass.positive + mass.negative;
  u.penalty = regularizer_delta_add(state, m, gamma, lambda);
  if (!(u.eps > 0.0)) return u;
  u.eps_minus = mass.negative / u.eps;

  if (u.penalty > 0.0 && u.penalty < 2.0 * u.eps) {
    u.half_width = std::sqrt(u.penalty * (2.0 * u.eps - u.penalty)) / (2.0 * u.eps);
  }
  // The risk can drop by at most eps (as eps_minus tends to 0 or 1), so a
  // penalty of eps or more always forces zero. The interval test alone is not
  // enough here: for eps <= C < 2 eps it has B < 1/2 even though no weight
  // pays for the penalty.
  if (u.penalty >= u.eps) return u;

  const double step = detail::boosting_step(mass.positive, mass.negative, clamp);
  if (u.penalty > 0.0) {
    const double b = *u.half_width;
    if (u.eps_minus >= 0.5 - b && u.eps_minus <= 0.5 + b) return u;
    const double decrease = detail::risk_decrease(mass.positive, mass.negative, step);
    // A binding clamp reduces the attainable decrease below the interval's.
    if (!(decrease > u.penalty)) return u;
    u.new_weight = step;
    u.risk_decrease = decrease;
    return u;
  }
  // Non-positive penalty: any nonzero weight lowers the regularizer, so take
  // the boosting weight whenever it is nonzero and strictly improves G.
  if (step == 0.0) return u;
  const double decrease = detail::risk_decrease(mass.positive, mass.negative, step);
  if (decrease > u.penalty) {
    u.new_weight = step;
    u.risk_decrease = decrease;
  }
  return u;
}

// Re-optimizes a support member against alpha_{-m}. The state ends with the
// returned weight on m; a zero weight means m left the support.
inline CoordinateUpdate update_in_support(WeightState& state, std::size_t m, double gamma,
                                          double lambda, double clamp = 20.0) {
  if (!state.in_support(m)) throw UsageError("optimizer", "rule is not in the support");
  const double old = state.weight(m);
  const auto col = state.matrix().column(m);
  std::vector<double> saved(col.size());
  for (std::size_t i = 0; i < col.size(); ++i) saved[i] = state.losses()[col[i]];
  state.set_weight(m, 0.0);
  CoordinateUpdate u = analytic_update(state, m, gamma, lambda, clamp);
  if (u.new_weight == old) {
    state.restore(m, old, saved);
  } else {
    state.set_weight(m, u.new_weight);
  }
  return u;
}

// Minimum improvement for a swap to count as strictly better; keeps rounding
// noise from driving swap cycles.
inline double improvement_margin(double g) { return 1e-12 * std::max(1.0, std::abs(g)); }

// Tries to replace support member m by the first outside rule (ascending
// index) whose optimal weight against alpha_{-m} gives a strictly lower G.
// On success the swap is applied; otherwise the state is left untouched.
inline std::optional<Swap> local_search_swap(WeightState& state, std::size_t m, double gamma,
                                             double lambda, double clamp = 20.0) {
  if (!state.in_support(m)) throw UsageError("optimizer", "rule is not in the support");
  const double current = objective(state, gamma, lambda);
  const double old = state.weight(m);
  const auto col = state.matrix().column(m);
  std::vector<double> saved(col.size());
  for (std::size_t i = 0; i < col.size(); ++i) saved[i] = state.losses()[col[i]];

  state.set_weight(m, 0.0);
  const double risk_without = empirical_risk(state);
  const double reg_without = regularizer(state, gamma, lambda);
  const double bar = current - improvement_margin(current);
  for (std::size_t cand = 0; cand < state.num_rules(); ++cand) {
    if (cand == m || state.in_support(cand)) continue;
    const CoordinateUpdate u = analytic_update(state, cand, gamma, lambda, clamp);
    if (u.new_weight == 0.0) continue;
    const double swapped = risk_without - u.risk_decrease + reg_without + u.penalty;
    if (swapped < bar) {
      state.set_weight(cand, u.new_weight);
      return Swap{m, cand, u.new_weight};
    }
  }
  state.restore(m, old, saved);
  return std::nullopt;
}

// Unpenalized boosting step on the intercept over all rows.
inline bool refit_intercept(WeightState& state, double clamp) {
  double acc[2] = {0.0, 0.0};
  const auto losses = state.losses();
  const auto labels = state.labels();
  for (std::size_t n = 0; n < state.rows(); ++n) acc[labels[n] > 0 ? 1 : 0] += losses[n];
  double target = state.intercept();
  if (acc[0] <= 0.0) {
    target = clamp;
  } else if (acc[1] <= 0.0) {
    target = -clamp;
  } else {
    target = detail::clamp_weight(state.intercept() + 0.5 * std::log(acc[1] / acc[0]), clamp);
  }
  if (target == state.intercept()) return false;
  state.set_intercept(target);
  return true;
}

// Cyclic coordinate descent on L alone over the support and the intercept.
// A member whose optimal weight is exactly zero is dropped, unless dropping
// it would raise G under (gamma, lambda).
inline void finetune_support(WeightState& state, double tol, double clamp = 20.0,
                             std::size_t max_cycles = 1000, double gamma = 0.0,
                             double lambda = 0.0) {
  if (state.support().empty()) return;
  double prev = empirical_risk(state);
  for (std::size_t cycle = 0; cycle < max_cycles; ++cycle) {
    bool changed = false;
    const std::vector<std::size_t> members = state.support();
    for (std::size_t m : members) {
      const double old = state.weight(m);
      const LossMass mass = fired_mass(state, m);
      double target = old;
      if (mass.negative <= 0.0) {
        target = clamp;
      } else if (mass.positive <= 0.0) {
        target = -clamp;
      } else {
        target = detail::clamp_weight(old + 0.5 * std::log(mass.positive / mass.negative), clamp);
      }
      if (target == old) continue;
      if (target == 0.0) {
        const double before = objective(state, gamma, lambda);
        const auto col = state.matrix().column(m);
        std::vector<double> saved(col.size());
        for (std::size_t i = 0; i < col.size(); ++i) saved[i] = state.losses()[col[i]];
        state.set_weight(m, 0.0);
        if (objective(state, gamma, lambda) > before) {
          state.restore(m, old, saved);
          continue;
        }
      } else {
        state.set_weight(m, target);
      }
      changed = true;
    }
    changed |= refit_intercept(state, clamp);
    const double now = empirical_risk(state);
    if (!changed || prev - now < tol * prev) break;
    prev = now;
  }
}

namespace detail {

// argmin_w  a e^{-w} + b e^{w} + gamma |w|  with a, b >= 0.
inline double l1_coordinate(double a, double b, double gamma, double clamp) {
  if (a - b > gamma) {
    const double root = std::sqrt(gamma * gamma + 4.0 * a * b);
    const double denom = gamma + root;
    if (!(denom > 0.0)) return clamp;
    return clamp_weight(std::log(2.0 * a / denom), clamp);
  }
  if (b - a > gamma) {
    const double root = std::sqrt(gamma * gamma + 4.0 * a * b);
    const double denom = gamma + root;
    if (!(denom > 0.0)) return -clamp;
    return clamp_weight(-std::log(2.0 * b / denom), clamp);
  }
  return 0.0;
}

inline double l1_objective(const WeightState& state, double l1_gamma) {
  double norm = 0.0;
  for (std::size_t m : state.support()) norm += std::abs(state.weight(m));
  return empirical_risk(state) + l1_gamma * norm;
}

}  // namespace detail

// l1-penalized exponential loss by cyclic coordinate descent over every rule
// and the (unpenalized) intercept. Each coordinate is solved in closed form
// by soft-thresholding the boosting step.
inline WeightState fit_l1(const RuleMatrix& matrix, std::span<const int> labels, double l1_gamma,
                          double clamp = 20.0, double tol = 1e-8, std::size_t max_cycles = 1000) {
  if (matrix.empty()) throw UsageError("optimizer", "empty rule matrix");
  if (!(l1_gamma >= 0.0)) throw UsageError("optimizer", "l1_gamma must be >= 0");
  WeightState state(matrix, labels);
  refit_intercept(state, clamp);
  double prev = detail::l1_objective(state, l1_gamma);
  for (std::size_t cycle = 0; cycle < max_cycles; ++cycle) {
    for (std::size_t m = 0; m < matrix.size(); ++m) {
      const double old = state.weight(m);
      const LossMass mass = fired_mass(state, m);
      // Masses with the coordinate's own contribution removed.
      const double a = mass.positive * std::exp(old);
      const double b = mass.negative * std::exp(-old);
      const double w = detail::l1_coordinate(a, b, l1_gamma, clamp);
      if (w != old) state.set_weight(m, w);
    }
    refit_intercept(state, clamp);
    const double now = detail::l1_objective(state, l1_gamma);
    if (prev - now < tol * prev) break;
    prev = now;
  }
  return state;
}

// G recomputed from the weights alone (no cached losses or counts).
inline double brute_force_objective(const RuleMatrix& matrix, std::span<const int> labels,
                                    std::span<const double> alpha, double intercept,
                                    double gamma, double lambda) {
  const std::size_t n_rows = labels.size();
  std::vector<double> f(n_rows, intercept);
  std::vector<std::size_t> local(n_rows, 0);
  std::size_t k = 0;
  for (std::size_t m = 0; m < alpha.size(); ++m) {
    if (alpha[m] == 0.0) continue;
    ++k;
    for (std::uint32_t n : matrix.column(m)) {
      f[n] += alpha[m];
      ++local[n];
    }
  }
  double risk = 0.0, ratio = 0.0;
  for (std::size_t n = 0; n < n_rows; ++n) {
    risk += std::exp(-labels[n] * f[n]);
    if (k > 0) ratio += static_cast<double>(local[n]) / static_cast<double>(k);
  }
  risk /= static_cast<double>(n_rows);
  ratio /= static_cast<double>(n_rows);
  return risk + gamma * static_cast<double>(k) + lambda * ratio;
}

// Verification oracle: minimizes G along coordinate m (all other weights
// fixed, alpha_m treated as 0) by golden-section search on [-clamp, 0] and
// [0, clamp] separately, since G jumps at 0. Returns the best weight.
inline double oracle_coordinate_min(const WeightState& state, std::size_t m, double gamma,
                                    double lambda, double clamp = 20.0, double tol = 1e-10) {
  const RuleMatrix& matrix = state.matrix();
  const auto labels = state.labels();
  std::vector<double> alpha(state.alpha().begin(), state.alpha().end());
  alpha[m] = 0.0;
  const double at_zero =
      brute_force_objective(matrix, labels, alpha, state.intercept(), gamma, lambda);

  // Regularizer and base losses with m switched on, from scratch.
  alpha[m] = 1.0;
  const std::size_t n_rows = labels.size();
  std::vector<double> f(n_rows, state.intercept());
  std::vector<std::size_t> local(n_rows, 0);
  std::size_t k = 0;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    if (alpha[j] == 0.0) continue;
    ++k;
    for (std::uint32_t n : matrix.column(j)) {
      if (j != m) f[n] += alpha[j];
      ++local[n];
    }
  }
  double ratio = 0.0, rest = 0.0;
  std::vector<double> base(n_rows);
  for (std::size_t n = 0; n < n_rows; ++n) {
    ratio += static_cast<double>(local[n]) / static_cast<double>(k);
    base[n] = std::exp(-labels[n] * f[n]);
    rest += base[n];
  }
  const auto col = matrix.column(m);
  for (std::uint32_t n : col) rest -= base[n];
  const double reg_on = gamma * static_cast<double>(k) + lambda * ratio / static_cast<double>(n_rows);

  auto g = [&](double w) {
    double fired = 0.0;
    for (std::uint32_t n : col) fired += base[n] * std::exp(-labels[n] * w);
    return (rest + fired) / static_cast<double>(n_rows) + reg_on;
  };
  const LineMinimum neg = golden_section_minimize(g, -clamp, 0.0, tol);
  const LineMinimum pos = golden_section_minimize(g, 0.0, clamp, tol);
  double best_w = 0.0, best_g = at_zero;
  for (const auto& cand : {neg, pos}) {
    if (cand.x != 0.0 && cand.value < best_g) {
      best_g = cand.value;
      best_w = cand.x;
    }
  }
  return best_w;
}

namespace detail {

// Greedy forward selection: repeatedly inserts the outside rule whose
// closed-form weight lowers G the most (lowest index on ties), refitting the
// intercept after each insertion, until no insertion helps. Independent of
// rule order up to exact ties.
inline bool insertion_sweep(WeightState& state, double gamma, double lambda, double clamp) {
  bool added = false;
  for (;;) {
    std::optional<CoordinateUpdate> best;
    double best_gain = 0.0;
    for (std::size_t m = 0; m < state.num_rules(); ++m) {
      if (state.in_support(m)) continue;
      const CoordinateUpdate u = analytic_update(state, m, gamma, lambda, clamp);
      if (u.new_weight == 0.0) continue;
      const double gain = u.risk_decrease - u.penalty;
      if (gain > best_gain) {
        best_gain = gain;
        best = u;
      }
    }
    if (!best) return added;
    state.set_weight(best->rule, best->new_weight);
    refit_intercept(state, clamp);
    added = true;
  }
}

}  // namespace detail

struct FitResult {
  WeightState state;
  FitReport report;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

inline FitResult descend(WeightState state, const FitConfig& config) {
  const double gamma = config.gamma, lambda = config.lambda, clamp = config.weight_clamp;
  FitReport report;
  report.termination = Termination::kMaxIter;
  report.objective_trace.push_back(objective(state, gamma, lambda));
  for (std::size_t iter = 1; iter <= config.max_iter; ++iter) {
    report.iterations_run = iter;
    const std::vector<std::size_t> before = state.support();
    if (before.empty()) {
      insertion_sweep(state, gamma, lambda, clamp);
    } else {
      for (std::size_t m : before) {
        const CoordinateUpdate u = update_in_support(state, m, gamma, lambda, clamp);
        if (u.new_weight == 0.0) {
          ++report.deletions;
          break;
        }
        if (local_search_swap(state, m, gamma, lambda, clamp)) ++report.swaps;
        if (state.weight(m) == 0.0) break;
      }
    }
    if (state.support() == before) {
      report.objective_trace.push_back(objective(state, gamma, lambda));
      report.termination = Termination::kConverged;
      break;
    }
    finetune_support(state, config.finetune_tol, clamp, config.finetune_max_cycles, gamma,
                     lambda);
    report.objective_trace.push_back(objective(state, gamma, lambda));
  }
  report.support_size = state.support().size();
  return {std::move(state), std::move(report)};
}

}  // namespace detail

// Coordinate descent with local search. Each outer iteration walks a
// snapshot of the support in ascending order: re-optimize the member, stop
// at the first deletion, otherwise try to swap it for an outside rule and
// stop at the first swap. An unchanged support ends the fit; a changed one
// is fine-tuned on L before the next iteration. An empty support is seeded
// by greedy closed-form insertions.
inline FitResult fit_lire(const RuleMatrix& matrix, std::span<const int> labels,
                          const FitConfig& config) {
  config.validate();
  if (matrix.empty()) throw UsageError("optimizer", "empty rule matrix");
  if (config.init == Init::kBest) {
    const auto start = std::chrono::steady_clock::now();
    FitConfig from_l1 = config, from_zeros = config;
    from_l1.init = Init::kL1;
    from_zeros.init = Init::kZeros;
    FitResult a = fit_lire(matrix, labels, from_l1);
    FitResult b = fit_lire(matrix, labels, from_zeros);
    FitResult& best = objective(b.state, config.gamma, config.lambda) <
                              objective(a.state, config.gamma, config.lambda)
                          ? b
                          : a;
    best.report.seconds = detail::seconds_since(start);
    return std::move(best);
  }
  const auto start = std::chrono::steady_clock::now();
  const double clamp = config.weight_clamp;
  if (config.init == Init::kL1) {
    FitResult r = detail::descend(fit_l1(matrix, labels, config.l1_gamma, clamp, config.l1_tol,
                                         config.l1_max_cycles),
                                  config);
    r.report.seconds = detail::seconds_since(start);
    return r;
  }
  WeightState empty(matrix, labels);
  refit_intercept(empty, clamp);
  FitResult r = detail::descend(empty, config);
  if (r.state.support().empty() && config.lambda > 0.0) {
    // The empty support is a fixed point of the insertion sweep once gamma + lambda * p
    // exceeds every single-rule gain, even when larger supports have lower G. Retry
    // from the greedy support of the local-term-free problem.
    detail::insertion_sweep(empty, config.gamma, 0.0, clamp);
    if (!empty.support().empty()) {
      FitResult alt = detail::descend(std::move(empty), config);
      if (objective(alt.state, config.gamma, config.lambda) <
          objective(r.state, config.gamma, config.lambda)) {
        r = std::move(alt);
      }
    }
  }
  r.report.seconds = detail::seconds_since(start);
  return r;
}

inline FitResult fit_lire(const RuleMatrix& matrix, const Sample& sample, const FitConfig& config) {
  return fit_lire(matrix, sample.labels(), config);
}

}  // namespace lire
