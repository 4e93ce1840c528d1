#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lire/golden_section.hpp"
#include "lire/optimizer.hpp"
#include "support.hpp"

using namespace lire;
using lire_test::brute_terms;
using lire_test::dense;

namespace {

RuleMatrix matrix_of(std::size_t rows, std::vector<std::vector<std::uint32_t>> cols) {
  std::vector<Rule> rules;
  for (std::size_t m = 0; m < cols.size(); ++m) rules.emplace_back(std::vector<Condition>{{m, Op::kLe, 0.0}});
  return RuleMatrix(rows, std::move(rules), std::move(cols));
}

std::vector<std::uint32_t> all_rows(std::size_t n) {
  std::vector<std::uint32_t> v(n);
  std::iota(v.begin(), v.end(), 0u);
  return v;
}

// G as a function of one coordinate, from the dense definitions.
double g_along(const RuleMatrix& m, const std::vector<int>& y, const WeightState& s, std::size_t j,
               double w, double gamma, double lambda) {
  auto alpha = lire_test::to_vector(s.alpha());
  alpha[j] = w;
  return brute_terms(dense(m), y, alpha, s.intercept()).g(gamma, lambda);
}

// Ternary search used as an independent 1-D minimizer.
template <class F>
double ternary_min(F f, double lo, double hi) {
  for (int i = 0; i < 300; ++i) {
    const double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
    if (f(a) < f(b)) {
      hi = b;
    } else {
      lo = a;
    }
  }
  return (lo + hi) / 2.0;
}

}  // namespace

TEST(GoldenSection, ShrinksBracketOnSmoothConvexPiece) {
  const auto r = golden_section_minimize([](double x) { return (x - 0.3) * (x - 0.3) + 1.0; }, -2.0,
                                         5.0, 1e-10);
  // Near a quadratic minimum f varies like dx^2, so x is only resolvable to
  // about sqrt(machine epsilon).
  EXPECT_NEAR(r.x, 0.3, 1e-7);
  EXPECT_NEAR(r.value, 1.0, 1e-15);
  EXPECT_LT(r.iterations, 500u);
  // A minimum at an endpoint is returned exactly.
  EXPECT_EQ(golden_section_minimize([](double x) { return x; }, 0.0, 1.0).x, 0.0);
}

TEST(AnalyticUpdate, BalancedAllFiredRuleStaysZero) {
  const RuleMatrix m = matrix_of(4, {all_rows(4)});
  const std::vector<int> y{1, -1, 1, -1};
  WeightState s(m, y);
  const auto u = analytic_update(s, 0, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(u.eps, 1.0);
  EXPECT_DOUBLE_EQ(u.eps_minus, 0.5);
  EXPECT_EQ(u.new_weight, 0.0);
}

TEST(AnalyticUpdate, ThreeToOneGivesHalfLogThree) {
  const RuleMatrix m = matrix_of(4, {all_rows(4)});
  const std::vector<int> y{1, 1, 1, -1};
  WeightState s(m, y);
  const auto u = analytic_update(s, 0, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(u.eps_minus, 0.25);
  const double reference =
      ternary_min([&](double w) { return g_along(m, y, s, 0, w, 0.0, 0.0); }, -5.0, 5.0);
  EXPECT_NEAR(reference, 0.5493061443340549, 1e-8);
  EXPECT_NEAR(u.new_weight, reference, 1e-8);
  EXPECT_NEAR(u.new_weight, 0.5 * std::log(3.0), 1e-15);
}

TEST(AnalyticUpdate, LargePenaltyForcesZero) {
  const RuleMatrix m = matrix_of(4, {all_rows(4)});
  const std::vector<int> y{1, 1, 1, -1};
  WeightState s(m, y);
  const auto u = analytic_update(s, 0, 2.0, 0.0);
  EXPECT_GE(u.penalty, 2.0 * u.eps);
  EXPECT_EQ(u.new_weight, 0.0);
  EXPECT_FALSE(u.half_width.has_value());
  EXPECT_THROW(
      {
        s.set_weight(0, 1.0);
        analytic_update(s, 0, 0.0, 0.0);
      },
      UsageError);
}

TEST(AnalyticUpdate, PenaltyBetweenMassAndTwiceMassForcesZero) {
  // eps = 1 and eps_minus = 0.05 with C = 1.9: B is about 0.218, so the
  // interval test alone would accept the boosting weight, but its risk
  // decrease (about 0.564) cannot pay for C.
  std::vector<int> y(20, 1);
  y[0] = -1;
  const RuleMatrix m = matrix_of(20, {all_rows(20)});
  WeightState s(m, y);
  const auto u = analytic_update(s, 0, 1.9, 0.0);
  ASSERT_TRUE(u.half_width.has_value());
  EXPECT_LT(u.eps_minus, 0.5 - *u.half_width);
  EXPECT_EQ(u.new_weight, 0.0);
  EXPECT_EQ(oracle_coordinate_min(s, 0, 1.9, 0.0), 0.0);
}

TEST(AnalyticUpdate, HalfWidthLiesInRange) {
  const RuleMatrix m = matrix_of(6, {{0, 1, 2, 3}});
  const std::vector<int> y{1, 1, 1, -1, 1, -1};
  WeightState s(m, y);
  const auto u = analytic_update(s, 0, 0.1, 0.0);
  ASSERT_TRUE(u.half_width.has_value());
  EXPECT_GT(*u.half_width, 0.0);
  EXPECT_LE(*u.half_width, 0.5);
  const double c = u.penalty, e = u.eps;
  EXPECT_NEAR(*u.half_width, std::sqrt(c * (2 * e - c)) / (2 * e), 1e-15);
}

TEST(AnalyticUpdate, ZeroPenaltyReducesToBoostingWeight) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const RuleMatrix m = lire_test::random_matrix(rng, 30, 6);
    const auto y = lire_test::random_labels(rng, 30);
    WeightState s(m, y);
    s.set_weight(0, 0.7);
    s.set_weight(3, -0.4);
    for (std::size_t j : {1u, 2u, 4u, 5u}) {
      const auto u = analytic_update(s, j, 0.0, 0.0);
      if (u.eps_minus == 0.0 || u.eps_minus == 0.5 || u.eps_minus == 1.0) continue;
      const double boost = 0.5 * std::log((1.0 - u.eps_minus) / u.eps_minus);
      if (std::abs(boost) >= 20.0) continue;
      EXPECT_NEAR(u.new_weight, boost, 1e-12);
    }
  }
}

TEST(AnalyticUpdate, MatchesOracleOnRandomStates) {
  std::mt19937_64 rng(99);
  const double grid[] = {0.0, 0.01, 0.1, 1.0};
  for (int trial = 0; trial < 200; ++trial) {
    const RuleMatrix m = lire_test::random_matrix(rng, 10 + rng() % 60, 5 + rng() % 10);
    const auto y = lire_test::random_labels(rng, m.rows());
    WeightState s(m, y);
    std::normal_distribution<double> w(0.0, 1.0);
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (rng() % 2) s.set_weight(j, w(rng));
    }
    s.set_intercept(0.3 * w(rng));
    const double gamma = grid[rng() % 4], lambda = grid[rng() % 4];
    std::size_t j = rng() % m.size();
    if (s.in_support(j)) s.set_weight(j, 0.0);
    const auto u = analytic_update(s, j, gamma, lambda);
    const double w_oracle = oracle_coordinate_min(s, j, gamma, lambda);
    const double g_analytic = g_along(m, y, s, j, u.new_weight, gamma, lambda);
    const double g_oracle = g_along(m, y, s, j, w_oracle, gamma, lambda);
    EXPECT_LE(g_analytic, g_oracle + 1e-8) << "trial " << trial;
  }
}

TEST(Oracle, ReturnsZeroWhenZeroIsOptimal) {
  const RuleMatrix m = matrix_of(4, {all_rows(4)});
  const std::vector<int> y{1, -1, 1, -1};
  WeightState s(m, y);
  EXPECT_EQ(oracle_coordinate_min(s, 0, 0.0, 0.0), 0.0);
  const std::vector<int> y2{1, 1, 1, -1};
  WeightState s2(m, y2);
  EXPECT_EQ(oracle_coordinate_min(s2, 0, 5.0, 0.0), 0.0);
  EXPECT_NEAR(oracle_coordinate_min(s2, 0, 0.0, 0.0), 0.5 * std::log(3.0), 1e-8);
}

TEST(UpdateInSupport, FixedPointLeavesObjectiveUnchanged) {
  const RuleMatrix m = matrix_of(4, {all_rows(4)});
  const std::vector<int> y{1, 1, 1, -1};
  WeightState s(m, y);
  s.set_weight(0, 0.5 * std::log(3.0));
  const double before = objective(s, 0.01, 0.0);
  const auto losses = lire_test::to_vector(s.losses());
  update_in_support(s, 0, 0.01, 0.0);
  EXPECT_EQ(objective(s, 0.01, 0.0), before);
  EXPECT_EQ(lire_test::to_vector(s.losses()), losses);
}

TEST(UpdateInSupport, NoiseRuleIsDeleted) {
  // Rule 1 fires on two positives and two negatives that rule 0 leaves at
  // unit loss, so its loss mass is split evenly between the classes.
  const RuleMatrix m = matrix_of(8, {{0, 1}, {2, 3, 4, 5}});
  const std::vector<int> y{1, 1, 1, 1, -1, -1, -1, -1};
  WeightState s(m, y);
  s.set_weight(0, 2.0);
  s.set_weight(1, 0.3);
  const double gamma = 0.05, lambda = 0.0;
  s.set_weight(1, 0.0);
  const double oracle = oracle_coordinate_min(s, 1, gamma, lambda);
  EXPECT_EQ(oracle, 0.0);
  s.set_weight(1, 0.3);
  const auto u = update_in_support(s, 1, gamma, lambda);
  EXPECT_EQ(u.new_weight, 0.0);
  EXPECT_EQ(s.support(), (std::vector<std::size_t>{0}));
  EXPECT_THROW(update_in_support(s, 1, gamma, lambda), UsageError);
}

TEST(UpdateInSupport, PureRuleWalksToClamp) {
  const RuleMatrix m = matrix_of(4, {{0, 1}});
  const std::vector<int> y{1, 1, -1, -1};
  WeightState s(m, y);
  s.set_weight(0, 1.0);
  update_in_support(s, 0, 0.0, 0.0, 20.0);
  EXPECT_EQ(s.weight(0), 20.0);
}

TEST(LocalSearchSwap, NoImprovingCandidate) {
  const RuleMatrix m = matrix_of(4, {{0, 1}, {0, 2}});
  const std::vector<int> y{1, 1, -1, -1};
  WeightState s(m, y);
  s.set_weight(0, 20.0);
  const auto losses = lire_test::to_vector(s.losses());
  EXPECT_FALSE(local_search_swap(s, 0, 0.01, 0.0).has_value());
  EXPECT_EQ(s.weight(0), 20.0);
  EXPECT_EQ(lire_test::to_vector(s.losses()), losses);
}

TEST(LocalSearchSwap, EqualObjectiveIsRejected) {
  const RuleMatrix m = matrix_of(4, {{0, 1, 2}, {0, 1, 2}});
  const std::vector<int> y{1, 1, -1, -1};
  WeightState s(m, y);
  s.set_weight(0, 0.5 * std::log(2.0));
  EXPECT_FALSE(local_search_swap(s, 0, 0.01, 0.1).has_value());
}

namespace {

// 30 rows; rule 0 is perfect (fires exactly on the positives), rules 1 and 2
// are corrupted copies with 4 flipped rows each, rule 3 is noise.
struct PlantedSwap {
  std::vector<int> y;
  RuleMatrix m;
};

PlantedSwap planted_swap() {
  PlantedSwap p;
  p.y.assign(30, -1);
  std::vector<std::uint32_t> perfect, copy1, copy2, noise;
  for (std::uint32_t n = 0; n < 30; ++n) {
    const bool pos = n % 3 == 0;
    if (pos) p.y[n] = 1;
    if (pos) perfect.push_back(n);
    if ((pos && n != 0 && n != 3) || n == 1 || n == 2) copy1.push_back(n);
    if ((pos && n != 6 && n != 9) || n == 4 || n == 5) copy2.push_back(n);
    if (n % 2 == 0) noise.push_back(n);
  }
  p.m = matrix_of(30, {perfect, copy1, copy2, noise});
  return p;
}

}  // namespace

TEST(LocalSearchSwap, PlantedPerfectRuleIsSwappedIn) {
  const auto p = planted_swap();
  WeightState s(p.m, p.y);
  refit_intercept(s, 20.0);
  s.set_weight(1, 1.0);
  finetune_support(s, 1e-12);
  const double gamma = 0.01, lambda = 0.1;
  const double before = objective(s, gamma, lambda);
  const auto before_terms = brute_terms(dense(p.m), p.y, lire_test::to_vector(s.alpha()), s.intercept());
  EXPECT_NEAR(before_terms.g(gamma, lambda), before, 1e-12);

  // Brute force: first outside index whose coordinate-optimal swap is better.
  std::optional<std::size_t> expected;
  for (std::size_t cand : {0u, 2u, 3u}) {
    WeightState probe = s;
    probe.set_weight(1, 0.0);
    const double w = oracle_coordinate_min(probe, cand, gamma, lambda);
    if (w == 0.0) continue;
    auto alpha = lire_test::to_vector(probe.alpha());
    alpha[cand] = w;
    if (brute_terms(dense(p.m), p.y, alpha, s.intercept()).g(gamma, lambda) < before - 1e-9) {
      expected = cand;
      break;
    }
  }
  ASSERT_TRUE(expected.has_value());
  const auto swap = local_search_swap(s, 1, gamma, lambda);
  ASSERT_TRUE(swap.has_value());
  EXPECT_EQ(swap->removed, 1u);
  EXPECT_EQ(swap->inserted, *expected);
  EXPECT_EQ(swap->inserted, 0u);
  EXPECT_LT(objective(s, gamma, lambda), before);
  EXPECT_EQ(s.weight(1), 0.0);
}

TEST(Finetune, SeparableRuleClampsAndRiskFalls) {
  const RuleMatrix m = matrix_of(4, {{0, 1}});
  const std::vector<int> y{1, 1, -1, -1};
  WeightState s(m, y);
  s.set_weight(0, 0.1);
  double prev = empirical_risk(s);
  for (int i = 0; i < 5; ++i) {
    finetune_support(s, 1e-8, 20.0, 1);
    EXPECT_LE(empirical_risk(s), prev);
    prev = empirical_risk(s);
  }
  EXPECT_EQ(s.weight(0), 20.0);
}

TEST(Finetune, DisjointBlocksReachClosedForm) {
  // Two rules partition the rows; with the intercept the per-block optimum
  // of f is (1/2) ln(P/N) for the block's label counts.
  const RuleMatrix m = matrix_of(10, {{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}});
  const std::vector<int> y{1, 1, 1, -1, -1, 1, -1, -1, -1, -1};
  WeightState s(m, y);
  s.set_weight(0, 0.2);
  s.set_weight(1, -0.1);
  finetune_support(s, 1e-15, 20.0, 1000);
  EXPECT_NEAR(s.weight(0) + s.intercept(), 0.5 * std::log(3.0 / 2.0), 1e-7);
  EXPECT_NEAR(s.weight(1) + s.intercept(), 0.5 * std::log(1.0 / 4.0), 1e-7);
  const auto alpha = lire_test::to_vector(s.alpha());
  const double b = s.intercept();
  finetune_support(s, 1e-15, 20.0, 1);
  EXPECT_NEAR(s.weight(0), alpha[0], 1e-7);
  EXPECT_NEAR(s.weight(1), alpha[1], 1e-7);
  EXPECT_NEAR(s.intercept(), b, 1e-7);
}

TEST(Finetune, EmptySupportIsANoOp) {
  const RuleMatrix m = matrix_of(2, {{0}});
  const std::vector<int> y{1, -1};
  WeightState s(m, y);
  finetune_support(s, 1e-8);
  EXPECT_EQ(s.intercept(), 0.0);
  EXPECT_TRUE(s.support().empty());
}

TEST(FitLire, SeparableSyntheticReachesZeroTrainingError) {
  // 40 rows, label +1 iff x0 > 0.5; one candidate rule captures it exactly.
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(40 * 2);
  std::vector<int> y(40);
  for (std::size_t n = 0; n < 40; ++n) {
    x[2 * n] = u(rng);
    x[2 * n + 1] = u(rng);
    y[n] = x[2 * n] > 0.5 ? 1 : -1;
  }
  const Sample sample = lire_test::numeric_sample(x, 2, y);
  const std::vector<Rule> rules{Rule({{1, Op::kGt, 0.3}}), Rule({{0, Op::kGt, 0.5}}),
                                Rule({{1, Op::kLe, 0.7}})};
  const RuleMatrix m = dedup_and_index(rules, sample);
  FitConfig cfg;
  cfg.gamma = 0.0;
  cfg.lambda = 0.0;
  cfg.init = Init::kZeros;
  const FitResult r = fit_lire(m, sample, cfg);
  const auto f = r.state.scores();
  for (std::size_t n = 0; n < 40; ++n) EXPECT_EQ(f[n] >= 0.0 ? 1 : -1, y[n]) << n;
}

TEST(FitLire, HugeGammaGivesEmptyModelAtOnce) {
  std::mt19937_64 rng(2);
  const RuleMatrix m = lire_test::random_matrix(rng, 50, 10);
  const auto y = lire_test::random_labels(rng, 50);
  FitConfig cfg;
  cfg.gamma = 100.0;
  cfg.init = Init::kZeros;
  const FitResult r = fit_lire(m, y, cfg);
  EXPECT_TRUE(r.state.support().empty());
  EXPECT_EQ(r.report.iterations_run, 1u);
  EXPECT_EQ(r.report.termination, Termination::kConverged);
  EXPECT_THROW(fit_lire(RuleMatrix(), std::span<const int>(), cfg), UsageError);
}

TEST(FitLire, ObjectiveTraceNeverIncreases) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const RuleMatrix m = lire_test::random_matrix(rng, 60, 25);
    const auto y = lire_test::random_labels(rng, 60);
    FitConfig cfg;
    cfg.gamma = 0.005 * static_cast<double>(trial % 4);
    cfg.lambda = 0.25 * static_cast<double>(trial % 3);
    cfg.init = trial % 2 ? Init::kZeros : Init::kL1;
    const FitResult r = fit_lire(m, y, cfg);
    ASSERT_GE(r.report.objective_trace.size(), 2u);
    for (std::size_t i = 1; i < r.report.objective_trace.size(); ++i) {
      EXPECT_LE(r.report.objective_trace[i], r.report.objective_trace[i - 1] + 1e-12);
    }
    EXPECT_LE(r.report.iterations_run, cfg.max_iter);
    EXPECT_NEAR(r.report.objective_trace.back(), objective(r.state, cfg.gamma, cfg.lambda), 1e-12);
    const auto ref = brute_terms(dense(m), y, lire_test::to_vector(r.state.alpha()), r.state.intercept());
    EXPECT_NEAR(ref.g(cfg.gamma, cfg.lambda), objective(r.state, cfg.gamma, cfg.lambda), 1e-9);
  }
}

TEST(FitLire, LocalPenaltyLowersLocalSupport) {
  int wins = 0;
  double acc_gap = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Sample s = lire_test::planted_sample(300, 100 + seed);
    const RulePool pool = build_rule_pool(s, 30, 3, seed);
    double local[2], acc[2];
    for (int k = 0; k < 2; ++k) {
      FitConfig cfg;
      cfg.gamma = 0.002;
      cfg.lambda = k == 0 ? 0.0 : 1.0;
      const FitResult r = fit_lire(pool.matrix, s, cfg);
      const auto model = make_model(r.state, s.schema());
      const auto metrics = evaluate(model, s);
      local[k] = metrics.avg_local_support;
      acc[k] = metrics.accuracy;
    }
    wins += local[1] <= local[0] ? 1 : 0;
    acc_gap += (acc[0] - acc[1]) / 10.0;
  }
  EXPECT_GE(wins, 9);
  EXPECT_LE(acc_gap, 0.02);
}

TEST(FitLire, PermutingRulesBarelyMovesTheObjective) {
  const auto p = planted_swap();
  FitConfig cfg;
  cfg.gamma = 0.01;
  cfg.lambda = 0.1;
  const FitResult base = fit_lire(p.m, p.y, cfg);
  const double g0 = objective(base.state, cfg.gamma, cfg.lambda);
  std::vector<std::size_t> order{0, 1, 2, 3};
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Rule> rules;
    std::vector<std::vector<std::uint32_t>> cols;
    for (auto j : order) {
      rules.push_back(p.m.rule(j));
      cols.emplace_back(p.m.column(j).begin(), p.m.column(j).end());
    }
    const RuleMatrix permuted(p.m.rows(), rules, cols);
    const FitResult r = fit_lire(permuted, p.y, cfg);
    EXPECT_NEAR(objective(r.state, cfg.gamma, cfg.lambda), g0, 1e-6);
  }
}

TEST(FitL1, ZeroPenaltyMatchesUnpenalizedStep) {
  std::mt19937_64 rng(12);
  const RuleMatrix m = lire_test::random_matrix(rng, 20, 6);
  const auto y = lire_test::random_labels(rng, 20);
  // Run to a tight tolerance: the default stopping rule bounds the objective
  // decrease per cycle, not the distance to the fixed point.
  const WeightState s = fit_l1(m, y, 0.0, 20.0, 1e-15, 200000);
  for (std::size_t j = 0; j < m.size(); ++j) {
    const LossMass mass = fired_mass(s, j);
    if (std::abs(s.weight(j)) >= 20.0) continue;
    EXPECT_NEAR(0.5 * std::log(mass.positive / mass.negative), 0.0, 1e-3) << j;
  }
}

TEST(FitL1, HugePenaltyZeroesEverything) {
  std::mt19937_64 rng(13);
  const RuleMatrix m = lire_test::random_matrix(rng, 20, 6);
  const auto y = lire_test::random_labels(rng, 20);
  const WeightState s = fit_l1(m, y, 1e6);
  EXPECT_TRUE(s.support().empty());
}

TEST(FitL1, CoordinatewiseOptimalUnderPerturbation) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const RuleMatrix m = lire_test::random_matrix(rng, 20, 6);
    const auto y = lire_test::random_labels(rng, 20);
    const double l1 = 0.01;
    const WeightState s = fit_l1(m, y, l1, 20.0, 1e-14, 5000);
    const auto act = dense(m);
    auto penalized = [&](const std::vector<double>& a, double b) {
      double norm = 0.0;
      for (double v : a) norm += std::abs(v);
      return brute_terms(act, y, a, b).risk + l1 * norm;
    };
    const auto alpha = lire_test::to_vector(s.alpha());
    const double base = penalized(alpha, s.intercept());
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      for (double d : {-1e-3, 1e-3}) {
        auto a = alpha;
        a[j] += d;
        EXPECT_GE(penalized(a, s.intercept()), base - 1e-12) << trial << " " << j;
      }
    }
    for (double d : {-1e-3, 1e-3}) EXPECT_GE(penalized(alpha, s.intercept() + d), base - 1e-12);
  }
}

TEST(FitL1, ClosedFormCoordinateMatchesSearch) {
  for (double a : {0.0, 0.1, 0.4, 0.9}) {
    for (double b : {0.0, 0.05, 0.3, 0.8}) {
      for (double g : {0.0, 0.01, 0.2}) {
        if (a == 0.0 && b == 0.0) continue;
        auto h = [&](double w) { return a * std::exp(-w) + b * std::exp(w) + g * std::abs(w); };
        const double w = detail::l1_coordinate(a, b, g, 20.0);
        const double ref = ternary_min(h, -20.0, 20.0);
        EXPECT_LE(h(w), h(ref) + 1e-12) << a << " " << b << " " << g;
      }
    }
  }
}

TEST(FitConfig, Validation) {
  FitConfig c;
  EXPECT_NO_THROW(c.validate());
  c.gamma = -1.0;
  EXPECT_THROW(c.validate(), UsageError);
  c = FitConfig{};
  c.weight_clamp = 0.0;
  EXPECT_THROW(c.validate(), UsageError);
  EXPECT_THROW(parse_init("random"), UsageError);
  EXPECT_EQ(parse_init("zeros"), Init::kZeros);
}

TEST(FitLire, ZerosStartLeavesEmptySupportWhenBetterExists) {
  // With a large local-term weight no single rule pays for itself from the
  // empty model, yet multi-rule supports have far lower objective.
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Sample s = lire_test::planted_sample(300, 500 + seed);
    const RuleMatrix m = dedup_and_index(decompose(fit_forest(s, 30, 3, seed)), s);
    FitConfig cfg;
    cfg.gamma = 0.001;
    cfg.lambda = 2.0;
    cfg.init = Init::kZeros;
    const FitResult fit = fit_lire(m, s, cfg);
    WeightState empty(m, s.labels());
    refit_intercept(empty, cfg.weight_clamp);
    EXPECT_FALSE(fit.state.support().empty());
    EXPECT_LT(objective(fit.state, 0.001, 2.0), objective(empty, 0.001, 2.0));
    for (std::size_t i = 1; i < fit.report.objective_trace.size(); ++i) {
      EXPECT_LE(fit.report.objective_trace[i], fit.report.objective_trace[i - 1] + 1e-12);
    }
  }
}

TEST(FitLire, BestStartKeepsLowerObjective) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Sample s = lire_test::planted_sample(200, 300 + seed);
    const RuleMatrix m = dedup_and_index(decompose(fit_forest(s, 15, 3, seed)), s);
    FitConfig cfg;
    cfg.gamma = 0.002;
    cfg.lambda = 1.0;
    ASSERT_EQ(cfg.init, Init::kBest);
    const FitResult best = fit_lire(m, s, cfg);
    cfg.init = Init::kL1;
    const double g_l1 = objective(fit_lire(m, s, cfg).state, 0.002, 1.0);
    cfg.init = Init::kZeros;
    const double g_zeros = objective(fit_lire(m, s, cfg).state, 0.002, 1.0);
    EXPECT_EQ(objective(best.state, 0.002, 1.0), std::min(g_l1, g_zeros));
  }
  EXPECT_EQ(parse_init("best"), Init::kBest);
  EXPECT_STREQ(init_name(Init::kBest), "best");
}
