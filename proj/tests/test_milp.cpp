#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "deferlab/datagen.hpp"
#include "deferlab/milp.hpp"
#include "support/oracles.hpp"

using namespace deferlab;
using deferlab::oracle::brute_force_min_errors;

namespace {

DeferDataset make_data(std::vector<double> x, std::size_t d, std::vector<int> y, std::vector<int> h, int c = 2) {
  return DeferDataset(std::move(x), d, std::move(y), std::move(h), c);
}

DeferDataset small_instance(std::uint64_t seed, std::size_t n, bool noisy) {
  SyntheticConfig cfg;
  cfg.d = 2;
  cfg.n = n;
  cfg.distribution = FeatureDistribution::Uniform;
  cfg.seed = seed;
  cfg.p_h0 = 0.3;
  if (noisy) {
    cfg.p_m = 0.3;
    cfg.p_h0 = 0.4;
    cfg.p_h1 = 0.2;
  }
  return generate_synthetic(cfg).dataset;
}

double group_error_mean(const MilpProblem& p, const std::vector<double>& x, const std::vector<int>& groups, int g,
                        bool inside) {
  double s = 0.0;
  std::size_t c = 0;
  for (std::size_t i = 0; i < p.n; ++i) {
    if ((groups[i] == g) != inside) continue;
    s += x[p.loss_vars[i]] + x[p.defer_vars[i]] * p.human_wrong(i);
    ++c;
  }
  return s / static_cast<double>(c);
}

}  // namespace

TEST(BuildBinaryMilp, SinglePointCounts) {
  auto data = make_data({0.5}, 1, {1}, {0});
  auto p = build_binary_milp(data, {});
  EXPECT_EQ(p.binary_var_ids.size(), 2u);
  EXPECT_EQ(p.loss_vars.size(), 1u);
  EXPECT_EQ(p.classifier_vars[0].size() + p.rejector_vars.size(), 4u);
  EXPECT_EQ(p.lp_relaxation.num_vars(), 7u);
  EXPECT_EQ(p.lp_relaxation.num_rows(), 4u);
}

TEST(BuildBinaryMilp, RegularizationAddsAuxVariables) {
  auto data = small_instance(1, 8, false);
  MilpConfig cfg;
  auto plain = build_binary_milp(data, cfg);
  cfg.lambda_reg = 0.01;
  auto reg = build_binary_milp(data, cfg);
  EXPECT_EQ(reg.lp_relaxation.num_vars() - plain.lp_relaxation.num_vars(), 2u * (data.dim() + 1));
  for (std::size_t id : reg.aux_vars) EXPECT_DOUBLE_EQ(reg.lp_relaxation.cost()[id], 0.01);
}

TEST(BuildBinaryMilp, ObjectiveCoefficients) {
  auto data = make_data({0.1, 0.2, 0.3}, 1, {0, 1, 1}, {0, 0, 1});
  auto p = build_binary_milp(data, {});
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(p.lp_relaxation.cost()[p.loss_vars[i]], 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(p.lp_relaxation.cost()[p.defer_vars[i]], data.human_correct(i) ? 0.0 : 1.0 / 3.0);
  }
  for (std::size_t id : p.binary_var_ids) {
    EXPECT_EQ(p.lp_relaxation.lower()[id], 0.0);
    EXPECT_EQ(p.lp_relaxation.upper()[id], 1.0);
  }
}

TEST(BuildBinaryMilp, NormalizesByMaxL1Norm) {
  auto data = make_data({3.0, -1.0, 0.5, 0.5}, 2, {0, 1}, {0, 1});
  auto p = build_binary_milp(data, {});
  EXPECT_DOUBLE_EQ(p.norm_scale, 4.0);
  EXPECT_DOUBLE_EQ(p.point(0)[0], 0.75);
  EXPECT_DOUBLE_EQ(p.point(0)[2], 1.0);
}

TEST(BuildBinaryMilp, RejectsMulticlassData) {
  auto data = make_data({0.0, 1.0, 2.0}, 1, {0, 1, 2}, {0, 1, 2}, 3);
  EXPECT_THROW(build_binary_milp(data, {}), std::invalid_argument);
}

TEST(BuildBinaryMilp, ZeroFeaturesStillSolve) {
  auto data = make_data({0.0, 0.0, 0.0}, 1, {0, 1, 1}, {1, 1, 1});
  auto p = build_binary_milp(data, {});
  EXPECT_EQ(p.norm_scale, 1.0);
  auto sol = solve_milp(p, {});
  EXPECT_EQ(sol.status, MilpStatus::ProvenOptimal);
  EXPECT_NEAR(sol.objective, 1.0 / 3.0, 1e-9);
}

TEST(MilpConfig, Validation) {
  MilpConfig cfg;
  cfg.gamma = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.coverage_beta = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.k_m = 1e-7;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_DOUBLE_EQ(MilpConfig{}.big_m_classifier(), 1.0 + 1e-5);
}

TEST(SolveMilp, PerfectHumanGivesZero) {
  auto data = small_instance(4, 10, true);
  std::vector<double> x(data.features().begin(), data.features().end());
  std::vector<int> y(data.labels().begin(), data.labels().end());
  auto perfect = make_data(x, 2, y, y);
  auto sol = solve_milp(build_binary_milp(perfect, {}), {});
  EXPECT_EQ(sol.status, MilpStatus::ProvenOptimal);
  EXPECT_EQ(sol.objective, 0.0);
}

TEST(SolveMilp, RealizablePlantedInstance) {
  auto data = small_instance(7, 20, false);
  auto sol = solve_milp(build_binary_milp(data, {}), {});
  EXPECT_EQ(sol.status, MilpStatus::ProvenOptimal);
  EXPECT_EQ(sol.objective, 0.0);
  EXPECT_EQ(sol.train_loss, 0.0);
}

TEST(SolveMilp, XorOptimumIsOneQuarter) {
  auto data = make_data({1, 1, -1, -1, 1, -1, -1, 1}, 2, {1, 1, 0, 0}, {0, 0, 1, 1});
  for (bool heur : {true, false}) {
    MilpConfig cfg;
    cfg.heuristics = heur;
    auto sol = solve_milp(build_binary_milp(data, cfg), cfg);
    EXPECT_EQ(sol.status, MilpStatus::ProvenOptimal);
    EXPECT_NEAR(sol.objective, 0.25, 1e-9) << "heuristics " << heur;
    EXPECT_NEAR(sol.train_loss, 0.25, 1e-12);
  }
}

TEST(SolveMilp, MatchesBruteForceOnSmallInstances) {
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    const std::size_t n = 5 + seed % 6;
    auto data = small_instance(100 + seed, n, seed % 2 == 1);
    MilpConfig cfg;
    auto sol = solve_milp(build_binary_milp(data, cfg), cfg);
    ASSERT_EQ(sol.status, MilpStatus::ProvenOptimal) << "seed " << seed;
    const int expected = brute_force_min_errors(data);
    EXPECT_NEAR(sol.objective * static_cast<double>(n), expected, 1e-6) << "seed " << seed;
    EXPECT_NEAR(sol.train_loss * static_cast<double>(n), expected, 1e-9) << "seed " << seed;
  }
}

TEST(SolveMilp, BranchAndBoundAloneMatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto data = small_instance(300 + seed, 8, true);
    MilpConfig cfg;
    cfg.heuristics = false;
    auto sol = solve_milp(build_binary_milp(data, cfg), cfg);
    ASSERT_EQ(sol.status, MilpStatus::ProvenOptimal);
    EXPECT_NEAR(sol.objective * 8.0, brute_force_min_errors(data), 1e-6) << "seed " << seed;
  }
}

TEST(SolveMilp, IntegralSolutionInvariants) {
  auto data = small_instance(11, 10, true);
  MilpConfig cfg;
  auto p = build_binary_milp(data, cfg);
  auto sol = solve_milp(p, cfg);
  ASSERT_EQ(sol.status, MilpStatus::ProvenOptimal);
  const auto& x = sol.x;
  auto pair = normalized_pair(p, x);
  for (std::size_t i = 0; i < p.n; ++i) {
    const double r = x[p.defer_vars[i]], t = x[p.error_vars[i]], phi = x[p.loss_vars[i]];
    const double act = affine_score(pair.rejector, p.point(i).first(p.d));
    EXPECT_EQ(r > 0.5, act > 0.0);
    EXPECT_GE(std::abs(act), p.gamma * (1 - 1e-9));
    const double y = p.labels[i] == 1 ? 1.0 : -1.0;
    if (y * affine_score(pair.classifier[0], p.point(i).first(p.d)) < p.gamma * (1 - 1e-9)) EXPECT_GT(t, 0.5);
    EXPECT_NEAR(phi, std::max(0.0, std::round(t) - std::round(r)), 1e-9);
  }
  const double scaled = sol.objective * static_cast<double>(p.n);
  EXPECT_NEAR(scaled, std::round(scaled), 1e-6);
  EXPECT_LE(std::abs(sol.objective - sol.best_bound), cfg.gap_for(p.n) + 1e-12);
}

TEST(SolveMilp, BoundAndIncumbentHistoriesAreMonotone) {
  auto data = small_instance(21, 10, true);
  MilpConfig cfg;
  cfg.heuristics = false;
  auto sol = solve_milp(build_binary_milp(data, cfg), cfg);
  ASSERT_GT(sol.bound_history.size(), 2u);
  for (std::size_t k = 1; k < sol.bound_history.size(); ++k) {
    EXPECT_GE(sol.bound_history[k], sol.bound_history[k - 1] - 1e-12);
    EXPECT_LE(sol.incumbent_history[k], sol.incumbent_history[k - 1]);
  }
}

TEST(SolveMilp, SpeculativeThreadsDoNotChangeTheResult) {
  auto data = small_instance(31, 10, true);
  MilpConfig one;
  one.heuristics = false;
  MilpConfig many = one;
  many.threads = 3;
  auto p = build_binary_milp(data, one);
  auto a = solve_milp(p, one);
  auto b = solve_milp(p, many);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.nodes_explored, b.nodes_explored);
  EXPECT_EQ(a.bound_history, b.bound_history);
}

TEST(SolveMilp, ExtractedPairReproducesObjective) {
  auto data = small_instance(41, 12, true);
  auto p = build_binary_milp(data, {});
  auto sol = solve_milp(p, {});
  auto pair = extract_pair(p, sol.x);
  EXPECT_EQ(system_loss_01(data, decide_halfspace(pair, data)), sol.train_loss);
  EXPECT_NEAR(sol.train_loss, sol.objective, 1e-12);
}

TEST(SolveMilp, RegularizedObjectiveAddsWeightNorm) {
  auto data = small_instance(43, 8, false);
  MilpConfig cfg;
  cfg.lambda_reg = 1e-3;
  auto p = build_binary_milp(data, cfg);
  auto sol = solve_milp(p, cfg);
  ASSERT_EQ(sol.status, MilpStatus::ProvenOptimal);
  double norm = 0.0;
  for (const auto& row : p.classifier_vars)
    for (std::size_t id : row) norm += std::abs(sol.x[id]);
  for (std::size_t id : p.rejector_vars) norm += std::abs(sol.x[id]);
  EXPECT_NEAR(sol.objective - cfg.lambda_reg * norm, sol.train_loss, 1e-9);
}

TEST(SolveMilp, TimeLimitWithoutHeuristicsHasNoSolution) {
  auto data = small_instance(51, 12, true);
  MilpConfig cfg;
  cfg.heuristics = false;
  cfg.time_limit_s = 0.0;
  auto sol = solve_milp(build_binary_milp(data, cfg), cfg);
  EXPECT_EQ(sol.status, MilpStatus::TimeLimitNoSolution);
}

TEST(SolveMilp, TimeLimitKeepsHeuristicIncumbent) {
  auto data = small_instance(52, 12, true);
  MilpConfig cfg;
  cfg.time_limit_s = 0.0;
  auto sol = solve_milp(build_binary_milp(data, cfg), cfg);
  ASSERT_TRUE(sol.status == MilpStatus::TimeLimitIncumbent || sol.status == MilpStatus::ProvenOptimal);
  EXPECT_FALSE(sol.x.empty());
  EXPECT_EQ(system_loss_01(data, decide_halfspace(sol.pair, data)), sol.train_loss);
}

TEST(SolveMilp, InfeasibleRoot) {
  auto data = small_instance(53, 6, true);
  auto p = build_binary_milp(data, {});
  std::vector<LinearTerm> all;
  for (std::size_t r : p.defer_vars) all.push_back({r, 1.0});
  p.lp_relaxation.add_row(all, RowSense::GreaterEqual, 7.0);
  EXPECT_EQ(solve_milp(p, {}).status, MilpStatus::Infeasible);
}

TEST(Multiclass, BinaryDataGivesSameOptimum) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto data = small_instance(60 + seed, 10, true);
    auto a = solve_milp(build_binary_milp(data, {}), {});
    auto b = solve_milp(build_multiclass_milp(data, {}), {});
    ASSERT_EQ(b.status, MilpStatus::ProvenOptimal);
    EXPECT_NEAR(a.objective, b.objective, 1e-9) << "seed " << seed;
    EXPECT_EQ(b.pair.classifier.size(), 2u);
  }
}

TEST(Multiclass, CountsAndThreeClassRealizable) {
  SyntheticConfig cfg;
  cfg.d = 2;
  cfg.n = 15;
  cfg.num_classes = 3;
  cfg.seed = 8;
  cfg.distribution = FeatureDistribution::Uniform;
  auto data = generate_synthetic(cfg).dataset;
  auto p = build_multiclass_milp(data, {});
  EXPECT_EQ(p.binary_var_ids.size(), 15u * (2 + 2));
  EXPECT_EQ(p.lp_relaxation.num_rows(), 15u * (3 + 2 * 2 + 1));
  auto sol = solve_milp(p, {});
  EXPECT_EQ(sol.status, MilpStatus::ProvenOptimal);
  EXPECT_EQ(sol.objective, 0.0);
  EXPECT_EQ(sol.train_loss, 0.0);
}

TEST(Multiclass, PairwiseBinariesForceClassifierError) {
  // A point whose label loses to some class must have t = 1.
  auto data = make_data({0.2, 0.4, 0.9}, 1, {0, 1, 2}, {1, 2, 0}, 3);
  auto p = build_multiclass_milp(data, {});
  auto sol = solve_milp(p, {});
  ASSERT_EQ(sol.status, MilpStatus::ProvenOptimal);
  for (std::size_t i = 0; i < p.n; ++i) {
    bool all = true;
    for (std::size_t k = 0; k < 3; ++k)
      if (p.pair_vars[i][k] != static_cast<std::size_t>(-1)) all = all && sol.x[p.pair_vars[i][k]] > 0.5;
    if (!all) EXPECT_GT(sol.x[p.error_vars[i]], 0.5);
  }
}

TEST(Coverage, BetaOneIsVacuous) {
  auto data = small_instance(70, 10, true);
  auto base = solve_milp(build_binary_milp(data, {}), {});
  MilpConfig cfg;
  cfg.coverage_beta = 1.0;
  auto c = solve_milp(build_binary_milp(data, cfg), cfg);
  EXPECT_NEAR(base.objective, c.objective, 1e-9);
}

TEST(Coverage, BetaZeroMeansNoDeferral) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto data = small_instance(80 + seed, 10, true);
    MilpConfig cfg;
    cfg.coverage_beta = 0.0;
    auto p = build_binary_milp(data, cfg);
    auto sol = solve_milp(p, cfg);
    ASSERT_EQ(sol.status, MilpStatus::ProvenOptimal);
    for (std::size_t r : p.defer_vars) EXPECT_LT(sol.x[r], 0.5);
    EXPECT_NEAR(sol.objective * 10.0, brute_force_min_errors(data, 0), 1e-6);
  }
}

TEST(Coverage, HalfBudgetOnHeavyDeferralInstance) {
  // Human perfect: the unconstrained optimum may defer everything.
  auto noisy = small_instance(90, 12, true);
  std::vector<double> x(noisy.features().begin(), noisy.features().end());
  std::vector<int> y(noisy.labels().begin(), noisy.labels().end());
  auto data = make_data(x, 2, y, y);
  MilpConfig cfg;
  auto free_sol = solve_milp(build_binary_milp(data, cfg), cfg);
  cfg.coverage_beta = 0.5;
  auto p = build_binary_milp(data, cfg);
  auto sol = solve_milp(p, cfg);
  ASSERT_EQ(sol.status, MilpStatus::ProvenOptimal);
  double deferred = 0.0;
  for (std::size_t r : p.defer_vars) deferred += sol.x[r];
  EXPECT_LE(deferred / 12.0, 0.5 + 1e-9);
  EXPECT_GE(sol.objective, free_sol.objective - 1e-12);
  EXPECT_NEAR(sol.objective * 12.0, brute_force_min_errors(data, 6), 1e-6);
}

TEST(Fairness, GroupMeansEqualizedOnSolution) {
  SyntheticConfig gen;
  gen.d = 2;
  gen.n = 15;
  gen.seed = 5;
  gen.p_m = 0.2;
  gen.p_h0 = 0.3;
  gen.p_h1 = 0.2;
  gen.distribution = FeatureDistribution::Uniform;
  auto data = generate_synthetic(gen).dataset;
  std::vector<int> groups(15);
  for (std::size_t i = 0; i < 15; ++i) groups[i] = static_cast<int>(i % 3);
  MilpConfig cfg;
  auto base = solve_milp(build_binary_milp(data, cfg), cfg);
  cfg.fairness_groups = groups;
  cfg.time_limit_s = 60.0;
  auto p = build_binary_milp(data, cfg);
  auto sol = solve_milp(p, cfg);
  ASSERT_FALSE(sol.x.empty());
  for (int g = 0; g < 3; ++g)
    EXPECT_NEAR(group_error_mean(p, sol.x, groups, g, true), group_error_mean(p, sol.x, groups, g, false), 1e-6);
  EXPECT_GE(sol.objective, base.objective - 1e-12);
}

TEST(Fairness, RejectsDegenerateGroups) {
  auto data = small_instance(95, 6, true);
  auto p = build_binary_milp(data, {});
  std::vector<int> one(6, 0);
  EXPECT_THROW(add_fairness_constraint(p, one), std::invalid_argument);
  std::vector<int> short_groups(5, 0);
  EXPECT_THROW(add_fairness_constraint(p, short_groups), std::invalid_argument);
}

TEST(ExtractPair, RescalesNonBiasWeights) {
  HalfspacePair pair{{{1.0, 0.5}}, {2.0, -0.5}};
  auto same = rescale_pair(pair, 1.0);
  EXPECT_EQ(same.classifier, pair.classifier);
  auto scaled = rescale_pair(pair, 10.0);
  EXPECT_DOUBLE_EQ(scaled.classifier[0][0], 0.1);
  EXPECT_DOUBLE_EQ(scaled.classifier[0][1], 0.5);
  EXPECT_DOUBLE_EQ(scaled.rejector[0], 0.2);
  EXPECT_DOUBLE_EQ(scaled.rejector[1], -0.5);
}

TEST(ExtractPair, FractionalSolutionThrows) {
  auto data = small_instance(97, 4, true);
  auto p = build_binary_milp(data, {});
  std::vector<double> x(p.lp_relaxation.num_vars(), 0.0);
  x[p.defer_vars[0]] = 0.5;
  EXPECT_THROW(extract_pair(p, x), std::logic_error);
}

TEST(Heuristics, PairToSolutionIsFeasibleAndExact) {
  auto data = small_instance(99, 12, true);
  auto p = build_binary_milp(data, {});
  for (const auto& pair : heuristic_pairs(p, {})) {
    auto x = pair_to_solution(p, pair);
    if (!x) continue;
    EXPECT_LE(p.lp_relaxation.max_violation(*x), 1e-9);
    auto orig = rescale_pair(pair, p.norm_scale);
    EXPECT_GE(p.lp_relaxation.objective(*x) + 1e-12, system_loss_01(data, decide_halfspace(orig, data)));
  }
}
