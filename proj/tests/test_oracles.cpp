#include <gtest/gtest.h>

#include <random>

#include "bnet/instance_io.hpp"
#include "bnet/oracles.hpp"
#include "brute_force.hpp"

using namespace bnet;

namespace {

McndInstance single_arc_instance() {
  McndInstance inst;
  inst.nodes = 2;
  inst.arcs.push_back({0, 1, 5.0, 2.0, {1.0}});
  inst.commodities.push_back({0, 1, 3});
  return inst;
}

}  // namespace

TEST(ArcRelaxation, FillsMostNegativeReducedCostFirst) {
  const auto r = mcnd_arc_relaxation(2.0, 5.0, Vec{-3, -1, 2}, Vec{4, 3, 5});
  EXPECT_DOUBLE_EQ(r.value, -11.0);
  EXPECT_EQ(r.flows, (Vec{4, 1, 0}));
}

TEST(ArcRelaxation, ClosedWhenNoNegativeReducedCost) {
  const auto r = mcnd_arc_relaxation(3.0, 5.0, Vec{1, 2}, Vec{4, 3});
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.flows, (Vec{0, 0}));
}

TEST(ArcRelaxation, SingleItemFits) {
  const auto r = mcnd_arc_relaxation(0.0, 5.0, Vec{-1}, Vec{2});
  EXPECT_EQ(r.value, -2.0);
  EXPECT_EQ(r.flows, (Vec{2}));
}

TEST(ArcRelaxation, ContractViolations) {
  EXPECT_THROW(mcnd_arc_relaxation(1.0, 5.0, Vec{1, 2}, Vec{1}), ContractViolation);
  EXPECT_THROW(mcnd_arc_relaxation(1.0, 0.0, Vec{1}, Vec{1}), ContractViolation);
}

TEST(ArcRelaxation, MatchesVertexEnumeration) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> w(-10, 10), q(0.5, 8), c(0.5, 20), f(0.1, 15);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + trial % 5;
    Vec ws(n), qs(n);
    for (std::size_t k = 0; k < n; ++k) {
      ws[k] = w(rng);
      qs[k] = q(rng);
    }
    const double cap = c(rng), fixed = f(rng);
    const auto r = mcnd_arc_relaxation(fixed, cap, ws, qs);
    const double expected = std::min(0.0, fixed + brute::arc_lp_by_vertices(cap, ws, qs));
    ASSERT_NEAR(r.value, expected, 1e-9);
    // The returned flows realize the value and are feasible.
    double load = 0.0, cost = r.value < 0.0 ? fixed : 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      ASSERT_GE(r.flows[k], 0.0);
      ASSERT_LE(r.flows[k], qs[k] + 1e-12);
      load += r.flows[k];
      cost += ws[k] * r.flows[k];
    }
    ASSERT_LE(load, cap + 1e-9);
    ASSERT_NEAR(cost, r.value, 1e-9);
  }
}

TEST(McndEvaluate, SingleArcAtZero) {
  const auto inst = single_arc_instance();
  const auto e = mcnd_evaluate(inst, Vec{0, 0});
  EXPECT_EQ(e.raw_lr_value, 0.0);
  // Minimization orientation negates the LR supergradient [3, -3].
  EXPECT_EQ(e.subgradient, (Vec{-3, 3}));
  const auto lr = mcnd_lagrangian(inst, Vec{0, 0});
  EXPECT_EQ(lr.subgradient, (Vec{3, -3}));
}

TEST(McndEvaluate, NoCommodities) {
  McndInstance inst;
  inst.nodes = 3;
  inst.arcs.push_back({0, 1, 5.0, 2.0, {}});
  inst.arcs.push_back({1, 2, 5.0, 4.0, {}});
  const auto e = mcnd_evaluate(inst, Vec{});
  EXPECT_EQ(e.raw_lr_value, 0.0);
  EXPECT_TRUE(e.subgradient.empty());
}

TEST(McndEvaluate, DimensionMismatch) {
  EXPECT_THROW(mcnd_evaluate(single_arc_instance(), Vec{0}), ContractViolation);
}

TEST(McndEvaluate, ExcludesArcsIntoOriginAndOutOfDestination) {
  // Arc 1->0 enters the origin of commodity 0->1; it must not carry it even
  // at a very attractive reduced cost.
  McndInstance inst;
  inst.nodes = 2;
  inst.arcs.push_back({1, 0, 5.0, 1.0, {1.0}});
  inst.commodities.push_back({0, 1, 3});
  const auto lr = mcnd_lagrangian(inst, Vec{-100, 100});
  EXPECT_DOUBLE_EQ(lr.value, -100.0 * 3 - 100.0 * 3);
}

TEST(McndEvaluate, Deterministic) {
  std::mt19937_64 rng(5);
  const auto inst = generate_mcnd({}, 3);
  const auto pi = brute::random_multipliers(rng, inst.dual_dimension(), 10.0, false);
  const auto a = mcnd_evaluate(inst, pi);
  const auto b = mcnd_evaluate(inst, pi);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.subgradient, b.subgradient);
}

TEST(McndEvaluate, MatchesBruteForceOnMicroInstances) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = brute::random_micro_mcnd(rng);
    const auto pi = brute::random_multipliers(rng, inst.dual_dimension(), 12.0, false);
    const double expected = brute::mcnd_lr_brute(inst, pi);
    ASSERT_NEAR(mcnd_lagrangian(inst, pi).value, expected, 1e-9 * (1.0 + std::abs(expected)));
  }
}

TEST(GapKnapsack, Examples) {
  const std::vector<std::int64_t> w{2, 3};
  const auto r = gap_bin_knapsack(Vec{5, 3}, w, 4);
  EXPECT_EQ(r.value, 5.0);
  EXPECT_EQ(r.selection, (std::vector<bool>{true, false}));

  const auto empty = gap_bin_knapsack(Vec{}, std::vector<std::int64_t>{}, 10);
  EXPECT_EQ(empty.value, 0.0);
  EXPECT_TRUE(empty.selection.empty());

  const auto none = gap_bin_knapsack(Vec{5, 3}, w, 0);
  EXPECT_EQ(none.value, 0.0);
  EXPECT_EQ(none.selection, (std::vector<bool>{false, false}));
}

TEST(GapKnapsack, PrefersLexicographicallySmallestOnTies) {
  // {0} and {1} both reach 4; {1} is the smaller boolean vector.
  const auto r = gap_bin_knapsack(Vec{4, 4}, std::vector<std::int64_t>{3, 3}, 4);
  EXPECT_EQ(r.value, 4.0);
  EXPECT_EQ(r.selection, (std::vector<bool>{false, true}));
}

TEST(GapKnapsack, NeverSelectsNonpositiveProfit) {
  const auto r = gap_bin_knapsack(Vec{0, -1, 2}, std::vector<std::int64_t>{1, 1, 1}, 3);
  EXPECT_EQ(r.selection, (std::vector<bool>{false, false, true}));
}

TEST(GapKnapsack, MatchesSubsetEnumeration) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> p(-5, 20), w(1, 9), c(0, 25), n_d(0, 10);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = static_cast<std::size_t>(n_d(rng));
    Vec prof(n);
    std::vector<std::int64_t> wt(n);
    for (std::size_t i = 0; i < n; ++i) {
      prof[i] = p(rng);
      wt[i] = w(rng);
    }
    const std::int64_t cap = c(rng);
    double best = 0.0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      std::int64_t load = 0;
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (1u << i)) {
          load += wt[i];
          v += prof[i];
        }
      if (load <= cap) best = std::max(best, v);
    }
    const auto r = gap_bin_knapsack(prof, wt, cap);
    ASSERT_EQ(r.value, best);
    std::int64_t load = 0;
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (r.selection[i]) {
        load += wt[i];
        v += prof[i];
      }
    ASSERT_LE(load, cap);
    ASSERT_EQ(v, best);
  }
}

TEST(GapEvaluate, SingleBinExample) {
  GapInstance inst{2, 1, {{4}, {3}}, {{3}, {3}}, {5}};
  const auto lr = gap_lagrangian(inst, Vec{0, 0});
  EXPECT_EQ(lr.value, 4.0);
  EXPECT_EQ(lr.subgradient, (Vec{0, 1}));
  const auto e = gap_evaluate(inst, Vec{0, 0});
  EXPECT_EQ(e.raw_lr_value, 4.0);
  EXPECT_EQ(e.value, 4.0);
}

TEST(GapEvaluate, HugeMultipliersEmptyEveryBin) {
  const auto inst = generate_gap({20, 3}, 1);
  const Vec pi(inst.items, 1000.0);
  const auto lr = gap_lagrangian(inst, pi);
  EXPECT_EQ(lr.value, 1000.0 * 20);
  EXPECT_EQ(lr.subgradient, Vec(20, 1.0));
}

TEST(GapEvaluate, RejectsNegativeMultiplier) {
  GapInstance inst{2, 1, {{4}, {3}}, {{3}, {3}}, {5}};
  EXPECT_THROW(gap_evaluate(inst, Vec{0, -0.5}), ContractViolation);
}

TEST(GapEvaluate, MatchesBruteForceOnMicroInstances) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = brute::random_micro_gap(rng);
    const auto pi = brute::random_multipliers(rng, inst.items, 15.0, true);
    ASSERT_EQ(gap_lagrangian(inst, pi).value, brute::gap_lr_brute(inst, pi));
  }
}

TEST(MinOracle, ScaleAndOrientation) {
  auto lr = [](std::span<const double>) { return LagrangianValue{10.0, Vec{0.0, 2.0}}; };
  const auto o = make_min_oracle(lr, 2, false, DualSense::Maximize, Vec{0, 0});
  EXPECT_EQ(o.scale(), 2.0);
  const auto e = o.evaluate(Vec{1, 1});
  EXPECT_EQ(e.value, -5.0);
  EXPECT_EQ(e.subgradient, (Vec{0, -1}));
  EXPECT_EQ(e.raw_lr_value, 10.0);
}

TEST(MinOracle, DegenerateScaleIsOne) {
  auto lr = [](std::span<const double>) { return LagrangianValue{3.0, Vec{0.0}}; };
  EXPECT_EQ(make_min_oracle(lr, 1, false, DualSense::Maximize, Vec{0}).scale(), 1.0);
}

TEST(MinOracle, ScalingPreservesArgmin) {
  std::mt19937_64 rng(3);
  const Problem mcnd = generate_mcnd({6, 12, 4}, 8);
  const Problem gap = generate_gap({12, 3}, 8);
  for (const Problem* p : {&mcnd, &gap}) {
    const auto scaled = make_min_oracle(*p);
    const auto unit = OracleHandle(
        [p](std::span<const double> pi) { return orient(lagrangian(*p, pi), dual_sense(*p), 1.0); },
        dual_dimension(*p), sign_constrained(*p));
    std::size_t best_scaled = 0, best_unit = 0;
    double vs = 1e300, vu = 1e300;
    for (std::size_t c = 0; c < 50; ++c) {
      const auto pi = brute::random_multipliers(rng, dual_dimension(*p), 8.0, sign_constrained(*p));
      const double a = scaled.evaluate(pi).value, b = unit.evaluate(pi).value;
      if (a < vs) vs = a, best_scaled = c;
      if (b < vu) vu = b, best_unit = c;
    }
    EXPECT_EQ(best_scaled, best_unit);
  }
}

TEST(MinOracle, SubgradientInequalityOnBothFamilies) {
  std::mt19937_64 rng(17);
  const Problem mcnd = generate_mcnd({8, 20, 6}, 2);
  const Problem gap = generate_gap({15, 4}, 2);
  for (const Problem* p : {&mcnd, &gap}) {
    const auto o = make_min_oracle(*p);
    for (int trial = 0; trial < 300; ++trial) {
      const auto a = brute::random_multipliers(rng, o.dimension(), 10.0, o.sign_constrained());
      const auto b = brute::random_multipliers(rng, o.dimension(), 10.0, o.sign_constrained());
      const auto ea = o.evaluate(a);
      const double lower = ea.value + dot(ea.subgradient, difference(b, a));
      ASSERT_GE(o.evaluate(b).value, lower - 1e-9 * (1.0 + std::abs(ea.value)));
    }
  }
}

TEST(GenerateMcnd, DeterministicAndValid) {
  const McndGeneratorParams params;
  EXPECT_EQ(to_json(generate_mcnd(params, 42)).dump(), to_json(generate_mcnd(params, 42)).dump());
  EXPECT_NE(to_json(generate_mcnd(params, 42)).dump(), to_json(generate_mcnd(params, 43)).dump());
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto inst = generate_mcnd(params, seed);
    ASSERT_NO_THROW(inst.validate()) << "seed " << seed;
    ASSERT_EQ(inst.arcs.size(), 40u);
    ASSERT_EQ(inst.commodities.size(), 10u);
  }
}

TEST(GenerateMcnd, SparseGraphsStayValid) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto inst = generate_mcnd({7, 6, 5}, seed);
    ASSERT_NO_THROW(inst.validate()) << "seed " << seed;
  }
}

TEST(GenerateMcnd, SingleArcInstance) {
  const auto inst = generate_mcnd({2, 1, 1}, 0);
  EXPECT_EQ(inst.arcs.size(), 1u);
  EXPECT_EQ(inst.dual_dimension(), 2u);
  EXPECT_NO_THROW(inst.validate());
}

TEST(GenerateMcnd, RejectsInfeasibleParameters) {
  EXPECT_THROW(generate_mcnd({3, 7, 1}, 0), ContractViolation);
  EXPECT_THROW(generate_mcnd({5, 3, 1}, 0), ContractViolation);
}

TEST(GenerateMcnd, EveryDrawIsRoutable) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    ASSERT_TRUE(mcnd_routable(generate_mcnd({}, seed))) << seed;
    ASSERT_TRUE(mcnd_routable(generate_mcnd({6, 14, 4}, seed))) << seed;
    ASSERT_TRUE(mcnd_routable(generate_mcnd({7, 6, 5}, seed))) << seed;
  }
}

TEST(GenerateMcnd, RoutabilityCheck) {
  McndInstance inst;
  inst.nodes = 3;
  inst.arcs = {{0, 1, 10, 1, {1, 1}}, {1, 2, 10, 1, {1, 1}}, {0, 2, 5, 1, {1, 1}}};
  inst.commodities = {{0, 2, 15}, {1, 2, 0}};
  EXPECT_TRUE(mcnd_routable(inst));
  inst.commodities[1].volume = 1;
  EXPECT_FALSE(mcnd_routable(inst));
  inst.commodities = {{0, 2, 16}};
  EXPECT_FALSE(mcnd_routable(inst));

  McndGeneratorParams p;
  p.capacity_min = p.capacity_max = 1;
  p.volume_min = p.volume_max = 1000;
  EXPECT_THROW(generate_mcnd(p, 0), ContractViolation);
}

TEST(GenerateGap, DeterministicAndValid) {
  const GapGeneratorParams params;
  EXPECT_EQ(to_json(generate_gap(params, 9)).dump(), to_json(generate_gap(params, 9)).dump());
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto inst = generate_gap({30, 5}, seed);
    ASSERT_NO_THROW(inst.validate()) << "seed " << seed;
  }
}

TEST(GenerateGap, CapacityFormula) {
  GapGeneratorParams p;
  p.items = 10;
  p.bins = 2;
  p.weight_min = p.weight_max = 10;
  p.tightness = 1.0;
  const auto inst = generate_gap(p, 0);
  EXPECT_EQ(inst.capacities, (std::vector<std::int64_t>{50, 50}));
}

TEST(GenerateGap, RejectsBadTightness) {
  GapGeneratorParams p;
  p.tightness = 0.0;
  EXPECT_THROW(generate_gap(p, 0), ContractViolation);
  p.tightness = 1.5;
  EXPECT_THROW(generate_gap(p, 0), ContractViolation);
}
