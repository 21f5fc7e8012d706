#include <gtest/gtest.h>

#include <memory>
#include <random>

#include "bnet/bundle_solver.hpp"
#include "brute_force.hpp"

using namespace bnet;

namespace {

using PhiFn = std::function<std::pair<double, Vec>(std::span<const double>)>;

/// Oracle over a plain convex function that logs every query point.
struct Scripted {
  std::shared_ptr<std::vector<Vec>> queries = std::make_shared<std::vector<Vec>>();

  OracleHandle handle(PhiFn phi, std::size_t dim, bool sign = false) const {
    auto log = queries;
    return OracleHandle(
        [phi = std::move(phi), log](std::span<const double> pi) {
          log->emplace_back(pi.begin(), pi.end());
          auto [v, g] = phi(pi);
          return Evaluation{v, g, -v};
        },
        dim, sign);
  }
};

std::pair<double, Vec> abs_value(std::span<const double> x) {
  const double s = x[0] > 0 ? 1.0 : (x[0] < 0 ? -1.0 : 0.0);
  return {std::abs(x[0]), Vec{s}};
}

SolverConfig constant_eta(double eta, std::size_t max_iter = 100) {
  SolverConfig c;
  c.eta.kind = EtaKind::Constant;
  c.eta.eta0 = eta;
  c.max_iter = max_iter;
  c.record_times = false;
  return c;
}

}  // namespace

TEST(RunBundle, AbsoluteValueHandTrace) {
  Scripted s;
  const auto trace = run_bundle(s.handle(abs_value, 1), Vec{1.0}, constant_eta(1.0));
  EXPECT_EQ(trace.termination, Termination::Stopped);
  ASSERT_EQ(trace.rows.size(), 2u);
  EXPECT_EQ(trace.rows[1].step, StepType::Serious);
  EXPECT_EQ(trace.rows[1].trial_value, 0.0);
  EXPECT_EQ(trace.best_value, 0.0);
  EXPECT_EQ(*s.queries, (std::vector<Vec>{{1.0}, {0.0}}));
}

TEST(RunBundle, ConstantFunctionStopsImmediately) {
  Scripted s;
  auto phi = [](std::span<const double>) { return std::pair{4.0, Vec{0.0, 0.0}}; };
  const auto trace = run_bundle(s.handle(phi, 2), Vec{1.0, 2.0}, constant_eta(1.0));
  EXPECT_EQ(trace.termination, Termination::Stopped);
  EXPECT_EQ(trace.best_value, 4.0);
  EXPECT_EQ(trace.oracle_calls, 1u);
}

TEST(RunBundle, RejectsBadStart) {
  Scripted s;
  EXPECT_THROW(run_bundle(s.handle(abs_value, 1), Vec{1.0, 2.0}, constant_eta(1.0)),
               ContractViolation);
  EXPECT_THROW(run_bundle(s.handle(abs_value, 1, true), Vec{-1.0}, constant_eta(1.0)),
               ContractViolation);
}

TEST(RunBundle, CenterValuesNonincreasingOnGeneratedInstances) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Problem p = seed % 2 ? Problem(generate_mcnd({6, 14, 4}, seed))
                               : Problem(generate_gap({15, 3}, seed));
    auto cfg = constant_eta(seed % 3 == 0 ? 1.0 : 10.0, 60);
    if (seed % 5 == 0) cfg.eta.kind = EtaKind::Soft;
    const auto trace = run_bundle(make_min_oracle(p), Vec(dual_dimension(p), 0.0), cfg);
    ASSERT_LE(trace.oracle_calls, cfg.max_iter + 1);
    for (std::size_t t = 1; t < trace.rows.size(); ++t)
      ASSERT_LE(trace.rows[t].center_value, trace.rows[t - 1].center_value) << "seed " << seed;
  }
}

TEST(RunBundle, StoppingCertificateIsSound) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<Vec> a(12, Vec(3));
    Vec b(12);
    for (auto& row : a)
      for (double& v : row) v = n(rng);
    for (double& v : b) v = n(rng);
    auto phi = [a, b](std::span<const double> x) {
      std::size_t best = 0;
      double v = -1e300;
      for (std::size_t r = 0; r < a.size(); ++r) {
        const double s = dot(a[r], x) + b[r];
        if (s > v) v = s, best = r;
      }
      // Keep the function bounded below with a norm term.
      const double nx = norm(x);
      Vec g = a[best];
      if (nx > 0) axpy(5.0 / nx, x, g);
      return std::pair{v + 5.0 * nx, g};
    };
    Scripted s;
    auto cfg = constant_eta(1.0, 500);
    cfg.eps = 1e-6;
    const auto trace = run_bundle(s.handle(phi, 3), Vec{1.0, -1.0, 0.5}, cfg);
    if (trace.termination != Termination::Stopped) continue;
    const double center = trace.rows.back().center_value;
    double best = 1e300;
    for (const auto& q : *s.queries) best = std::min(best, phi(q).first);
    ASSERT_LE(center, best + cfg.eps * std::max(1.0, std::abs(center)) + 1e-8);
  }
}

TEST(RunBundle, SingleEntryBundleTakesSubgradientSteps) {
  const Problem p = generate_mcnd({6, 14, 4}, 3);
  Scripted s;
  auto inner = make_min_oracle(p);
  auto phi = [inner](std::span<const double> x) {
    const auto e = inner.evaluate(x);
    return std::pair{e.value, e.subgradient};
  };
  auto cfg = constant_eta(0.5, 30);
  cfg.max_bundle_size = 1;
  const auto trace = run_bundle(s.handle(phi, inner.dimension()), Vec(inner.dimension(), 0.0), cfg);
  const auto& q = *s.queries;
  Vec center = q[0];
  for (std::size_t t = 1; t < q.size(); ++t) {
    Vec expected = center;
    axpy(-0.5, phi(q[t - 1]).second, expected);
    for (std::size_t i = 0; i < expected.size(); ++i) ASSERT_NEAR(q[t][i], expected[i], 1e-9);
    if (trace.rows[t].step == StepType::Serious) center = q[t];
  }
}

TEST(RunBundle, OracleFailureCarriesPartialTrace) {
  auto calls = std::make_shared<int>(0);
  OracleHandle o(
      [calls](std::span<const double> x) {
        if (++*calls == 5) throw std::runtime_error("boom");
        auto [v, g] = abs_value(x);
        return Evaluation{v, g, -v};
      },
      1, false);
  try {
    run_bundle(o, Vec{100.0}, constant_eta(0.01));
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_EQ(e.partial().rows.size(), 4u);
    EXPECT_EQ(e.partial().termination, Termination::Error);
  }
}

TEST(RunBundle, SignConstrainedTrialsStayFeasible) {
  const Problem p = generate_gap({20, 4}, 5);
  Scripted s;
  auto inner = make_min_oracle(p);
  auto phi = [inner](std::span<const double> x) {
    const auto e = inner.evaluate(x);
    return std::pair{e.value, e.subgradient};
  };
  run_bundle(s.handle(phi, inner.dimension(), true), Vec(inner.dimension(), 0.0),
             constant_eta(100.0, 40));
  for (const auto& q : *s.queries)
    for (double v : q) ASSERT_GE(v, 0.0);
}

TEST(RunDescent, KeepsStepWhileImproving) {
  Scripted s;
  const auto trace = run_descent(s.handle(abs_value, 1), Vec{10.0}, 0.5, 15, true, false);
  for (const auto& r : trace.rows) EXPECT_EQ(r.eta, 0.5);
  EXPECT_EQ(trace.oracle_calls, 16u);
}

TEST(RunDescent, HalvesAfterThreeNonImprovingSteps) {
  Scripted s;
  auto flat = [](std::span<const double>) { return std::pair{1.0, Vec{1.0}}; };
  const auto trace = run_descent(s.handle(flat, 1), Vec{0.0}, 1.0, 7, true, false);
  const Vec expected{1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.25};
  for (std::size_t t = 0; t < trace.rows.size(); ++t) EXPECT_EQ(trace.rows[t].eta, expected[t]);
}

TEST(RunDescent, BestValueNonincreasing) {
  Scripted s;
  auto quad_like = [](std::span<const double> x) {
    // Piecewise-linear surrogate of x^2: max over tangents at integers.
    double best = -1e300, slope = 0;
    for (int k = -5; k <= 5; ++k) {
      const double v = 2.0 * k * x[0] - k * k;
      if (v > best) best = v, slope = 2.0 * k;
    }
    return std::pair{best, Vec{slope}};
  };
  const auto trace = run_descent(s.handle(quad_like, 1), Vec{4.3}, 0.7, 50, true, false);
  for (std::size_t t = 1; t < trace.rows.size(); ++t)
    ASSERT_LE(trace.rows[t].center_value, trace.rows[t - 1].center_value);
}

TEST(RunAdam, FirstStepIsSignStep) {
  Scripted s;
  auto linear = [](std::span<const double>) { return std::pair{0.0, Vec{3.0, -2.0, 0.0}}; };
  run_adam(s.handle(linear, 3), Vec{0.0, 0.0, 0.0}, 0.1, 1, {}, false);
  const auto& q = *s.queries;
  ASSERT_EQ(q.size(), 2u);
  EXPECT_NEAR(q[1][0], -0.1, 1e-8);
  EXPECT_NEAR(q[1][1], 0.1, 1e-8);
  EXPECT_EQ(q[1][2], 0.0);
}

TEST(RunAdam, ZeroGradientKeepsIterate) {
  Scripted s;
  auto flat = [](std::span<const double>) { return std::pair{2.0, Vec{0.0, 0.0}}; };
  run_adam(s.handle(flat, 2), Vec{1.0, -1.0}, 0.5, 10, {}, false);
  for (const auto& q : *s.queries) EXPECT_EQ(q, (Vec{1.0, -1.0}));
}

TEST(Baselines, DeterministicAndBudgeted) {
  const Problem p = generate_mcnd({6, 14, 4}, 1);
  const auto o = make_min_oracle(p);
  const Vec pi0(o.dimension(), 0.0);
  const auto a = run_adam(o, pi0, 0.1, 25, {}, false);
  const auto b = run_adam(o, pi0, 0.1, 25, {}, false);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t t = 0; t < a.rows.size(); ++t) EXPECT_EQ(a.rows[t].trial_value, b.rows[t].trial_value);
  EXPECT_EQ(a.oracle_calls, 26u);
  EXPECT_EQ(run_descent(o, pi0, 0.1, 25, true, false).oracle_calls, 26u);
  EXPECT_LE(run_bundle(o, pi0, constant_eta(1.0, 25)).oracle_calls, 26u);
}
