#include <gtest/gtest.h>

#include <random>

#include "bnet/bundle_core.hpp"
#include "bnet/master_problem.hpp"
#include "brute_force.hpp"

using namespace bnet;

namespace {

std::vector<BundleEntry> make_entries(const std::vector<Vec>& g, const Vec& alpha) {
  std::vector<BundleEntry> out;
  for (std::size_t i = 0; i < g.size(); ++i)
    out.push_back({g[i], alpha[i], 0.0, Vec(g[i].size(), 0.0), 0, i});
  return out;
}

std::vector<BundleEntry> random_bundle(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ad(0.0, 2.0);
  std::vector<Vec> g(n, Vec(dim));
  Vec alpha(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : g[i]) v = nd(rng);
    alpha[i] = ad(rng);
  }
  return make_entries(g, alpha);
}

}  // namespace

TEST(SolveDmp, SingleEntry) {
  const auto e = make_entries({{1.5, -2.0}}, {0.3});
  const auto s = solve_dmp(e, 2.0);
  EXPECT_EQ(s.theta, Vec{1.0});
  EXPECT_EQ(s.w, (Vec{1.5, -2.0}));
  EXPECT_EQ(s.sigma, 0.3);
}

TEST(SolveDmp, SymmetricPair) {
  const auto s = solve_dmp(make_entries({{1.0}, {-1.0}}, {0.0, 0.0}), 1.0);
  EXPECT_NEAR(s.theta[0], 0.5, 1e-12);
  EXPECT_NEAR(s.theta[1], 0.5, 1e-12);
  EXPECT_NEAR(s.w[0], 0.0, 1e-12);
  EXPECT_NEAR(s.sigma, 0.0, 1e-12);
}

TEST(SolveDmp, FrozenTwoEntryExample) {
  // Values frozen from the grid-search oracle in brute_force.hpp.
  const auto s = solve_dmp(make_entries({{2.0}, {0.0}}, {0.0, 1.0}), 1.0);
  EXPECT_NEAR(s.theta[0], 0.25, 1e-10);
  EXPECT_NEAR(s.theta[1], 0.75, 1e-10);
  EXPECT_NEAR(s.objective, 0.875, 1e-12);
  EXPECT_NEAR(s.w[0], 0.5, 1e-10);
  EXPECT_NEAR(s.sigma, 0.75, 1e-10);
  Vec theta;
  EXPECT_NEAR(brute::dmp_grid_minimum({{2.0}, {0.0}}, {0.0, 1.0}, 1.0, &theta), 0.875, 1e-9);
  EXPECT_NEAR(theta[0], 0.25, 1e-6);
}

TEST(SolveDmp, ContractViolations) {
  const auto e = make_entries({{1.0}}, {0.0});
  EXPECT_THROW(solve_dmp(std::vector<BundleEntry>{}, 1.0), ContractViolation);
  EXPECT_THROW(solve_dmp(e, 0.0), ContractViolation);
  DmpOptions bad;
  bad.tol = 0.0;
  EXPECT_THROW(solve_dmp(e, 1.0, bad), ContractViolation);
}

TEST(SolveDmp, AllZeroSubgradientsPickSmallestError) {
  const auto s = solve_dmp(make_entries({{0.0}, {0.0}, {0.0}}, {0.4, 0.1, 0.2}), 1.0);
  EXPECT_EQ(s.theta, (Vec{0.0, 1.0, 0.0}));
  EXPECT_EQ(s.sigma, 0.1);
}

TEST(SolveDmp, MatchesGridOracleAndCertifiesKkt) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> eta_d(0.1, 5.0);
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t n = 2 + trial % 3, dim = 1 + trial % 3;
    const auto entries = random_bundle(rng, n, dim);
    const double eta = eta_d(rng);
    const auto s = solve_dmp(entries, eta);
    std::vector<Vec> g;
    Vec alpha;
    for (const auto& e : entries) {
      g.push_back(e.g);
      alpha.push_back(e.alpha);
    }
    const double grid = brute::dmp_grid_minimum(g, alpha, eta);
    ASSERT_NEAR(s.objective, grid, 1e-6) << "trial " << trial;
    ASSERT_LE(s.kkt_residual, 1e-10);

    // Independent KKT check from the returned weights.
    Vec grad(n);
    double lambda = 1e300;
    for (std::size_t i = 0; i < n; ++i) {
      grad[i] = eta * dot(g[i], s.w) + alpha[i];
      lambda = std::min(lambda, grad[i]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_GE(s.theta[i], 0.0);
      total += s.theta[i];
      if (s.theta[i] > 1e-10) {
        ASSERT_NEAR(grad[i], lambda, 1e-9);
      }
    }
    ASSERT_NEAR(total, 1.0, 1e-12);
    ASSERT_GE(s.sigma, -1e-9);
  }
}

TEST(SolveDmp, ObjectiveNondecreasingInEta) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 100; ++trial) {
    const auto entries = random_bundle(rng, 5, 3);
    double prev = -1e300;
    for (double eta : {0.01, 0.1, 1.0, 10.0, 100.0}) {
      const double obj = solve_dmp(entries, eta).objective;
      ASSERT_GE(obj, prev - 1e-12);
      prev = obj;
    }
  }
}

TEST(SolveDmp, Deterministic) {
  std::mt19937_64 rng(33);
  const auto entries = random_bundle(rng, 12, 6);
  const auto a = solve_dmp(entries, 0.7);
  const auto b = solve_dmp(entries, 0.7);
  EXPECT_EQ(a.theta, b.theta);
}

TEST(SolveDmp, LargerBundlesConverge) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 20; ++trial) {
    const auto entries = random_bundle(rng, 60, 40);
    DmpSolution s;
    ASSERT_NO_THROW(s = solve_dmp(entries, 1.0 + trial));
    ASSERT_LE(s.kkt_residual, 1e-10);
  }
}

TEST(SolveDmp, CapReportsBestIterate) {
  std::mt19937_64 rng(35);
  const auto entries = random_bundle(rng, 30, 20);
  DmpOptions opt;
  opt.max_iter = 1;
  opt.polish_every = 1000;
  try {
    solve_dmp(entries, 1.0, opt);
    FAIL() << "expected non-convergence";
  } catch (const DmpNotConverged& e) {
    EXPECT_EQ(e.best().theta.size(), 30u);
    EXPECT_GT(e.best().kkt_residual, 1e-10);
  }
}

TEST(Aggregate, Examples) {
  const auto e = make_entries({{1.0}, {-1.0}}, {0.2, 0.6});
  auto [w1, s1] = aggregate(Vec{1.0, 0.0}, e);
  EXPECT_EQ(w1, Vec{1.0});
  EXPECT_EQ(s1, 0.2);
  auto [w2, s2] = aggregate(Vec{0.5, 0.5}, e);
  EXPECT_EQ(w2, Vec{0.0});
  EXPECT_THROW(aggregate(Vec{1.0}, e), ContractViolation);
}

TEST(Aggregate, SigmaWithinErrorRange) {
  std::mt19937_64 rng(36);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto e = random_bundle(rng, 6, 2);
    Vec raw(6);
    for (double& v : raw) v = u(rng);
    const Vec theta = project_to_simplex(raw);
    const auto [w, sigma] = aggregate(theta, e);
    double lo = 1e300, hi = -1e300;
    for (const auto& x : e) lo = std::min(lo, x.alpha), hi = std::max(hi, x.alpha);
    ASSERT_GE(sigma, lo - 1e-12);
    ASSERT_LE(sigma, hi + 1e-12);
  }
}

TEST(StoppingTest, Examples) {
  EXPECT_TRUE(stopping_test(Vec{0.0}, 0.0, 1e4, 1e-6, -5.0));
  EXPECT_FALSE(stopping_test(Vec{1.0}, 1.0, 1e4, 1e-4, 100.0));
  EXPECT_THROW(stopping_test(Vec{0.0}, -1.0, 1e4, 1e-6, 0.0), ContractViolation);
  EXPECT_THROW(stopping_test(Vec{0.0}, 0.0, 0.0, 1e-6, 0.0), ContractViolation);
  // The floor keeps the test meaningful at nonpositive center values.
  EXPECT_TRUE(stopping_test(Vec{0.0}, 5e-7, 1e4, 1e-6, -0.5));
}

TEST(PredictedQuantities, Examples) {
  const auto z = predicted_quantities(Vec{0.0}, 0.4, 1.0, 10.0);
  EXPECT_EQ(z.v_star, 0.4);
  EXPECT_EQ(z.eps_star, 0.4);
  const Vec w{1.0, 1.0};
  const auto q = predicted_quantities(w, 3.0, 1.0, 10.0);
  EXPECT_EQ(q.v_star, 5.0);
  EXPECT_EQ(q.eps_star, 23.0);
  EXPECT_EQ(q.quad, 10.0);
  EXPECT_EQ(q.lin, 3.0);
  EXPECT_LE(predicted_quantities(w, 3.0, 2.0, 10.0).v_star, q.eps_star);
}
