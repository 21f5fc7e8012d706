#pragma once

// Dual master problem of the proximal bundle method:
//
//   min_{theta in simplex}  (eta/2) || sum_i theta_i g_i ||^2 + sum_i theta_i alpha_i
//
// solved by accelerated projected gradient with adaptive restart, finished
// by a primal active-set phase on the detected support.

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "bnet/common.hpp"

namespace bnet {

struct DmpSolution {
  Vec theta;
  Vec w;             // aggregated subgradient
  double sigma = 0;  // aggregated linearization error
  double objective = 0;
  double v_star = 0;  // eta ||w||^2 + sigma
  double kkt_residual = 0;
  std::size_t iterations = 0;
};

/// Thrown when the iteration cap is hit; carries the best iterate found.
class DmpNotConverged : public std::runtime_error {
 public:
  explicit DmpNotConverged(DmpSolution best)
      : std::runtime_error("dual master problem did not reach the KKT tolerance"),
        best_(std::move(best)) {}
  const DmpSolution& best() const { return best_; }

 private:
  DmpSolution best_;
};

struct DmpOptions {
  double tol = 1e-10;
  std::size_t max_iter = 10000;
  std::size_t polish_every = 10;
};

/// (w, sigma) = (sum theta_i g_i, sum theta_i alpha_i).
template <class Entries>
std::pair<Vec, double> aggregate(std::span<const double> theta, const Entries& entries) {
  require(theta.size() == std::size(entries), "aggregate: weight count mismatch");
  require(!theta.empty(), "aggregate: empty bundle");
  double total = 0.0;
  for (double t : theta) {
    require(t >= 0.0, "aggregate: negative simplex weight");
    total += t;
  }
  require(std::abs(total - 1.0) <= 1e-9, "aggregate: weights do not sum to one");
  Vec w(entries[0].g.size(), 0.0);
  double sigma = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (theta[i] == 0.0) continue;
    axpy(theta[i], entries[i].g, w);
    sigma += theta[i] * entries[i].alpha;
  }
  return {std::move(w), sigma};
}

namespace detail {

/// Dense Gaussian elimination with partial pivoting; nullopt when singular.
inline std::optional<Vec> solve_dense(std::vector<Vec> a, Vec b, double pivot_floor) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) <= pivot_floor) return std::nullopt;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  Vec x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return x;
}

class DmpProblem {
 public:
  DmpProblem(std::vector<Vec> gram, Vec alpha, double eta)
      : gram_(std::move(gram)), alpha_(std::move(alpha)), eta_(eta) {}

  std::size_t size() const { return alpha_.size(); }

  Vec gradient(std::span<const double> theta) const {
    Vec g(alpha_);
    for (std::size_t i = 0; i < size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < size(); ++j) s += gram_[i][j] * theta[j];
      g[i] += eta_ * s;
    }
    return g;
  }

  double objective(std::span<const double> theta) const {
    double quad = 0.0, lin = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      if (theta[i] == 0.0) continue;
      double s = 0.0;
      for (std::size_t j = 0; j < size(); ++j) s += gram_[i][j] * theta[j];
      quad += theta[i] * s;
      lin += theta[i] * alpha_[i];
    }
    return 0.5 * eta_ * quad + lin;
  }

  /// max over entries with theta_i > tol of (grad_i - min_j grad_j).
  double residual(std::span<const double> theta, double tol) const {
    const Vec g = gradient(theta);
    double lambda = g[0];
    for (double v : g) lambda = std::min(lambda, v);
    double r = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
      if (theta[i] > tol) r = std::max(r, g[i] - lambda);
    return r;
  }

  /// Primal active-set refinement from a feasible point. Each step solves
  /// the regularized equality-constrained Newton system on the current
  /// support, truncated by a ratio test; the regularization turns zero
  /// curvature directions of a rank-deficient support into long descent
  /// steps that end on the boundary. Returns the final iterate.
  Vec refine(Vec theta, double tol, std::size_t max_steps) const {
    const std::size_t n = size();
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) diag = std::max(diag, eta_ * gram_[i][i]);
    const double reg = 1e-12 * std::max(1.0, diag);
    std::vector<char> in(n, 0);
    for (std::size_t i = 0; i < n; ++i) in[i] = theta[i] > 0.0;

    for (std::size_t step = 0; step < max_steps; ++step) {
      const Vec g = gradient(theta);
      std::vector<std::size_t> s;
      double lo = 1e300, hi = -1e300;
      for (std::size_t i = 0; i < n; ++i)
        if (in[i]) {
          s.push_back(i);
          lo = std::min(lo, g[i]);
          hi = std::max(hi, g[i]);
        }
      if (hi - lo <= 0.25 * tol) {
        // Stationary on the face: free the most attractive excluded entry.
        std::size_t enter = n;
        double best = lo - 0.25 * tol;
        for (std::size_t i = 0; i < n; ++i)
          if (!in[i] && g[i] < best) best = g[i], enter = i;
        if (enter == n) return theta;
        in[enter] = 1;
        continue;
      }
      const std::size_t m = s.size();
      std::vector<Vec> a(m + 1, Vec(m + 1, 0.0));
      Vec b(m + 1, 0.0);
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < m; ++c) a[r][c] = eta_ * gram_[s[r]][s[c]];
        a[r][r] += reg;
        a[r][m] = 1.0;
        a[m][r] = 1.0;
        b[r] = -g[s[r]];
      }
      const auto x = solve_dense(std::move(a), std::move(b), 0.0);
      if (!x) return theta;
      double t = 1.0;
      std::size_t blocking = n;
      for (std::size_t r = 0; r < m; ++r) {
        const double p = (*x)[r];
        if (p < 0.0 && -theta[s[r]] / p < t) {
          t = -theta[s[r]] / p;
          blocking = s[r];
        }
      }
      if (blocking == n && t == 1.0) {
        bool moved = false;
        for (std::size_t r = 0; r < m; ++r) moved = moved || (theta[s[r]] + (*x)[r] != theta[s[r]]);
        if (!moved) return theta;
      }
      for (std::size_t r = 0; r < m; ++r) theta[s[r]] = std::max(0.0, theta[s[r]] + t * (*x)[r]);
      if (blocking != n) {
        theta[blocking] = 0.0;
        in[blocking] = 0;
      }
      double total = 0.0;
      for (double v : theta) total += v;
      for (double& v : theta) v /= total;
    }
    return theta;
  }

 private:
  std::vector<Vec> gram_;
  Vec alpha_;
  double eta_;
};

}  // namespace detail

/// Solves the dual master problem to KKT residual <= tol. `warm_start`, when
/// given with matching size, seeds the iteration.
template <class Entries>
DmpSolution solve_dmp(const Entries& entries, double eta, const DmpOptions& opt = {},
                      std::span<const double> warm_start = {}) {
  const std::size_t n = std::size(entries);
  require(n >= 1, "solve_dmp: empty bundle");
  require(eta > 0.0, "solve_dmp: eta must be positive");
  require(opt.tol > 0.0, "solve_dmp: tol must be positive");

  std::vector<Vec> gram(n, Vec(n, 0.0));
  Vec alpha(n);
  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    alpha[i] = entries[i].alpha;
    for (std::size_t j = 0; j <= i; ++j) gram[i][j] = gram[j][i] = dot(entries[i].g, entries[j].g);
    trace += gram[i][i];
  }
  const detail::DmpProblem qp(std::move(gram), alpha, eta);

  auto finish = [&](Vec theta, double residual, std::size_t iters) {
    DmpSolution sol;
    auto [w, sigma] = aggregate(theta, entries);
    sol.theta = std::move(theta);
    sol.w = std::move(w);
    sol.sigma = sigma;
    const double w2 = squared_norm(sol.w);
    sol.objective = 0.5 * eta * w2 + sigma;
    sol.v_star = eta * w2 + sigma;
    sol.kkt_residual = residual;
    sol.iterations = iters;
    return sol;
  };

  if (n == 1) return finish(Vec{1.0}, 0.0, 0);

  const double lipschitz = eta * trace;
  if (lipschitz == 0.0) {
    // All subgradients vanish: the objective is linear in theta.
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (alpha[i] < alpha[best]) best = i;
    Vec theta(n, 0.0);
    theta[best] = 1.0;
    return finish(theta, qp.residual(theta, opt.tol), 0);
  }

  Vec x = warm_start.size() == n ? project_to_simplex(warm_start)
                                 : Vec(n, 1.0 / static_cast<double>(n));
  double fx = qp.objective(x);
  Vec y = x;
  double momentum = 1.0;
  Vec best = x;
  double best_res = qp.residual(x, opt.tol);
  if (best_res <= opt.tol) return finish(best, best_res, 0);

  Vec step(n);
  for (std::size_t k = 1; k <= opt.max_iter; ++k) {
    const Vec grad = qp.gradient(y);
    for (std::size_t i = 0; i < n; ++i) step[i] = y[i] - grad[i] / lipschitz;
    Vec x_next = project_to_simplex(step);
    const double f_next = qp.objective(x_next);
    if (f_next > fx) {
      // Non-monotone: drop momentum and retry from x.
      y = x;
      momentum = 1.0;
    } else {
      const double m_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
      const double beta = (momentum - 1.0) / m_next;
      for (std::size_t i = 0; i < n; ++i) y[i] = x_next[i] + beta * (x_next[i] - x[i]);
      x = std::move(x_next);
      fx = f_next;
      momentum = m_next;

      const double res = qp.residual(x, opt.tol);
      if (res < best_res) {
        best_res = res;
        best = x;
      }
      if (best_res <= opt.tol) return finish(best, best_res, k);
    }

    if (k % opt.polish_every == 0) {
      const Vec p = qp.refine(x, opt.tol, 4 * n + 20);
      const double pres = qp.residual(p, opt.tol);
      if (pres <= opt.tol) return finish(p, pres, k);
      const double fp = qp.objective(p);
      if (fp <= fx) {
        if (pres < best_res) {
          best_res = pres;
          best = p;
        }
        x = p;
        y = x;
        fx = fp;
        momentum = 1.0;
      }
    }
  }
  throw DmpNotConverged(finish(best, best_res, opt.max_iter));
}

/// eta_star ||w||^2 + sigma <= eps * max(1, |center_value|).
inline bool stopping_test(std::span<const double> w, double sigma, double eta_star, double eps,
                          double center_value) {
  require(eta_star > 0.0, "stopping_test: eta_star must be positive");
  require(eps > 0.0, "stopping_test: eps must be positive");
  require(sigma >= -1e-9 * std::max(1.0, std::abs(center_value)),
          "stopping_test: negative aggregated linearization error");
  return eta_star * squared_norm(w) + std::max(sigma, 0.0) <=
         eps * std::max(1.0, std::abs(center_value));
}

struct PredictedQuantities {
  double v_star = 0;   // eta ||w||^2 + sigma
  double eps_star = 0; // sigma + eta_star ||w||^2
  double quad = 0;     // (eta_star / 2) ||w||^2
  double lin = 0;      // sigma
};

inline PredictedQuantities predicted_quantities(std::span<const double> w, double sigma,
                                                double eta, double eta_star) {
  require(eta > 0.0 && eta_star > 0.0, "predicted_quantities: eta values must be positive");
  const double w2 = squared_norm(w);
  return {eta * w2 + sigma, sigma + eta_star * w2, 0.5 * eta_star * w2, sigma};
}

inline PredictedQuantities predicted_quantities(const DmpSolution& s, double eta,
                                                double eta_star) {
  return predicted_quantities(s.w, s.sigma, eta, eta_star);
}

}  // namespace bnet
