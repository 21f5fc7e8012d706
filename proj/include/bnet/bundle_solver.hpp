#pragma once

// Proximal bundle method and the two subgradient baselines (step-halving
// descent, Adam). All minimize a scaled oracle and emit a uniform Trace.

#include <chrono>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bnet/bundle_core.hpp"
#include "bnet/eta_strategies.hpp"
#include "bnet/master_problem.hpp"
#include "bnet/oracles.hpp"

namespace bnet {

enum class StepType { None, Serious, Null };
enum class Termination { Budget, Stopped, Error };

inline const char* to_string(StepType s) {
  switch (s) {
    case StepType::Serious: return "serious";
    case StepType::Null: return "null";
    case StepType::None: return "n/a";
  }
  return "n/a";
}

struct TraceRow {
  std::size_t iteration = 0;
  double trial_value = 0;   // phi at the point evaluated this iteration
  double center_value = 0;  // phi(center), surrogate in network mode, best-so-far for baselines
  double raw_lr = 0;        // unscaled Lagrangian bound at the evaluated point
  double eta = 0;           // step parameter used to produce the point
  StepType step = StepType::None;
  double wall_time = 0;     // seconds since the solver loop started
};

struct Trace {
  std::vector<TraceRow> rows;
  double best_value = std::numeric_limits<double>::infinity();
  double best_raw = 0;
  Vec best_point;
  Termination termination = Termination::Budget;
  std::size_t oracle_calls = 0;

  void record(const TraceRow& row, std::span<const double> point) {
    rows.push_back(row);
    if (row.trial_value < best_value) {
      best_value = row.trial_value;
      best_raw = row.raw_lr;
      best_point.assign(point.begin(), point.end());
    }
  }

  /// Raw bound at the best phi among the first `evaluations` oracle results.
  double best_raw_within(std::size_t evaluations) const {
    double best = std::numeric_limits<double>::infinity();
    double raw = 0;
    for (std::size_t i = 0; i < rows.size() && i < evaluations; ++i)
      if (rows[i].trial_value < best) {
        best = rows[i].trial_value;
        raw = rows[i].raw_lr;
      }
    return raw;
  }
};

/// Oracle failure inside a solver; carries everything recorded so far.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, Trace partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const Trace& partial() const { return partial_; }

 private:
  Trace partial_;
};

struct SolverConfig {
  double m = 0.001;  // serious-step fraction of predicted decrease
  double eps = 1e-6;
  std::size_t max_iter = 100;
  EtaConfig eta;
  std::size_t prune_window = 20;
  bool record_times = true;
  DmpOptions dmp;
  /// Test hook: keep at most this many (newest) entries; 0 = unlimited.
  std::size_t max_bundle_size = 0;
  /// Fixed-budget runs turn this off so every run spends exactly max_iter
  /// oracle calls after the initial one.
  bool stop_on_certificate = true;

  void validate() const {
    require(m > 0.0 && m < 1.0, "SolverConfig: m must be in (0, 1)");
    require(eps > 0.0, "SolverConfig: eps must be positive");
    require(prune_window >= 1, "SolverConfig: prune window must be >= 1");
    eta.validate();
  }
};

namespace detail {

class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

/// Oracle call with accounting; failures surface as SolverError.
inline Evaluation counted_call(const OracleHandle& oracle, std::span<const double> pi,
                               Trace& trace) {
  ++trace.oracle_calls;
  try {
    return oracle.evaluate(pi);
  } catch (const ContractViolation&) {
    throw;
  } catch (const std::exception& e) {
    trace.termination = Termination::Error;
    throw SolverError(std::string("oracle failure: ") + e.what(), trace);
  }
}

inline void check_start(const OracleHandle& oracle, std::span<const double> pi0) {
  require(pi0.size() == oracle.dimension(), "solver: pi0 dimension mismatch");
  if (oracle.sign_constrained())
    for (double v : pi0) require(v >= 0.0, "solver: pi0 must be nonnegative");
}

}  // namespace detail

/// Classical proximal bundle method, minimization orientation.
inline Trace run_bundle(const OracleHandle& oracle, std::span<const double> pi0,
                        const SolverConfig& cfg) {
  cfg.validate();
  detail::check_start(oracle, pi0);
  const detail::Stopwatch clock(cfg.record_times);
  Trace trace;

  const Evaluation e0 = detail::counted_call(oracle, pi0, trace);
  BundleState bundle(Vec(pi0.begin(), pi0.end()), e0.value);
  std::size_t next_id = 0;
  bundle.append({e0.subgradient, 0.0, e0.value, Vec(pi0.begin(), pi0.end()), 0, next_id++});
  EtaState eta = initial_eta_state(cfg.eta);
  trace.record({0, e0.value, e0.value, e0.raw_lr_value, eta.eta, StepType::None, clock.seconds()},
               pi0);

  std::unordered_map<std::size_t, double> last_theta;
  for (std::size_t t = 1; t <= cfg.max_iter; ++t) {
    bundle.set_iteration(t);
    Vec warm(bundle.size(), 0.0);
    for (std::size_t i = 0; i < bundle.size(); ++i)
      if (auto it = last_theta.find(bundle.entries()[i].id); it != last_theta.end())
        warm[i] = it->second;
    DmpSolution sol;
    try {
      sol = solve_dmp(bundle.entries(), eta.eta, cfg.dmp, warm);
    } catch (const DmpNotConverged& nc) {
      sol = nc.best();
    }
    last_theta.clear();
    for (std::size_t i = 0; i < bundle.size(); ++i)
      last_theta[bundle.entries()[i].id] = sol.theta[i];
    bundle.mark_active(sol.theta, t);

    if (cfg.stop_on_certificate &&
        stopping_test(sol.w, sol.sigma, cfg.eta.eta_star, cfg.eps, bundle.center_value())) {
      trace.termination = Termination::Stopped;
      return trace;
    }

    Vec trial = bundle.center();
    axpy(-eta.eta, sol.w, trial);
    oracle.project(trial);
    const Vec d = difference(trial, bundle.center());
    const double predicted = -bundle.model_value(d);

    const Evaluation e = detail::counted_call(oracle, trial, trace);
    const double actual = bundle.center_value() - e.value;
    const StepOutcome outcome = (predicted > 0.0 && actual >= cfg.m * predicted)
                                    ? StepOutcome::Serious
                                    : StepOutcome::Null;

    BundleEntry entry{e.subgradient, 0.0, e.value, trial, t, next_id++};
    entry.alpha = linearization_error(entry, bundle.center(), bundle.center_value());
    bundle.append(std::move(entry));
    if (outcome == StepOutcome::Serious) bundle.translate_errors(trial, e.value);

    const double eta_used = eta.eta;
    const PredictedQuantities pq = predicted_quantities(sol, eta.eta, cfg.eta.eta_star);
    const EtaGates gates = long_term_gate(cfg.eta.kind, pq.v_star, pq.eps_star, pq.quad, pq.lin,
                                          cfg.eta.m_tilde, outcome);
    eta = update_eta(eta, cfg.eta, outcome, gates);

    bundle.prune_unused(cfg.prune_window);
    if (cfg.max_bundle_size > 0 && bundle.size() > cfg.max_bundle_size) {
      auto& entries = bundle.entries();
      entries.erase(entries.begin(),
                    entries.end() - static_cast<std::ptrdiff_t>(cfg.max_bundle_size));
    }

    trace.record({t, e.value, bundle.center_value(), e.raw_lr_value, eta_used,
                  outcome == StepOutcome::Serious ? StepType::Serious : StepType::Null,
                  clock.seconds()},
                 trial);
  }
  trace.termination = Termination::Budget;
  return trace;
}

/// Projected subgradient descent; eta halves once more than two consecutive
/// steps fail to improve the best value.
inline Trace run_descent(const OracleHandle& oracle, std::span<const double> pi0, double eta0,
                         std::size_t max_iter, bool halving = true, bool record_times = true) {
  require(eta0 > 0.0, "run_descent: eta0 must be positive");
  detail::check_start(oracle, pi0);
  const detail::Stopwatch clock(record_times);
  Trace trace;
  Vec pi(pi0.begin(), pi0.end());
  Evaluation e = detail::counted_call(oracle, pi, trace);
  double eta = eta0;
  double best = e.value;
  int stalled = 0;
  trace.record({0, e.value, best, e.raw_lr_value, eta, StepType::None, clock.seconds()}, pi);
  for (std::size_t t = 1; t <= max_iter; ++t) {
    const double eta_used = eta;
    axpy(-eta, e.subgradient, pi);
    oracle.project(pi);
    e = detail::counted_call(oracle, pi, trace);
    if (e.value < best) {
      best = e.value;
      stalled = 0;
    } else if (++stalled > 2 && halving) {
      eta *= 0.5;
      stalled = 0;
    }
    trace.record({t, e.value, best, e.raw_lr_value, eta_used, StepType::None, clock.seconds()},
                 pi);
  }
  return trace;
}

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam on the minimization objective, projected when sign
/// constrained.
inline Trace run_adam(const OracleHandle& oracle, std::span<const double> pi0, double eta0,
                      std::size_t max_iter, const AdamOptions& opt = {},
                      bool record_times = true) {
  require(eta0 > 0.0, "run_adam: eta0 must be positive");
  detail::check_start(oracle, pi0);
  const detail::Stopwatch clock(record_times);
  Trace trace;
  Vec pi(pi0.begin(), pi0.end());
  Evaluation e = detail::counted_call(oracle, pi, trace);
  trace.record({0, e.value, e.value, e.raw_lr_value, eta0, StepType::None, clock.seconds()}, pi);
  Vec m(pi.size(), 0.0), v(pi.size(), 0.0);
  double b1t = 1.0, b2t = 1.0;
  for (std::size_t t = 1; t <= max_iter; ++t) {
    b1t *= opt.beta1;
    b2t *= opt.beta2;
    for (std::size_t i = 0; i < pi.size(); ++i) {
      const double g = e.subgradient[i];
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g;
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g * g;
      const double mhat = m[i] / (1.0 - b1t);
      const double vhat = v[i] / (1.0 - b2t);
      pi[i] -= eta0 * mhat / (std::sqrt(vhat) + opt.eps);
    }
    oracle.project(pi);
    e = detail::counted_call(oracle, pi, trace);
    trace.record({t, e.value, std::min(e.value, trace.best_value), e.raw_lr_value, eta0,
                  StepType::None, clock.seconds()},
                 pi);
  }
  return trace;
}

}  // namespace bnet
