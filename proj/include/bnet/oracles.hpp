#pragma once

// Lagrangian-dual oracles for Multi-Commodity Network Design (flow
// conservation dualized, per-arc continuous knapsacks) and Generalized
// Assignment (assignment constraints dualized, per-bin 0/1 knapsacks),
// plus the scaled minimization wrapper every solver consumes.

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bnet/common.hpp"

namespace bnet {

/// Raised by instance validation; the message names the offending field.
class InstanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct McndArc {
  int tail = 0;
  int head = 0;
  double capacity = 0.0;
  double fixed_cost = 0.0;
  Vec routing;  // one unit cost per commodity
};

struct McndCommodity {
  int origin = 0;
  int dest = 0;
  std::int64_t volume = 0;
};

struct McndInstance {
  int nodes = 0;
  std::vector<McndArc> arcs;
  std::vector<McndCommodity> commodities;

  std::size_t num_commodities() const { return commodities.size(); }
  std::size_t dual_dimension() const {
    return static_cast<std::size_t>(nodes) * commodities.size();
  }
  /// Multiplier index of (node, commodity).
  std::size_t index(int node, std::size_t k) const {
    return static_cast<std::size_t>(node) * commodities.size() + k;
  }
  /// b_i^k: +q at the origin, -q at the destination.
  double supply(int node, std::size_t k) const {
    const auto& c = commodities[k];
    if (node == c.origin) return static_cast<double>(c.volume);
    if (node == c.dest) return -static_cast<double>(c.volume);
    return 0.0;
  }
  /// Commodity k may use arc a unless the arc enters its origin or leaves
  /// its destination.
  bool may_route(const McndArc& a, std::size_t k) const {
    return a.head != commodities[k].origin && a.tail != commodities[k].dest;
  }

  bool reachable(int from, int to) const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(nodes));
    for (const auto& a : arcs) out[a.tail].push_back(a.head);
    std::vector<char> seen(static_cast<std::size_t>(nodes), 0);
    std::queue<int> frontier;
    frontier.push(from);
    seen[from] = 1;
    while (!frontier.empty()) {
      const int u = frontier.front();
      frontier.pop();
      if (u == to) return true;
      for (int v : out[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          frontier.push(v);
        }
      }
    }
    return false;
  }

  void validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
      throw InstanceError(field + ": " + why);
    };
    if (nodes < 2) fail("nodes", "need at least 2 nodes");
    const std::size_t K = commodities.size();
    std::set<std::pair<int, int>> seen;
    for (std::size_t a = 0; a < arcs.size(); ++a) {
      const auto& arc = arcs[a];
      const std::string at = "arcs[" + std::to_string(a) + "]";
      if (arc.tail < 0 || arc.tail >= nodes) fail(at + ".tail", "node index out of range");
      if (arc.head < 0 || arc.head >= nodes) fail(at + ".head", "node index out of range");
      if (arc.tail == arc.head) fail(at, "self-loop");
      if (!seen.emplace(arc.tail, arc.head).second) fail(at, "duplicate arc");
      if (!(arc.capacity > 0.0)) fail(at + ".capacity", "must be > 0");
      if (!(arc.fixed_cost > 0.0)) fail(at + ".fixed", "must be > 0");
      if (arc.routing.size() != K)
        fail(at + ".routing", "expected " + std::to_string(K) + " entries");
      for (std::size_t k = 0; k < K; ++k)
        if (!(arc.routing[k] > 0.0))
          fail(at + ".routing[" + std::to_string(k) + "]", "must be > 0");
    }
    for (std::size_t k = 0; k < K; ++k) {
      const auto& c = commodities[k];
      const std::string at = "commodities[" + std::to_string(k) + "]";
      if (c.origin < 0 || c.origin >= nodes) fail(at + ".origin", "node index out of range");
      if (c.dest < 0 || c.dest >= nodes) fail(at + ".dest", "node index out of range");
      if (c.origin == c.dest) fail(at, "origin equals destination");
      if (c.volume <= 0) fail(at + ".volume", "must be a positive integer");
      if (!reachable(c.origin, c.dest)) fail(at, "no origin-destination path");
    }
  }
};

struct GapInstance {
  std::size_t items = 0;
  std::size_t bins = 0;
  std::vector<std::vector<std::int64_t>> profits;  // [item][bin]
  std::vector<std::vector<std::int64_t>> weights;  // [item][bin]
  std::vector<std::int64_t> capacities;            // [bin]

  std::size_t dual_dimension() const { return items; }

  void validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
      throw InstanceError(field + ": " + why);
    };
    if (profits.size() != items) fail("profits", "expected one row per item");
    if (weights.size() != items) fail("weights", "expected one row per item");
    if (capacities.size() != bins) fail("capacities", "expected one entry per bin");
    for (std::size_t i = 0; i < items; ++i) {
      const std::string row = "[" + std::to_string(i) + "]";
      if (profits[i].size() != bins) fail("profits" + row, "expected one entry per bin");
      if (weights[i].size() != bins) fail("weights" + row, "expected one entry per bin");
      for (std::size_t j = 0; j < bins; ++j) {
        const std::string at = row + "[" + std::to_string(j) + "]";
        if (profits[i][j] < 0) fail("profits" + at, "must be >= 0");
        if (weights[i][j] < 1) fail("weights" + at, "must be >= 1");
      }
    }
    for (std::size_t j = 0; j < bins; ++j)
      if (capacities[j] < 0)
        fail("capacities[" + std::to_string(j) + "]", "must be >= 0");
  }
};

using Problem = std::variant<McndInstance, GapInstance>;

/// Whether the raw Lagrangian bound is maximized (MCND, a lower bound on a
/// minimization MILP) or minimized (GAP, an upper bound on a maximization
/// MILP).
enum class DualSense { Maximize, Minimize };

/// Raw Lagrangian function value LR(pi) and a supergradient/subgradient.
struct LagrangianValue {
  double value = 0.0;
  Vec subgradient;
};

/// Objective in minimization orientation plus the raw bound for reporting.
struct Evaluation {
  double value = 0.0;
  Vec subgradient;
  double raw_lr_value = 0.0;
};

/// Type-erased, deterministic, pure evaluation channel between problems and
/// solvers.
class OracleHandle {
 public:
  using Fn = std::function<Evaluation(std::span<const double>)>;

  OracleHandle(Fn fn, std::size_t dimension, bool sign_constrained, double scale = 1.0,
               DualSense sense = DualSense::Maximize)
      : fn_(std::move(fn)),
        dimension_(dimension),
        sign_constrained_(sign_constrained),
        scale_(scale),
        sense_(sense) {}

  Evaluation evaluate(std::span<const double> pi) const {
    require(pi.size() == dimension_, "oracle: multiplier dimension mismatch");
    Evaluation e = fn_(pi);
    require(e.subgradient.size() == dimension_, "oracle: subgradient dimension mismatch");
    require(std::isfinite(e.value), "oracle: non-finite objective value");
    return e;
  }

  std::size_t dimension() const { return dimension_; }
  bool sign_constrained() const { return sign_constrained_; }
  double scale() const { return scale_; }
  DualSense sense() const { return sense_; }

  /// Feasible-set projection: componentwise max with 0 when sign constrained.
  void project(std::span<double> pi) const {
    if (sign_constrained_) clamp_nonnegative(pi);
  }

 private:
  Fn fn_;
  std::size_t dimension_;
  bool sign_constrained_;
  double scale_;
  DualSense sense_;
};

// ---------------------------------------------------------------------------
// MCND

struct ArcRelaxation {
  double value = 0.0;
  Vec flows;
};

/// min over y in {0,1}, 0 <= x <= q, sum x <= c*y of f*y + w^T x.
/// Open-arc cost is a continuous knapsack filled in ascending reduced-cost
/// order; the arc stays closed (zero flows) when that cost is >= 0.
inline ArcRelaxation mcnd_arc_relaxation(double fixed_cost, double capacity,
                                         std::span<const double> reduced_costs,
                                         std::span<const double> volumes) {
  require(reduced_costs.size() == volumes.size(),
          "mcnd_arc_relaxation: reduced costs and volumes differ in length");
  require(capacity > 0.0, "mcnd_arc_relaxation: capacity must be positive");
  const std::size_t n = reduced_costs.size();
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    require(volumes[k] > 0.0, "mcnd_arc_relaxation: volumes must be positive");
    if (reduced_costs[k] < 0.0) order.push_back(k);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return reduced_costs[a] < reduced_costs[b];
  });

  ArcRelaxation out;
  out.flows.assign(n, 0.0);
  double remaining = capacity;
  double cost = fixed_cost;
  for (std::size_t k : order) {
    if (remaining <= 0.0) break;
    const double x = std::min(volumes[k], remaining);
    out.flows[k] = x;
    cost += reduced_costs[k] * x;
    remaining -= x;
  }
  if (cost >= 0.0) {
    std::fill(out.flows.begin(), out.flows.end(), 0.0);
    out.value = 0.0;
  } else {
    out.value = cost;
  }
  return out;
}

/// LR(pi) = sum_arcs LR_ij(pi) + sum_{i,k} pi_i^k b_i^k with its supergradient
/// b_i^k - sum_out x + sum_in x. Multipliers are indexed node-major.
inline LagrangianValue mcnd_lagrangian(const McndInstance& inst, std::span<const double> pi) {
  require(pi.size() == inst.dual_dimension(), "mcnd_evaluate: multiplier dimension mismatch");
  const std::size_t K = inst.num_commodities();
  LagrangianValue out;
  out.subgradient.assign(pi.size(), 0.0);

  for (int i = 0; i < inst.nodes; ++i)
    for (std::size_t k = 0; k < K; ++k) {
      const double b = inst.supply(i, k);
      out.value += pi[inst.index(i, k)] * b;
      out.subgradient[inst.index(i, k)] = b;
    }

  Vec reduced, volumes;
  std::vector<std::size_t> members;
  for (const auto& arc : inst.arcs) {
    reduced.clear();
    volumes.clear();
    members.clear();
    for (std::size_t k = 0; k < K; ++k) {
      if (!inst.may_route(arc, k)) continue;
      members.push_back(k);
      reduced.push_back(arc.routing[k] - pi[inst.index(arc.tail, k)] +
                        pi[inst.index(arc.head, k)]);
      volumes.push_back(static_cast<double>(inst.commodities[k].volume));
    }
    const ArcRelaxation r = mcnd_arc_relaxation(arc.fixed_cost, arc.capacity, reduced, volumes);
    out.value += r.value;
    for (std::size_t m = 0; m < members.size(); ++m) {
      const double x = r.flows[m];
      if (x == 0.0) continue;
      out.subgradient[inst.index(arc.tail, members[m])] -= x;
      out.subgradient[inst.index(arc.head, members[m])] += x;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// GAP

struct BinKnapsack {
  double value = 0.0;
  std::vector<bool> selection;
};

/// Exact 0/1 knapsack by dynamic programming over capacity. Items with
/// adjusted profit <= 0 are never taken; among optimal selections the
/// lexicographically smallest one is returned.
inline BinKnapsack gap_bin_knapsack(std::span<const double> adjusted_profits,
                                    std::span<const std::int64_t> weights,
                                    std::int64_t capacity) {
  require(adjusted_profits.size() == weights.size(),
          "gap_bin_knapsack: profits and weights differ in length");
  require(capacity >= 0, "gap_bin_knapsack: negative capacity");
  const std::size_t n = weights.size();
  BinKnapsack out;
  out.selection.assign(n, false);

  std::vector<std::size_t> cand;
  for (std::size_t i = 0; i < n; ++i) {
    require(weights[i] >= 1, "gap_bin_knapsack: weights must be >= 1");
    if (adjusted_profits[i] > 0.0 && weights[i] <= capacity) cand.push_back(i);
  }
  if (cand.empty() || capacity == 0) return out;

  // best[r][c]: optimum over candidates r.. with capacity c. Built from the
  // back so a forward pass can prefer "skip" on ties.
  const std::size_t C = static_cast<std::size_t>(capacity);
  const std::size_t m = cand.size();
  std::vector<Vec> best(m + 1, Vec(C + 1, 0.0));
  for (std::size_t r = m; r-- > 0;) {
    const std::size_t w = static_cast<std::size_t>(weights[cand[r]]);
    const double p = adjusted_profits[cand[r]];
    for (std::size_t c = 0; c <= C; ++c) {
      double v = best[r + 1][c];
      if (w <= c) v = std::max(v, p + best[r + 1][c - w]);
      best[r][c] = v;
    }
  }
  std::size_t c = C;
  for (std::size_t r = 0; r < m; ++r) {
    if (best[r + 1][c] < best[r][c]) {
      out.selection[cand[r]] = true;
      c -= static_cast<std::size_t>(weights[cand[r]]);
    }
  }
  out.value = best[0][C];
  return out;
}

/// LR(pi) = sum_j LR_j(pi) + sum_i pi_i with subgradient 1 - sum_j x_ij.
inline LagrangianValue gap_lagrangian(const GapInstance& inst, std::span<const double> pi) {
  require(pi.size() == inst.items, "gap_evaluate: multiplier dimension mismatch");
  for (std::size_t i = 0; i < pi.size(); ++i)
    require(pi[i] >= 0.0, "gap_evaluate: multipliers must be nonnegative");

  LagrangianValue out;
  out.subgradient.assign(inst.items, 1.0);
  for (double p : pi) out.value += p;

  Vec adjusted(inst.items);
  std::vector<std::int64_t> w(inst.items);
  for (std::size_t j = 0; j < inst.bins; ++j) {
    for (std::size_t i = 0; i < inst.items; ++i) {
      adjusted[i] = static_cast<double>(inst.profits[i][j]) - pi[i];
      w[i] = inst.weights[i][j];
    }
    const BinKnapsack bin = gap_bin_knapsack(adjusted, w, inst.capacities[j]);
    out.value += bin.value;
    for (std::size_t i = 0; i < inst.items; ++i)
      if (bin.selection[i]) out.subgradient[i] -= 1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Minimization wrappers

inline DualSense dual_sense(const Problem& p) {
  return std::holds_alternative<McndInstance>(p) ? DualSense::Maximize : DualSense::Minimize;
}

inline bool sign_constrained(const Problem& p) { return std::holds_alternative<GapInstance>(p); }

inline std::size_t dual_dimension(const Problem& p) {
  return std::visit([](const auto& inst) { return inst.dual_dimension(); }, p);
}

inline LagrangianValue lagrangian(const Problem& p, std::span<const double> pi) {
  if (const auto* m = std::get_if<McndInstance>(&p)) return mcnd_lagrangian(*m, pi);
  return gap_lagrangian(std::get<GapInstance>(p), pi);
}

/// Orientation sign so that minimizing phi optimizes the bound.
inline double orientation(DualSense sense) { return sense == DualSense::Maximize ? -1.0 : 1.0; }

inline Evaluation orient(const LagrangianValue& lr, DualSense sense, double scale) {
  const double sign = orientation(sense) / scale;
  Evaluation e;
  e.raw_lr_value = lr.value;
  e.value = sign * lr.value;
  e.subgradient.resize(lr.subgradient.size());
  for (std::size_t i = 0; i < lr.subgradient.size(); ++i) e.subgradient[i] = sign * lr.subgradient[i];
  return e;
}

/// Unscaled minimization-orientation evaluation (phi = -LR for MCND).
inline Evaluation mcnd_evaluate(const McndInstance& inst, std::span<const double> pi) {
  return orient(mcnd_lagrangian(inst, pi), DualSense::Maximize, 1.0);
}

/// Unscaled minimization-orientation evaluation (phi = LR for GAP).
inline Evaluation gap_evaluate(const GapInstance& inst, std::span<const double> pi) {
  return orient(gap_lagrangian(inst, pi), DualSense::Minimize, 1.0);
}

/// Scale s = ||g_LR(pi0)||_2, or 1 when that gradient vanishes.
inline double objective_scale(std::span<const double> g0) {
  const double s = norm(g0);
  return s > 0.0 ? s : 1.0;
}

/// Wraps an arbitrary Lagrangian function into a scaled minimization oracle.
inline OracleHandle make_min_oracle(std::function<LagrangianValue(std::span<const double>)> lr,
                                    std::size_t dimension, bool sign_constrained,
                                    DualSense sense, std::span<const double> pi0) {
  require(pi0.size() == dimension, "make_min_oracle: pi0 dimension mismatch");
  const double s = objective_scale(lr(pi0).subgradient);
  auto fn = [lr = std::move(lr), sense, s](std::span<const double> pi) {
    return orient(lr(pi), sense, s);
  };
  return OracleHandle(std::move(fn), dimension, sign_constrained, s, sense);
}

inline OracleHandle make_min_oracle(const Problem& problem, std::span<const double> pi0) {
  auto shared = std::make_shared<const Problem>(problem);
  return make_min_oracle(
      [shared](std::span<const double> pi) { return lagrangian(*shared, pi); },
      dual_dimension(problem), sign_constrained(problem), dual_sense(problem), pi0);
}

inline OracleHandle make_min_oracle(const Problem& problem) {
  const Vec zero(dual_dimension(problem), 0.0);
  return make_min_oracle(problem, zero);
}

// ---------------------------------------------------------------------------
// Generators

struct McndGeneratorParams {
  int nodes = 12;
  int arcs = 40;
  int commodities = 10;
  double capacity_min = 15, capacity_max = 60;
  double fixed_min = 20, fixed_max = 60;
  double routing_min = 1, routing_max = 10;
  std::int64_t volume_min = 5, volume_max = 20;
};

/// Sufficient feasibility check: routes the commodities one after another,
/// each as a max flow on the capacity left by the previous ones. True means
/// every volume fits, so the flow-conservation dual is bounded.
inline bool mcnd_routable(const McndInstance& inst) {
  const std::size_t n = static_cast<std::size_t>(inst.nodes), m = inst.arcs.size();
  Vec residual(m);
  for (std::size_t a = 0; a < m; ++a) residual[a] = inst.arcs[a].capacity;
  std::vector<std::vector<std::size_t>> out(n), in(n);
  for (std::size_t a = 0; a < m; ++a) {
    out[inst.arcs[a].tail].push_back(a);
    in[inst.arcs[a].head].push_back(a);
  }
  for (const auto& c : inst.commodities) {
    Vec flow(m, 0.0);
    double need = static_cast<double>(c.volume);
    while (need > 1e-9) {
      // BFS over forward residual arcs and backward arcs carrying this flow.
      std::vector<std::pair<std::size_t, int>> via(n, {m, 0});
      std::vector<char> seen(n, 0);
      std::queue<int> q;
      q.push(c.origin);
      seen[c.origin] = 1;
      while (!q.empty() && !seen[c.dest]) {
        const int u = q.front();
        q.pop();
        for (std::size_t a : out[u]) {
          const int v = inst.arcs[a].head;
          if (!seen[v] && residual[a] > 1e-9) seen[v] = 1, via[v] = {a, 1}, q.push(v);
        }
        for (std::size_t a : in[u]) {
          const int v = inst.arcs[a].tail;
          if (!seen[v] && flow[a] > 1e-9) seen[v] = 1, via[v] = {a, -1}, q.push(v);
        }
      }
      if (!seen[c.dest]) return false;
      double push = need;
      for (int v = c.dest; v != c.origin;) {
        const auto [a, dir] = via[v];
        push = std::min(push, dir > 0 ? residual[a] : flow[a]);
        v = dir > 0 ? inst.arcs[a].tail : inst.arcs[a].head;
      }
      for (int v = c.dest; v != c.origin;) {
        const auto [a, dir] = via[v];
        residual[a] -= dir * push;
        flow[a] += dir * push;
        v = dir > 0 ? inst.arcs[a].tail : inst.arcs[a].head;
      }
      need -= push;
    }
  }
  return true;
}

namespace detail {

inline McndInstance draw_mcnd(const McndGeneratorParams& p, std::mt19937_64& rng) {
  require(p.nodes >= 2, "generate_mcnd: need at least 2 nodes");
  require(p.arcs >= p.nodes - 1, "generate_mcnd: arcs must be >= nodes - 1");
  require(static_cast<std::int64_t>(p.arcs) <=
              static_cast<std::int64_t>(p.nodes) * (p.nodes - 1),
          "generate_mcnd: more arcs than a simple digraph allows");
  require(p.commodities >= 0, "generate_mcnd: negative commodity count");
  require(0 < p.capacity_min && p.capacity_min <= p.capacity_max, "generate_mcnd: capacity range");
  require(0 < p.fixed_min && p.fixed_min <= p.fixed_max, "generate_mcnd: fixed cost range");
  require(0 < p.routing_min && p.routing_min <= p.routing_max, "generate_mcnd: routing range");
  require(0 < p.volume_min && p.volume_min <= p.volume_max, "generate_mcnd: volume range");
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto pick_real_int = [&](double lo, double hi) {
    return static_cast<double>(std::uniform_int_distribution<std::int64_t>(
        static_cast<std::int64_t>(std::ceil(lo)), static_cast<std::int64_t>(std::floor(hi)))(rng));
  };

  std::set<std::pair<int, int>> arcs;
  std::vector<int> perm(static_cast<std::size_t>(p.nodes));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  if (p.arcs >= p.nodes) {
    for (int i = 0; i < p.nodes; ++i) arcs.emplace(perm[i], perm[(i + 1) % p.nodes]);
  } else {
    for (int i = 1; i < p.nodes; ++i) arcs.emplace(perm[pick(0, i - 1)], perm[i]);
  }
  while (static_cast<int>(arcs.size()) < p.arcs) {
    const int u = pick(0, p.nodes - 1);
    const int v = pick(0, p.nodes - 1);
    if (u != v) arcs.emplace(u, v);
  }

  McndInstance inst;
  inst.nodes = p.nodes;
  auto rebuild_arcs = [&] {
    inst.arcs.clear();
    for (const auto& [u, v] : arcs) inst.arcs.push_back({u, v, 0.0, 0.0, {}});
  };
  rebuild_arcs();
  for (int k = 0; k < p.commodities; ++k) {
    int o = 0, d = 0;
    bool found = false;
    for (int attempt = 0; attempt < 32 && !found; ++attempt) {
      o = pick(0, p.nodes - 1);
      d = pick(0, p.nodes - 2);
      if (d >= o) ++d;
      found = inst.reachable(o, d);
    }
    if (!found) {
      arcs.emplace(o, d);
      rebuild_arcs();
    }
    const auto q = std::uniform_int_distribution<std::int64_t>(p.volume_min, p.volume_max)(rng);
    inst.commodities.push_back({o, d, q});
  }
  for (auto& a : inst.arcs) {
    a.capacity = pick_real_int(p.capacity_min, p.capacity_max);
    a.fixed_cost = pick_real_int(p.fixed_min, p.fixed_max);
    a.routing.resize(inst.commodities.size());
    for (double& r : a.routing) r = pick_real_int(p.routing_min, p.routing_max);
  }
  return inst;
}

}  // namespace detail

/// Random connected MCND instance with integer data. With arcs >= nodes the
/// backbone is a random Hamiltonian cycle (strongly connected); otherwise a
/// random out-tree, and commodities are drawn among reachable pairs, with a
/// direct arc inserted as a last resort. Draws that fail mcnd_routable are
/// discarded so the dual stays bounded.
inline McndInstance generate_mcnd(const McndGeneratorParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    McndInstance inst = detail::draw_mcnd(p, rng);
    if (mcnd_routable(inst)) return inst;
  }
  throw ContractViolation("generate_mcnd: volumes too large for the capacities");
}

struct GapGeneratorParams {
  std::size_t items = 100;
  std::size_t bins = 10;
  std::int64_t profit_min = 10, profit_max = 50;
  std::int64_t weight_min = 5, weight_max = 25;
  double tightness = 0.8;  // rho in (0, 1]
};

/// Random GAP instance; every bin gets c = round(rho * sum_i mean_j(w_ij) / |J|).
inline GapInstance generate_gap(const GapGeneratorParams& p, std::uint64_t seed) {
  require(p.tightness > 0.0 && p.tightness <= 1.0, "generate_gap: tightness must be in (0, 1]");
  require(p.bins >= 1, "generate_gap: need at least one bin");
  require(0 <= p.profit_min && p.profit_min <= p.profit_max, "generate_gap: profit range");
  require(1 <= p.weight_min && p.weight_min <= p.weight_max, "generate_gap: weight range");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> profit(p.profit_min, p.profit_max);
  std::uniform_int_distribution<std::int64_t> weight(p.weight_min, p.weight_max);

  GapInstance inst;
  inst.items = p.items;
  inst.bins = p.bins;
  inst.profits.assign(p.items, std::vector<std::int64_t>(p.bins));
  inst.weights.assign(p.items, std::vector<std::int64_t>(p.bins));
  double mean_sum = 0.0;
  for (std::size_t i = 0; i < p.items; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < p.bins; ++j) {
      inst.profits[i][j] = profit(rng);
      inst.weights[i][j] = weight(rng);
      row += static_cast<double>(inst.weights[i][j]);
    }
    mean_sum += row / static_cast<double>(p.bins);
  }
  const auto c = static_cast<std::int64_t>(
      std::llround(p.tightness * mean_sum / static_cast<double>(p.bins)));
  inst.capacities.assign(p.bins, c);
  return inst;
}

}  // namespace bnet
