#pragma once

// Three-level proximal-parameter heuristics: long-term gates decide whether
// an increase/decrease is permitted, middle-term counters require a run of
// equal outcomes, short-term rules apply multiplicative steps within bounds.

#include <algorithm>
#include <string>

#include "bnet/common.hpp"

namespace bnet {

enum class EtaKind { Constant, Soft, Hard, Balancing };
enum class StepOutcome { Serious, Null };

inline std::string to_string(EtaKind k) {
  switch (k) {
    case EtaKind::Constant: return "constant";
    case EtaKind::Soft: return "soft";
    case EtaKind::Hard: return "hard";
    case EtaKind::Balancing: return "balancing";
  }
  return "constant";
}

inline EtaKind eta_kind_from_string(const std::string& s) {
  if (s == "constant") return EtaKind::Constant;
  if (s == "soft") return EtaKind::Soft;
  if (s == "hard") return EtaKind::Hard;
  if (s == "balancing") return EtaKind::Balancing;
  throw ContractViolation("unknown eta strategy '" + s + "'");
}

struct EtaConfig {
  EtaKind kind = EtaKind::Constant;
  double eta0 = 1.0;
  double eta_incr = 1.1;
  double eta_decr = 0.9;
  double eta_max = 1e6;
  double eta_min = 1e-6;
  double m_tilde = 0.01;
  double eta_star = 1e4;
  int min_consec_ss = 2;
  int min_consec_ns = 2;

  void validate() const {
    require(eta_min > 0.0 && eta_min <= eta0 && eta0 <= eta_max,
            "EtaConfig: need 0 < eta_min <= eta0 <= eta_max");
    require(eta_incr > 1.0, "EtaConfig: eta_incr must exceed 1");
    require(eta_decr > 0.0 && eta_decr < 1.0, "EtaConfig: eta_decr must be in (0, 1)");
    require(m_tilde >= 0.0 && m_tilde < 1.0, "EtaConfig: m_tilde must be in [0, 1)");
    require(eta_star > 0.0, "EtaConfig: eta_star must be positive");
    require(min_consec_ss >= 0 && min_consec_ns >= 0, "EtaConfig: negative step counters");
  }
};

struct EtaState {
  double eta = 1.0;
  int consec_ss = 0;
  int consec_ns = 0;
};

inline EtaState initial_eta_state(const EtaConfig& c) { return {c.eta0, 0, 0}; }

struct EtaGates {
  bool allow_increase = false;
  bool allow_decrease = false;
  /// Hard strategy: increase regardless of outcome and step counters.
  bool force_increase = false;

  bool operator==(const EtaGates&) const = default;
};

/// Long-term level. `cond` below is v* < m~ eps*.
///   constant  : nothing moves
///   soft      : after a null step with cond, decreases are inhibited
///   hard      : with cond, increases are allowed even after null steps
///   balancing : increase after a serious step inhibited iff quad <= m~ lin;
///               decrease inhibited iff m~ quad >= lin
inline EtaGates long_term_gate(EtaKind kind, double v_star, double eps_star, double quad,
                               double lin, double m_tilde, StepOutcome outcome) {
  const bool cond = v_star < m_tilde * eps_star;
  const bool null_step = outcome == StepOutcome::Null;
  switch (kind) {
    case EtaKind::Constant:
      return {false, false, false};
    case EtaKind::Soft:
      return {true, !(null_step && cond), false};
    case EtaKind::Hard:
      return {true, !(null_step && cond), cond};
    case EtaKind::Balancing:
      return {!(!null_step && quad <= m_tilde * lin), !(m_tilde * quad >= lin), false};
  }
  return {};
}

/// Middle- and short-term levels: serious steps propose an increase, null
/// steps a decrease; a proposal fires after enough consecutive equal
/// outcomes at the same eta and only if its gate is open.
inline EtaState update_eta(EtaState s, const EtaConfig& c, StepOutcome outcome,
                           const EtaGates& gates) {
  if (c.kind == EtaKind::Constant) return s;
  if (outcome == StepOutcome::Serious) {
    ++s.consec_ss;
    s.consec_ns = 0;
  } else {
    ++s.consec_ns;
    s.consec_ss = 0;
  }

  const bool serious = outcome == StepOutcome::Serious;
  const bool increase = gates.allow_increase &&
                        (gates.force_increase || (serious && s.consec_ss >= c.min_consec_ss));
  const bool decrease =
      !increase && !serious && gates.allow_decrease && s.consec_ns >= c.min_consec_ns;

  double next = s.eta;
  if (increase) next = std::min(s.eta * c.eta_incr, c.eta_max);
  if (decrease) next = std::max(s.eta * c.eta_decr, c.eta_min);
  if (next != s.eta) {
    s.eta = next;
    s.consec_ss = 0;
    s.consec_ns = 0;
  }
  return s;
}

}  // namespace bnet
