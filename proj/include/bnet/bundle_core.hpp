#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "bnet/common.hpp"

namespace bnet {

/// One first-order pair collected at a visited point. `alpha` is the
/// linearization error with respect to the current stabilization center.
struct BundleEntry {
  Vec g;
  double alpha = 0.0;
  double value = 0.0;  // phi at `point`
  Vec point;
  std::size_t last_active = 0;
  std::size_t id = 0;  // insertion serial, stable across pruning
};

/// Linearization error of an entry against a center from scratch:
/// center_value - value - g^T (center - point).
inline double linearization_error(const BundleEntry& e, std::span<const double> center,
                                  double center_value) {
  double s = 0.0;
  for (std::size_t i = 0; i < center.size(); ++i) s += e.g[i] * (center[i] - e.point[i]);
  return center_value - e.value - s;
}

class BundleState {
 public:
  BundleState() = default;
  BundleState(Vec center, double center_value)
      : center_(std::move(center)), center_value_(center_value) {}

  const std::vector<BundleEntry>& entries() const { return entries_; }
  std::vector<BundleEntry>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t dimension() const { return center_.size(); }

  const Vec& center() const { return center_; }
  double center_value() const { return center_value_; }
  std::size_t iteration() const { return iteration_; }
  void set_iteration(std::size_t t) { iteration_ = t; }

  /// Appends in insertion order (the attention index order in network mode).
  void append(BundleEntry entry) {
    require(entry.g.size() == dimension(), "bundle append: subgradient dimension mismatch");
    require(entry.point.size() == dimension(), "bundle append: point dimension mismatch");
    entries_.push_back(std::move(entry));
  }

  /// Moves the center, shifting every alpha by
  /// (v_new - v_old) - g^T (center_new - center_old).
  void translate_errors(std::span<const double> new_center, double new_center_value) {
    require(new_center.size() == dimension(), "translate_errors: dimension mismatch");
    const Vec shift = difference(new_center, center_);
    const double dv = new_center_value - center_value_;
    for (auto& e : entries_) e.alpha += dv - dot(e.g, shift);
    center_.assign(new_center.begin(), new_center.end());
    center_value_ = new_center_value;
  }

  /// Cutting-plane model of phi(center + d) - phi(center):
  /// max_i g_i^T d - alpha_i.
  double model_value(std::span<const double> d) const {
    require(!entries_.empty(), "model_value: empty bundle");
    require(d.size() == dimension(), "model_value: dimension mismatch");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& e : entries_) best = std::max(best, dot(e.g, d) - e.alpha);
    return best;
  }

  /// Records which entries carry positive weight in the master solution.
  void mark_active(std::span<const double> theta, std::size_t t, double threshold = 1e-12) {
    require(theta.size() == entries_.size(), "mark_active: weight count mismatch");
    for (std::size_t i = 0; i < theta.size(); ++i)
      if (theta[i] > threshold) entries_[i].last_active = t;
  }

  /// Drops entries whose last_active < t - window, keeping the newest entry.
  void prune_unused(std::size_t window) {
    require(window >= 1, "prune_unused: window must be >= 1");
    if (entries_.size() <= 1 || iteration_ < window) return;
    const std::size_t cutoff = iteration_ - window;
    std::vector<BundleEntry> kept;
    kept.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const bool newest = i + 1 == entries_.size();
      if (newest || entries_[i].last_active >= cutoff) kept.push_back(std::move(entries_[i]));
    }
    entries_ = std::move(kept);
  }

 private:
  std::vector<BundleEntry> entries_;
  Vec center_;
  double center_value_ = 0.0;
  std::size_t iteration_ = 0;
};

}  // namespace bnet
