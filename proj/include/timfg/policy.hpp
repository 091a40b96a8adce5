// Copyright 2026 The timfg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Policies: time-indexed relaxed policies with a stationary tail, and
// feedback policies tabulated on a grid of population distributions.

#ifndef TIMFG_POLICY_HPP_
#define TIMFG_POLICY_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "timfg/errors.hpp"
#include "timfg/measures.hpp"
#include "timfg/model.hpp"

namespace timfg {

/// One relaxed action per state.
using PolicyRow = std::vector<RelaxedAction>;

inline PolicyRow constant_row(int d, const RelaxedAction& a) { return PolicyRow(static_cast<std::size_t>(d), a); }

/// pi_0 .. pi_{n-1} followed by a stationary tail for t >= n.
struct TimePolicy {
  std::vector<PolicyRow> head;
  PolicyRow tail;

  static TimePolicy constant(PolicyRow row) { return TimePolicy{{}, std::move(row)}; }

  const PolicyRow& at(int t) const {
    if (t < 0) throw InputError("TimePolicy: negative time");
    if (t < static_cast<int>(head.size())) return head[t];
    return tail;
  }

  int head_length() const { return static_cast<int>(head.size()); }
};

/// Discretization of P([d]). For d = 2 the points are nu(1) = k / K,
/// k = 0..K (nu(1) is the mass of the first state); for larger d an
/// explicit list is used.
class NuGrid {
 public:
  NuGrid() = default;

  static NuGrid uniform2(int k) {
    if (k < 1) throw ConfigError("NuGrid: need K >= 1");
    NuGrid g;
    g.d_ = 2;
    g.k_ = k;
    for (int i = 0; i <= k; ++i) g.pts_.push_back(SimplexPoint::two_state(static_cast<double>(i) / k));
    return g;
  }

  static NuGrid explicit_points(std::vector<SimplexPoint> pts) {
    if (pts.empty()) throw ConfigError("NuGrid: empty point list");
    NuGrid g;
    g.d_ = pts.front().dim();
    for (const auto& p : pts) {
      if (p.dim() != g.d_) throw ConfigError("NuGrid: points of mixed dimension");
    }
    g.pts_ = std::move(pts);
    return g;
  }

  /// All nu with K nu integer, lexicographically ascending counts. Same as
  /// uniform2(K) for d = 2.
  static NuGrid simplex(int d, int k) {
    if (d == 2) return uniform2(k);
    if (d < 1 || k < 1) throw ConfigError("NuGrid: need d >= 1 and K >= 1");
    std::vector<SimplexPoint> pts;
    std::vector<int> c(static_cast<std::size_t>(d), 0);
    auto rec = [&](auto&& self, int i, int left) -> void {
      if (i == d - 1) {
        c[i] = left;
        pts.push_back(SimplexPoint::from_counts(c));
        return;
      }
      for (int v = 0; v <= left; ++v) {
        c[i] = v;
        self(self, i + 1, left - v);
      }
    };
    rec(rec, 0, k);
    NuGrid g = explicit_points(std::move(pts));
    g.lattice_k_ = k;
    return g;
  }

  int dim() const { return d_; }
  // K of simplex(d, K) or uniform2(K), 0 for other explicit lists.
  int lattice_k() const { return k_ > 0 ? k_ : lattice_k_; }
  // K for the uniform two-state grid, 0 for explicit lists.
  int k() const { return k_; }
  bool is_uniform2() const { return k_ > 0; }
  int size() const { return static_cast<int>(pts_.size()); }
  const SimplexPoint& point(int i) const { return pts_.at(static_cast<std::size_t>(i)); }
  const std::vector<SimplexPoint>& points() const { return pts_; }

  /// Bracketing cell for d = 2: nu(1) lies in [i/K, (i+1)/K], theta in [0,1].
  std::pair<int, double> bracket(const SimplexPoint& nu) const {
    const double s = std::clamp(nu[0], 0.0, 1.0) * k_;
    int i = static_cast<int>(std::floor(s));
    if (i >= k_) return {k_ - 1, 1.0};
    if (i < 0) i = 0;
    return {i, s - i};
  }

  /// Nearest point in Euclidean distance, ties to the lexicographically
  /// smallest point.
  int nearest(const SimplexPoint& nu) const {
    if (pts_.empty()) throw ConfigError("NuGrid: empty grid");
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < size(); ++i) {
      const double dist = euclidean_distance(pts_[i], nu);
      if (dist < best_d - 1e-15 ||
          (std::abs(dist - best_d) <= 1e-15 && pts_[i].weights() < pts_[best].weights())) {
        best = i;
        best_d = dist;
      }
    }
    return best;
  }

  /// Linear interpolation (d = 2) or nearest-point lookup of a grid function.
  double interpolate(std::span<const double> values, const SimplexPoint& nu) const {
    if (is_uniform2()) {
      auto [i, theta] = bracket(nu);
      return (1.0 - theta) * values[i] + theta * values[i + 1];
    }
    return values[nearest(nu)];
  }

 private:
  int d_ = 0;
  int k_ = 0;
  int lattice_k_ = 0;
  std::vector<SimplexPoint> pts_;
};

/// pi~(x, nu): table[x][i] is the action at state x and grid point i.
/// Off-grid nu uses linear blending of weight vectors in nu(1) for d = 2 and
/// the nearest grid point otherwise.
class FeedbackPolicy {
 public:
  FeedbackPolicy() = default;

  FeedbackPolicy(NuGrid grid, std::vector<std::vector<RelaxedAction>> table)
      : grid_(std::move(grid)), table_(std::move(table)) {
    if (grid_.size() == 0) throw ConfigError("FeedbackPolicy: empty grid");
    if (static_cast<int>(table_.size()) != grid_.dim()) throw ConfigError("FeedbackPolicy: need one table per state");
    for (const auto& col : table_) {
      if (static_cast<int>(col.size()) != grid_.size()) throw ConfigError("FeedbackPolicy: table does not match grid");
      for (const auto& a : col) {
        if (a.size() != col.front().size()) throw ConfigError("FeedbackPolicy: ragged action weights");
      }
    }
  }

  static FeedbackPolicy constant(NuGrid grid, const RelaxedAction& a) {
    const int d = grid.dim();
    const int n = grid.size();
    std::vector<std::vector<RelaxedAction>> t(static_cast<std::size_t>(d),
                                              std::vector<RelaxedAction>(static_cast<std::size_t>(n), a));
    return FeedbackPolicy(std::move(grid), std::move(t));
  }

  /// Builds a policy from a rule (x, nu) -> action evaluated at grid points.
  template <class F>
  static FeedbackPolicy from_function(NuGrid grid, F&& rule) {
    std::vector<std::vector<RelaxedAction>> t(static_cast<std::size_t>(grid.dim()));
    for (int x = 0; x < grid.dim(); ++x) {
      for (int i = 0; i < grid.size(); ++i) t[x].push_back(rule(x, grid.point(i)));
    }
    return FeedbackPolicy(std::move(grid), std::move(t));
  }

  const NuGrid& grid() const { return grid_; }
  int dim() const { return grid_.dim(); }
  int action_size() const { return table_.front().front().size(); }
  const RelaxedAction& at(int x, int i) const { return table_.at(static_cast<std::size_t>(x)).at(static_cast<std::size_t>(i)); }
  RelaxedAction& at(int x, int i) { return table_.at(static_cast<std::size_t>(x)).at(static_cast<std::size_t>(i)); }
  const std::vector<std::vector<RelaxedAction>>& table() const { return table_; }

  RelaxedAction evaluate(int x, const SimplexPoint& nu) const {
    if (x < 0 || x >= dim()) throw InputError("FeedbackPolicy: state out of range");
    if (nu.dim() != dim()) throw InputError("FeedbackPolicy: distribution has wrong dimension");
    if (!grid_.is_uniform2()) return at(x, grid_.nearest(nu));
    auto [i, theta] = grid_.bracket(nu);
    if (theta <= 0.0) return at(x, i);
    if (theta >= 1.0) return at(x, i + 1);
    const auto& a = at(x, i).weights();
    const auto& b = at(x, i + 1).weights();
    std::vector<double> w(a.size());
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = (1.0 - theta) * a[j] + theta * b[j];
    return RelaxedAction(std::move(w));
  }

  PolicyRow evaluate_row(const SimplexPoint& nu) const {
    PolicyRow row;
    row.reserve(static_cast<std::size_t>(dim()));
    for (int x = 0; x < dim(); ++x) row.push_back(evaluate(x, nu));
    return row;
  }

  friend bool operator==(const FeedbackPolicy& a, const FeedbackPolicy& b) {
    return a.grid_.points() == b.grid_.points() && a.table_ == b.table_;
  }

 private:
  NuGrid grid_;
  std::vector<std::vector<RelaxedAction>> table_;
};

inline RelaxedAction evaluate_feedback(const FeedbackPolicy& pi, int x, const SimplexPoint& nu) {
  return pi.evaluate(x, nu);
}

}  // namespace timfg

#endif  // TIMFG_POLICY_HPP_
