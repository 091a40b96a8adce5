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

// Relaxed actions (probability weights on the action grid), their integrals
// against the reward and the kernel, Wasserstein-1 distance on the grid, and
// argmax sets with a deterministic tie rule.

#ifndef TIMFG_MEASURES_HPP_
#define TIMFG_MEASURES_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "timfg/errors.hpp"
#include "timfg/model.hpp"

namespace timfg {

inline constexpr double kDefaultTieTol = 1e-9;

/// A probability measure on the action grid, stored densely.
class RelaxedAction {
 public:
  RelaxedAction() = default;

  explicit RelaxedAction(std::vector<double> weights) : w_(std::move(weights)) {
    if (w_.empty()) throw InputError("RelaxedAction: empty weights");
    double sum = 0.0;
    for (double& v : w_) {
      if (!std::isfinite(v) || v < -1e-12) throw InputError("RelaxedAction: negative or non-finite weight");
      if (v < 0.0) v = 0.0;
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InputError("RelaxedAction: weights do not sum to 1");
    for (double& v : w_) v /= sum;
  }

  static RelaxedAction unit(int m, int index) {
    std::vector<double> w(static_cast<std::size_t>(m), 0.0);
    w.at(static_cast<std::size_t>(index)) = 1.0;
    return RelaxedAction(std::move(w));
  }

  /// alpha * a + (1 - alpha) * b.
  static RelaxedAction mix(const RelaxedAction& a, const RelaxedAction& b, double alpha) {
    if (a.size() != b.size()) throw InputError("RelaxedAction::mix: size mismatch");
    std::vector<double> w(a.w_.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = alpha * a.w_[i] + (1.0 - alpha) * b.w_[i];
    return RelaxedAction(std::move(w));
  }

  int size() const { return static_cast<int>(w_.size()); }
  double operator[](int i) const { return w_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& weights() const { return w_; }

  /// Index of the single atom, if the measure is a Dirac on the grid.
  std::optional<int> dirac_index() const {
    int found = -1;
    for (int i = 0; i < size(); ++i) {
      if (w_[i] > 0.0) {
        if (found >= 0) return std::nullopt;
        found = i;
      }
    }
    if (found >= 0 && w_[found] == 1.0) return found;
    return std::nullopt;
  }

  /// Index of the largest weight (lowest index on ties).
  int mode_index() const {
    return static_cast<int>(std::max_element(w_.begin(), w_.end()) - w_.begin());
  }

  /// Expected action value under the given grid.
  double mean(const ActionGrid& grid) const {
    double s = 0.0;
    for (int i = 0; i < size(); ++i) s += w_[i] * grid[i];
    return s;
  }

  friend bool operator==(const RelaxedAction&, const RelaxedAction&) = default;

 private:
  std::vector<double> w_;
};

/// Unit mass at the grid point nearest to u (lower index on exact ties).
inline RelaxedAction dirac(const ActionGrid& grid, double u) {
  return RelaxedAction::unit(grid.size(), grid.nearest_index(u));
}

/// Dirac location blended between two grid neighbours: a point u in the
/// interior of a cell is represented by the two-atom measure with mean u.
inline RelaxedAction dirac_interpolated(const ActionGrid& grid, double u) {
  if (!grid.contains(u)) throw InputError("dirac_interpolated: action outside grid");
  u = std::clamp(u, grid.lo(), grid.hi());
  const auto& pts = grid.points();
  auto it = std::upper_bound(pts.begin(), pts.end(), u);
  int hi = static_cast<int>(it - pts.begin());
  if (hi >= grid.size()) return RelaxedAction::unit(grid.size(), grid.size() - 1);
  int lo = hi - 1;
  const double theta = (u - pts[lo]) / (pts[hi] - pts[lo]);
  std::vector<double> w(static_cast<std::size_t>(grid.size()), 0.0);
  w[lo] = 1.0 - theta;
  w[hi] += theta;
  return RelaxedAction(std::move(w));
}

namespace detail {

inline void check_action(const ModelSpec& model, const RelaxedAction& a) {
  if (a.size() != model.grid.size()) throw InputError("relaxed action does not match the action grid");
}

// Accumulates P^varpi(x, nu, .) into out (overwritten). scratch has size d.
inline void integrate_transition_into(const ModelSpec& model, const RelaxedAction& a, int x, const SimplexPoint& nu,
                                      std::span<double> out, std::span<double> scratch) {
  std::fill(out.begin(), out.end(), 0.0);
  const auto& w = a.weights();
  for (int j = 0; j < a.size(); ++j) {
    if (w[j] == 0.0) continue;
    model.kernel(x, nu, model.grid[j], scratch);
    for (int y = 0; y < model.d; ++y) out[y] += w[j] * scratch[y];
  }
}

inline double integrate_reward_unchecked(const ModelSpec& model, const RelaxedAction& a, int t, int x,
                                         const SimplexPoint& nu) {
  double s = 0.0;
  const auto& w = a.weights();
  for (int j = 0; j < a.size(); ++j) {
    if (w[j] == 0.0) continue;
    s += w[j] * reward_unchecked(model, t, x, nu, model.grid[j]);
  }
  return s;
}

}  // namespace detail

/// f^varpi(t, x, nu) = sum_j w_j f(t, x, nu, u_j).
inline double integrate_reward(const ModelSpec& model, const RelaxedAction& a, int t, int x, const SimplexPoint& nu) {
  detail::check_action(model, a);
  detail::check_state(model, x);
  detail::check_nu(model, nu);
  if (t < 0) throw InputError("integrate_reward: negative time");
  return detail::integrate_reward_unchecked(model, a, t, x, nu);
}

/// P^varpi(x, nu, .), a convex combination of kernel rows.
inline SimplexPoint integrate_transition(const ModelSpec& model, const RelaxedAction& a, int x,
                                         const SimplexPoint& nu) {
  detail::check_action(model, a);
  detail::check_state(model, x);
  detail::check_nu(model, nu);
  std::vector<double> out(model.d), scratch(model.d);
  detail::integrate_transition_into(model, a, x, nu, out, scratch);
  return SimplexPoint(std::move(out));
}

/// Row-stochastic d x d matrix, row-major.
class StochasticMatrix {
 public:
  explicit StochasticMatrix(int d) : d_(d), a_(static_cast<std::size_t>(d * d), 0.0) {}
  int dim() const { return d_; }
  double& operator()(int x, int y) { return a_[static_cast<std::size_t>(x * d_ + y)]; }
  double operator()(int x, int y) const { return a_[static_cast<std::size_t>(x * d_ + y)]; }
  std::span<double> row(int x) { return {a_.data() + x * d_, static_cast<std::size_t>(d_)}; }
  std::span<const double> row(int x) const { return {a_.data() + x * d_, static_cast<std::size_t>(d_)}; }

 private:
  int d_;
  std::vector<double> a_;
};

/// P^{rows}(nu): row x equals P^{rows[x]}(x, nu).
inline StochasticMatrix transition_matrix(const ModelSpec& model, std::span<const RelaxedAction> rows,
                                          const SimplexPoint& nu) {
  if (static_cast<int>(rows.size()) != model.d) throw InputError("transition_matrix: need one action per state");
  detail::check_nu(model, nu);
  StochasticMatrix p(model.d);
  std::vector<double> scratch(model.d);
  for (int x = 0; x < model.d; ++x) {
    detail::check_action(model, rows[x]);
    detail::integrate_transition_into(model, rows[x], x, nu, p.row(x), scratch);
  }
  return p;
}

/// mu . P, with round-off negatives clamped and the result renormalized.
inline SimplexPoint push_forward(const SimplexPoint& mu, const StochasticMatrix& p) {
  const int d = p.dim();
  std::vector<double> out(static_cast<std::size_t>(d), 0.0);
  for (int x = 0; x < d; ++x) {
    if (mu[x] == 0.0) continue;
    for (int y = 0; y < d; ++y) out[y] += mu[x] * p(x, y);
  }
  double s = 0.0;
  for (double& v : out) {
    if (v < 0.0) v = 0.0;
    s += v;
  }
  for (double& v : out) v /= s;
  return SimplexPoint(std::move(out));
}

/// Exact W1 between two measures on the same 1-D grid (CDF differences).
inline double wasserstein1(const ActionGrid& grid, const RelaxedAction& a, const RelaxedAction& b) {
  if (a.size() != grid.size() || b.size() != grid.size()) throw InputError("wasserstein1: measures do not match grid");
  double cdf_a = 0.0, cdf_b = 0.0, w1 = 0.0;
  for (int j = 0; j + 1 < grid.size(); ++j) {
    cdf_a += a[j];
    cdf_b += b[j];
    w1 += std::abs(cdf_a - cdf_b) * (grid[j + 1] - grid[j]);
  }
  return w1;
}

struct ArgmaxSet {
  std::vector<int> indices;  // ascending
  int canonical = -1;        // smallest member
  double max_value = 0.0;
};

/// Indices within tie_tol * max(1, value range) of the maximum.
inline ArgmaxSet argmax_with_ties(std::span<const double> values, double tie_tol = kDefaultTieTol) {
  if (values.empty()) throw InputError("argmax_with_ties: empty input");
  double mx = -std::numeric_limits<double>::infinity();
  double mn = std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (!std::isfinite(v)) throw InputError("argmax_with_ties: non-finite value");
    mx = std::max(mx, v);
    mn = std::min(mn, v);
  }
  const double thresh = tie_tol * std::max(1.0, mx - mn);
  ArgmaxSet out;
  out.max_value = mx;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= mx - thresh) out.indices.push_back(static_cast<int>(i));
  }
  out.canonical = out.indices.front();
  return out;
}

}  // namespace timfg

#endif  // TIMFG_MEASURES_HPP_
