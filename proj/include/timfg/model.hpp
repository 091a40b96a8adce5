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

// Game primitives: state space [d] (0-based here), a 1-D action grid, the
// population-dependent transition kernel P(x, nu, y, u) and the reward
// f(t, x, nu, u), plus the two built-in worked models.

#ifndef TIMFG_MODEL_HPP_
#define TIMFG_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "timfg/errors.hpp"

namespace timfg {

inline constexpr double kSimplexTol = 1e-12;

/// Ordered action points on an interval [lo, hi], endpoints included.
class ActionGrid {
 public:
  ActionGrid() = default;

  explicit ActionGrid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw InputError("ActionGrid: need at least 2 points");
    for (std::size_t i = 1; i < points_.size(); ++i) {
      if (!(points_[i] > points_[i - 1])) {
        throw InputError("ActionGrid: points must be strictly increasing");
      }
    }
  }

  static ActionGrid uniform(double lo, double hi, int m) {
    if (m < 2 || !(hi > lo)) throw InputError("ActionGrid::uniform: need m >= 2 and hi > lo");
    std::vector<double> pts(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) pts[i] = lo + (hi - lo) * static_cast<double>(i) / (m - 1);
    pts.back() = hi;
    return ActionGrid(std::move(pts));
  }

  double lo() const { return points_.front(); }
  double hi() const { return points_.back(); }
  int size() const { return static_cast<int>(points_.size()); }
  double operator[](int i) const { return points_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& points() const { return points_; }

  bool contains(double u) const {
    const double slack = 1e-12 * (hi() - lo());
    return u >= lo() - slack && u <= hi() + slack;
  }

  // Nearest grid index; exact midpoints go to the lower index.
  int nearest_index(double u) const {
    if (!std::isfinite(u) || !contains(u)) {
      std::ostringstream os;
      os << "action " << u << " outside [" << lo() << ", " << hi() << "]";
      throw InputError(os.str());
    }
    auto it = std::lower_bound(points_.begin(), points_.end(), u);
    if (it == points_.begin()) return 0;
    if (it == points_.end()) return size() - 1;
    const int hi_idx = static_cast<int>(it - points_.begin());
    const int lo_idx = hi_idx - 1;
    const double d_lo = u - points_[lo_idx];
    const double d_hi = points_[hi_idx] - u;
    const double tie = 1e-12 * (hi() - lo());
    return (d_lo <= d_hi + tie) ? lo_idx : hi_idx;
  }

  friend bool operator==(const ActionGrid& a, const ActionGrid& b) { return a.points_ == b.points_; }

 private:
  std::vector<double> points_;
};

/// A probability vector over [d].
class SimplexPoint {
 public:
  SimplexPoint() = default;

  explicit SimplexPoint(std::vector<double> weights) : w_(std::move(weights)) {
    if (w_.empty()) throw InputError("SimplexPoint: empty weight vector");
    double sum = 0.0;
    for (double& v : w_) {
      if (!std::isfinite(v) || v < -1e-12) throw InputError("SimplexPoint: negative or non-finite weight");
      if (v < 0.0) v = 0.0;
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      std::ostringstream os;
      os << "SimplexPoint: weights sum to " << sum;
      throw InputError(os.str());
    }
    for (double& v : w_) v /= sum;
  }

  static SimplexPoint two_state(double first) { return SimplexPoint({first, 1.0 - first}); }

  static SimplexPoint from_counts(std::span<const int> counts) {
    const int n = std::accumulate(counts.begin(), counts.end(), 0);
    if (n <= 0) throw InputError("SimplexPoint::from_counts: empty population");
    std::vector<double> w(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) w[i] = static_cast<double>(counts[i]) / n;
    return SimplexPoint(std::move(w));
  }

  int dim() const { return static_cast<int>(w_.size()); }
  double operator[](int i) const { return w_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& weights() const { return w_; }

  friend bool operator==(const SimplexPoint&, const SimplexPoint&) = default;

 private:
  std::vector<double> w_;
};

inline double euclidean_distance(const SimplexPoint& a, const SimplexPoint& b) {
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Discounting

struct ExponentialDiscount {
  double rho;
};

/// delta(t) = sum_i w_i rho_i^t.
struct WeightedAtomsDiscount {
  std::vector<std::pair<double, double>> atoms;  // (rho, weight)
};

/// delta(0..n-1) tabulated, then geometric decay at tail_rate.
struct TableDiscount {
  std::vector<double> values;
  double tail_rate;
};

class DiscountSpec {
 public:
  using Variant = std::variant<ExponentialDiscount, WeightedAtomsDiscount, TableDiscount>;

  DiscountSpec() : v_(ExponentialDiscount{0.5}) {}
  explicit DiscountSpec(Variant v) : v_(std::move(v)) { validate(); }

  static DiscountSpec exponential(double rho) { return DiscountSpec(ExponentialDiscount{rho}); }
  static DiscountSpec atoms(std::vector<std::pair<double, double>> a) {
    return DiscountSpec(WeightedAtomsDiscount{std::move(a)});
  }
  static DiscountSpec table(std::vector<double> values, double tail_rate) {
    return DiscountSpec(TableDiscount{std::move(values), tail_rate});
  }

  const Variant& variant() const { return v_; }
  bool is_atoms() const { return std::holds_alternative<WeightedAtomsDiscount>(v_); }
  bool is_exponential() const { return std::holds_alternative<ExponentialDiscount>(v_); }

  // Exponential(rho) is reported as the single atom (rho, 1).
  std::vector<std::pair<double, double>> atom_list() const {
    if (auto* e = std::get_if<ExponentialDiscount>(&v_)) return {{e->rho, 1.0}};
    if (auto* a = std::get_if<WeightedAtomsDiscount>(&v_)) return a->atoms;
    throw UnsupportedError("discount table has no atom decomposition");
  }

  double delta(int t) const {
    if (t < 0) throw InputError("discount: negative time");
    return std::visit(
        [t](const auto& d) -> double {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, ExponentialDiscount>) {
            return std::pow(d.rho, t);
          } else if constexpr (std::is_same_v<D, WeightedAtomsDiscount>) {
            double s = 0.0;
            for (auto [rho, w] : d.atoms) s += w * ipow(rho, t);
            return s;
          } else {
            const int n = static_cast<int>(d.values.size());
            if (t < n) return d.values[t];
            return d.values.back() * std::pow(d.tail_rate, t - (n - 1));
          }
        },
        v_);
  }

  /// sum_{t > T} delta(t), in closed form.
  double tail_sum(int T) const {
    if (T < 0) throw InputError("discount: negative horizon");
    return std::visit(
        [T](const auto& d) -> double {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, ExponentialDiscount>) {
            return std::pow(d.rho, T + 1) / (1.0 - d.rho);
          } else if constexpr (std::is_same_v<D, WeightedAtomsDiscount>) {
            double s = 0.0;
            for (auto [rho, w] : d.atoms) s += w * ipow(rho, T + 1) / (1.0 - rho);
            return s;
          } else {
            const int last = static_cast<int>(d.values.size()) - 1;
            const double r = d.tail_rate;
            if (T >= last) return d.values.back() * std::pow(r, T + 1 - last) / (1.0 - r);
            double s = 0.0;
            for (int t = T + 1; t <= last; ++t) s += d.values[t];
            return s + d.values.back() * r / (1.0 - r);
          }
        },
        v_);
  }

 private:
  static double ipow(double base, int e) {
    if (e == 0) return 1.0;
    return std::pow(base, e);
  }

  void validate() const {
    std::visit(
        [](const auto& d) {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, ExponentialDiscount>) {
            if (!(d.rho > 0.0 && d.rho < 1.0)) throw ConfigError("exponential discount needs rho in (0,1)");
          } else if constexpr (std::is_same_v<D, WeightedAtomsDiscount>) {
            if (d.atoms.empty()) throw ConfigError("weighted discount needs at least one atom");
            double wsum = 0.0;
            for (auto [rho, w] : d.atoms) {
              if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("discount atom rho must lie in [0,1)");
              if (!(w > 0.0)) throw ConfigError("discount atom weight must be positive");
              wsum += w;
            }
            if (std::abs(wsum - 1.0) > 1e-12) throw ConfigError("discount atom weights must sum to 1");
          } else {
            if (d.values.empty()) throw ConfigError("discount table is empty");
            if (!(d.tail_rate >= 0.0 && d.tail_rate < 1.0)) throw ConfigError("discount tail rate must lie in [0,1)");
            if (!(d.values.front() > 0.0))
              throw ConfigError("discount table must start positive");
            for (std::size_t i = 1; i < d.values.size(); ++i) {
              if (d.values[i] > d.values[i - 1] || d.values[i] < 0.0)
                throw ConfigError("discount table must be nonnegative and nonincreasing");
            }
          }
        },
        v_);
  }

  Variant v_;
};

// ---------------------------------------------------------------------------
// Model

using KernelFn = std::function<void(int x, const SimplexPoint& nu, double u, std::span<double> out)>;
using StageRewardFn = std::function<double(int x, const SimplexPoint& nu, double u)>;
using RewardFn = std::function<double(int t, int x, const SimplexPoint& nu, double u)>;

/// f(t, x, nu, u) = delta(t) g(x, nu, u).
struct SeparableReward {
  StageRewardFn g;
  DiscountSpec discount;
};

/// Arbitrary f(t, x, nu, u). tail_bound(T) must bound sum_{t>T} sup |f(t, .)|.
struct GeneralReward {
  RewardFn f;
  std::function<double(int)> tail_bound;
};

struct ModelSpec {
  std::string name;
  int d = 0;
  ActionGrid grid;
  KernelFn kernel;
  std::variant<SeparableReward, GeneralReward> reward;
  // sup |g| for separable rewards (bound used by tail estimates).
  double reward_sup = 0.0;
  // Bound on |f(t,x,nu,u)-f(t,x,nu,u')| + |P(x,nu,u)-P(x,nu,u')| per |u-u'|.
  double lipschitz_u = 0.0;

  bool separable() const { return std::holds_alternative<SeparableReward>(reward); }
  const SeparableReward* separable_reward() const { return std::get_if<SeparableReward>(&reward); }
  const DiscountSpec* discount() const {
    auto* s = separable_reward();
    return s ? &s->discount : nullptr;
  }
};

namespace detail {

inline void check_state(const ModelSpec& m, int x) {
  if (x < 0 || x >= m.d) {
    std::ostringstream os;
    os << "state " << x << " outside [0, " << m.d << ")";
    throw InputError(os.str());
  }
}

inline void check_nu(const ModelSpec& m, const SimplexPoint& nu) {
  if (nu.dim() != m.d) throw InputError("population distribution has wrong dimension");
}

// Unchecked evaluation used on hot paths.
inline void kernel_into(const ModelSpec& m, int x, const SimplexPoint& nu, double u, std::span<double> out) {
  m.kernel(x, nu, u, out);
}

inline double reward_unchecked(const ModelSpec& m, int t, int x, const SimplexPoint& nu, double u) {
  if (auto* s = std::get_if<SeparableReward>(&m.reward)) return s->discount.delta(t) * s->g(x, nu, u);
  return std::get<GeneralReward>(m.reward).f(t, x, nu, u);
}

}  // namespace detail

/// P(x, nu, ., u) as a probability vector.
inline SimplexPoint transition_row(const ModelSpec& model, int x, const SimplexPoint& nu, double u) {
  detail::check_state(model, x);
  detail::check_nu(model, nu);
  if (!model.grid.contains(u)) throw InputError("transition_row: action outside U");
  std::vector<double> out(static_cast<std::size_t>(model.d));
  model.kernel(x, nu, u, out);
  return SimplexPoint(std::move(out));
}

inline double reward(const ModelSpec& model, int t, int x, const SimplexPoint& nu, double u) {
  if (t < 0) throw InputError("reward: negative time");
  detail::check_state(model, x);
  detail::check_nu(model, nu);
  if (!model.grid.contains(u)) throw InputError("reward: action outside U");
  return detail::reward_unchecked(model, t, x, nu, u);
}

/// Upper bound on sum_{t > T} sup |f(t, .)|.
inline double tail_bound(const ModelSpec& model, int T) {
  if (T < 0) throw InputError("tail_bound: negative horizon");
  if (auto* s = model.separable_reward()) return model.reward_sup * s->discount.tail_sum(T);
  const auto& gen = std::get<GeneralReward>(model.reward);
  if (!gen.tail_bound) throw ConfigError("general reward has no tail bound function");
  return gen.tail_bound(T);
}

/// Smallest T with tail_bound(T) <= eps.
inline int horizon_for(const ModelSpec& model, double eps, int max_horizon = 100000) {
  if (!(eps > 0.0)) throw ConfigError("tail tolerance must be positive");
  for (int T = 0; T <= max_horizon; ++T) {
    if (tail_bound(model, T) <= eps) return T;
  }
  throw ConfigError("no horizon up to the cap meets the tail tolerance");
}

/// Throws HorizonError naming the required horizon if T is too short.
inline void require_horizon(const ModelSpec& model, int T, double eps) {
  if (tail_bound(model, T) > eps) {
    const int need = horizon_for(model, eps);
    std::ostringstream os;
    os << "horizon " << T << " too short for tail tolerance " << eps << "; need T >= " << need;
    throw HorizonError(os.str(), need);
  }
}

/// Exhaustive max of |g| over states x nu-grid x action grid (a bound on the
/// grid only). For d = 2 the nu-grid is uniform with k_nu + 1 points; for
/// larger d the vertices and barycenter are sampled.
inline double grid_reward_sup(const ModelSpec& model, int k_nu = 100) {
  const auto* s = model.separable_reward();
  if (!s) throw UnsupportedError("grid_reward_sup needs a separable reward");
  std::vector<SimplexPoint> nus;
  if (model.d == 2) {
    for (int k = 0; k <= k_nu; ++k) nus.push_back(SimplexPoint::two_state(static_cast<double>(k) / k_nu));
  } else {
    for (int i = 0; i < model.d; ++i) {
      std::vector<double> w(model.d, 0.0);
      w[i] = 1.0;
      nus.emplace_back(w);
    }
    nus.emplace_back(std::vector<double>(model.d, 1.0 / model.d));
  }
  double sup = 0.0;
  for (int x = 0; x < model.d; ++x)
    for (const auto& nu : nus)
      for (double u : model.grid.points()) sup = std::max(sup, std::abs(s->g(x, nu, u)));
  return sup;
}

// ---------------------------------------------------------------------------
// Built-in models. States are 0-based: index 0 is the first state.

namespace detail {

// P(x, nu, u) = nu/2 + (1/4 + s (1/4 - u/2), 1/4 - s (1/4 - u/2)), s = (-1)^(x+1)
// with x the 0-based state. Shared by both built-in models.
inline void two_state_kernel(int x, const SimplexPoint& nu, double u, std::span<double> out) {
  const double sign = (x == 0) ? -1.0 : 1.0;
  const double shift = sign * (0.25 - 0.5 * u);
  out[0] = 0.5 * nu[0] + 0.25 + shift;
  out[1] = 0.5 * nu[1] + 0.25 - shift;
}

}  // namespace detail

/// Two-state model with g(x, nu, u) = 1 - |nu(2) u - 1/4| and, by default,
/// delta(t) = 3^-t / 2 + 4^-t / 2. The reward ignores the agent's state.
inline ModelSpec example31(int m = 101, DiscountSpec discount = DiscountSpec::atoms({{1.0 / 3.0, 0.5}, {0.25, 0.5}})) {
  ModelSpec model;
  model.name = "example31";
  model.d = 2;
  model.grid = ActionGrid::uniform(0.0, 1.0, m);
  model.kernel = detail::two_state_kernel;
  model.reward = SeparableReward{
      [](int, const SimplexPoint& nu, double u) { return 1.0 - std::abs(nu[1] * u - 0.25); },
      std::move(discount)};
  model.reward_sup = 1.0;
  model.lipschitz_u = 1.0 + std::sqrt(0.5);
  return model;
}

/// Two-state model with g(x, nu, u) = -u^2 + (1/2 + nu(1)) u + x (x = 1, 2)
/// and weighted discounting over the given atoms, each rho <= 1/7.
inline ModelSpec example43(std::vector<std::pair<double, double>> atoms = {{1.0 / 7.0, 1.0}}, int m = 101) {
  for (auto [rho, w] : atoms) {
    (void)w;
    if (rho > 1.0 / 7.0 + 1e-15) throw ConfigError("example43: discount atoms must satisfy rho <= 1/7");
  }
  ModelSpec model;
  model.name = "example43";
  model.d = 2;
  model.grid = ActionGrid::uniform(0.0, 1.0, m);
  model.kernel = detail::two_state_kernel;
  model.reward = SeparableReward{
      [](int x, const SimplexPoint& nu, double u) { return -u * u + (0.5 + nu[0]) * u + (x + 1); },
      DiscountSpec::atoms(std::move(atoms))};
  model.reward_sup = 3.0;
  model.lipschitz_u = 1.5 + std::sqrt(0.5);
  return model;
}

/// Short text identifying a model's configuration (used for provenance).
inline std::string model_fingerprint(const ModelSpec& model) {
  std::ostringstream os;
  os.precision(17);
  os << model.name << ";d=" << model.d << ";m=" << model.grid.size() << ";lo=" << model.grid.lo()
     << ";hi=" << model.grid.hi();
  if (const auto* disc = model.discount()) {
    std::visit(
        [&os](const auto& d) {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, ExponentialDiscount>) {
            os << ";exp=" << d.rho;
          } else if constexpr (std::is_same_v<D, WeightedAtomsDiscount>) {
            for (auto [r, w] : d.atoms) os << ";atom=" << r << ":" << w;
          } else {
            os << ";table=" << d.values.size() << ":" << d.tail_rate;
            for (double v : d.values) os << "," << v;
          }
        },
        disc->variant());
  }
  return os.str();
}

}  // namespace timfg

#endif  // TIMFG_MODEL_HPP_
