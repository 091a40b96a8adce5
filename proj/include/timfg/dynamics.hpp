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

// Population flows and single-agent values: J and the auxiliary v for
// time-indexed policies, J and V for feedback policies, one-step deviation
// values, and the per-atom value solver for weighted discounting.
//
// Horizon convention: a value "at horizon T" sums reward terms l = 0..T of
// its own clock, so the truncation error is at most tail_bound(model, T).

#ifndef TIMFG_DYNAMICS_HPP_
#define TIMFG_DYNAMICS_HPP_

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "timfg/errors.hpp"
#include "timfg/measures.hpp"
#include "timfg/model.hpp"
#include "timfg/policy.hpp"

namespace timfg {

/// mu_0 .. mu_T.
struct PopulationFlow {
  std::vector<SimplexPoint> mu;
  int horizon = 0;
  double tail_note = 0.0;  // tail_bound(model, horizon) at construction

  const SimplexPoint& operator[](int t) const { return mu.at(static_cast<std::size_t>(t)); }
  int size() const { return static_cast<int>(mu.size()); }
};

namespace detail {

inline void check_horizon_tol(const ModelSpec& model, int T, double eps_tail) {
  if (eps_tail > 0.0) require_horizon(model, T, eps_tail);
}

// Backward recursion along a fixed flow. Returns, for every start state,
// sum_{l=0}^{L} E[f^{rows[l]}(offset + l, s_l, flow[l])] with L = rows.size() - 1.
inline std::vector<double> values_along_flow(const ModelSpec& model, std::span<const PolicyRow> rows,
                                             std::span<const SimplexPoint> flow, int offset) {
  const int d = model.d;
  if (rows.empty() || flow.size() < rows.size()) throw InputError("values_along_flow: flow shorter than policy path");
  std::vector<double> h(static_cast<std::size_t>(d), 0.0), next(static_cast<std::size_t>(d));
  std::vector<double> prow(static_cast<std::size_t>(d)), scratch(static_cast<std::size_t>(d));
  for (int l = static_cast<int>(rows.size()) - 1; l >= 0; --l) {
    const bool last = (l == static_cast<int>(rows.size()) - 1);
    for (int x = 0; x < d; ++x) {
      double v = integrate_reward_unchecked(model, rows[l][x], offset + l, x, flow[l]);
      if (!last) {
        integrate_transition_into(model, rows[l][x], x, flow[l], prow, scratch);
        for (int y = 0; y < d; ++y) v += prow[y] * h[y];
      }
      next[x] = v;
    }
    h.swap(next);
  }
  return h;
}

struct FeedbackPath {
  std::vector<SimplexPoint> flow;  // mu_0 .. mu_L
  std::vector<PolicyRow> rows;     // pi~(., mu_l)
};

inline FeedbackPath feedback_path(const ModelSpec& model, const FeedbackPolicy& pi, const SimplexPoint& nu0, int L) {
  FeedbackPath p;
  p.flow.reserve(static_cast<std::size_t>(L + 1));
  p.rows.reserve(static_cast<std::size_t>(L + 1));
  p.flow.push_back(nu0);
  for (int t = 0; t <= L; ++t) {
    p.rows.push_back(pi.evaluate_row(p.flow.back()));
    if (t < L) p.flow.push_back(push_forward(p.flow.back(), transition_matrix(model, p.rows.back(), p.flow.back())));
  }
  return p;
}

inline void check_feedback(const ModelSpec& model, const FeedbackPolicy& pi) {
  if (pi.dim() != model.d) throw InputError("feedback policy dimension does not match model");
  if (pi.action_size() != model.grid.size()) throw InputError("feedback policy does not match the action grid");
}

}  // namespace detail

/// mu_{t+1} = mu_t P^{pi_t}(mu_t), t < T.
inline PopulationFlow propagate_flow_time(const ModelSpec& model, const TimePolicy& pi, const SimplexPoint& nu0, int T) {
  detail::check_nu(model, nu0);
  if (T < 0) throw InputError("propagate_flow_time: negative horizon");
  PopulationFlow f;
  f.horizon = T;
  f.tail_note = tail_bound(model, T);
  f.mu.push_back(nu0);
  for (int t = 0; t < T; ++t) f.mu.push_back(push_forward(f.mu.back(), transition_matrix(model, pi.at(t), f.mu.back())));
  return f;
}

/// mu_{t+1} = mu_t P^{pi~(mu_t)}(mu_t), t < T.
inline PopulationFlow propagate_flow_feedback(const ModelSpec& model, const FeedbackPolicy& pi, const SimplexPoint& nu0,
                                              int T) {
  detail::check_nu(model, nu0);
  detail::check_feedback(model, pi);
  if (T < 0) throw InputError("propagate_flow_feedback: negative horizon");
  auto path = detail::feedback_path(model, pi, nu0, T);
  return PopulationFlow{std::move(path.flow), T, tail_bound(model, T)};
}

/// J of the shifted policy pi_{[t0:)} from every state at time t0, with
/// rewards f(l, .) for l = 0..T. Needs flow.mu up to index t0 + T.
inline std::vector<double> value_J_time_all(const ModelSpec& model, const TimePolicy& pi, const PopulationFlow& flow,
                                            int T, int t0 = 0, double eps_tail = 0.0) {
  detail::check_horizon_tol(model, T, eps_tail);
  if (t0 < 0 || T < 0) throw InputError("value_J_time: negative time or horizon");
  if (flow.size() < t0 + T + 1) throw InputError("value_J_time: flow too short for the horizon");
  std::vector<PolicyRow> rows;
  for (int l = 0; l <= T; ++l) rows.push_back(pi.at(t0 + l));
  return detail::values_along_flow(model, rows, std::span(flow.mu).subspan(static_cast<std::size_t>(t0)), 0);
}

inline double value_J_time(const ModelSpec& model, const TimePolicy& pi, int x, const PopulationFlow& flow, int T,
                           int t0 = 0, double eps_tail = 0.0) {
  detail::check_state(model, x);
  return value_J_time_all(model, pi, flow, T, t0, eps_tail)[x];
}

/// v(t+1, .): expected rewards from step t+1 on with the reward clock at
/// l = 1, 2, ..., T (elapsed time since t). Needs flow.mu up to t + T.
inline std::vector<double> aux_v_time(const ModelSpec& model, const TimePolicy& pi, const PopulationFlow& flow, int t,
                                      int T, double eps_tail = 0.0) {
  detail::check_horizon_tol(model, T, eps_tail);
  if (t < 0 || T < 1) throw InputError("aux_v_time: need t >= 0 and T >= 1");
  if (flow.size() < t + T + 1) throw InputError("aux_v_time: flow too short for the horizon");
  std::vector<PolicyRow> rows;
  for (int l = 1; l <= T; ++l) rows.push_back(pi.at(t + l));
  return detail::values_along_flow(model, rows, std::span(flow.mu).subspan(static_cast<std::size_t>(t + 1)), 1);
}

/// f^w(0, x, mu_t) + P^w(x, mu_t) . v(t+1, .).
inline double deviation_value_time(const ModelSpec& model, const RelaxedAction& w, const TimePolicy& pi,
                                   const PopulationFlow& flow, int t, int x, int T) {
  detail::check_action(model, w);
  detail::check_state(model, x);
  const auto v = aux_v_time(model, pi, flow, t, T);
  const auto p = integrate_transition(model, w, x, flow[t]);
  double s = integrate_reward(model, w, 0, x, flow[t]);
  for (int y = 0; y < model.d; ++y) s += p[y] * v[y];
  return s;
}

/// J^{pi~}(., nu) with rewards f(t, .) for t = 0..T.
inline std::vector<double> value_J_feedback_all(const ModelSpec& model, const FeedbackPolicy& pi,
                                                const SimplexPoint& nu, int T, double eps_tail = 0.0) {
  detail::check_nu(model, nu);
  detail::check_feedback(model, pi);
  detail::check_horizon_tol(model, T, eps_tail);
  if (T < 0) throw InputError("value_J_feedback: negative horizon");
  auto path = detail::feedback_path(model, pi, nu, T);
  return detail::values_along_flow(model, path.rows, path.flow, 0);
}

inline double value_J_feedback(const ModelSpec& model, const FeedbackPolicy& pi, int x, const SimplexPoint& nu, int T,
                               double eps_tail = 0.0) {
  detail::check_state(model, x);
  return value_J_feedback_all(model, pi, nu, T, eps_tail)[x];
}

/// V^{pi~}(., nu) = E[sum_{t=0}^{T} f(1 + t, s_t, mu_t)], the one-step
/// time-shifted value.
inline std::vector<double> aux_V_feedback_all(const ModelSpec& model, const FeedbackPolicy& pi, const SimplexPoint& nu,
                                              int T, double eps_tail = 0.0) {
  detail::check_nu(model, nu);
  detail::check_feedback(model, pi);
  detail::check_horizon_tol(model, T, eps_tail);
  if (T < 0) throw InputError("aux_V_feedback: negative horizon");
  auto path = detail::feedback_path(model, pi, nu, T);
  return detail::values_along_flow(model, path.rows, path.flow, 1);
}

inline double aux_V_feedback(const ModelSpec& model, const FeedbackPolicy& pi, int x, const SimplexPoint& nu, int T,
                             double eps_tail = 0.0) {
  detail::check_state(model, x);
  return aux_V_feedback_all(model, pi, nu, T, eps_tail)[x];
}

/// mu_1 = nu P^{pi~(nu)}(nu).
inline SimplexPoint next_distribution(const ModelSpec& model, const FeedbackPolicy& pi, const SimplexPoint& nu) {
  return push_forward(nu, transition_matrix(model, pi.evaluate_row(nu), nu));
}

// ---------------------------------------------------------------------------
// Per-atom values for weighted discounting

/// For each atom rho_i: J(x, nu; rho_i) on the policy's grid, the fixed
/// point of J = g^{pi~} + rho P^{pi~} J(., mu_1(nu)).
class RhoValueTable {
 public:
  RhoValueTable() = default;
  RhoValueTable(NuGrid grid, std::vector<std::pair<double, double>> atoms,
                std::vector<std::vector<std::vector<double>>> values, int iterations)
      : grid_(std::move(grid)), atoms_(std::move(atoms)), j_(std::move(values)), iterations_(iterations) {}

  const NuGrid& grid() const { return grid_; }
  const std::vector<std::pair<double, double>>& atoms() const { return atoms_; }
  int iterations() const { return iterations_; }

  /// J(x, grid point i; rho_a).
  double J(int atom, int x, int i) const { return j_[atom][x][i]; }

  double J_at(int atom, int x, const SimplexPoint& nu) const { return grid_.interpolate(j_[atom][x], nu); }

  /// V(x, nu) = sum_i w_i rho_i J(x, nu; rho_i).
  double V(int x, const SimplexPoint& nu) const {
    double s = 0.0;
    for (std::size_t a = 0; a < atoms_.size(); ++a) {
      const auto [rho, w] = atoms_[a];
      if (rho == 0.0) continue;
      s += w * rho * grid_.interpolate(j_[a][x], nu);
    }
    return s;
  }

  std::vector<double> V_all(const SimplexPoint& nu) const {
    std::vector<double> out(static_cast<std::size_t>(grid_.dim()));
    for (int x = 0; x < grid_.dim(); ++x) out[x] = V(x, nu);
    return out;
  }

  /// J^{pi~}(x, nu) = sum_i w_i J(x, nu; rho_i).
  double total_J(int x, const SimplexPoint& nu) const {
    double s = 0.0;
    for (std::size_t a = 0; a < atoms_.size(); ++a) s += atoms_[a].second * grid_.interpolate(j_[a][x], nu);
    return s;
  }

 private:
  NuGrid grid_;
  std::vector<std::pair<double, double>> atoms_;
  std::vector<std::vector<std::vector<double>>> j_;  // [atom][x][grid index]
  int iterations_ = 0;
};

/// Value iteration per discount atom with mu_1 recomputed from pi~ and J
/// interpolated in nu. Stops when the sup-norm update falls below
/// tol (1 - rho).
inline RhoValueTable solve_rho_values(const ModelSpec& model, const FeedbackPolicy& pi, double tol = 1e-13,
                                      int max_iter = 100000) {
  detail::check_feedback(model, pi);
  const auto* sep = model.separable_reward();
  if (!sep) throw UnsupportedError("solve_rho_values needs a separable reward");
  const auto atoms = sep->discount.atom_list();  // throws UnsupportedError for tables
  const NuGrid& grid = pi.grid();
  const int d = model.d;
  const int n = grid.size();

  // Per grid point: g^{pi~}(x, nu_i), P^{pi~}(x, nu_i, .), mu_1(nu_i).
  std::vector<std::vector<double>> gbar(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(n)));
  std::vector<std::vector<std::vector<double>>> prow(
      static_cast<std::size_t>(d), std::vector<std::vector<double>>(static_cast<std::size_t>(n)));
  std::vector<SimplexPoint> mu1(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& nu = grid.point(i);
    PolicyRow row;
    for (int x = 0; x < d; ++x) row.push_back(pi.at(x, i));
    const auto p = transition_matrix(model, row, nu);
    mu1[i] = push_forward(nu, p);
    for (int x = 0; x < d; ++x) {
      double g = 0.0;
      const auto& w = row[x].weights();
      for (int j = 0; j < model.grid.size(); ++j)
        if (w[j] != 0.0) g += w[j] * sep->g(x, nu, model.grid[j]);
      gbar[x][i] = g;
      prow[x][i].assign(p.row(x).begin(), p.row(x).end());
    }
  }

  std::vector<std::vector<std::vector<double>>> values;
  int total_iter = 0;
  for (auto [rho, w] : atoms) {
    (void)w;
    std::vector<std::vector<double>> J = gbar, next = gbar;
    if (rho > 0.0) {
      int it = 0;
      for (; it < max_iter; ++it) {
        double diff = 0.0;
        for (int x = 0; x < d; ++x) {
          for (int i = 0; i < n; ++i) {
            double cont = 0.0;
            for (int y = 0; y < d; ++y) cont += prow[x][i][y] * grid.interpolate(J[y], mu1[i]);
            next[x][i] = gbar[x][i] + rho * cont;
            diff = std::max(diff, std::abs(next[x][i] - J[x][i]));
          }
        }
        J.swap(next);
        if (diff < tol * (1.0 - rho)) break;
      }
      if (it == max_iter) throw ConfigError("solve_rho_values: value iteration did not converge");
      total_iter += it + 1;
    }
    values.push_back(std::move(J));
  }
  return RhoValueTable(grid, atoms, std::move(values), total_iter);
}

/// V^{pi~}(., nu) from the per-atom solver when the discount has an atom
/// decomposition, otherwise from truncated summation at horizon T.
class ContinuationValue {
 public:
  ContinuationValue(const ModelSpec& model, const FeedbackPolicy& pi, int T, bool prefer_rho = true)
      : model_(&model), pi_(&pi), T_(T) {
    const auto* disc = model.discount();
    if (prefer_rho && disc && !std::holds_alternative<TableDiscount>(disc->variant())) {
      rho_ = solve_rho_values(model, pi);
    }
  }

  std::vector<double> operator()(const SimplexPoint& nu) const {
    if (rho_) return rho_->V_all(nu);
    return aux_V_feedback_all(*model_, *pi_, nu, T_);
  }

  bool uses_rho_solver() const { return rho_.has_value(); }
  const std::optional<RhoValueTable>& rho_table() const { return rho_; }

 private:
  const ModelSpec* model_;
  const FeedbackPolicy* pi_;
  int T_;
  std::optional<RhoValueTable> rho_;
};

/// f^w(0, x, nu) + P^w(x, nu) . V(., mu_1) with mu_1 = nu P^{pi~(nu)}(nu) and
/// V at horizon T - 1, so that w = pi~(x, nu) reproduces J at horizon T.
inline double deviation_value(const ModelSpec& model, const RelaxedAction& w, const FeedbackPolicy& pi, int x,
                              const SimplexPoint& nu, int T) {
  if (T < 1) throw InputError("deviation_value: need T >= 1");
  detail::check_feedback(model, pi);
  const auto V = aux_V_feedback_all(model, pi, next_distribution(model, pi, nu), T - 1);
  const auto p = integrate_transition(model, w, x, nu);
  double s = integrate_reward(model, w, 0, x, nu);
  for (int y = 0; y < model.d; ++y) s += p[y] * V[y];
  return s;
}

}  // namespace timfg

#endif  // TIMFG_DYNAMICS_HPP_
