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

// Classic (precommitted, time-indexed) equilibria: the best-response map,
// plain best-response iteration, and the one-step deviation residual.

#ifndef TIMFG_CLASSIC_HPP_
#define TIMFG_CLASSIC_HPP_

#include <algorithm>
#include <limits>
#include <vector>

#include "timfg/dynamics.hpp"
#include "timfg/measures.hpp"
#include "timfg/model.hpp"
#include "timfg/policy.hpp"

namespace timfg {

namespace detail {

// u_j -> f(0, x, nu, u_j) + P(x, nu, ., u_j) . cont for every grid index j.
inline std::vector<double> one_step_objective(const ModelSpec& model, int x, const SimplexPoint& nu,
                                              std::span<const double> cont) {
  const int m = model.grid.size();
  std::vector<double> vals(static_cast<std::size_t>(m)), row(static_cast<std::size_t>(model.d));
  for (int j = 0; j < m; ++j) {
    const double u = model.grid[j];
    model.kernel(x, nu, u, row);
    double v = reward_unchecked(model, 0, x, nu, u);
    for (int y = 0; y < model.d; ++y) v += row[y] * cont[y];
    vals[j] = v;
  }
  return vals;
}

inline double integrated_objective(const ModelSpec& model, const RelaxedAction& w, int x, const SimplexPoint& nu,
                                   std::span<const double> cont) {
  std::vector<double> row(static_cast<std::size_t>(model.d)), scratch(static_cast<std::size_t>(model.d));
  integrate_transition_into(model, w, x, nu, row, scratch);
  double v = integrate_reward_unchecked(model, w, 0, x, nu);
  for (int y = 0; y < model.d; ++y) v += row[y] * cont[y];
  return v;
}

}  // namespace detail

/// Phi^nu(pi): at every (t, x), t <= T, a Dirac at the canonical argmax of
/// the one-step objective against v^{pi,nu}(t+1, .). Rows beyond T repeat
/// row T.
inline TimePolicy phi_best_response(const ModelSpec& model, const TimePolicy& pi, const SimplexPoint& nu0, int T,
                                    double tie_tol = kDefaultTieTol) {
  if (T < 1) throw InputError("phi_best_response: need T >= 1");
  const auto flow = propagate_flow_time(model, pi, nu0, 2 * T + 1);
  TimePolicy out;
  for (int t = 0; t <= T; ++t) {
    const auto v = aux_v_time(model, pi, flow, t, T);
    PolicyRow row;
    for (int x = 0; x < model.d; ++x) {
      const auto vals = detail::one_step_objective(model, x, flow[t], v);
      row.push_back(RelaxedAction::unit(model.grid.size(), argmax_with_ties(vals, tie_tol).canonical));
    }
    out.head.push_back(std::move(row));
  }
  out.tail = out.head.back();
  return out;
}

struct ClassicResidual {
  double residual = 0.0;
  int worst_t = 0;
  int worst_x = 0;
};

/// max over t <= T, x of [max_u one-step objective at (t, x) - J of
/// pi_{[t:)} from (x, mu_t)], with the flow generated by pi from nu0.
inline ClassicResidual verify_classic(const ModelSpec& model, const TimePolicy& pi, const SimplexPoint& nu0, int T) {
  if (T < 1) throw InputError("verify_classic: need T >= 1");
  const auto flow = propagate_flow_time(model, pi, nu0, 2 * T + 1);
  ClassicResidual r;
  r.residual = -std::numeric_limits<double>::infinity();
  for (int t = 0; t <= T; ++t) {
    const auto v = aux_v_time(model, pi, flow, t, T);
    const auto J = value_J_time_all(model, pi, flow, T, t);
    for (int x = 0; x < model.d; ++x) {
      const auto vals = detail::one_step_objective(model, x, flow[t], v);
      const double gain = *std::max_element(vals.begin(), vals.end()) - J[x];
      if (gain > r.residual) r = {gain, t, x};
    }
  }
  return r;
}

struct ClassicEquilibriumResult {
  TimePolicy policy;
  PopulationFlow flow;
  double residual = 0.0;
  std::vector<double> residual_trace;
  int iterations = 0;
  bool converged = false;
};

/// Plain best-response iteration pi <- Phi^nu(pi) until the residual is at
/// most tol. Non-convergence is reported through the flag and trace.
inline ClassicEquilibriumResult solve_classic(const ModelSpec& model, const SimplexPoint& nu0, const TimePolicy& init,
                                              int T, double tol = 1e-10, int max_iter = 500,
                                              double tie_tol = kDefaultTieTol) {
  if (!(tol > 0.0)) throw ConfigError("solve_classic: tol must be positive");
  ClassicEquilibriumResult res;
  TimePolicy pi = init;
  for (int it = 1; it <= max_iter; ++it) {
    TimePolicy next = phi_best_response(model, pi, nu0, T, tie_tol);
    const bool fixed = next.head == pi.head && next.tail == pi.tail;
    pi = std::move(next);
    res.iterations = it;
    res.residual = verify_classic(model, pi, nu0, T).residual;
    res.residual_trace.push_back(res.residual);
    if (res.residual <= tol) {
      res.converged = true;
      break;
    }
    if (fixed) break;
  }
  res.policy = std::move(pi);
  res.flow = propagate_flow_time(model, res.policy, nu0, T);
  return res;
}

}  // namespace timfg

#endif  // TIMFG_CLASSIC_HPP_
