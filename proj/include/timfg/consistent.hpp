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

// Consistent (sophisticated) equilibria on feedback policies: the Gamma
// map, damped fixed-point iteration, the one-step deviation residual over
// the nu-grid, and Lipschitz diagnostics of Dirac-form policies.

#ifndef TIMFG_CONSISTENT_HPP_
#define TIMFG_CONSISTENT_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "timfg/classic.hpp"
#include "timfg/dynamics.hpp"
#include "timfg/measures.hpp"
#include "timfg/model.hpp"
#include "timfg/policy.hpp"

namespace timfg {

struct ConsistentOptions {
  int horizon = 0;  // truncation horizon when V is summed directly; 0 means horizon_for(eps_tail)
  double eps_tail = 1e-8;
  double tie_tol = kDefaultTieTol;
  bool prefer_rho_solver = true;
};

namespace detail {

inline int consistent_horizon(const ModelSpec& model, const ConsistentOptions& opt) {
  return opt.horizon > 0 ? opt.horizon : std::max(1, horizon_for(model, opt.eps_tail));
}

}  // namespace detail

/// Gamma(pi~): at each grid point, a Dirac at the canonical argmax of
/// u -> f(0, x, nu, u) + P(x, nu, ., u) . V^{pi~}(., mu_1(nu)).
inline FeedbackPolicy gamma(const ModelSpec& model, const FeedbackPolicy& pi, const ConsistentOptions& opt = {}) {
  detail::check_feedback(model, pi);
  const ContinuationValue V(model, pi, detail::consistent_horizon(model, opt), opt.prefer_rho_solver);
  const NuGrid& grid = pi.grid();
  std::vector<std::vector<RelaxedAction>> table(static_cast<std::size_t>(model.d));
  for (int i = 0; i < grid.size(); ++i) {
    const auto& nu = grid.point(i);
    const auto cont = V(next_distribution(model, pi, nu));
    for (int x = 0; x < model.d; ++x) {
      const auto vals = detail::one_step_objective(model, x, nu, cont);
      table[x].push_back(RelaxedAction::unit(model.grid.size(), argmax_with_ties(vals, opt.tie_tol).canonical));
    }
  }
  return FeedbackPolicy(grid, std::move(table));
}

struct ConsistentResidual {
  double residual = 0.0;
  std::vector<std::vector<double>> residual_map;  // [x][grid index]
};

/// Sup one-step deviation gain at every grid point, with V from the same
/// source Gamma uses.
inline ConsistentResidual verify_consistent(const ModelSpec& model, const FeedbackPolicy& pi,
                                            const ConsistentOptions& opt = {}) {
  detail::check_feedback(model, pi);
  const ContinuationValue V(model, pi, detail::consistent_horizon(model, opt), opt.prefer_rho_solver);
  const NuGrid& grid = pi.grid();
  ConsistentResidual r;
  r.residual = -std::numeric_limits<double>::infinity();
  r.residual_map.assign(static_cast<std::size_t>(model.d), std::vector<double>(static_cast<std::size_t>(grid.size())));
  for (int i = 0; i < grid.size(); ++i) {
    const auto& nu = grid.point(i);
    const auto cont = V(next_distribution(model, pi, nu));
    for (int x = 0; x < model.d; ++x) {
      const auto vals = detail::one_step_objective(model, x, nu, cont);
      const double best = *std::max_element(vals.begin(), vals.end());
      const double gain = best - detail::integrated_objective(model, pi.at(x, i), x, nu, cont);
      r.residual_map[x][i] = gain;
      r.residual = std::max(r.residual, gain);
    }
  }
  return r;
}

struct LipschitzEstimate {
  double value = 0.0;
  bool non_dirac_rows = false;  // some rows were not Dirac; their mode was used
};

/// max over states and adjacent grid points of |u(nu_{k+1}) - u(nu_k)| / (1/K).
inline LipschitzEstimate lipschitz_estimate(const ActionGrid& agrid, const FeedbackPolicy& pi) {
  const NuGrid& grid = pi.grid();
  if (!grid.is_uniform2()) throw UnsupportedError("lipschitz_estimate needs a two-state uniform nu-grid");
  LipschitzEstimate est;
  auto loc = [&](int x, int i) {
    const auto& a = pi.at(x, i);
    auto idx = a.dirac_index();
    if (!idx) {
      est.non_dirac_rows = true;
      return agrid[a.mode_index()];
    }
    return agrid[*idx];
  };
  const double h = 1.0 / grid.k();
  for (int x = 0; x < grid.dim(); ++x) {
    for (int i = 0; i + 1 < grid.size(); ++i) est.value = std::max(est.value, std::abs(loc(x, i + 1) - loc(x, i)) / h);
  }
  return est;
}

/// (1 - lambda) old + lambda new per row. Two Dirac rows blend their
/// locations and snap to the nearest grid point; other rows blend weights.
inline FeedbackPolicy damp(const ActionGrid& agrid, const FeedbackPolicy& old_pi, const FeedbackPolicy& new_pi,
                           double lambda) {
  if (lambda >= 1.0) return new_pi;
  FeedbackPolicy out = new_pi;
  for (int x = 0; x < out.dim(); ++x) {
    for (int i = 0; i < out.grid().size(); ++i) {
      const auto a = old_pi.at(x, i).dirac_index();
      const auto b = new_pi.at(x, i).dirac_index();
      if (a && b) {
        out.at(x, i) = dirac(agrid, (1.0 - lambda) * agrid[*a] + lambda * agrid[*b]);
      } else {
        out.at(x, i) = RelaxedAction::mix(old_pi.at(x, i), new_pi.at(x, i), 1.0 - lambda);
      }
    }
  }
  return out;
}

struct ConsistentEquilibriumResult {
  FeedbackPolicy policy;
  double residual = 0.0;
  std::vector<std::vector<double>> residual_map;
  int iterations = 0;
  bool converged = false;
  double lipschitz_estimate = 0.0;
  bool lipschitz_warning = false;
  std::vector<double> update_trace;  // sup row-wise W1 change per iteration
};

/// pi~ <- (1 - lambda) pi~ + lambda Gamma(pi~) until the largest row-wise W1
/// change is below tol; converged also requires residual <= residual_tol.
inline ConsistentEquilibriumResult solve_consistent(const ModelSpec& model, const FeedbackPolicy& init,
                                                    double lambda = 1.0, double tol = 1e-8, int max_iter = 500,
                                                    double residual_tol = 1e-5, const ConsistentOptions& opt = {}) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("solve_consistent: damping must lie in (0, 1]");
  if (!(tol > 0.0)) throw ConfigError("solve_consistent: tol must be positive");
  ConsistentEquilibriumResult res;
  FeedbackPolicy pi = init;
  bool settled = false;
  for (int it = 1; it <= max_iter; ++it) {
    FeedbackPolicy next = damp(model.grid, pi, gamma(model, pi, opt), lambda);
    double change = 0.0;
    for (int x = 0; x < model.d; ++x)
      for (int i = 0; i < pi.grid().size(); ++i)
        change = std::max(change, wasserstein1(model.grid, pi.at(x, i), next.at(x, i)));
    pi = std::move(next);
    res.iterations = it;
    res.update_trace.push_back(change);
    if (change < tol) {
      settled = true;
      break;
    }
  }
  const auto r = verify_consistent(model, pi, opt);
  res.residual = r.residual;
  res.residual_map = r.residual_map;
  res.converged = settled && r.residual <= residual_tol;
  if (pi.grid().is_uniform2()) {
    const auto l = lipschitz_estimate(model.grid, pi);
    res.lipschitz_estimate = l.value;
    res.lipschitz_warning = l.non_dirac_rows;
  }
  res.policy = std::move(pi);
  return res;
}

/// Time policy pi_t(x) = pi~(x, mu_t) along the flow of pi~ from nu0, with
/// rows for t = 0..length-1 and the last row repeated afterwards.
inline TimePolicy time_policy_from_feedback(const ModelSpec& model, const FeedbackPolicy& pi, const SimplexPoint& nu0,
                                            int length) {
  auto path = detail::feedback_path(model, pi, nu0, length - 1);
  TimePolicy out;
  out.head = std::move(path.rows);
  out.tail = out.head.back();
  return out;
}

/// Closed-form Gamma row for the two-state quadratic model:
/// u* = (1/2)[1/2 + nu(1) -+ (1/2)(V(2, w) - V(1, w))], minus for the first
/// state, clipped to [0, 1]. Returns u*[x][grid index].
inline std::vector<std::vector<double>> example43_closed_form_gamma(const ModelSpec& model, const FeedbackPolicy& pi,
                                                                    const ConsistentOptions& opt = {}) {
  if (model.d != 2) throw UnsupportedError("closed-form Gamma is for the two-state model");
  const ContinuationValue V(model, pi, detail::consistent_horizon(model, opt), opt.prefer_rho_solver);
  const NuGrid& grid = pi.grid();
  std::vector<std::vector<double>> u(2, std::vector<double>(static_cast<std::size_t>(grid.size())));
  for (int i = 0; i < grid.size(); ++i) {
    const auto& nu = grid.point(i);
    const auto cont = V(next_distribution(model, pi, nu));
    const double dv = cont[1] - cont[0];
    for (int x = 0; x < 2; ++x) {
      const double sign = (x == 0) ? -1.0 : 1.0;
      u[x][i] = std::clamp(0.5 * (0.5 + nu[0] + sign * 0.5 * dv), 0.0, 1.0);
    }
  }
  return u;
}

}  // namespace timfg

#endif  // TIMFG_CONSISTENT_HPP_
