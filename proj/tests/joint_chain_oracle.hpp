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

// Brute-force N-agent values by enumerating every joint state of all agents.
// Exponential in N; used only as a reference for small populations.

#ifndef TIMFG_TESTS_JOINT_CHAIN_ORACLE_HPP_
#define TIMFG_TESTS_JOINT_CHAIN_ORACLE_HPP_

#include <functional>
#include <map>
#include <vector>

#include "timfg/dynamics.hpp"
#include "timfg/policy.hpp"

namespace timfg::oracle {

using Joint = std::vector<int>;  // state of agent i (agent 0 is the representative)
using RowFn = std::function<PolicyRow(int t, const SimplexPoint& nu)>;

inline std::vector<Joint> all_joint(int N, int d) {
  std::vector<Joint> out;
  Joint s(static_cast<std::size_t>(N), 0);
  while (true) {
    out.push_back(s);
    int i = 0;
    while (i < N && ++s[i] == d) s[i++] = 0;
    if (i == N) break;
  }
  return out;
}

inline SimplexPoint empirical(const Joint& s, int d) {
  std::vector<int> c(static_cast<std::size_t>(d), 0);
  for (int v : s) ++c[v];
  return SimplexPoint::from_counts(c);
}

// Landing probabilities of every agent under the rows at nu.
inline std::vector<std::vector<double>> landing_rows(const ModelSpec& m, const Joint& s, const PolicyRow& row,
                                                     const SimplexPoint& nu) {
  std::vector<std::vector<double>> out;
  for (int v : s) out.push_back(integrate_transition(m, row[v], v, nu).weights());
  return out;
}

inline double joint_prob(const std::vector<std::vector<double>>& land, const Joint& next, int skip = -1) {
  double p = 1.0;
  for (std::size_t i = 0; i < next.size(); ++i)
    if (static_cast<int>(i) != skip) p *= land[i][next[i]];
  return p;
}

// value[t][s] = f^{row}(offset + t, s_0, nu(s)) + E[value[t+1][s']], t = 0..T.
// Returns the t = t_start slice keyed by joint state.
inline std::map<Joint, double> joint_values(const ModelSpec& m, const RowFn& rows, int N, int T, int offset,
                                            int t_start = 0) {
  const auto states = all_joint(N, m.d);
  std::map<Joint, double> next, cur;
  for (int t = T; t >= t_start; --t) {
    cur.clear();
    for (const auto& s : states) {
      const auto nu = empirical(s, m.d);
      const auto row = rows(t, nu);
      double v = integrate_reward(m, row[s[0]], offset + t, s[0], nu);
      if (t < T) {
        const auto land = landing_rows(m, s, row, nu);
        for (const auto& s2 : states) v += joint_prob(land, s2) * next.at(s2);
      }
      cur[s] = v;
    }
    next.swap(cur);
  }
  return next;
}

// Agent 0 at x, the others sorted so that smaller indices hold smaller states.
inline Joint canonical(int x, const std::vector<int>& counts) {
  Joint s{x};
  for (int y = 0; y < static_cast<int>(counts.size()); ++y)
    for (int c = 0; c < counts[y] - (y == x ? 1 : 0); ++c) s.push_back(y);
  return s;
}

struct FeedbackOracle {
  std::map<Joint, double> J;  // rewards f(t), t = 0..T
  std::map<Joint, double> V;  // rewards f(1 + t), t = 0..T-1
};

inline FeedbackOracle feedback_oracle(const ModelSpec& m, const FeedbackPolicy& pi, int N, int T) {
  RowFn rows = [&](int, const SimplexPoint& nu) { return pi.evaluate_row(nu); };
  return {joint_values(m, rows, N, T, 0), joint_values(m, rows, N, T - 1, 1)};
}

// E[V(y, next joint state) | agent 0 lands at y], others moving under pi.
inline double oracle_W(const ModelSpec& m, const FeedbackPolicy& pi, const FeedbackOracle& o, const Joint& s, int y) {
  const auto nu = empirical(s, m.d);
  const auto land = landing_rows(m, s, pi.evaluate_row(nu), nu);
  double w = 0.0;
  for (const auto& s2 : all_joint(static_cast<int>(s.size()), m.d)) {
    if (s2[0] != y) continue;
    w += joint_prob(land, s2, 0) * o.V.at(s2);
  }
  return w;
}

inline double oracle_gap(const ModelSpec& m, const FeedbackPolicy& pi, const FeedbackOracle& o, const Joint& s) {
  const auto nu = empirical(s, m.d);
  std::vector<double> W;
  for (int y = 0; y < m.d; ++y) W.push_back(oracle_W(m, pi, o, s, y));
  double best = -1e300;
  for (double u : m.grid.points()) {
    const auto p = transition_row(m, s[0], nu, u);
    double v = reward(m, 0, s[0], nu, u);
    for (int y = 0; y < m.d; ++y) v += p[y] * W[y];
    best = std::max(best, v);
  }
  return best - o.J.at(s);
}

// Precommitment gap with iid initial states from nu: agent 0 may replace its
// t = 0 action by any grid action chosen from its own state.
inline double oracle_precommit_gap(const ModelSpec& m, const TimePolicy& pi, const SimplexPoint& nu0, int N, int T) {
  RowFn rows = [&](int t, const SimplexPoint&) { return pi.at(t); };
  const auto J0 = joint_values(m, rows, N, T, 0, 0);
  const auto J1 = joint_values(m, rows, N, T, 0, 1);
  const auto states = all_joint(N, m.d);
  double gap = 0.0;
  for (int x = 0; x < m.d; ++x) {
    double best = -1e300;
    for (double u : m.grid.points()) {
      double acc = 0.0;
      for (const auto& s : states) {
        if (s[0] != x) continue;
        double prob = 1.0;
        for (int v : s) prob *= nu0[v];
        if (prob == 0.0) continue;
        const auto nu = empirical(s, m.d);
        auto land = landing_rows(m, s, pi.at(0), nu);
        land[0] = transition_row(m, x, nu, u).weights();
        double dev = reward(m, 0, x, nu, u);
        for (const auto& s2 : states) dev += joint_prob(land, s2) * J1.at(s2);
        acc += prob * (dev - J0.at(s));
      }
      best = std::max(best, acc);
    }
    gap += best;
  }
  return gap;
}

}  // namespace timfg::oracle

#endif  // TIMFG_TESTS_JOINT_CHAIN_ORACLE_HPP_
