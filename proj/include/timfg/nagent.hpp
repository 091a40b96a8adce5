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

// The N-agent game: the Delta_N lattice, exact aggregate-chain values for
// replicating tuples on two states, consistent and precommitment gaps,
// Monte Carlo simulation, and finite-N discrepancy diagnostics.
//
// Aggregate state for d = 2: (own state s, k = number of agents in the
// first state, agent 1 included). Given k, the other agents split into
// k - [s = 0] in the first state and N - k - [s = 1] in the second; each
// lands in the first state independently, so the count of others landing
// there is a sum of two binomials. Agent 1's own landing is tracked apart.

#ifndef TIMFG_NAGENT_HPP_
#define TIMFG_NAGENT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "timfg/dynamics.hpp"
#include "timfg/errors.hpp"
#include "timfg/measures.hpp"
#include "timfg/model.hpp"
#include "timfg/policy.hpp"
#include "timfg/rng.hpp"

namespace timfg {

inline constexpr double kZ99 = 2.5758293035489004;  // two-sided 99% normal quantile
inline constexpr int kDefaultNCap = 512;

// ---------------------------------------------------------------------------
// Lattice

struct LatticePoint {
  int x = 0;
  std::vector<int> counts;

  int N() const { return std::accumulate(counts.begin(), counts.end(), 0); }
  SimplexPoint nu() const { return SimplexPoint::from_counts(counts); }
  friend bool operator==(const LatticePoint&, const LatticePoint&) = default;
};

/// Nearest nu' with N nu' integer and nu'(x) > 0 in Euclidean distance.
/// Among equally close points the one with larger entries at larger indices
/// wins (compare counts from the last index down).
inline SimplexPoint lattice_round(const SimplexPoint& nu, int N, int x) {
  const int d = nu.dim();
  if (N < 1) throw InputError("lattice_round: need N >= 1");
  if (x < 0 || x >= d) throw InputError("lattice_round: state out of range");
  // Separable convex cost: greedy unit assignment by smallest marginal cost
  // is optimal; equal costs go to the larger index.
  std::vector<int> c(static_cast<std::size_t>(d), 0);
  c[x] = 1;
  for (int n = 1; n < N; ++n) {
    int best = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int i = 0; i < d; ++i) {
      const double cost = (2.0 * c[i] + 1.0) / N - 2.0 * nu[i];
      if (cost < best_cost - 1e-12 || std::abs(cost - best_cost) <= 1e-12) {
        best = i;
        best_cost = std::min(best_cost, cost);
      }
    }
    ++c[best];
  }
  return SimplexPoint::from_counts(c);
}

inline std::vector<int> lattice_counts(const SimplexPoint& nu, int N, int x) {
  const auto r = lattice_round(nu, N, x);
  std::vector<int> c(static_cast<std::size_t>(nu.dim()));
  for (int i = 0; i < nu.dim(); ++i) c[i] = static_cast<int>(std::lround(r[i] * N));
  return c;
}

/// All (x, counts) with sum N and counts[x] >= 1, ordered by x and then
/// lexicographically by counts.
inline std::vector<LatticePoint> enumerate_delta_N(int N, int d) {
  if (N < 1 || d < 1) throw InputError("enumerate_delta_N: need N >= 1 and d >= 1");
  std::vector<std::vector<int>> comps;
  std::vector<int> c(static_cast<std::size_t>(d), 0);
  auto rec = [&](auto&& self, int i, int left) -> void {
    if (i == d - 1) {
      c[i] = left;
      comps.push_back(c);
      return;
    }
    for (int v = left; v >= 0; --v) {
      c[i] = v;
      self(self, i + 1, left - v);
    }
  };
  rec(rec, 0, N);
  std::vector<LatticePoint> out;
  for (int x = 0; x < d; ++x)
    for (const auto& cc : comps)
      if (cc[x] >= 1) out.push_back({x, cc});
  return out;
}

// ---------------------------------------------------------------------------
// Binomial helpers

inline std::vector<double> binomial_pmf(int n, double p) {
  std::vector<double> out(static_cast<std::size_t>(n + 1), 0.0);
  if (p <= 0.0) {
    out[0] = 1.0;
    return out;
  }
  if (p >= 1.0) {
    out[n] = 1.0;
    return out;
  }
  const double lp = std::log(p), lq = std::log1p(-p);
  const double ln = std::lgamma(n + 1.0);
  double s = 0.0;
  for (int j = 0; j <= n; ++j) {
    out[j] = std::exp(ln - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) + j * lp + (n - j) * lq);
    s += out[j];
  }
  for (double& v : out) v /= s;
  return out;
}

inline std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

/// log C(n, k).
inline double log_choose(int n, int k) { return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0); }

// ---------------------------------------------------------------------------
// Aggregate chain (d = 2)

namespace detail {

inline void require_two_states(const ModelSpec& model) {
  if (model.d != 2) throw UnsupportedError("exact aggregate chains are implemented for d = 2 only");
}

inline void require_cap(int N, int cap) {
  if (N < 2) throw InputError("N-agent game needs N >= 2");
  if (N > cap) throw ConfigError("N = " + std::to_string(N) + " exceeds the aggregate-chain cap " + std::to_string(cap));
}

inline bool valid_cell(int N, int s, int k) { return s == 0 ? (k >= 1 && k <= N) : (k >= 0 && k <= N - 1); }

}  // namespace detail

/// One-step law of the aggregate chain under policy rows that may depend
/// on the empirical distribution.
struct AggregateKernel {
  int N = 0;
  std::vector<PolicyRow> rows;                 // [k]: actions at nu = (k/N, 1 - k/N)
  std::vector<double> self_first;              // [s (N+1) + k]: P(agent 1 lands in the first state)
  std::vector<std::vector<double>> others;     // [s (N+1) + k]: pmf of others landing in the first state

  int cell(int s, int k) const { return s * (N + 1) + k; }
  static SimplexPoint nu_of(int N, int k) {
    const int c[2] = {k, N - k};
    return SimplexPoint::from_counts(c);
  }
};

/// Probability that a non-deviating agent at x_other lands in the first
/// state: P^{pi~(x_other, nu)}(x_other, nu, first state).
inline double others_action_transition(const ModelSpec& model, const RelaxedAction& action, const SimplexPoint& nu,
                                       int x_other) {
  detail::require_two_states(model);
  return integrate_transition(model, action, x_other, nu)[0];
}

inline double others_action_transition(const ModelSpec& model, const FeedbackPolicy& pi, const SimplexPoint& nu,
                                       int x_other) {
  return others_action_transition(model, pi.evaluate(x_other, nu), nu, x_other);
}

template <class RowAt>
AggregateKernel build_aggregate_kernel(const ModelSpec& model, int N, RowAt&& row_at) {
  detail::require_two_states(model);
  AggregateKernel K;
  K.N = N;
  K.self_first.assign(static_cast<std::size_t>(2 * (N + 1)), std::numeric_limits<double>::quiet_NaN());
  K.others.assign(static_cast<std::size_t>(2 * (N + 1)), {});
  for (int k = 0; k <= N; ++k) {
    const auto nu = AggregateKernel::nu_of(N, k);
    K.rows.push_back(row_at(nu));
    const auto& row = K.rows.back();
    const double p0 = integrate_transition(model, row[0], 0, nu)[0];
    const double p1 = integrate_transition(model, row[1], 1, nu)[0];
    for (int s = 0; s < 2; ++s) {
      if (!detail::valid_cell(N, s, k)) continue;
      const int n0 = k - (s == 0 ? 1 : 0);
      const int n1 = N - k - (s == 1 ? 1 : 0);
      K.self_first[K.cell(s, k)] = (s == 0) ? p0 : p1;
      K.others[K.cell(s, k)] = convolve(binomial_pmf(n0, p0), binomial_pmf(n1, p1));
    }
  }
  return K;
}

enum class ValueVariant { J, V };

/// values[t][s][k]; invalid cells hold NaN. The J variant uses reward index
/// t, the V variant 1 + t.
struct AggregateValueTable {
  int N = 0;
  int horizon = 0;
  ValueVariant variant = ValueVariant::J;
  std::vector<std::vector<std::vector<double>>> values;

  double at(int t, int s, int k) const { return values.at(static_cast<std::size_t>(t)).at(static_cast<std::size_t>(s)).at(static_cast<std::size_t>(k)); }
};

namespace detail {

// kernel_at(t) returns the kernel for step t (a reference that stays valid
// during the call).
template <class KernelAt>
AggregateValueTable backward_values(const ModelSpec& model, int N, int T, int offset, ValueVariant variant,
                                    KernelAt&& kernel_at) {
  AggregateValueTable tab;
  tab.N = N;
  tab.horizon = T;
  tab.variant = variant;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  tab.values.assign(static_cast<std::size_t>(T + 1),
                    std::vector<std::vector<double>>(2, std::vector<double>(static_cast<std::size_t>(N + 1), nan)));
  for (int t = T; t >= 0; --t) {
    const AggregateKernel& K = kernel_at(t);
    for (int s = 0; s < 2; ++s) {
      for (int k = 0; k <= N; ++k) {
        if (!valid_cell(N, s, k)) continue;
        const auto nu = AggregateKernel::nu_of(N, k);
        double v = integrate_reward_unchecked(model, K.rows[k][s], offset + t, s, nu);
        if (t < T) {
          const auto& nxt = tab.values[t + 1];
          const double q0 = K.self_first[K.cell(s, k)];
          const auto& pmf = K.others[K.cell(s, k)];
          double e0 = 0.0, e1 = 0.0;
          for (std::size_t b = 0; b < pmf.size(); ++b) {
            if (pmf[b] == 0.0) continue;
            e0 += pmf[b] * nxt[0][b + 1];
            e1 += pmf[b] * nxt[1][b];
          }
          if (q0 == 0.0) e0 = 0.0;
          if (q0 == 1.0) e1 = 0.0;
          v += q0 * e0 + (1.0 - q0) * e1;
        }
        tab.values[t][s][k] = v;
      }
    }
  }
  return tab;
}

}  // namespace detail

/// Exact values for the replicating tuple (pi~, ..., pi~), horizon T.
inline AggregateValueTable aggregate_backward_values(const ModelSpec& model, const FeedbackPolicy& pi, int N, int T,
                                                     ValueVariant variant, int cap = kDefaultNCap) {
  detail::require_two_states(model);
  detail::require_cap(N, cap);
  detail::check_feedback(model, pi);
  const auto K = build_aggregate_kernel(model, N, [&](const SimplexPoint& nu) { return pi.evaluate_row(nu); });
  return detail::backward_values(model, N, T, variant == ValueVariant::J ? 0 : 1, variant,
                                 [&](int) -> const AggregateKernel& { return K; });
}

/// Exact J-type values for the replicating time policy (pi, ..., pi); the
/// reward index is absolute time t.
inline AggregateValueTable aggregate_backward_values_time(const ModelSpec& model, const TimePolicy& pi, int N, int T,
                                                          int cap = kDefaultNCap) {
  detail::require_two_states(model);
  detail::require_cap(N, cap);
  AggregateKernel current;
  return detail::backward_values(model, N, T, 0, ValueVariant::J, [&](int t) -> const AggregateKernel& {
    current = build_aggregate_kernel(model, N, [&](const SimplexPoint&) { return pi.at(t); });
    return current;
  });
}

/// Exact replicating game for a feedback policy: J at horizon T and V at
/// horizon T - 1, so that J = f + P W holds exactly at every lattice point.
class ReplicatingGame {
 public:
  ReplicatingGame(const ModelSpec& model, const FeedbackPolicy& pi, int N, int T, int cap = kDefaultNCap)
      : model_(&model), N_(N), T_(T) {
    detail::require_two_states(model);
    detail::require_cap(N, cap);
    detail::check_feedback(model, pi);
    if (T < 1) throw InputError("ReplicatingGame: need T >= 1");
    kernel_ = build_aggregate_kernel(model, N, [&](const SimplexPoint& nu) { return pi.evaluate_row(nu); });
    auto same = [&](int) -> const AggregateKernel& { return kernel_; };
    J_ = detail::backward_values(model, N, T, 0, ValueVariant::J, same);
    V_ = detail::backward_values(model, N, T - 1, 1, ValueVariant::V, same);
  }

  int N() const { return N_; }
  int horizon() const { return T_; }
  const AggregateKernel& kernel() const { return kernel_; }
  const AggregateValueTable& J_table() const { return J_; }
  const AggregateValueTable& V_table() const { return V_; }

  double J(int x, int k) const { check(x, k); return J_.at(0, x, k); }
  double V(int x, int k) const { check(x, k); return V_.at(0, x, k); }

  /// E[V(y, next count) | agent 1 lands in y]. Agent 1's action affects only
  /// the law of its own landing, so W does not depend on it.
  double W(int x, int k, int y) const {
    check(x, k);
    const auto& pmf = kernel_.others[kernel_.cell(x, k)];
    double w = 0.0;
    for (std::size_t b = 0; b < pmf.size(); ++b) w += pmf[b] * V_.at(0, y, static_cast<int>(b) + (y == 0 ? 1 : 0));
    return w;
  }

  /// f(0, x, nu, u_j) + sum_y P(x, nu, y, u_j) W(x, nu, y) for every grid u_j.
  std::vector<double> deviation_values(int x, int k) const {
    const double w0 = W(x, k, 0), w1 = W(x, k, 1);
    const auto nu = AggregateKernel::nu_of(N_, k);
    std::vector<double> out;
    std::vector<double> row(2);
    for (double u : model_->grid.points()) {
      model_->kernel(x, nu, u, row);
      out.push_back(detail::reward_unchecked(*model_, 0, x, nu, u) + row[0] * w0 + row[1] * w1);
    }
    return out;
  }

  double gap(int x, int k) const {
    const auto v = deviation_values(x, k);
    return *std::max_element(v.begin(), v.end()) - J(x, k);
  }

  /// Law of (s, k) at t = 0..t_max from (x, k0): dist[t][s][k].
  std::vector<std::vector<std::vector<double>>> forward_distribution(int x, int k0, int t_max) const {
    check(x, k0);
    std::vector<std::vector<std::vector<double>>> dist(
        static_cast<std::size_t>(t_max + 1), std::vector<std::vector<double>>(2, std::vector<double>(static_cast<std::size_t>(N_ + 1), 0.0)));
    dist[0][x][k0] = 1.0;
    for (int t = 0; t < t_max; ++t) {
      for (int s = 0; s < 2; ++s)
        for (int k = 0; k <= N_; ++k) {
          const double m = dist[t][s][k];
          if (m == 0.0) continue;
          const double q0 = kernel_.self_first[kernel_.cell(s, k)];
          const auto& pmf = kernel_.others[kernel_.cell(s, k)];
          for (std::size_t b = 0; b < pmf.size(); ++b) {
            dist[t + 1][0][b + 1] += m * q0 * pmf[b];
            dist[t + 1][1][b] += m * (1.0 - q0) * pmf[b];
          }
        }
    }
    return dist;
  }

 private:
  void check(int x, int k) const {
    if (x < 0 || x > 1 || !detail::valid_cell(N_, x, k)) throw InputError("lattice point outside Delta_N");
  }

  const ModelSpec* model_;
  int N_, T_;
  AggregateKernel kernel_;
  AggregateValueTable J_, V_;
};

/// W^{N, pi~}(x, nu, y, u) on the lattice (u does not enter, see
/// ReplicatingGame::W).
inline double W_N(const ModelSpec& model, const FeedbackPolicy& pi, int N, int x, const SimplexPoint& nu, int y,
                  double u, int T) {
  if (!model.grid.contains(u)) throw InputError("W_N: action outside U");
  const ReplicatingGame game(model, pi, N, T);
  return game.W(x, static_cast<int>(std::lround(nu[0] * N)), y);
}

struct GapEntry {
  int x = 0;
  int k = 0;  // agents in the first state
  double gap = 0.0;
};

struct GapReport {
  int N = 0;
  int horizon = 0;
  std::vector<GapEntry> entries;
  double epsilon_N = 0.0;
  std::string method = "exact";
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  double ci_halfwidth = 0.0;
};

/// Largest one-step deviation gain over Delta_N for the replicating tuple.
inline GapReport consistent_gap(const ModelSpec& model, const FeedbackPolicy& pi, int N, int T, int cap = kDefaultNCap) {
  const ReplicatingGame game(model, pi, N, T, cap);
  GapReport rep;
  rep.N = N;
  rep.horizon = T;
  rep.epsilon_N = -std::numeric_limits<double>::infinity();
  for (const auto& lp : enumerate_delta_N(N, 2)) {
    const double g = game.gap(lp.x, lp.counts[0]);
    rep.entries.push_back({lp.x, lp.counts[0], g});
    rep.epsilon_N = std::max(rep.epsilon_N, g);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct McInit {
  bool iid = false;
  int x = 0;                // lattice mode: agent 1's state
  std::vector<int> counts;  // lattice mode
  SimplexPoint nu;          // iid mode

  static McInit lattice(int x, std::vector<int> counts) { return McInit{false, x, std::move(counts), {}}; }
  static McInit iid_from(SimplexPoint nu) { return McInit{true, 0, {}, std::move(nu)}; }
};

/// Replicating tuple, optionally with agent 1 replacing its t = 0 action.
struct TupleSpec {
  const FeedbackPolicy* feedback = nullptr;
  const TimePolicy* time = nullptr;
  std::optional<RelaxedAction> agent1_first_action;
  int reward_offset = 0;  // 0 for J-type payoffs, 1 for V-type

  PolicyRow rows(int t, const SimplexPoint& nu) const {
    if (feedback) return feedback->evaluate_row(nu);
    if (time) return time->at(t);
    throw ConfigError("TupleSpec: no policy given");
  }
};

struct McStats {
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  double payoff_mean = 0.0;
  double payoff_sd = 0.0;
  double payoff_ci99 = 0.0;                   // half-width
  std::vector<std::vector<double>> mean_flow;  // [t][y]
  std::vector<double> flow_l1;                 // E|mu^N_t - reference_t|_1 when a reference is given
  std::vector<double> flow_l1_ci99;            // half-widths for flow_l1
};

namespace detail {

// Initial states of all agents for one sample; agent 0 is agent 1 of the game.
inline void initial_states(const McInit& init, int N, const CounterRng& rng, std::uint64_t sample,
                           std::vector<int>& states) {
  states.assign(static_cast<std::size_t>(N), 0);
  if (init.iid) {
    for (int i = 0; i < N; ++i) states[i] = sample_index(init.nu.weights(), rng.uniform(sample, i, 0));
    return;
  }
  int pos = 0;
  states[pos++] = init.x;
  for (int y = 0; y < static_cast<int>(init.counts.size()); ++y)
    for (int c = 0; c < init.counts[y] - (y == init.x ? 1 : 0); ++c) states[pos++] = y;
}

inline SimplexPoint empirical_of(const std::vector<int>& states, int d, std::vector<int>& counts) {
  counts.assign(static_cast<std::size_t>(d), 0);
  for (int s : states) ++counts[s];
  return SimplexPoint::from_counts(counts);
}

// Rows, landing laws and rewards of the replicating policy for each
// (t, empirical counts) visited; the number of distinct keys is small.
class StepCache {
 public:
  struct Entry {
    PolicyRow rows;
    std::vector<std::vector<double>> land;  // [x][y]
    std::vector<double> reward;             // [x], reward index offset + t
  };

  StepCache(const ModelSpec& model, std::function<PolicyRow(int, const SimplexPoint&)> rows, int offset)
      : model_(&model), rows_(std::move(rows)), offset_(offset) {}

  const Entry& get(int t, const std::vector<int>& counts, const SimplexPoint& nu) {
    key_.assign(counts.begin(), counts.end());
    key_.push_back(t);
    auto it = cache_.find(key_);
    if (it != cache_.end()) return it->second;
    const int d = model_->d;
    Entry e;
    e.rows = rows_(t, nu);
    std::vector<double> scratch(static_cast<std::size_t>(d));
    e.land.assign(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(d)));
    for (int x = 0; x < d; ++x) {
      integrate_transition_into(*model_, e.rows[x], x, nu, e.land[x], scratch);
      e.reward.push_back(integrate_reward_unchecked(*model_, e.rows[x], offset_ + t, x, nu));
    }
    return cache_.emplace(key_, std::move(e)).first->second;
  }

 private:
  const ModelSpec* model_;
  std::function<PolicyRow(int, const SimplexPoint&)> rows_;
  int offset_;
  std::vector<int> key_;
  std::map<std::vector<int>, Entry> cache_;
};

}  // namespace detail

/// Simulates the N-agent game for t = 0..T and reports agent 1's payoff
/// sum_t f(offset + t, .) and the mean empirical flow. Each agent draws its
/// next state from the integrated row P^{pi(x, nu)}(x, nu, .), which has the
/// same law as drawing an action first.
inline McStats mc_simulate(const ModelSpec& model, const TupleSpec& tuple, int N, const McInit& init, int T,
                           std::int64_t samples, std::uint64_t seed,
                           const std::vector<SimplexPoint>* reference_flow = nullptr) {
  if (samples < 1) throw InputError("mc_simulate: need samples >= 1");
  if (N < 1) throw InputError("mc_simulate: need N >= 1");
  if (!init.iid) {
    if (static_cast<int>(init.counts.size()) != model.d || std::accumulate(init.counts.begin(), init.counts.end(), 0) != N ||
        init.counts.at(static_cast<std::size_t>(init.x)) < 1)
      throw InputError("mc_simulate: initial lattice point not in Delta_N");
  }
  const int d = model.d;
  const CounterRng rng(seed);
  McStats st;
  st.samples = samples;
  st.seed = seed;
  st.mean_flow.assign(static_cast<std::size_t>(T + 1), std::vector<double>(static_cast<std::size_t>(d), 0.0));
  std::vector<double> l1_sq;
  if (reference_flow) {
    if (static_cast<int>(reference_flow->size()) < T + 1) throw InputError("mc_simulate: reference flow too short");
    st.flow_l1.assign(static_cast<std::size_t>(T + 1), 0.0);
    l1_sq.assign(static_cast<std::size_t>(T + 1), 0.0);
  }
  detail::StepCache cache(model, [&](int t, const SimplexPoint& nu) { return tuple.rows(t, nu); }, tuple.reward_offset);
  std::vector<int> states, counts;
  std::vector<double> own(static_cast<std::size_t>(d)), scratch(static_cast<std::size_t>(d));
  double sum = 0.0, sum2 = 0.0;
  for (std::int64_t n = 0; n < samples; ++n) {
    const auto sample = static_cast<std::uint64_t>(n);
    detail::initial_states(init, N, rng, sample, states);
    double payoff = 0.0;
    for (int t = 0; t <= T; ++t) {
      const auto nu = detail::empirical_of(states, d, counts);
      for (int y = 0; y < d; ++y) st.mean_flow[t][y] += nu[y];
      if (reference_flow) {
        double l1 = 0.0;
        for (int y = 0; y < d; ++y) l1 += std::abs(nu[y] - (*reference_flow)[t][y]);
        st.flow_l1[t] += l1;
        l1_sq[t] += l1 * l1;
      }
      const auto& step = cache.get(t, counts, nu);
      const bool deviate = (t == 0 && tuple.agent1_first_action.has_value());
      if (deviate) {
        payoff += detail::integrate_reward_unchecked(model, *tuple.agent1_first_action, tuple.reward_offset, states[0], nu);
        if (T > 0) detail::integrate_transition_into(model, *tuple.agent1_first_action, states[0], nu, own, scratch);
      } else {
        payoff += step.reward[states[0]];
      }
      if (t == T) break;
      states[0] = sample_index(deviate ? own : step.land[states[0]], rng.uniform(sample, 0, t + 1));
      for (int i = 1; i < N; ++i) states[i] = sample_index(step.land[states[i]], rng.uniform(sample, i, t + 1));
    }
    sum += payoff;
    sum2 += payoff * payoff;
  }
  const double n = static_cast<double>(samples);
  st.payoff_mean = sum / n;
  const double var = samples > 1 ? std::max(0.0, (sum2 - n * st.payoff_mean * st.payoff_mean) / (n - 1.0)) : 0.0;
  st.payoff_sd = std::sqrt(var);
  st.payoff_ci99 = kZ99 * st.payoff_sd / std::sqrt(n);
  for (auto& row : st.mean_flow)
    for (double& v : row) v /= n;
  for (std::size_t t = 0; t < st.flow_l1.size(); ++t) {
    const double mean = st.flow_l1[t] / n;
    const double v = samples > 1 ? std::max(0.0, (l1_sq[t] - n * mean * mean) / (n - 1.0)) : 0.0;
    st.flow_l1[t] = mean;
    st.flow_l1_ci99.push_back(kZ99 * std::sqrt(v / n));
  }
  return st;
}

// ---------------------------------------------------------------------------
// Precommitment gap

struct PrecommitReport {
  int N = 0;
  int horizon = 0;
  double gap = 0.0;
  double ci99 = 0.0;  // half-width; 0 for exact results
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  std::vector<int> best_action;  // per initial state of agent 1, grid index
  std::string method = "monte_carlo";

  double upper() const { return gap + ci99; }
};

/// Gain available to agent 1 from replacing its t = 0 action (chosen from
/// its own initial state) when all agents use pi and start iid from nu.
/// Monte Carlo over initial states and the others' moves; agent 1's first
/// action and landing are integrated out exactly, and the continuations for
/// the d possible landings share random numbers.
inline PrecommitReport precommit_gap(const ModelSpec& model, const TimePolicy& pi, const SimplexPoint& nu, int N, int T,
                                     std::int64_t samples, std::uint64_t seed) {
  detail::check_nu(model, nu);
  if (samples < 2) throw InputError("precommit_gap: need at least 2 samples");
  if (N < 1 || T < 1) throw InputError("precommit_gap: need N >= 1 and T >= 1");
  const int d = model.d;
  const int M = model.grid.size();
  const CounterRng rng(seed);
  std::vector<std::vector<double>> S(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(M), 0.0));
  auto S2 = S;
  detail::StepCache cache(model, [&](int t, const SimplexPoint&) { return pi.at(t); }, 0);
  std::vector<int> states0, states, landed, counts;
  std::vector<double> scratch(static_cast<std::size_t>(d)), C(static_cast<std::size_t>(d)), prow(static_cast<std::size_t>(d));
  for (std::int64_t n = 0; n < samples; ++n) {
    const auto sample = static_cast<std::uint64_t>(n);
    detail::initial_states(McInit::iid_from(nu), N, rng, sample, states0);
    const int x0 = states0[0];
    const auto nu0 = detail::empirical_of(states0, d, counts);
    const auto& step0 = cache.get(0, counts, nu0);
    landed = states0;
    for (int i = 1; i < N; ++i) landed[i] = sample_index(step0.land[states0[i]], rng.uniform(sample, i, 1));
    for (int y = 0; y < d; ++y) {
      states = landed;
      states[0] = y;
      double c = 0.0;
      for (int t = 1; t <= T; ++t) {
        const auto nut = detail::empirical_of(states, d, counts);
        const auto& step = cache.get(t, counts, nut);
        c += step.reward[states[0]];
        if (t == T) break;
        for (int i = 0; i < N; ++i) states[i] = sample_index(step.land[states[i]], rng.uniform(sample, i, t + 1));
      }
      C[y] = c;
    }
    double stay = step0.reward[x0];
    for (int y = 0; y < d; ++y) stay += step0.land[x0][y] * C[y];
    for (int j = 0; j < M; ++j) {
      const double u = model.grid[j];
      model.kernel(x0, nu0, u, prow);
      double dev = detail::reward_unchecked(model, 0, x0, nu0, u);
      for (int y = 0; y < d; ++y) dev += prow[y] * C[y];
      const double D = dev - stay;
      S[x0][j] += D;
      S2[x0][j] += D * D;
    }
  }
  PrecommitReport rep;
  rep.N = N;
  rep.horizon = T;
  rep.samples = samples;
  rep.seed = seed;
  const double n = static_cast<double>(samples);
  double mean = 0.0, second = 0.0;
  for (int x = 0; x < d; ++x) {
    const int j = static_cast<int>(std::max_element(S[x].begin(), S[x].end()) - S[x].begin());
    rep.best_action.push_back(j);
    mean += S[x][j] / n;
    second += S2[x][j] / n;
  }
  rep.gap = mean;
  const double var = std::max(0.0, (second - mean * mean) * n / (n - 1.0));
  rep.ci99 = kZ99 * std::sqrt(var / n);
  return rep;
}

/// Exact precommitment gap for d = 2: the others' initial count in the first
/// state is Binomial(N - 1, nu(1)) and continuations come from the
/// aggregate J table at t = 1.
inline PrecommitReport precommit_gap_exact(const ModelSpec& model, const TimePolicy& pi, const SimplexPoint& nu, int N,
                                           int T, int cap = kDefaultNCap) {
  detail::require_two_states(model);
  detail::check_nu(model, nu);
  const auto tab = aggregate_backward_values_time(model, pi, N, T, cap);
  const auto K0 = build_aggregate_kernel(model, N, [&](const SimplexPoint&) { return pi.at(0); });
  const auto others0 = binomial_pmf(N - 1, nu[0]);
  const int M = model.grid.size();
  PrecommitReport rep;
  rep.N = N;
  rep.horizon = T;
  rep.method = "exact";
  std::vector<double> row(2);
  for (int x = 0; x < 2; ++x) {
    std::vector<double> acc(static_cast<std::size_t>(M), 0.0);
    for (int b = 0; b < N; ++b) {
      const double pb = others0[b] * nu[x];
      if (pb == 0.0) continue;
      const int k = b + (x == 0 ? 1 : 0);
      const auto nuk = AggregateKernel::nu_of(N, k);
      const auto& pmf = K0.others[K0.cell(x, k)];
      double c0 = 0.0, c1 = 0.0;
      for (std::size_t bb = 0; bb < pmf.size(); ++bb) {
        c0 += pmf[bb] * tab.at(1, 0, static_cast<int>(bb) + 1);
        c1 += pmf[bb] * tab.at(1, 1, static_cast<int>(bb));
      }
      const double stay = tab.at(0, x, k);
      for (int j = 0; j < M; ++j) {
        const double u = model.grid[j];
        model.kernel(x, nuk, u, row);
        acc[j] += pb * (detail::reward_unchecked(model, 0, x, nuk, u) + row[0] * c0 + row[1] * c1 - stay);
      }
    }
    const int j = static_cast<int>(std::max_element(acc.begin(), acc.end()) - acc.begin());
    rep.best_action.push_back(j);
    rep.gap += acc[j];
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Rare-event deviation in the example31 model

struct ConditionalGapResult {
  int N = 0;
  double gap = 0.0;               // min over agent 1's state
  std::vector<double> gap_by_state;
  double rare_event_prob = 0.0;   // C(N, N/4) / 2^N
};

/// Start at nu = (3/4, 1/4) with every agent using dirac(1/2): the gain from
/// agent 1's best one-step deviation, minimized over its state.
inline ConditionalGapResult example31_conditional_gap(int N, int T, int m = 101) {
  if (N < 4 || N % 4 != 0) throw InputError("example31_conditional_gap: N must be a positive multiple of 4");
  const auto model = example31(m);
  const auto pi = FeedbackPolicy::constant(NuGrid::uniform2(4), dirac(model.grid, 0.5));
  const ReplicatingGame game(model, pi, N, T);
  ConditionalGapResult r;
  r.N = N;
  const int k = 3 * N / 4;
  r.gap = std::numeric_limits<double>::infinity();
  for (int x = 0; x < 2; ++x) {
    r.gap_by_state.push_back(game.gap(x, k));
    r.gap = std::min(r.gap, r.gap_by_state.back());
  }
  double c = 1.0;
  for (int i = 1; i <= N / 4; ++i) c = c * (N - N / 4 + i) / i;
  r.rare_event_prob = std::ldexp(c, -N);
  return r;
}

// ---------------------------------------------------------------------------
// Finite-N diagnostics against the mean field

/// E|mu^N_t - mu_t|_1 for t in ts: the chain starts at (x, lattice_round(nu,
/// N, x)); mu_t is the mean-field flow of pi~ from nu.
inline std::vector<double> flow_discrepancy(const ModelSpec& model, const FeedbackPolicy& pi, const ReplicatingGame& game,
                                            int x, const SimplexPoint& nu, const std::vector<int>& ts) {
  const int N = game.N();
  const int t_max = *std::max_element(ts.begin(), ts.end());
  const auto mf = propagate_flow_feedback(model, pi, nu, t_max);
  const int k0 = lattice_counts(nu, N, x)[0];
  const auto dist = game.forward_distribution(x, k0, t_max);
  std::vector<double> out;
  for (int t : ts) {
    double e = 0.0;
    for (int s = 0; s < 2; ++s)
      for (int k = 0; k <= N; ++k) e += dist[t][s][k] * 2.0 * std::abs(static_cast<double>(k) / N - mf[t][0]);
    out.push_back(e);
  }
  return out;
}

/// |V^N(x, nu(N, x)) - V(x, nu)| with V the mean-field value at the same
/// truncation horizon as the N-agent table.
inline double value_discrepancy(const ModelSpec& model, const FeedbackPolicy& pi, const ReplicatingGame& game, int x,
                                const SimplexPoint& nu) {
  const int k = lattice_counts(nu, game.N(), x)[0];
  return std::abs(game.V(x, k) - aux_V_feedback(model, pi, x, nu, game.horizon() - 1));
}

/// |W^N(x, nu(N, x), y, .) - V(y, nu P^{pi~(nu)}(nu))|.
inline double w_discrepancy(const ModelSpec& model, const FeedbackPolicy& pi, const ReplicatingGame& game, int x,
                            const SimplexPoint& nu, int y) {
  const int k = lattice_counts(nu, game.N(), x)[0];
  return std::abs(game.W(x, k, y) - aux_V_feedback(model, pi, y, next_distribution(model, pi, nu), game.horizon() - 1));
}

}  // namespace timfg

#endif  // TIMFG_NAGENT_HPP_
