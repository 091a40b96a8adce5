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

#include <gtest/gtest.h>

#include <random>

#include "joint_chain_oracle.hpp"
#include "timfg/nagent.hpp"

namespace timfg {
namespace {

// Brute-force rounding: the closest admissible lattice point; among ties
// the one that is larger when compared from the last index down.
std::vector<int> brute_round(const SimplexPoint& nu, int N, int x) {
  std::vector<int> best;
  double best_d = 1e300;
  for (const auto& lp : enumerate_delta_N(N, nu.dim())) {
    if (lp.x != x) continue;
    double d2 = 0.0;
    for (int i = 0; i < nu.dim(); ++i) d2 += std::pow(lp.counts[i] / static_cast<double>(N) - nu[i], 2);
    auto later = [&] {
      for (int i = nu.dim() - 1; i >= 0; --i)
        if (lp.counts[i] != best[i]) return lp.counts[i] > best[i];
      return false;
    };
    if (best.empty() || d2 < best_d - 1e-12 || (std::abs(d2 - best_d) <= 1e-12 && later())) {
      best = lp.counts;
      best_d = std::min(best_d, d2);
    }
  }
  return best;
}

TEST(Lattice, WorkedExamples) {
  const auto r = lattice_round(SimplexPoint({0.5, 1.0 / 6.0, 1.0 / 3.0}), 3, 2);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(r[i], 1.0 / 3.0, 1e-15);
  const auto r2 = lattice_round(SimplexPoint({0.0, 1.0}), 4, 0);
  EXPECT_DOUBLE_EQ(r2[0], 0.25);
  EXPECT_DOUBLE_EQ(r2[1], 0.75);
}

TEST(Lattice, GreedyMatchesBruteForce) {
  std::mt19937_64 gen(7);
  std::gamma_distribution<double> g(1.0, 1.0);
  for (int d = 2; d <= 4; ++d)
    for (int N = 1; N <= 7; ++N)
      for (int rep = 0; rep < 40; ++rep) {
        std::vector<double> w(static_cast<std::size_t>(d));
        double s = 0.0;
        for (auto& v : w) s += (v = g(gen));
        for (auto& v : w) v /= s;
        // Half of the draws sit on a coarse grid, where ties are common.
        if (rep % 2 == 0) {
          std::vector<int> c(static_cast<std::size_t>(d));
          int left = 2 * N;
          for (int i = 0; i < d - 1; ++i) {
            c[i] = std::min(left, static_cast<int>(std::lround(w[i] * 2 * N)));
            left -= c[i];
          }
          c[d - 1] = left;
          w.assign(c.begin(), c.end());
          for (auto& v : w) v /= 2 * N;
        }
        const SimplexPoint nu(w);
        for (int x = 0; x < d; ++x) EXPECT_EQ(lattice_counts(nu, N, x), brute_round(nu, N, x)) << d << " " << N;
      }
}

TEST(Lattice, DeltaNCounts) {
  EXPECT_EQ(enumerate_delta_N(2, 2).size(), 4u);
  for (int N = 1; N <= 9; ++N) EXPECT_EQ(enumerate_delta_N(N, 2).size(), static_cast<std::size_t>(2 * N));
  EXPECT_EQ(enumerate_delta_N(3, 3).size(), 18u);
  for (const auto& lp : enumerate_delta_N(5, 3)) {
    EXPECT_GE(lp.counts[lp.x], 1);
    EXPECT_EQ(lp.N(), 5);
  }
}

TEST(Binomial, PmfMatchesDirectFormula) {
  const auto p = binomial_pmf(5, 0.3);
  EXPECT_NEAR(p[2], 10 * 0.09 * std::pow(0.7, 3), 1e-14);
  EXPECT_EQ(binomial_pmf(4, 0.0)[0], 1.0);
  EXPECT_EQ(binomial_pmf(4, 1.0)[4], 1.0);
  const auto c = convolve({0.5, 0.5}, {0.25, 0.75});
  EXPECT_NEAR(c[1], 0.5, 1e-15);
}

// A state- and nu-dependent policy that includes non-Dirac rows.
FeedbackPolicy test_policy(const ModelSpec& m) {
  return FeedbackPolicy::from_function(NuGrid::uniform2(4), [&](int x, const SimplexPoint& nu) {
    const auto a = dirac(m.grid, std::min(1.0, 0.2 + 0.6 * nu[0] + 0.1 * x));
    if (x == 1 && nu[0] > 0.3) return RelaxedAction::mix(a, dirac(m.grid, 0.9), 0.4);
    return a;
  });
}

class OracleAgreement : public ::testing::TestWithParam<int> {};

TEST_P(OracleAgreement, ValuesDeviationAndGap) {
  const int N = GetParam();
  const int T = 5;
  for (const auto& m : {example43({{0.1, 0.6}, {1.0 / 7.0, 0.4}}, 11), example31(11)}) {
    const auto pi = test_policy(m);
    const ReplicatingGame game(m, pi, N, T);
    const auto o = oracle::feedback_oracle(m, pi, N, T);
    for (const auto& lp : enumerate_delta_N(N, 2)) {
      const auto s = oracle::canonical(lp.x, lp.counts);
      const int k = lp.counts[0];
      EXPECT_NEAR(game.J(lp.x, k), o.J.at(s), 1e-11);
      EXPECT_NEAR(game.V(lp.x, k), o.V.at(s), 1e-11);
      for (int y = 0; y < 2; ++y) EXPECT_NEAR(game.W(lp.x, k, y), oracle::oracle_W(m, pi, o, s, y), 1e-11);
      EXPECT_NEAR(game.gap(lp.x, k), oracle::oracle_gap(m, pi, o, s), 1e-11);
      // Any other arrangement of the others has the same value.
      auto s2 = s;
      std::reverse(s2.begin() + 1, s2.end());
      EXPECT_NEAR(o.J.at(s2), o.J.at(s), 1e-12);
    }
  }
}

TEST_P(OracleAgreement, PrecommitExact) {
  const int N = GetParam();
  const int T = 4;
  const auto m = example43({{0.1, 0.6}, {1.0 / 7.0, 0.4}}, 11);
  TimePolicy pi;
  for (int t = 0; t < 3; ++t)
    pi.head.push_back({dirac(m.grid, 0.1 * t + 0.3), RelaxedAction::mix(dirac(m.grid, 0.2), dirac(m.grid, 0.7), 0.5)});
  pi.tail = {dirac(m.grid, 0.5), dirac(m.grid, 0.6)};
  const auto nu = SimplexPoint::two_state(0.35);
  EXPECT_NEAR(precommit_gap_exact(m, pi, nu, N, T).gap, oracle::oracle_precommit_gap(m, pi, nu, N, T), 1e-11);
}

INSTANTIATE_TEST_SUITE_P(SmallN, OracleAgreement, ::testing::Values(2, 3, 4));

TEST(ReplicatingGame, OwnActionReproducesJ) {
  const auto m = example43({{1.0 / 7.0, 1.0}}, 21);
  const auto pi = test_policy(m);
  const ReplicatingGame game(m, pi, 6, 8);
  for (const auto& lp : enumerate_delta_N(6, 2)) {
    const auto nu = lp.nu();
    const auto& a = pi.evaluate(lp.x, nu);
    const auto dev = game.deviation_values(lp.x, lp.counts[0]);
    double v = 0.0;
    for (int j = 0; j < m.grid.size(); ++j) v += a[j] * dev[j];
    EXPECT_NEAR(v, game.J(lp.x, lp.counts[0]), 1e-12);
    EXPECT_GE(game.gap(lp.x, lp.counts[0]), -1e-12);
  }
}

TEST(ReplicatingGame, ZeroRewardGivesZeroValues) {
  auto m = example43({{1.0 / 7.0, 1.0}}, 11);
  m.reward = SeparableReward{[](int, const SimplexPoint&, double) { return 0.0; }, DiscountSpec::exponential(0.5)};
  const auto rep = consistent_gap(m, test_policy(m), 5, 6);
  EXPECT_EQ(rep.epsilon_N, 0.0);
}

TEST(ReplicatingGame, RejectsUnsupportedAndOversized) {
  auto m3 = example31(11);
  m3.d = 3;
  const auto pi2 = FeedbackPolicy::constant(NuGrid::uniform2(2), dirac(example31(11).grid, 0.5));
  EXPECT_THROW(ReplicatingGame(m3, pi2, 3, 3), UnsupportedError);
  const auto m = example31(11);
  EXPECT_THROW(ReplicatingGame(m, pi2, 600, 3), ConfigError);
  EXPECT_THROW(ReplicatingGame(m, pi2, 20, 3, 16), ConfigError);
}

TEST(ReplicatingGame, ForwardDistributionIsProbability) {
  const auto m = example43({{1.0 / 7.0, 1.0}}, 11);
  const ReplicatingGame game(m, test_policy(m), 7, 3);
  const auto dist = game.forward_distribution(1, 2, 5);
  for (const auto& d : dist) {
    double s = 0.0;
    for (const auto& row : d)
      for (double v : row) s += v;
    EXPECT_NEAR(s, 1.0, 1e-13);
  }
}

TEST(MonteCarlo, MatchesExactPayoffAndDeviation) {
  const auto m = example43({{0.1, 0.6}, {1.0 / 7.0, 0.4}}, 11);
  const auto pi = test_policy(m);
  const int N = 3, T = 5;
  const ReplicatingGame game(m, pi, N, T);
  TupleSpec tuple;
  tuple.feedback = &pi;
  const auto st = mc_simulate(m, tuple, N, McInit::lattice(1, {1, 2}), T, 100000, 11);
  EXPECT_LT(std::abs(st.payoff_mean - game.J(1, 1)), 1.6 * st.payoff_ci99);
  tuple.agent1_first_action = dirac(m.grid, 0.8);
  const auto dev = mc_simulate(m, tuple, N, McInit::lattice(1, {1, 2}), T, 100000, 12);
  EXPECT_LT(std::abs(dev.payoff_mean - game.deviation_values(1, 1)[8]), 1.6 * dev.payoff_ci99);
}

TEST(MonteCarlo, DeterministicForFixedSeed) {
  const auto m = example31(11);
  const auto pi = test_policy(m);
  TupleSpec tuple;
  tuple.feedback = &pi;
  const auto a = mc_simulate(m, tuple, 4, McInit::iid_from(SimplexPoint::two_state(0.4)), 4, 2000, 99);
  const auto b = mc_simulate(m, tuple, 4, McInit::iid_from(SimplexPoint::two_state(0.4)), 4, 2000, 99);
  EXPECT_EQ(a.payoff_mean, b.payoff_mean);
  EXPECT_EQ(a.mean_flow, b.mean_flow);
  const auto c = mc_simulate(m, tuple, 4, McInit::iid_from(SimplexPoint::two_state(0.4)), 4, 2000, 100);
  EXPECT_NE(a.payoff_mean, c.payoff_mean);
}

TEST(MonteCarlo, RejectsBadLatticeStart) {
  const auto m = example31(11);
  const auto pi = test_policy(m);
  TupleSpec tuple;
  tuple.feedback = &pi;
  EXPECT_THROW(mc_simulate(m, tuple, 3, McInit::lattice(0, {0, 3}), 2, 10, 1), InputError);
  EXPECT_THROW(mc_simulate(m, tuple, 3, McInit::lattice(0, {1, 1}), 2, 10, 1), InputError);
}

TEST(Precommit, MonteCarloMatchesExact) {
  const auto m = example43({{0.1, 0.6}, {1.0 / 7.0, 0.4}}, 11);
  const auto pi = TimePolicy::constant({dirac(m.grid, 0.2), dirac(m.grid, 0.9)});
  const auto nu = SimplexPoint::two_state(0.4);
  const auto exact = precommit_gap_exact(m, pi, nu, 4, 5);
  const auto mc = precommit_gap(m, pi, nu, 4, 5, 40000, 5);
  EXPECT_GT(exact.gap, 0.0);
  EXPECT_EQ(mc.best_action, exact.best_action);
  EXPECT_LT(std::abs(mc.gap - exact.gap), mc.ci99);
}

TEST(Example31, RareEventProbability) {
  const auto r = example31_conditional_gap(4, 6);
  EXPECT_NEAR(r.rare_event_prob, 0.25, 1e-14);
  EXPECT_NEAR(example31_conditional_gap(8, 6).rare_event_prob, 28.0 / 256.0, 1e-14);
  EXPECT_THROW(example31_conditional_gap(6, 6), InputError);
}

TEST(Diagnostics, FlowDiscrepancyStartsAtRounding) {
  const auto m = example43({{1.0 / 7.0, 1.0}}, 11);
  const auto pi = test_policy(m);
  const ReplicatingGame game(m, pi, 8, 4);
  const auto nu = SimplexPoint::two_state(0.3);
  const auto r = lattice_round(nu, 8, 0);
  const auto fd = flow_discrepancy(m, pi, game, 0, nu, {0, 1, 2});
  EXPECT_NEAR(fd[0], 2.0 * std::abs(r[0] - 0.3), 1e-14);
  EXPECT_GT(fd[1], 0.0);
}

}  // namespace
}  // namespace timfg
