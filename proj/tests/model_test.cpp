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

#include <cmath>

#include "timfg/model.hpp"

namespace timfg {
namespace {

SimplexPoint nu2(double first) { return SimplexPoint::two_state(first); }

TEST(ActionGrid, UniformEndpointsAndOrder) {
  auto g = ActionGrid::uniform(0.0, 1.0, 101);
  EXPECT_EQ(g.size(), 101);
  EXPECT_EQ(g.lo(), 0.0);
  EXPECT_EQ(g.hi(), 1.0);
  for (int i = 1; i < g.size(); ++i) EXPECT_GT(g[i], g[i - 1]);
  EXPECT_THROW(ActionGrid({0.0, 0.0, 1.0}), InputError);
  EXPECT_THROW(ActionGrid::uniform(0.0, 1.0, 1), InputError);
}

TEST(ActionGrid, NearestIndexTiesGoLow) {
  auto g = ActionGrid::uniform(0.0, 1.0, 3);
  EXPECT_EQ(g.nearest_index(0.25), 0);
  EXPECT_EQ(g.nearest_index(0.75), 1);
  EXPECT_EQ(g.nearest_index(0.26), 1);
  EXPECT_THROW(g.nearest_index(1.5), InputError);
}

TEST(SimplexPoint, Validation) {
  EXPECT_THROW(SimplexPoint({0.5, 0.4}), InputError);
  EXPECT_THROW(SimplexPoint({1.5, -0.5}), InputError);
  SimplexPoint p({1.0 + 1e-13, -1e-13});
  EXPECT_EQ(p[1], 0.0);
  EXPECT_NEAR(p[0], 1.0, 1e-15);
}

TEST(TransitionRow, Example31HandValues) {
  auto m = example31();
  // First state, nu = (3/4, 1/4), u = 1: (3/8 + 1/2, 1/8 + 0).
  auto r = transition_row(m, 0, nu2(0.75), 1.0);
  EXPECT_NEAR(r[0], 7.0 / 8.0, 1e-15);
  EXPECT_NEAR(r[1], 1.0 / 8.0, 1e-15);
  // u = 1/2 cancels the action term: nu/2 + (1/4, 1/4).
  r = transition_row(m, 0, nu2(0.5), 0.5);
  EXPECT_NEAR(r[0], 0.5, 1e-15);
  EXPECT_NEAR(r[1], 0.5, 1e-15);
  // Second state mirrors the action term.
  r = transition_row(m, 1, nu2(0.5), 0.0);
  EXPECT_NEAR(r[0], 0.25 + 0.5, 1e-15);
  EXPECT_THROW(transition_row(m, 0, nu2(0.5), 1.01), InputError);
  EXPECT_THROW(transition_row(m, 2, nu2(0.5), 0.5), InputError);
}

TEST(TransitionRow, Example43Rows) {
  auto m = example43();
  // First state: (nu, 1 - nu)/2 + (u, 1 - u)/2.
  auto r = transition_row(m, 0, nu2(0.3), 0.6);
  EXPECT_NEAR(r[0], 0.15 + 0.3, 1e-15);
  // Second state: (nu, 1 - nu)/2 + (1 - u, u)/2.
  r = transition_row(m, 1, nu2(0.3), 0.6);
  EXPECT_NEAR(r[0], 0.15 + 0.2, 1e-15);
}

TEST(TransitionRow, RowsAreSimplexPointsOnTestGrid) {
  for (const auto& m : {example31(), example43()}) {
    for (int x = 0; x < 2; ++x)
      for (int k = 0; k <= 20; ++k)
        for (int j = 0; j < m.grid.size(); j += 5) {
          std::vector<double> out(2);
          m.kernel(x, nu2(k / 20.0), m.grid[j], out);
          EXPECT_GE(out[0], 0.0);
          EXPECT_GE(out[1], 0.0);
          EXPECT_NEAR(out[0] + out[1], 1.0, 1e-12);
        }
  }
}

TEST(Reward, Example31HandValues) {
  auto m = example31();
  EXPECT_NEAR(reward(m, 0, 0, nu2(0.5), 0.5), 1.0, 1e-15);
  EXPECT_NEAR(reward(m, 1, 1, nu2(0.5), 0.5), 7.0 / 24.0, 1e-15);
  EXPECT_THROW(reward(m, -1, 0, nu2(0.5), 0.5), InputError);
}

TEST(Reward, ExponentialConstant) {
  auto m = example31(11, DiscountSpec::exponential(0.3));
  std::get<SeparableReward>(m.reward).g = [](int, const SimplexPoint&, double) { return 2.5; };
  for (int t = 0; t < 8; ++t) EXPECT_NEAR(reward(m, t, 0, nu2(0.2), 0.4), 2.5 * std::pow(0.3, t), 1e-14);
}

TEST(TailBound, ClosedForms) {
  auto m = example31(11, DiscountSpec::exponential(0.5));
  EXPECT_NEAR(tail_bound(m, 10), std::pow(2.0, -10), 1e-16);
  auto e = example31();
  EXPECT_NEAR(tail_bound(e, 0), 5.0 / 12.0, 1e-15);
  EXPECT_LT(tail_bound(e, 60), 1e-25);
}

TEST(TailBound, MonotoneAndDominatesDirectSums) {
  for (const auto& m : {example31(), example43({{0.1, 0.5}, {1.0 / 7.0, 0.5}})}) {
    const auto& disc = *m.discount();
    double prev = tail_bound(m, 0);
    for (int T = 0; T <= 40; ++T) {
      const double tb = tail_bound(m, T);
      EXPECT_LE(tb, prev);
      prev = tb;
      double direct = 0.0;
      for (int t = T + 1; t <= T + 1000; ++t) direct += disc.delta(t) * m.reward_sup;
      EXPECT_GE(tb, direct * (1.0 - 1e-12));
    }
  }
}

TEST(TailBound, GeneralRewardNeedsBoundFunction) {
  auto m = example31();
  m.reward = GeneralReward{[](int, int, const SimplexPoint&, double) { return 0.0; }, nullptr};
  EXPECT_THROW(tail_bound(m, 3), ConfigError);
}

TEST(Horizon, SmallestSufficientHorizon) {
  auto m = example31();
  const int T = horizon_for(m, 1e-8);
  EXPECT_LE(tail_bound(m, T), 1e-8);
  EXPECT_GT(tail_bound(m, T - 1), 1e-8);
  try {
    require_horizon(m, 2, 1e-8);
    FAIL() << "expected HorizonError";
  } catch (const HorizonError& e) {
    EXPECT_EQ(e.required_horizon, T);
  }
}

TEST(Discount, TableTail) {
  auto d = DiscountSpec::table({1.0, 0.5, 0.25}, 0.5);
  EXPECT_NEAR(d.delta(4), 0.0625, 1e-16);
  double direct = 0.0;
  for (int t = 2; t < 200; ++t) direct += d.delta(t);
  EXPECT_NEAR(d.tail_sum(1), direct, 1e-14);
  EXPECT_THROW(DiscountSpec::table({1.0, 2.0}, 0.5), ConfigError);
  EXPECT_THROW(DiscountSpec::atoms({{0.5, 0.4}}), ConfigError);
  EXPECT_THROW(d.atom_list(), UnsupportedError);
}

TEST(Example43, RejectsLargeAtoms) { EXPECT_THROW(example43({{0.2, 1.0}}), ConfigError); }

TEST(RewardSup, GridMaxWithinDeclaredBound) {
  EXPECT_LE(grid_reward_sup(example31()), 1.0);
  EXPECT_LE(grid_reward_sup(example43()), 3.0);
  // max at x = 2, nu = 1, u = 3/4.
  EXPECT_NEAR(grid_reward_sup(example43()), 2.5625, 1e-12);
}

// Finite-difference slope in u of reward plus kernel row (l1) stays below
// the declared constant.
TEST(Lipschitz, BuiltinsRespectDeclaredConstant) {
  for (const auto& m : {example31(), example43()}) {
    const auto& g = std::get<SeparableReward>(m.reward).g;
    double worst = 0.0;
    for (int x = 0; x < 2; ++x)
      for (int k = 0; k <= 20; ++k) {
        const auto nu = nu2(k / 20.0);
        for (int j = 0; j + 1 < m.grid.size(); ++j) {
          const double du = m.grid[j + 1] - m.grid[j];
          std::vector<double> a(2), b(2);
          m.kernel(x, nu, m.grid[j], a);
          m.kernel(x, nu, m.grid[j + 1], b);
          const double dp = std::hypot(a[0] - b[0], a[1] - b[1]);
          const double dg = std::abs(g(x, nu, m.grid[j + 1]) - g(x, nu, m.grid[j]));
          worst = std::max(worst, (dg + dp) / du);
        }
      }
    EXPECT_LE(worst, m.lipschitz_u + 1e-6) << m.name;
  }
}

}  // namespace
}  // namespace timfg
