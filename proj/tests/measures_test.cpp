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

#include "timfg/measures.hpp"
#include "timfg/model.hpp"

namespace timfg {
namespace {

RelaxedAction random_action(std::mt19937_64& rng, int m) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(static_cast<std::size_t>(m));
  double s = 0.0;
  for (auto& v : w) s += (v = e(rng));
  for (auto& v : w) v /= s;
  return RelaxedAction(w);
}

TEST(RelaxedAction, Validation) {
  EXPECT_THROW(RelaxedAction({0.5, 0.4}), InputError);
  EXPECT_THROW(RelaxedAction(std::vector<double>{}), InputError);
  auto a = RelaxedAction::unit(5, 2);
  ASSERT_TRUE(a.dirac_index().has_value());
  EXPECT_EQ(*a.dirac_index(), 2);
  EXPECT_FALSE(RelaxedAction({0.5, 0.5}).dirac_index().has_value());
}

TEST(Dirac, NearestWithLowTies) {
  auto g = ActionGrid::uniform(0.0, 1.0, 11);
  EXPECT_EQ(*dirac(g, 0.3).dirac_index(), 3);
  EXPECT_EQ(*dirac(g, 0.35).dirac_index(), 3);
  EXPECT_THROW(dirac(g, -0.2), InputError);
}

TEST(IntegrateReward, UniformOnEndpoints) {
  auto m = example31(3);
  RelaxedAction w({0.5, 0.0, 0.5});
  const auto nu = SimplexPoint::two_state(0.5);
  EXPECT_NEAR(integrate_reward(m, w, 0, 0, nu), 0.75, 1e-15);
  EXPECT_NEAR(integrate_reward(m, dirac(m.grid, 0.5), 0, 0, nu), reward(m, 0, 0, nu, 0.5), 1e-15);
}

TEST(IntegrateTransition, UniformOnEndpoints) {
  auto m = example31(3);
  RelaxedAction w({0.5, 0.0, 0.5});
  auto p = integrate_transition(m, w, 0, SimplexPoint::two_state(0.5));
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  EXPECT_NEAR(p[1], 0.5, 1e-15);
}

TEST(TransitionMatrix, RowsMatchIntegrals) {
  auto m = example31();
  const auto nu = SimplexPoint::two_state(0.3);
  std::vector<RelaxedAction> rows{dirac(m.grid, 0.2), RelaxedAction::mix(dirac(m.grid, 0.0), dirac(m.grid, 1.0), 0.5)};
  auto P = transition_matrix(m, rows, nu);
  for (int x = 0; x < 2; ++x) {
    auto r = integrate_transition(m, rows[x], x, nu);
    EXPECT_NEAR(P(x, 0), r[0], 1e-15);
    EXPECT_NEAR(P(x, 0) + P(x, 1), 1.0, 1e-15);
  }
}

TEST(Wasserstein, HandValues) {
  auto g3 = ActionGrid::uniform(0.0, 1.0, 3);
  RelaxedAction uni({0.5, 0.0, 0.5});
  EXPECT_NEAR(wasserstein1(g3, uni, dirac(g3, 0.5)), 0.5, 1e-15);
  EXPECT_NEAR(wasserstein1(g3, dirac(g3, 0.0), dirac(g3, 1.0)), 1.0, 1e-15);
  EXPECT_EQ(wasserstein1(g3, uni, uni), 0.0);
  auto g11 = ActionGrid::uniform(0.0, 1.0, 11);
  EXPECT_NEAR(wasserstein1(g11, dirac(g11, 0.2), dirac(g11, 0.7)), 0.5, 1e-14);
  EXPECT_THROW(wasserstein1(g11, uni, uni), InputError);
}

TEST(Wasserstein, MetricAxioms) {
  std::mt19937_64 rng(7);
  auto g = ActionGrid::uniform(0.0, 1.0, 21);
  for (int rep = 0; rep < 200; ++rep) {
    auto a = random_action(rng, 21), b = random_action(rng, 21), c = random_action(rng, 21);
    EXPECT_EQ(wasserstein1(g, a, b), wasserstein1(g, b, a));
    EXPECT_LE(wasserstein1(g, a, c), wasserstein1(g, a, b) + wasserstein1(g, b, c) + 1e-10);
    EXPECT_LE(wasserstein1(g, a, a), 1e-12);
    EXPECT_GT(wasserstein1(g, a, b), 0.0);
  }
}

// |int h d(a - b)| <= W1(a, b) for 1-Lipschitz h with |h| <= 1.
TEST(Wasserstein, DualBound) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto g = ActionGrid::uniform(0.0, 1.0, 31);
  for (int rep = 0; rep < 100; ++rep) {
    auto a = random_action(rng, 31), b = random_action(rng, 31);
    std::vector<double> h(31);
    h[0] = unif(rng);
    for (int j = 1; j < 31; ++j) h[j] = std::clamp(h[j - 1] + unif(rng) * (g[j] - g[j - 1]), -1.0, 1.0);
    double s = 0.0;
    for (int j = 0; j < 31; ++j) s += h[j] * (a[j] - b[j]);
    EXPECT_LE(std::abs(s), wasserstein1(g, a, b) + 1e-10);
  }
}

TEST(Integrals, LinearInTheMeasure) {
  std::mt19937_64 rng(3);
  auto m = example43();
  const auto nu = SimplexPoint::two_state(0.4);
  for (int rep = 0; rep < 50; ++rep) {
    auto a = random_action(rng, m.grid.size()), b = random_action(rng, m.grid.size());
    const double alpha = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    auto mix = RelaxedAction::mix(a, b, alpha);
    for (int x = 0; x < 2; ++x) {
      EXPECT_NEAR(integrate_reward(m, mix, 2, x, nu),
                  alpha * integrate_reward(m, a, 2, x, nu) + (1 - alpha) * integrate_reward(m, b, 2, x, nu), 1e-12);
      auto pm = integrate_transition(m, mix, x, nu);
      auto pa = integrate_transition(m, a, x, nu), pb = integrate_transition(m, b, x, nu);
      EXPECT_NEAR(pm[0], alpha * pa[0] + (1 - alpha) * pb[0], 1e-12);
    }
  }
}

TEST(Argmax, TiesAndCanonical) {
  std::vector<double> v{1.0, 3.0, 3.0 - 1e-12, 2.0};
  auto s = argmax_with_ties(v, 1e-9);
  EXPECT_EQ(s.indices, (std::vector<int>{1, 2}));
  EXPECT_EQ(s.canonical, 1);
  std::vector<double> q;
  for (int j = 0; j <= 10; ++j) q.push_back(-(j - 3.3) * (j - 3.3));
  EXPECT_EQ(argmax_with_ties(q).indices, (std::vector<int>{3}));
  std::vector<double> c(6, 4.0);
  EXPECT_EQ(argmax_with_ties(c).indices.size(), 6u);
  EXPECT_EQ(argmax_with_ties(c).canonical, 0);
  EXPECT_THROW(argmax_with_ties(std::vector<double>{}), InputError);
}

}  // namespace
}  // namespace timfg
