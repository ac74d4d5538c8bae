// Copyright 2026 The socnav Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "socnav/grid_mdp.hpp"

namespace socnav {
namespace {

TEST(GridMdp, TransitionsMatchIndependentTable) {
  for (bool diagonal : {false, true}) {
    GridMdp mdp;
    mdp.m_side = 4;
    mdp.diagonal_actions = diagonal;
    mdp.goal_state = 6;
    for (int s = 0; s < mdp.state_count(); ++s)
      for (int a = 0; a < mdp.action_count(); ++a) EXPECT_EQ(mdp.next(s, a), oracle::successor(4, s, a, 6));
  }
  GridMdp mdp;
  EXPECT_EQ(mdp.next(4, static_cast<int>(Action::up)), 7);
  EXPECT_EQ(mdp.next(4, static_cast<int>(Action::left)), 5);
  EXPECT_EQ(mdp.next(0, static_cast<int>(Action::down)), 0);
}

TEST(GridMdp, ValueIterationMatchesClosedFormDistanceDecay) {
  // Reward only at an absorbing goal: V(s) = gamma^d(s) / (1 - gamma) with d
  // the Manhattan distance.
  GridMdp mdp;
  mdp.m_side = 3;
  mdp.gamma = 0.9;
  mdp.goal_state = 8;
  std::vector<double> r(9, 0.0);
  r[8] = 1.0;
  const auto vi = value_iteration(mdp, r);
  for (int s = 0; s < 9; ++s) {
    const int d = std::abs(s / 3 - 2) + std::abs(s % 3 - 2);
    EXPECT_NEAR(vi.values[s], std::pow(0.9, d) / 0.1, 1e-8) << s;
  }
  // Both up and left shorten the distance; ties resolve to the lower index.
  EXPECT_EQ(vi.greedy[0], static_cast<int>(Action::up));
  EXPECT_EQ(vi.greedy[6], static_cast<int>(Action::left));
}

TEST(GridMdp, UniformRewardTiesResolveToFirstAction) {
  GridMdp mdp;
  const std::vector<double> r(9, 0.5);
  const auto vi = value_iteration(mdp, r);
  for (int s = 0; s < 9; ++s) {
    EXPECT_EQ(vi.greedy[s], 0);
    EXPECT_NEAR(vi.values[s], 5.0, 1e-8);
  }
}

TEST(GridMdp, ZeroDiscountValueIsTheReward) {
  std::mt19937_64 rng(1);
  GridMdp mdp;
  mdp.gamma = 0.0;
  const auto r = fixture::random_rewards(9, rng);
  const auto vi = value_iteration(mdp, r);
  for (int s = 0; s < 9; ++s) EXPECT_EQ(vi.values[s], r[s]);
}

TEST(GridMdp, SoftValueIterationMatchesPathEnumeration) {
  std::mt19937_64 rng(2);
  for (int m : {2, 3}) {
    for (int horizon = 1; horizon <= 6; ++horizon) {
      for (int trial = 0; trial < 3; ++trial) {
        GridMdp mdp;
        mdp.m_side = m;
        if (trial > 0) mdp.goal_state = static_cast<int>(rng() % (m * m));
        const double discount = trial == 2 ? 0.8 : 1.0;
        const auto r = fixture::random_rewards(m * m, rng, 2.0);
        const int start = static_cast<int>(rng() % (m * m));
        const auto pi = soft_value_iteration(mdp, r, horizon, discount);
        const int goal = mdp.goal_state.value_or(-1);
        const auto ref = oracle::maxent_sequence_probs(m, mdp.action_count(), goal, r, start, horizon, discount);
        double worst = 0.0;
        for (std::size_t code = 0; code < ref.size(); ++code)
          worst = std::max(worst, std::abs(fixture::sequence_probability(mdp, pi, start, static_cast<std::int64_t>(code),
                                                                horizon) -
                                           ref[code]));
        EXPECT_LT(worst, 1e-9) << "m=" << m << " H=" << horizon << " trial=" << trial;
      }
    }
  }
}

TEST(GridMdp, SoftPolicyRowsAreDistributions) {
  std::mt19937_64 rng(3);
  GridMdp mdp;
  mdp.diagonal_actions = true;
  const auto pi = soft_value_iteration(mdp, fixture::random_rewards(9, rng, 30.0), 5);
  for (int t = 0; t < 5; ++t)
    for (int s = 0; s < 9; ++s) {
      const auto d = pi.distribution(t, s);
      EXPECT_NEAR(std::accumulate(d.begin(), d.end(), 0.0), 1.0, 1e-12);
      for (double p : d) EXPECT_GE(p, 0.0);
    }
}

TEST(GridMdp, SharpRewardsConcentrateOnTheBestPath) {
  std::mt19937_64 rng(4);
  GridMdp mdp;
  mdp.goal_state = 2;
  auto r = fixture::random_rewards(9, rng);
  const int horizon = 4, start = 6;
  // Best path by exhaustive search on the unscaled rewards.
  const auto ref = oracle::maxent_sequence_probs(3, 5, 2, r, start, horizon);
  const auto best = std::max_element(ref.begin(), ref.end()) - ref.begin();
  // Several action sequences can share the best state path; compare paths.
  auto path_of = [&](std::int64_t code) {
    std::vector<int> p{start};
    for (int t = 0; t < horizon; ++t) {
      p.push_back(mdp.next(p.back(), static_cast<int>(code % 5)));
      code /= 5;
    }
    return p;
  };
  for (double& v : r) v *= 100.0;
  const auto pi = soft_value_iteration(mdp, r, horizon);
  const auto svf = expected_svf(mdp, pi, start, horizon);
  std::vector<double> best_visits(9, 0.0);
  for (int s : path_of(best)) best_visits[s] += 1.0;
  for (int s = 0; s < 9; ++s) EXPECT_NEAR(svf[s], best_visits[s], 1e-6) << s;
}

TEST(GridMdp, ExpectedSvfMatchesEnumeration) {
  std::mt19937_64 rng(5);
  GridMdp mdp;
  mdp.goal_state = 4;
  const auto r = fixture::random_rewards(9, rng);
  const int horizon = 5, start = 0;
  const auto pi = soft_value_iteration(mdp, r, horizon);
  const auto svf = expected_svf(mdp, pi, start, horizon);
  const auto ref = oracle::maxent_sequence_probs(3, 5, 4, r, start, horizon);
  std::vector<double> expected(9, 0.0);
  for (std::size_t code = 0; code < ref.size(); ++code) {
    std::int64_t c = static_cast<std::int64_t>(code);
    int s = start;
    expected[s] += ref[code];
    for (int t = 0; t < horizon; ++t) {
      s = oracle::successor(3, s, static_cast<int>(c % 5), 4);
      c /= 5;
      expected[s] += ref[code];
    }
  }
  for (int s = 0; s < 9; ++s) EXPECT_NEAR(svf[s], expected[s], 1e-12);
}

TEST(GridMdp, ExpectedSvfMatchesMonteCarloAndConservesMass) {
  std::mt19937_64 rng(6);
  GridMdp mdp;
  mdp.goal_state = 7;
  const int horizon = 6, start = 1;
  const auto pi = soft_value_iteration(mdp, fixture::random_rewards(9, rng), horizon);
  const auto svf = expected_svf(mdp, pi, start, horizon);
  const auto mc = oracle::monte_carlo_svf(mdp, pi, start, horizon, 100000, 99);
  double l1 = 0.0;
  for (int s = 0; s < 9; ++s) l1 += std::abs(svf[s] - mc[s]);
  EXPECT_LT(l1, 0.02);
  EXPECT_NEAR(std::accumulate(svf.begin(), svf.end(), 0.0), horizon + 1.0, 1e-9);
}

TEST(GridMdp, GreedyPolicyVisitsAreDeterministic) {
  GridMdp mdp;
  mdp.goal_state = 8;
  std::vector<double> r(9, 0.0);
  r[8] = 1.0;
  const auto vi = value_iteration(mdp, r);
  const auto pi = StochasticPolicy::from_greedy(mdp, vi.greedy);
  const auto svf = expected_svf(mdp, pi, 0, 6);
  // 0 -> 3 -> 6 -> 7 -> 8, then absorbed for the remaining two steps.
  EXPECT_EQ(svf, (std::vector<double>{1, 0, 0, 1, 0, 0, 1, 1, 3}));
}

TEST(GridMdp, DemoSvfAveragesVisitCounts) {
  GridMdp mdp;
  const std::vector<std::vector<int>> demos{{0, 1, 2, 5}, {0, 3, 4, 5, 5}};
  EXPECT_EQ(demo_svf(demos, mdp), (std::vector<double>{1.0, 0.5, 0.5, 0.5, 0.5, 1.5, 0, 0, 0}));
  EXPECT_THROW(demo_svf(std::vector<std::vector<int>>{}, mdp), std::invalid_argument);
  EXPECT_THROW(demo_svf(std::vector<std::vector<int>>{{0, 9}}, mdp), std::invalid_argument);
}

TEST(GridMdp, PathLikelihoodUsesStepPolicies) {
  std::mt19937_64 rng(7);
  GridMdp mdp;
  const auto pi = soft_value_iteration(mdp, fixture::random_rewards(9, rng), 3);
  const std::vector<int> path{0, 3, 3, 4};
  const double expected = std::log(pi.prob(0, 0, 0)) + std::log(pi.prob(1, 3, 4) + pi.prob(1, 3, 3)) +
                          std::log(pi.prob(2, 3, 2));
  EXPECT_NEAR(path_log_likelihood(mdp, pi, path), expected, 1e-12);
  const std::vector<int> jump{0, 8};
  EXPECT_EQ(path_log_likelihood(mdp, pi, jump), -std::numeric_limits<double>::infinity());
}

TEST(GridMdp, RejectsInvalidInput) {
  GridMdp mdp;
  EXPECT_THROW(value_iteration(mdp, std::vector<double>(4, 0.0)), std::invalid_argument);
  EXPECT_THROW(soft_value_iteration(mdp, std::vector<double>(9, 0.0), 0), std::invalid_argument);
  EXPECT_THROW(soft_value_iteration(mdp, std::vector<double>(9, 0.0), 3, 0.0), std::invalid_argument);
  const auto pi = soft_value_iteration(mdp, std::vector<double>(9, 0.0), 3);
  EXPECT_THROW(expected_svf(mdp, pi, 0, 4), std::invalid_argument);
  EXPECT_THROW(expected_svf(mdp, pi, 9, 2), std::invalid_argument);
  mdp.gamma = 1.0;
  EXPECT_THROW(value_iteration(mdp, std::vector<double>(9, 0.0)), std::invalid_argument);
  mdp.gamma = 0.9;
  mdp.goal_state = 12;
  EXPECT_THROW(mdp.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace socnav
