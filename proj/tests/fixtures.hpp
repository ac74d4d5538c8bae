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

// Synthetic data shared by the unit tests and the acceptance binary.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "socnav/grid_mdp.hpp"
#include "socnav/nav_runtime.hpp"
#include "socnav/tmedirl.hpp"

namespace fixture {

inline std::vector<double> random_rewards(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> r(n);
  for (double& v : r) v = u(rng);
  return r;
}

/// Probability the policy assigns to one encoded action sequence.
inline double sequence_probability(const socnav::GridMdp& mdp, const socnav::StochasticPolicy& pi, int start,
                                   std::int64_t code, int horizon) {
  double p = 1.0;
  int s = start;
  for (int t = 0; t < horizon; ++t) {
    const int a = static_cast<int>(code % mdp.action_count());
    code /= mdp.action_count();
    p *= pi.prob(t, s, a);
    s = mdp.next(s, a);
  }
  return p;
}

/**
 * Random demonstration for metric checks: pedestrians appear and vanish,
 * velocities are drawn from a coarse lattice so exact threshold crossings are
 * common, and the first window may open after tick 0.
 */
inline socnav::Demonstration random_svcr_demo(std::mt19937_64& rng, double v_thrd = 0.3, double w_thrd = 0.5) {
  using socnav::Vec2;
  std::uniform_int_distribution<int> steps_d(2, 40), peds_d(0, 6), lattice(-4, 4), coin(0, 9);
  std::uniform_real_distribution<double> pos(-2.0, 2.0), step(-0.15, 0.15);
  socnav::Demonstration d;
  d.id = "random";
  const int steps = steps_d(rng);
  const int peds = peds_d(rng);
  Vec2 robot{pos(rng), pos(rng)};
  for (int t = 0; t < steps; ++t) {
    socnav::RobotState r;
    if (coin(rng) > 1) robot += Vec2(step(rng), step(rng));
    r.position = robot;
    d.robot_states.push_back(r);
    std::vector<socnav::PedestrianState> now;
    for (int i = 0; i < peds; ++i) {
      if (coin(rng) == 0) continue;  // absent this tick
      socnav::PedestrianState p;
      p.id = i;
      p.position = robot + Vec2(2.0 * pos(rng), 2.0 * pos(rng));
      // Multiples of the thresholds hit the boundary exactly.
      p.linear_velocity = Vec2(lattice(rng) * v_thrd * 0.5, lattice(rng) * v_thrd * 0.5);
      p.angular_velocity = lattice(rng) * w_thrd * 0.5;
      now.push_back(p);
    }
    d.pedestrian_history.push_back(now);
    if (t + 1 < steps) d.commands.push_back(Vec2::Zero());
  }
  const int windows = 1 + static_cast<int>(rng() % 4);
  int open = static_cast<int>(rng() % 3);
  for (int k = 0; k < windows && open < steps; ++k) {
    socnav::WindowRecord w;
    w.step = open;
    w.window = socnav::GridWindow::ahead_of(d.robot_states[open].position, 6.3 * pos(rng), 3, 1.0);
    w.visited = {1};
    d.windows.push_back(w);
    open += 1 + static_cast<int>(rng() % 10);
  }
  return d;
}

struct PlantedWorld {
  socnav::FeatureMap features;
  int goal = 0;
};

/// Planted linear reward over four features. The bonus on the goal indicator
/// exceeds what the other three can add, so every optimal path ends there.
inline socnav::LinearReward planted_reward() { return {{-1.0, 0.8, 0.5, 5.0}, 0.0}; }

inline PlantedWorld random_planted_world(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PlantedWorld w;
  w.features.window = socnav::GridWindow{};
  w.features.names = socnav::FeatureMap::standard_names();
  w.goal = static_cast<int>(rng() % 9);
  for (int k = 0; k < 4; ++k) {
    socnav::Layer layer(9);
    for (int s = 0; s < 9; ++s) layer[s] = k == 3 ? (s == w.goal ? 1.0 : 0.0) : u(rng);
    w.features.layers.push_back(layer);
  }
  return w;
}

/// Greedy optimal rollout of the planted reward from a random non-goal start.
inline socnav::Demonstration planted_demo(const PlantedWorld& world, std::mt19937_64& rng, int horizon, double gamma) {
  socnav::GridMdp mdp;
  mdp.gamma = gamma;
  mdp.goal_state = world.goal;
  const auto vi = socnav::value_iteration(mdp, planted_reward()(world.features));
  int s = static_cast<int>(rng() % 8);
  if (s >= world.goal) ++s;
  socnav::WindowRecord w;
  w.window = world.features.window;
  w.features = world.features;
  w.goal_state = world.goal;
  w.visited.push_back(s);
  for (int t = 0; t < horizon; ++t) {
    s = mdp.next(s, vi.greedy[s]);
    w.visited.push_back(s);
  }
  socnav::Demonstration d;
  d.id = "planted";
  d.windows.push_back(w);
  return d;
}

/// Same, in a freshly drawn world.
inline socnav::Demonstration planted_demo(std::mt19937_64& rng, int horizon, double gamma) {
  const PlantedWorld world = random_planted_world(rng);
  return planted_demo(world, rng, horizon, gamma);
}

/// Fraction of non-goal states of one world where the learned greedy move matches the planted one.
template <class Reward>
double policy_agreement(const Reward& learned, const PlantedWorld& world, double gamma) {
  socnav::GridMdp mdp;
  mdp.gamma = gamma;
  mdp.goal_state = world.goal;
  const auto truth = socnav::value_iteration(mdp, planted_reward()(world.features));
  const auto got = socnav::value_iteration(mdp, learned(world.features));
  int agree = 0;
  for (int s = 0; s < 9; ++s)
    if (s != world.goal) agree += mdp.next(s, truth.greedy[s]) == mdp.next(s, got.greedy[s]);
  return agree / 8.0;
}

/// Mean agreement over freshly drawn worlds.
template <class Reward>
double policy_agreement(const Reward& learned, int worlds, std::uint64_t seed, double gamma) {
  std::mt19937_64 rng(seed);
  double sum = 0.0;
  for (int k = 0; k < worlds; ++k) sum += policy_agreement(learned, random_planted_world(rng), gamma);
  return sum / worlds;
}

}  // namespace fixture
