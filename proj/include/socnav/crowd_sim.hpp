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

// Deterministic 2-D crowd simulation: social-force pedestrians and a
// kinematic robot.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "socnav/geometry.hpp"
#include "socnav/grid_window.hpp"

namespace socnav {

struct PedestrianState {
  int id = 0;
  Vec2 position = Vec2::Zero();
  Vec2 linear_velocity = Vec2::Zero();
  double angular_velocity = 0.0;
  Vec2 goal = Vec2::Zero();
  // Direction of travel; held while the pedestrian is (nearly) at rest.
  double heading = 0.0;
  // Where the pedestrian started; it becomes the next goal on turnaround.
  Vec2 home = Vec2::Zero();

  bool operator==(const PedestrianState&) const = default;
};

struct RobotState {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;  // (-pi, pi]
  double speed = 0.0;

  bool operator==(const RobotState&) const = default;
};

enum class ScenarioKind { circle_crossing, corridor, random_goals };

inline std::string_view to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::circle_crossing: return "circle_crossing";
    case ScenarioKind::corridor: return "corridor";
    case ScenarioKind::random_goals: return "random_goals";
  }
  return "circle_crossing";
}

inline ScenarioKind scenario_kind_from_string(std::string_view s) {
  if (s == "circle_crossing") return ScenarioKind::circle_crossing;
  if (s == "corridor") return ScenarioKind::corridor;
  if (s == "random_goals") return ScenarioKind::random_goals;
  throw std::invalid_argument("unknown scenario kind: " + std::string(s));
}

struct Scenario {
  ScenarioKind kind = ScenarioKind::circle_crossing;
  int pedestrian_count = 4;
  double circle_radius = 4.0;
  std::vector<Rect> static_obstacles;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(circle_radius > 0.0)) throw std::invalid_argument("Scenario: circle_radius must be > 0");
    if (pedestrian_count < 0) throw std::invalid_argument("Scenario: pedestrian_count must be >= 0");
  }

  bool operator==(const Scenario&) const = default;
};

struct SimClock {
  std::int64_t step_index = 0;
  double dt = 0.1;

  double time() const { return static_cast<double>(step_index) * dt; }
  bool operator==(const SimClock&) const = default;
};

/// Social-force and kinematic limits. Helbing-style exponential repulsion.
struct SimParams {
  double dt = 0.1;
  double relaxation_time = 0.5;
  double desired_speed = 1.2;
  double max_pedestrian_speed = 1.8;
  // Desired speed ramps down linearly inside this distance of the goal.
  double arrival_radius = 1.0;
  double goal_tolerance = 0.05;
  double pedestrian_radius = 0.3;
  double repulsion_strength = 5.0;  // m/s^2
  double repulsion_range = 0.5;     // m
  // Weight of interactions behind the pedestrian, in [0, 1].
  double anisotropy = 0.35;
  double obstacle_strength = 5.0;
  double obstacle_range = 0.2;
  double robot_radius = 0.3;
  double robot_repulsion_strength = 5.0;  // m/s^2
  bool robot_repulsion = true;
  // Look-ahead of the velocity-dependent robot repulsion (s); 0 uses the
  // plain circular form.
  double robot_anticipation = 1.0;
  double robot_max_speed = 1.0;
  double min_spacing = 0.5;
  // Pedestrians within this distance of their goal swap goal and home and walk
  // back, keeping the crowd active for the whole episode. 0 disables it.
  double turnaround_radius = 0.5;

  bool operator==(const SimParams&) const = default;
};

struct WorldState {
  SimClock clock;
  std::vector<PedestrianState> pedestrians;
  RobotState robot;
  Vec2 robot_goal = Vec2::Zero();
  std::vector<Rect> obstacles;
  SimParams params;

  bool operator==(const WorldState&) const = default;
};

namespace detail {

inline double heading_of(const Vec2& v, double fallback) {
  return v.norm() > 1e-9 ? std::atan2(v.y(), v.x()) : fallback;
}

inline PedestrianState make_pedestrian(int id, const Vec2& position, const Vec2& goal) {
  PedestrianState p;
  p.id = id;
  p.position = position;
  p.goal = goal;
  p.home = position;
  p.heading = detail::heading_of(goal - position, 0.0);
  return p;
}

inline bool spaced(const std::vector<Vec2>& placed, const Vec2& p, double spacing) {
  for (const auto& q : placed)
    if ((q - p).norm() < spacing) return false;
  return true;
}

inline Vec2 exponential_repulsion(const Vec2& self, const Vec2& other, double radii, double strength,
                                  double range) {
  const Vec2 d = self - other;
  const double dist = d.norm();
  if (dist < 1e-12) return Vec2::Zero();
  return strength * std::exp((radii - dist) / range) * (d / dist);
}

// Elliptical repulsion: the potential depends on the semi-minor axis b of the
// ellipse through `self` with foci at `other` and `other` + `step`, where
// `step` is the relative displacement over the look-ahead time.
inline Vec2 elliptical_repulsion(const Vec2& self, const Vec2& other, const Vec2& step, double radii,
                                 double strength, double range) {
  const Vec2 d = self - other;
  const Vec2 e = d - step;
  const double nd = d.norm(), ne = e.norm(), ns = step.norm();
  if (nd < 1e-12 || ne < 1e-12) return exponential_repulsion(self, other, radii, strength, range);
  const double sum = nd + ne;
  const double b = 0.5 * std::sqrt(std::max(sum * sum - ns * ns, 1e-12));
  const Vec2 grad = sum / (4.0 * b) * (d / nd + e / ne);
  return strength * std::exp((radii - b) / range) * grad;
}

// Interactions outside the field of view are weighted by `anisotropy`.
inline double view_weight(const PedestrianState& self, const Vec2& toward_self, double anisotropy) {
  const double speed = self.linear_velocity.norm();
  const double dist = toward_self.norm();
  if (speed < 1e-9 || dist < 1e-12) return 1.0;
  const double cos_phi = -self.linear_velocity.dot(toward_self) / (speed * dist);
  return anisotropy + (1.0 - anisotropy) * 0.5 * (1.0 + cos_phi);
}

}  // namespace detail

/**
 * Builds the initial world for a scenario.
 *
 * circle_crossing: the robot starts at the bottom of the circle facing its
 * antipodal goal; pedestrians take evenly spaced slots around the rest of the
 * circle with seeded angular jitter, each heading for its antipodal point.
 * corridor: two walls 4 m apart; pedestrians walk in both directions.
 * random_goals: starts and goals sampled uniformly in the square of half-size
 * circle_radius.
 */
inline WorldState make_scenario(const Scenario& scenario, const SimParams& params = {}) {
  scenario.validate();
  const double radius = scenario.circle_radius;
  const int count = scenario.pedestrian_count;
  std::mt19937_64 rng(scenario.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  WorldState world;
  world.clock.dt = params.dt;
  world.params = params;
  world.obstacles = scenario.static_obstacles;
  world.robot.position = {0.0, -radius};
  world.robot_goal = {0.0, radius};
  world.robot.heading = kPi / 2.0;

  switch (scenario.kind) {
    case ScenarioKind::circle_crossing: {
      const double slot = 2.0 * kPi / (count + 1);
      const double jitter = 0.2 * slot;
      // Worst case gap between neighbours after jitter.
      if (count > 0 && 2.0 * radius * std::sin(0.5 * (slot - 2.0 * jitter)) < params.min_spacing)
        throw std::invalid_argument("make_scenario: " + std::to_string(count) +
                                    " pedestrians do not fit on the circle with minimum spacing");
      for (int k = 0; k < count; ++k) {
        const double angle = -kPi / 2.0 + (k + 1) * slot + jitter * unit(rng);
        const Vec2 start{radius * std::cos(angle), radius * std::sin(angle)};
        world.pedestrians.push_back(detail::make_pedestrian(k, start, -start));
      }
      break;
    }
    case ScenarioKind::corridor: {
      const double half_width = 2.0;
      const double wall = 0.2;
      world.obstacles.push_back({-half_width - wall, -radius - 1.0, -half_width, radius + 1.0});
      world.obstacles.push_back({half_width, -radius - 1.0, half_width + wall, radius + 1.0});
      std::vector<Vec2> placed{world.robot.position};
      std::uniform_real_distribution<double> lateral(-half_width + 0.4, half_width - 0.4);
      std::uniform_real_distribution<double> along(-radius + 0.5, radius);
      for (int k = 0; k < count; ++k) {
        Vec2 start;
        int attempts = 0;
        do {
          if (++attempts > 1000)
            throw std::invalid_argument("make_scenario: corridor cannot fit " + std::to_string(count) +
                                        " pedestrians with minimum spacing");
          start = {lateral(rng), along(rng)};
        } while (!detail::spaced(placed, start, params.min_spacing));
        placed.push_back(start);
        const double goal_y = (k % 2 == 0) ? -radius - 0.5 : radius + 0.5;
        world.pedestrians.push_back(detail::make_pedestrian(k, start, {lateral(rng), goal_y}));
      }
      break;
    }
    case ScenarioKind::random_goals: {
      std::vector<Vec2> placed{world.robot.position};
      for (int k = 0; k < count; ++k) {
        Vec2 start;
        int attempts = 0;
        do {
          if (++attempts > 1000)
            throw std::invalid_argument("make_scenario: square cannot fit " + std::to_string(count) +
                                        " pedestrians with minimum spacing");
          start = {radius * unit(rng), radius * unit(rng)};
        } while (!detail::spaced(placed, start, params.min_spacing));
        placed.push_back(start);
        const Vec2 goal{radius * unit(rng), radius * unit(rng)};
        world.pedestrians.push_back(detail::make_pedestrian(k, start, goal));
      }
      break;
    }
  }
  return world;
}

/// Net social-force acceleration on pedestrian `index` in `world`.
inline Vec2 social_force(const WorldState& world, std::size_t index) {
  const SimParams& p = world.params;
  const PedestrianState& self = world.pedestrians[index];

  const Vec2 to_goal = self.goal - self.position;
  const double goal_dist = to_goal.norm();
  Vec2 desired = Vec2::Zero();
  if (goal_dist > p.goal_tolerance) {
    const double speed = p.desired_speed * std::min(1.0, goal_dist / p.arrival_radius);
    desired = speed * to_goal / goal_dist;
  }
  Vec2 force = (desired - self.linear_velocity) / p.relaxation_time;

  for (std::size_t j = 0; j < world.pedestrians.size(); ++j) {
    if (j == index) continue;
    const Vec2& other = world.pedestrians[j].position;
    const double w = detail::view_weight(self, self.position - other, p.anisotropy);
    force += w * detail::exponential_repulsion(self.position, other, 2.0 * p.pedestrian_radius,
                                                p.repulsion_strength, p.repulsion_range);
  }
  if (p.robot_repulsion) {
    const Vec2& robot = world.robot.position;
    const double w = detail::view_weight(self, self.position - robot, p.anisotropy);
    const Vec2 robot_velocity = world.robot.speed * Vec2(std::cos(world.robot.heading), std::sin(world.robot.heading));
    const Vec2 step = p.robot_anticipation * (robot_velocity - self.linear_velocity);
    force += w * detail::elliptical_repulsion(self.position, robot, step, p.pedestrian_radius + p.robot_radius,
                                               p.robot_repulsion_strength, p.repulsion_range);
  }
  for (const Rect& r : world.obstacles) {
    force += detail::exponential_repulsion(self.position, r.closest_point(self.position), p.pedestrian_radius,
                                            p.obstacle_strength, p.obstacle_range);
  }
  return force;
}

/**
 * Advances the world by dt. Forces are evaluated on the pre-step state for
 * every pedestrian, then velocities and positions are updated with
 * semi-implicit Euler. Speeds are clamped, never allowed to diverge.
 */
inline WorldState step_world(const WorldState& world, const Vec2& robot_command, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_world: dt must be > 0");
  const SimParams& p = world.params;
  WorldState next = world;
  next.clock.dt = dt;
  next.clock.step_index = world.clock.step_index + 1;

  for (std::size_t i = 0; i < world.pedestrians.size(); ++i) {
    const PedestrianState& before = world.pedestrians[i];
    PedestrianState& after = next.pedestrians[i];
    const Vec2 accel = social_force(world, i);
    after.linear_velocity = clamp_norm(before.linear_velocity + dt * accel, p.max_pedestrian_speed);
    after.position = before.position + dt * after.linear_velocity;
    after.heading = after.linear_velocity.norm() > 0.05
                        ? std::atan2(after.linear_velocity.y(), after.linear_velocity.x())
                        : before.heading;
    after.angular_velocity = wrap_angle(after.heading - before.heading) / dt;
    if (p.turnaround_radius > 0.0 && (after.goal - after.position).norm() < p.turnaround_radius)
      std::swap(after.goal, after.home);
  }

  const Vec2 v = clamp_norm(robot_command, p.robot_max_speed);
  next.robot.position = world.robot.position + dt * v;
  next.robot.speed = v.norm();
  next.robot.heading = wrap_angle(detail::heading_of(v, world.robot.heading));
  return next;
}

/// Pedestrians whose position lies in the window footprint.
inline std::vector<PedestrianState> pedestrians_in_window(const WorldState& world, const GridWindow& window) {
  window.validate();
  std::vector<PedestrianState> inside;
  for (const auto& ped : world.pedestrians)
    if (window.contains(ped.position)) inside.push_back(ped);
  return inside;
}

inline bool robot_in_collision(const WorldState& world, double collision_radius) {
  for (const auto& ped : world.pedestrians)
    if ((ped.position - world.robot.position).norm() < collision_radius) return true;
  for (const auto& r : world.obstacles)
    if (r.contains(world.robot.position)) return true;
  return false;
}

}  // namespace socnav
