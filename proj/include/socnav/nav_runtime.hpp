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

// Online planning loop, episode bookkeeping shared by every command source,
// and the evaluation harness.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "socnav/crowd_sim.hpp"
#include "socnav/feature_stack.hpp"
#include "socnav/grid_mdp.hpp"
#include "socnav/reward_net.hpp"
#include "socnav/tmedirl.hpp"

namespace socnav {

struct NavConfig {
  double waypoint_spacing = 2.0;
  double waypoint_advance_radius = 1.0;
  double goal_radius = 0.3;
  double collision_radius = 0.3;
  double timeout = 40.0;  // s
  double kp = 2.0;        // proportional gain towards the target cell centre
  int cells_per_side = 3;
  double resolution = 1.0;
  double gamma_mdp = 0.9;
  bool diagonal_actions = false;
  // A recorded window is closed after this many ticks even if the robot is still inside.
  int max_window_ticks = 20;
  FeatureConfig features;
  SvcrConfig svcr;

  void validate() const {
    if (!(waypoint_spacing > 0.0 && waypoint_advance_radius > 0.0 && goal_radius > 0.0 && collision_radius >= 0.0 &&
          timeout > 0.0 && kp > 0.0 && resolution > 0.0 && max_window_ticks >= 1))
      throw std::invalid_argument("NavConfig: invalid value");
    if (cells_per_side < 2) throw std::invalid_argument("NavConfig: cells_per_side must be >= 2");
    if (!(gamma_mdp >= 0.0 && gamma_mdp < 1.0)) throw std::invalid_argument("NavConfig: gamma_mdp must lie in [0, 1)");
    svcr.validate();
  }
};

// ---------------------------------------------------------------------------
// Waypoints
// ---------------------------------------------------------------------------

/// Straight-line waypoints from start to goal, the last one being the goal.
class WaypointTrack {
 public:
  WaypointTrack() = default;
  WaypointTrack(const Vec2& start, const Vec2& goal, double spacing, double advance_radius)
      : advance_radius_(advance_radius) {
    const double dist = (goal - start).norm();
    const int segments = std::max(1, static_cast<int>(std::ceil(dist / spacing)));
    for (int k = 1; k <= segments; ++k) points_.push_back(start + (goal - start) * (static_cast<double>(k) / segments));
  }

  const std::vector<Vec2>& points() const { return points_; }
  std::size_t index() const { return index_; }
  const Vec2& current() const { return points_[index_]; }
  const Vec2& goal() const { return points_.back(); }
  bool at_last() const { return index_ + 1 == points_.size(); }

  /// Moves past every intermediate waypoint within the advance radius.
  void update(const Vec2& position) {
    while (!at_last() && (points_[index_] - position).norm() < advance_radius_) ++index_;
  }

  bool operator==(const WaypointTrack&) const = default;

 private:
  std::vector<Vec2> points_;
  std::size_t index_ = 0;
  double advance_radius_ = 1.0;
};

// ---------------------------------------------------------------------------
// Planning
// ---------------------------------------------------------------------------

/// Window state whose cell centre is nearest the waypoint; lowest index on ties.
inline int local_goal_state(const GridWindow& window, const Vec2& waypoint) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int s = 0; s < window.state_count(); ++s) {
    const double d = (window.cell_center(s) - waypoint).norm();
    if (d < best_d) {
      best_d = d;
      best = s;
    }
  }
  return best;
}

inline double bearing_to(const Vec2& from, const Vec2& to, double fallback) {
  const Vec2 d = to - from;
  return d.norm() > 1e-9 ? std::atan2(d.y(), d.x()) : fallback;
}

inline GridWindow window_for(const RobotState& robot, const Vec2& waypoint, const NavConfig& config) {
  return GridWindow::ahead_of(robot.position, bearing_to(robot.position, waypoint, robot.heading),
                              config.cells_per_side, config.resolution);
}

/// Linear reward over the feature layers: r(s) = bias + sum_k w_k phi_k(s).
struct LinearReward {
  std::vector<double> weights;
  double bias = 0.0;

  RewardMap operator()(const FeatureMap& fm) const {
    if (static_cast<int>(weights.size()) != fm.feature_count())
      throw std::invalid_argument("LinearReward: weight count does not match the feature count");
    RewardMap r(fm.state_count(), bias);
    for (int k = 0; k < fm.feature_count(); ++k)
      for (int s = 0; s < fm.state_count(); ++s) r[s] += weights[k] * fm.layers[k][s];
    return r;
  }

  /// Prefers cells near the waypoint and away from obstacles, predicted paths and social discs.
  static LinearReward expert() { return {{-1.0, -3.0, 0.3, 0.3}, 0.0}; }
  /// Cares only about the distance to the waypoint.
  static LinearReward goal_only() { return {{-1.0, 0.0, 0.0, 0.0}, 0.0}; }
};

struct PlanDecision {
  GridWindow window;
  FeatureMap features;
  RewardMap rewards;
  ValueIterationResult values;
  int robot_state = 0;
  int goal_state = 0;
  int action = static_cast<int>(Action::stop);
  int next_state = 0;
  Vec2 command = Vec2::Zero();

  bool stopped() const { return next_state == robot_state; }
};

inline GridMdp planning_mdp(const NavConfig& config, int goal_state) {
  GridMdp mdp;
  mdp.m_side = config.cells_per_side;
  mdp.gamma = config.gamma_mdp;
  mdp.goal_state = goal_state;
  mdp.diagonal_actions = config.diagonal_actions;
  return mdp;
}

/// Proportional velocity towards `target`, clamped to the robot's speed limit.
inline Vec2 track_point(const RobotState& robot, const Vec2& target, const NavConfig& config, double max_speed) {
  return clamp_norm(config.kp * (target - robot.position), max_speed);
}

inline PlanDecision decide_from_rewards(const RobotState& robot, const GridWindow& window, int goal_state,
                                        RewardMap rewards, FeatureMap features, const NavConfig& config,
                                        double max_speed, std::optional<int> forced_action = std::nullopt) {
  PlanDecision d;
  d.window = window;
  d.features = std::move(features);
  d.rewards = std::move(rewards);
  d.goal_state = goal_state;
  d.robot_state = window.state_index(window.robot_cell());
  const GridMdp mdp = planning_mdp(config, goal_state);
  d.values = value_iteration(mdp, d.rewards);
  if (d.robot_state == goal_state) {
    d.action = static_cast<int>(Action::stop);
  } else {
    d.action = forced_action ? *forced_action : d.values.greedy[d.robot_state];
  }
  d.next_state = mdp.next(d.robot_state, d.action);
  if (d.stopped()) {
    d.action = static_cast<int>(Action::stop);
    d.command = Vec2::Zero();
  } else {
    d.command = track_point(robot, window.cell_center(d.next_state), config, max_speed);
  }
  return d;
}

/**
 * One planning cycle: window ahead of the robot towards `waypoint`, features,
 * per-cell rewards, value iteration with the waypoint's cell absorbing, then
 * the greedy action from the robot's cell turned into a velocity command.
 */
template <class RewardFn>
PlanDecision plan_step(const WorldState& world, const Vec2& waypoint, const RewardFn& reward,
                       const NavConfig& config = {}) {
  const GridWindow window = window_for(world.robot, waypoint, config);
  FeatureMap features = build_feature_map(world, window, waypoint, config.features);
  RewardMap rewards = reward(features);
  const int goal = local_goal_state(window, waypoint);
  return decide_from_rewards(world.robot, window, goal, std::move(rewards), std::move(features), config,
                             world.params.robot_max_speed);
}

/**
 * Final approach: once the planner stops within one cell of the final goal the
 * grid can no longer resolve it, so drive straight at the goal.
 */
inline Vec2 with_docking(const PlanDecision& d, const WorldState& world, const WaypointTrack& track,
                         const NavConfig& config) {
  if (!d.stopped() || !track.at_last()) return d.command;
  if ((track.goal() - world.robot.position).norm() > config.resolution) return d.command;
  return track_point(world.robot, track.goal(), config, world.params.robot_max_speed);
}

// ---------------------------------------------------------------------------
// Command sources
// ---------------------------------------------------------------------------

struct CommandStep {
  enum class Kind { command, end, disconnect };
  Kind kind = Kind::command;
  Vec2 velocity = Vec2::Zero();  // world frame

  static CommandStep move(const Vec2& v) { return {Kind::command, v}; }
  static CommandStep end() { return {Kind::end, Vec2::Zero()}; }
  static CommandStep disconnect() { return {Kind::disconnect, Vec2::Zero()}; }
};

/// Called once per tick with the current world and waypoint track.
using CommandSource = std::function<CommandStep(const WorldState&, const WaypointTrack&)>;

/// Planner driven by any reward function; never ends the episode itself.
template <class RewardFn>
CommandSource planner_source(RewardFn reward, NavConfig config) {
  return [reward = std::move(reward), config](const WorldState& world, const WaypointTrack& track) {
    const PlanDecision d = plan_step(world, track.current(), reward, config);
    return CommandStep::move(with_docking(d, world, track, config));
  };
}

/**
 * Hand-weighted planner whose action is replaced, with probability p_noise per
 * tick, by one drawn uniformly from the basic action set.
 */
class ScriptedExpert {
 public:
  ScriptedExpert(double p_noise, std::uint64_t seed, NavConfig config = {}, LinearReward reward = LinearReward::expert())
      : p_noise_(p_noise), rng_(seed), config_(std::move(config)), reward_(std::move(reward)) {
    if (!(p_noise >= 0.0 && p_noise <= 1.0)) throw std::invalid_argument("ScriptedExpert: p_noise must lie in [0, 1]");
  }

  CommandStep operator()(const WorldState& world, const WaypointTrack& track) {
    const Vec2& waypoint = track.current();
    const GridWindow window = window_for(world.robot, waypoint, config_);
    FeatureMap features = build_feature_map(world, window, waypoint, config_.features);
    RewardMap rewards = reward_(features);
    const int goal = local_goal_state(window, waypoint);
    std::optional<int> forced;
    // Both draws happen every tick so the stream does not depend on p_noise.
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
    const int random_action = std::uniform_int_distribution<int>(0, kBasicActionCount - 1)(rng_);
    if (u < p_noise_) forced = random_action;
    const PlanDecision d = decide_from_rewards(world.robot, window, goal, std::move(rewards), std::move(features),
                                               config_, world.params.robot_max_speed, forced);
    return CommandStep::move(forced ? d.command : with_docking(d, world, track, config_));
  }

 private:
  double p_noise_;
  std::mt19937_64 rng_;
  NavConfig config_;
  LinearReward reward_;
};

/// Replays recorded world-frame commands, then ends (or disconnects).
inline CommandSource recorded_source(std::vector<Vec2> commands, bool disconnect_at_end = false) {
  auto index = std::make_shared<std::size_t>(0);
  return [commands = std::move(commands), index, disconnect_at_end](const WorldState&, const WaypointTrack&) {
    if (*index >= commands.size()) return disconnect_at_end ? CommandStep::disconnect() : CommandStep::end();
    return CommandStep::move(commands[(*index)++]);
  };
}

// ---------------------------------------------------------------------------
// Episode core
// ---------------------------------------------------------------------------

enum class Termination { running, goal, collision, timeout, ended, disconnected };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::running: return "running";
    case Termination::goal: return "goal";
    case Termination::collision: return "collision";
    case Termination::timeout: return "timeout";
    case Termination::ended: return "ended";
    case Termination::disconnected: return "disconnected";
  }
  return "running";
}

struct EpisodeResult {
  bool success = false;
  double navigation_time = 0.0;  // s
  double path_length = 0.0;      // m
  int invasion_count = 0;
  double invasion_rate = 0.0;  // invasions per metre
  double svcr = 0.0;
  bool collision = false;
  Termination termination = Termination::running;

  bool operator==(const EpisodeResult&) const = default;
};

inline nlohmann::json to_json(const EpisodeResult& r) {
  return {{"success", r.success},       {"navigation_time", r.navigation_time},
          {"path_length", r.path_length}, {"invasion_count", r.invasion_count},
          {"invasion_rate", r.invasion_rate}, {"svcr", r.svcr},
          {"collision", r.collision},   {"termination", std::string(to_string(r.termination))}};
}

/// Robot inside each pedestrian's social disc, using the radii of that tick.
inline std::vector<char> inside_social_discs(const Vec2& robot, std::span<const PedestrianState> pedestrians,
                                             const SocialDistanceParams& params) {
  const auto radii = social_radii(pedestrians, params);
  std::vector<char> inside(pedestrians.size());
  for (std::size_t i = 0; i < pedestrians.size(); ++i) inside[i] = (pedestrians[i].position - robot).norm() < radii[i];
  return inside;
}

/// Cells entered between two positions, made 4-connected.
inline void extend_visited(std::vector<int>& visited, const GridWindow& window, const Vec2& previous,
                           const Cell& cell) {
  Cell last = window.cell_at(visited.back());
  if (last == cell) return;
  const int dr = cell.row - last.row;
  const int dc = cell.col - last.col;
  if (std::abs(dr) == 1 && std::abs(dc) == 1) {
    // Corner cut: keep the bridging cell the motion actually passed closest to.
    const Vec2 mid = 0.5 * (previous + window.cell_center(cell));
    const auto via = window.cell_of(mid);
    const Cell by_row{last.row + dr, last.col};
    const Cell by_col{last.row, last.col + dc};
    visited.push_back(window.state_index(via && *via == by_col ? by_col : by_row));
  } else {
    while (std::abs(cell.row - last.row) + std::abs(cell.col - last.col) > 1) {
      if (last.row != cell.row)
        last.row += cell.row > last.row ? 1 : -1;
      else
        last.col += cell.col > last.col ? 1 : -1;
      visited.push_back(window.state_index(last));
    }
  }
  visited.push_back(window.state_index(cell));
}

/**
 * Steps a scenario under externally supplied commands and records everything a
 * Demonstration and an EpisodeResult need. Every command source (planner,
 * scripted expert, teleoperation, replay) goes through this one code path.
 */
class EpisodeRunner {
 public:
  EpisodeRunner(const Scenario& scenario, NavConfig config = {}, const SimParams& params = {}, std::string id = {})
      : config_(std::move(config)), world_(make_scenario(scenario, params)) {
    config_.validate();
    track_ = WaypointTrack(world_.robot.position, world_.robot_goal, config_.waypoint_spacing,
                           config_.waypoint_advance_radius);
    demo_.id = id.empty() ? std::string(to_string(scenario.kind)) + "-" + std::to_string(scenario.seed) : std::move(id);
    demo_.dt = world_.clock.dt;
    demo_.scenario = scenario;
    demo_.robot_states.push_back(world_.robot);
    demo_.pedestrian_history.push_back(world_.pedestrians);
    inside_ = inside_social_discs(world_.robot.position, world_.pedestrians, config_.features.social);
    open_window();
    if ((world_.robot.position - world_.robot_goal).norm() < config_.goal_radius) termination_ = Termination::goal;
  }

  const WorldState& world() const { return world_; }
  const WaypointTrack& track() const { return track_; }
  const NavConfig& config() const { return config_; }
  bool finished() const { return termination_ != Termination::running; }
  Termination termination() const { return termination_; }
  int invasion_count() const { return invasions_; }

  /// Applies one world-frame command for one tick.
  void step(const Vec2& command) {
    if (finished()) throw std::logic_error("EpisodeRunner::step: episode already finished");
    const Vec2 applied = clamp_norm(command, world_.params.robot_max_speed);
    const Vec2 previous = world_.robot.position;
    world_ = step_world(world_, applied, world_.clock.dt);
    track_.update(world_.robot.position);
    demo_.commands.push_back(applied);
    demo_.robot_states.push_back(world_.robot);
    demo_.pedestrian_history.push_back(world_.pedestrians);

    const auto inside = inside_social_discs(world_.robot.position, world_.pedestrians, config_.features.social);
    for (std::size_t i = 0; i < inside.size(); ++i)
      if (inside[i] && !(i < inside_.size() && inside_[i])) ++invasions_;
    inside_ = inside;

    record_cell(previous);

    if (robot_in_collision(world_, config_.collision_radius))
      termination_ = Termination::collision;
    else if ((world_.robot.position - world_.robot_goal).norm() < config_.goal_radius)
      termination_ = Termination::goal;
    else if (world_.clock.time() >= config_.timeout - 1e-9)
      termination_ = Termination::timeout;
  }

  /// Ends the episode on request of the command source.
  void end(bool complete) {
    if (finished()) return;
    termination_ = complete ? Termination::ended : Termination::disconnected;
  }

  Demonstration demonstration() const {
    Demonstration d = demo_;
    d.complete = termination_ != Termination::disconnected;
    if (d.robot_states.size() >= 2) {
      score_demonstration(d, config_.svcr);
    } else {
      d.trajectory_length = 0.0;
      d.sudden_changes = 0;
      d.svcr = 0.0;
    }
    return d;
  }

  EpisodeResult result() const {
    const Demonstration d = demonstration();
    EpisodeResult r;
    r.termination = termination_;
    r.collision = termination_ == Termination::collision;
    r.success = termination_ == Termination::goal;
    r.navigation_time = world_.clock.time();
    r.path_length = d.trajectory_length;
    r.invasion_count = invasions_;
    r.invasion_rate = r.path_length > 0.0 ? invasions_ / r.path_length : 0.0;
    r.svcr = d.svcr;
    return r;
  }

 private:
  void open_window() {
    WindowRecord w;
    w.step = static_cast<int>(world_.clock.step_index);
    w.waypoint = track_.current();
    w.window = window_for(world_.robot, w.waypoint, config_);
    w.goal_state = local_goal_state(w.window, w.waypoint);
    w.features = build_feature_map(world_, w.window, w.waypoint, config_.features);
    w.visited.push_back(w.window.state_index(w.window.robot_cell()));
    demo_.windows.push_back(std::move(w));
  }

  void record_cell(const Vec2& previous) {
    WindowRecord& w = demo_.windows.back();
    const auto cell = w.window.cell_of(world_.robot.position);
    if (cell) extend_visited(w.visited, w.window, previous, *cell);
    const bool at_goal = cell && w.goal_state && w.window.state_index(*cell) == *w.goal_state;
    const bool expired = world_.clock.step_index - w.step >= config_.max_window_ticks;
    if (!cell || at_goal || expired) open_window();
  }

  NavConfig config_;
  WorldState world_;
  WaypointTrack track_;
  Demonstration demo_;
  std::vector<char> inside_;
  int invasions_ = 0;
  Termination termination_ = Termination::running;
};

/// Runs until the source ends the episode or the goal, a collision or the timeout stops it.
inline EpisodeRunner drive(EpisodeRunner runner, const CommandSource& source) {
  while (!runner.finished()) {
    const CommandStep c = source(runner.world(), runner.track());
    if (c.kind == CommandStep::Kind::command)
      runner.step(c.velocity);
    else
      runner.end(c.kind == CommandStep::Kind::end);
  }
  return runner;
}

inline Demonstration collect_demo(const Scenario& scenario, const CommandSource& source, const NavConfig& config = {},
                                  const SimParams& params = {}, std::string id = {}) {
  return drive(EpisodeRunner(scenario, config, params, std::move(id)), source).demonstration();
}

/**
 * `count` scripted-expert episodes of `base` with seeds base.seed + k. Every
 * `noisy_every`-th episode (k = 0, n, 2n, ...) uses `p_noise`, the rest are
 * clean; 0 makes them all clean.
 */
inline std::vector<Demonstration> scripted_demonstrations(const Scenario& base, int count, double p_noise,
                                                          int noisy_every = 2, const NavConfig& config = {},
                                                          const SimParams& params = {}) {
  if (count < 0 || noisy_every < 0) throw std::invalid_argument("scripted_demonstrations: negative count");
  std::vector<Demonstration> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    Scenario s = base;
    s.seed = base.seed + static_cast<std::uint64_t>(k);
    const bool noisy = noisy_every > 0 && k % noisy_every == 0;
    ScriptedExpert expert(noisy ? p_noise : 0.0, base.seed * 31 + static_cast<std::uint64_t>(k), config);
    out.push_back(collect_demo(s, std::ref(expert), config, params));
  }
  return out;
}

template <class RewardFn>
EpisodeResult run_episode(const Scenario& scenario, const RewardFn& reward, NavConfig config = {},
                          const SimParams& params = {}) {
  const EpisodeRunner done = drive(EpisodeRunner(scenario, config, params), planner_source(reward, config));
  return done.result();
}

template <class RewardFn>
EpisodeResult run_episode(const Scenario& scenario, const RewardFn& reward, double timeout) {
  NavConfig config;
  config.timeout = timeout;
  return run_episode(scenario, reward, config);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvaluationReport {
  int episodes = 0;
  double success_rate = 0.0;
  std::optional<double> mean_navigation_time;  // over successful episodes
  double mean_invasion_rate = 0.0;
  double mean_svcr = 0.0;
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
  std::optional<double> pairwise_accuracy;
  std::vector<Scenario> scenarios;  // one per episode
  std::vector<EpisodeResult> results;

  bool operator==(const EvaluationReport&) const = default;
};

inline EvaluationReport summarize(std::vector<Scenario> scenarios, std::vector<EpisodeResult> results) {
  EvaluationReport rep;
  rep.episodes = static_cast<int>(results.size());
  if (results.empty()) return rep;
  int successes = 0, collisions = 0, timeouts = 0;
  double time_sum = 0.0;
  for (const auto& r : results) {
    if (r.success) {
      ++successes;
      time_sum += r.navigation_time;
    }
    collisions += r.collision ? 1 : 0;
    timeouts += r.termination == Termination::timeout ? 1 : 0;
    rep.mean_invasion_rate += r.invasion_rate;
    rep.mean_svcr += r.svcr;
  }
  const double n = static_cast<double>(results.size());
  rep.success_rate = successes / n;
  rep.collision_rate = collisions / n;
  rep.timeout_rate = timeouts / n;
  rep.mean_invasion_rate /= n;
  rep.mean_svcr /= n;
  if (successes > 0) rep.mean_navigation_time = time_sum / successes;
  rep.scenarios = std::move(scenarios);
  rep.results = std::move(results);
  return rep;
}

/**
 * Runs `episodes` seeded episodes of every scenario (seeds scenario.seed,
 * scenario.seed + 1, ...) in parallel, and optionally scores the model's
 * pairwise ranking accuracy on held-out demonstrations. Results are stored by
 * episode index so the report does not depend on thread scheduling.
 */
template <class RewardFn>
EvaluationReport evaluate(const RewardFn& reward, std::span<const Scenario> scenarios, int episodes,
                          const NavConfig& config = {}, std::span<const Demonstration> held_out = {},
                          unsigned threads = 0, const SimParams& params = {}) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  config.validate();
  std::vector<Scenario> jobs;
  for (const auto& s : scenarios)
    for (int k = 0; k < episodes; ++k) {
      Scenario copy = s;
      copy.seed = s.seed + static_cast<std::uint64_t>(k);
      jobs.push_back(copy);
    }
  std::vector<EpisodeResult> results(jobs.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, jobs.size())));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < jobs.size(); i += threads) results[i] = run_episode(jobs[i], reward, config, params);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  EvaluationReport rep = summarize(std::move(jobs), std::move(results));
  if (held_out.size() >= 2) rep.pairwise_accuracy = pairwise_accuracy(held_out, reward, config.gamma_mdp);
  return rep;
}

template <class RewardFn>
EvaluationReport evaluate(const RewardFn& reward, const std::vector<Scenario>& scenarios, int episodes,
                          const NavConfig& config = {}) {
  return evaluate(reward, std::span<const Scenario>(scenarios), episodes, config);
}

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

/// Summary record of a report.
inline nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json j{{"record", "evaluation"},
                   {"episodes", r.episodes},
                   {"success_rate", r.success_rate},
                   {"mean_navigation_time", optional_json(r.mean_navigation_time)},
                   {"mean_invasion_rate", r.mean_invasion_rate},
                   {"mean_svcr", r.mean_svcr},
                   {"collision_rate", r.collision_rate},
                   {"timeout_rate", r.timeout_rate},
                   {"pairwise_accuracy", optional_json(r.pairwise_accuracy)}};
  return j;
}

/// One "episode" record per result followed by the "evaluation" summary record.
inline void write_report(std::ostream& os, const EvaluationReport& r) {
  for (std::size_t i = 0; i < r.results.size(); ++i) {
    nlohmann::json j = to_json(r.results[i]);
    j["record"] = "episode";
    j["index"] = i;
    if (i < r.scenarios.size()) {
      j["scenario"] = std::string(to_string(r.scenarios[i].kind));
      j["seed"] = r.scenarios[i].seed;
    }
    os << j.dump() << '\n';
  }
  os << to_json(r).dump() << '\n';
}

inline std::string summary_table(const EvaluationReport& r) {
  std::ostringstream os;
  auto pct = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << 100.0 * v << "%";
    return s.str();
  };
  auto opt = [](const std::optional<double>& v, int precision, const char* unit) {
    if (!v) return std::string("n/a");
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << *v << unit;
    return s.str();
  };
  os << std::left;
  os << std::setw(22) << "episodes" << r.episodes << '\n';
  os << std::setw(22) << "success" << pct(r.success_rate) << '\n';
  os << std::setw(22) << "time (successes)" << opt(r.mean_navigation_time, 2, " s") << '\n';
  os << std::setw(22) << "invasions per metre" << std::fixed << std::setprecision(4) << r.mean_invasion_rate << '\n';
  os << std::setw(22) << "svcr" << std::fixed << std::setprecision(4) << r.mean_svcr << '\n';
  os << std::setw(22) << "collisions" << pct(r.collision_rate) << '\n';
  os << std::setw(22) << "timeouts" << pct(r.timeout_rate) << '\n';
  os << std::setw(22) << "pairwise accuracy" << (r.pairwise_accuracy ? pct(*r.pairwise_accuracy) : "n/a") << '\n';
  return os.str();
}

}  // namespace socnav
