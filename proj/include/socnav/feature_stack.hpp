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

// Per-cell feature layers over the robot-local grid window: distance to the
// waypoint, unknown static obstacles, predicted pedestrian trajectories and
// density-adaptive social distance.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "socnav/crowd_sim.hpp"
#include "socnav/geometry.hpp"
#include "socnav/grid_window.hpp"

namespace socnav {

/// One scalar per window cell, row-major by state index.
using Layer = std::vector<double>;

struct FeatureMap {
  GridWindow window;
  std::vector<std::string> names;
  std::vector<Layer> layers;

  static std::vector<std::string> standard_names() { return {"goal_distance", "obstacle", "prediction", "social"}; }

  int feature_count() const { return static_cast<int>(layers.size()); }
  int state_count() const { return window.state_count(); }

  Eigen::VectorXd feature(int state) const {
    Eigen::VectorXd phi(feature_count());
    for (int k = 0; k < feature_count(); ++k) phi[k] = layers[k][state];
    return phi;
  }

  /// Features as columns: feature_count x state_count.
  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd x(feature_count(), state_count());
    for (int k = 0; k < feature_count(); ++k)
      for (int s = 0; s < state_count(); ++s) x(k, s) = layers[k][s];
    return x;
  }

  const Layer& layer(const std::string& name) const {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == name) return layers[k];
    throw std::out_of_range("FeatureMap: no layer named " + name);
  }

  bool operator==(const FeatureMap&) const = default;
};

/**
 * Min-max normalisation of one layer into [-1, 1].
 *
 * Non-negative layers map onto [0, 1] and non-positive layers onto [-1, 0],
 * so a cell without any feature response keeps the value 0 whenever the
 * layer's extreme on that side is 0. Mixed-sign layers use the full range.
 * A layer whose range is below 1e-9 becomes all zeros.
 */
inline Layer normalize_layer(const Layer& raw) {
  Layer out(raw.size(), 0.0);
  if (raw.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double range = hi - lo;
  if (range < 1e-9) return out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (lo >= 0.0)
      out[i] = (raw[i] - lo) / range;
    else if (hi <= 0.0)
      out[i] = (raw[i] - hi) / range;
    else
      out[i] = 2.0 * (raw[i] - lo) / range - 1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distance to goal
// ---------------------------------------------------------------------------

inline Layer goal_distance_raw(const GridWindow& window, const Vec2& waypoint) {
  window.validate();
  if (!waypoint.allFinite()) throw std::invalid_argument("goal_distance_layer: waypoint must be finite");
  Layer d(window.state_count());
  for (int s = 0; s < window.state_count(); ++s) d[s] = (window.cell_center(s) - waypoint).norm();
  return d;
}

/// Cell-centre distance to the waypoint, min-max normalised over the window.
inline Layer goal_distance_layer(const GridWindow& window, const Vec2& waypoint) {
  return normalize_layer(goal_distance_raw(window, waypoint));
}

// ---------------------------------------------------------------------------
// Unknown obstacles
// ---------------------------------------------------------------------------

/// Cells on the 8-connected Bresenham line from a to b, both ends included.
inline std::vector<Cell> bresenham_cells(Cell a, Cell b) {
  std::vector<Cell> cells;
  int x0 = a.row, y0 = a.col;
  const int x1 = b.row, y1 = b.col;
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    cells.push_back({x0, y0});
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
  return cells;
}

struct RayCastParams {
  double angular_step_deg = 1.0;
  double max_range = 10.0;
};

enum class CellOccupancy : signed char { unknown = -1, free = 0, occupied = 1 };

/**
 * Synthesises a range scan from `robot_position` against the rectangles and
 * rasterises it into the window: the cells each ray crosses before its return
 * are traced with Bresenham and marked free, the cell holding the return is
 * marked occupied. Occupied wins over free. Rays start at the window
 * orientation so the result is rotation-equivariant.
 */
inline std::vector<CellOccupancy> rasterize_scan(const GridWindow& window, std::span<const Rect> obstacles,
                                                 const Vec2& robot_position, const RayCastParams& rays = {}) {
  window.validate();
  std::vector<CellOccupancy> grid(window.state_count(), CellOccupancy::unknown);
  if (obstacles.empty()) return grid;
  const int ray_count = static_cast<int>(std::lround(360.0 / rays.angular_step_deg));
  const Cell start = window.unbounded_cell_of_local(window.to_local(robot_position));
  for (int k = 0; k < ray_count; ++k) {
    const double angle = window.orientation + k * rays.angular_step_deg * kPi / 180.0;
    const Vec2 dir{std::cos(angle), std::sin(angle)};
    double nearest = std::numeric_limits<double>::infinity();
    for (const Rect& r : obstacles)
      if (auto t = ray_rect_hit(robot_position, dir, r)) nearest = std::min(nearest, *t);
    if (nearest > rays.max_range) continue;
    // Nudge the return just inside the surface it struck.
    const Vec2 hit = robot_position + (nearest + 1e-6) * dir;
    const Cell end = window.unbounded_cell_of_local(window.to_local(hit));
    const auto line = bresenham_cells(start, end);
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
      if (!window.in_bounds(line[i])) continue;
      auto& cell = grid[window.state_index(line[i])];
      if (cell != CellOccupancy::occupied) cell = CellOccupancy::free;
    }
    if (window.in_bounds(end)) grid[window.state_index(end)] = CellOccupancy::occupied;
  }
  return grid;
}

/// 1 for cells holding a scan return, 0 otherwise.
inline Layer obstacle_layer(const GridWindow& window, std::span<const Rect> obstacles, const Vec2& robot_position,
                            const RayCastParams& rays = {}) {
  const auto grid = rasterize_scan(window, obstacles, robot_position, rays);
  Layer layer(grid.size(), 0.0);
  for (std::size_t s = 0; s < grid.size(); ++s) layer[s] = grid[s] == CellOccupancy::occupied ? 1.0 : 0.0;
  return layer;
}

// ---------------------------------------------------------------------------
// Predicted trajectories
// ---------------------------------------------------------------------------

struct TrajectoryPrediction {
  int pedestrian_id = 0;
  int horizon_steps = 0;
  std::vector<Vec2> predicted_positions;
};

/// Past positions per pedestrian id, oldest first.
using PedestrianHistory = std::map<int, std::vector<Vec2>>;

using TrajectoryPredictor = std::function<std::vector<TrajectoryPrediction>(
    std::span<const PedestrianState>, const PedestrianHistory&, int horizon, double dt)>;

/// Constant-velocity extrapolation from the current state; history is unused.
inline std::vector<TrajectoryPrediction> constant_velocity_predictor(std::span<const PedestrianState> pedestrians,
                                                                     const PedestrianHistory& /*history*/,
                                                                     int horizon, double dt) {
  std::vector<TrajectoryPrediction> out;
  out.reserve(pedestrians.size());
  for (const auto& p : pedestrians) {
    TrajectoryPrediction pred{p.id, horizon, {}};
    pred.predicted_positions.reserve(horizon);
    for (int k = 1; k <= horizon; ++k) pred.predicted_positions.push_back(p.position + (k * dt) * p.linear_velocity);
    out.push_back(std::move(pred));
  }
  return out;
}

inline std::vector<TrajectoryPrediction> predict_trajectories(std::span<const PedestrianState> pedestrians,
                                                              const PedestrianHistory& history, int horizon, double dt,
                                                              const TrajectoryPredictor& predictor = {}) {
  if (horizon < 1) throw std::invalid_argument("predict_trajectories: horizon must be >= 1");
  auto out = predictor ? predictor(pedestrians, history, horizon, dt)
                       : constant_velocity_predictor(pedestrians, history, horizon, dt);
  for (const auto& p : out)
    if (static_cast<int>(p.predicted_positions.size()) != horizon || p.horizon_steps != horizon)
      throw std::logic_error("predict_trajectories: predictor returned a trajectory of the wrong length");
  return out;
}

/**
 * Each pedestrian contributes -gamma^t to every cell its predicted trajectory
 * enters, where t counts distinct cells in order of first entry (t = 0 for the
 * first). Re-entering a cell adds nothing.
 */
inline Layer prediction_layer(const GridWindow& window, std::span<const TrajectoryPrediction> predictions,
                              double gamma_pred) {
  window.validate();
  if (!(gamma_pred > 0.0 && gamma_pred < 1.0))
    throw std::invalid_argument("prediction_layer: gamma_pred must lie in (0, 1)");
  Layer layer(window.state_count(), 0.0);
  std::vector<char> entered(window.state_count());
  for (const auto& pred : predictions) {
    std::fill(entered.begin(), entered.end(), 0);
    int order = 0;
    for (const auto& pos : pred.predicted_positions) {
      const auto s = window.state_of(pos);
      if (!s || entered[*s]) continue;
      entered[*s] = 1;
      layer[*s] -= std::pow(gamma_pred, order);
      ++order;
    }
  }
  return layer;
}

// ---------------------------------------------------------------------------
// Social distance
// ---------------------------------------------------------------------------

struct SocialDistanceParams {
  double alpha = 1.0;
  double beta = 2.0;
  double density_radius = 2.0;
  double d_social_min = 0.45;
  double d_social_max = 2.0;

  void validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("SocialDistanceParams: beta must be > 0");
    if (!(d_social_min > 0.0 && d_social_min < d_social_max))
      throw std::invalid_argument("SocialDistanceParams: need 0 < d_social_min < d_social_max");
    if (!(density_radius > 0.0)) throw std::invalid_argument("SocialDistanceParams: density_radius must be > 0");
  }
};

/// Comfort radius as a function of crowd density (persons / m^2). The fitted
/// curve only exists above 0.8824; density is floored just above that and the
/// result clamped to [d_social_min, d_social_max].
inline double social_distance(double rho_den, const SocialDistanceParams& params = {}) {
  if (rho_den < 0.0) throw std::invalid_argument("social_distance: density must be >= 0");
  constexpr double kDensityOffset = 0.8824;
  constexpr double kDensityFloor = 1e-3;
  const double rho = std::max(rho_den, kDensityOffset + kDensityFloor);
  const double d = 1.577 / std::pow(rho - kDensityOffset, 0.215) - 0.967;
  return std::clamp(d, params.d_social_min, params.d_social_max);
}

/// Neighbours of pedestrian `index` within `radius`, divided by the disc area.
inline double crowd_density(std::span<const PedestrianState> pedestrians, std::size_t index, double radius) {
  int neighbours = 0;
  for (std::size_t j = 0; j < pedestrians.size(); ++j)
    if (j != index && (pedestrians[j].position - pedestrians[index].position).norm() <= radius) ++neighbours;
  return neighbours / (kPi * radius * radius);
}

inline std::vector<double> social_radii(std::span<const PedestrianState> pedestrians,
                                        const SocialDistanceParams& params) {
  std::vector<double> radii(pedestrians.size());
  for (std::size_t i = 0; i < pedestrians.size(); ++i)
    radii[i] = social_distance(crowd_density(pedestrians, i, params.density_radius), params);
  return radii;
}

inline double social_penalty(double d, double d_social, const SocialDistanceParams& params) {
  if (d > d_social) return 0.0;
  const double ds_beta = std::pow(d_social, params.beta);
  return params.alpha * (std::pow(d, params.beta) - ds_beta) / ds_beta;
}

/// Per cell: penalty from the nearest pedestrian inside its social disc, 0 outside.
inline Layer social_layer(const GridWindow& window, std::span<const PedestrianState> pedestrians,
                          const SocialDistanceParams& params = {}) {
  window.validate();
  params.validate();
  Layer layer(window.state_count(), 0.0);
  if (pedestrians.empty()) return layer;
  const auto radii = social_radii(pedestrians, params);
  for (int s = 0; s < window.state_count(); ++s) {
    const Vec2 c = window.cell_center(s);
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pedestrians.size(); ++i) {
      const double d = (pedestrians[i].position - c).norm();
      if (d < best) {
        best = d;
        nearest = i;
      }
    }
    layer[s] = social_penalty(best, radii[nearest], params);
  }
  return layer;
}

// ---------------------------------------------------------------------------
// Full stack
// ---------------------------------------------------------------------------

struct FeatureConfig {
  int prediction_horizon = 30;
  double gamma_pred = 0.9;
  SocialDistanceParams social;
  RayCastParams rays;
  TrajectoryPredictor predictor;  // empty: constant velocity
};

/// The four layers stacked, each independently normalised.
inline FeatureMap build_feature_map(const WorldState& world, const GridWindow& window, const Vec2& waypoint,
                                    const FeatureConfig& config = {}, const PedestrianHistory& history = {}) {
  FeatureMap fm;
  fm.window = window;
  fm.names = FeatureMap::standard_names();
  const auto predictions =
      predict_trajectories(world.pedestrians, history, config.prediction_horizon, world.clock.dt, config.predictor);
  fm.layers.push_back(goal_distance_layer(window, waypoint));
  fm.layers.push_back(normalize_layer(obstacle_layer(window, world.obstacles, world.robot.position, config.rays)));
  fm.layers.push_back(normalize_layer(prediction_layer(window, predictions, config.gamma_pred)));
  fm.layers.push_back(normalize_layer(social_layer(window, world.pedestrians, config.social)));
  return fm;
}

}  // namespace socnav
