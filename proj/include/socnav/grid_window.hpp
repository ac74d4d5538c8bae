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

#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include "socnav/geometry.hpp"

namespace socnav {

struct Cell {
  int row = 0;  // along the window's forward axis
  int col = 0;  // along the window's left axis
  bool operator==(const Cell&) const = default;
};

/**
 * Robot-local m x m lattice of square cells.
 *
 * The window frame has x pointing along `orientation` (forward, rows) and y
 * to its left (columns). `origin` is the world position of the outer corner
 * of cell (0, 0). The metric footprint is [0, m*res) x [0, m*res) in window
 * coordinates: closed on the lower/left edges, open on the upper/right ones.
 * States are numbered row-major, s = row * m + col.
 */
struct GridWindow {
  Vec2 origin = Vec2::Zero();
  double orientation = 0.0;
  int cells_per_side = 3;
  double resolution = 1.0;

  bool operator==(const GridWindow&) const = default;

  void validate() const {
    if (cells_per_side < 2) throw std::invalid_argument("GridWindow: cells_per_side must be >= 2");
    if (!(resolution > 0.0)) throw std::invalid_argument("GridWindow: resolution must be > 0");
  }

  int state_count() const { return cells_per_side * cells_per_side; }
  double side_length() const { return cells_per_side * resolution; }
  double footprint_area() const { return side_length() * side_length(); }

  Vec2 forward_axis() const { return {std::cos(orientation), std::sin(orientation)}; }
  Vec2 left_axis() const { return {-std::sin(orientation), std::cos(orientation)}; }

  Vec2 to_local(const Vec2& world) const {
    const Vec2 d = world - origin;
    return {d.dot(forward_axis()), d.dot(left_axis())};
  }

  Vec2 to_world(const Vec2& local) const {
    return origin + local.x() * forward_axis() + local.y() * left_axis();
  }

  bool contains(const Vec2& world) const {
    const Vec2 p = to_local(world);
    const double side = side_length();
    return p.x() >= 0.0 && p.x() < side && p.y() >= 0.0 && p.y() < side;
  }

  /// Cell index of a local-frame point, possibly outside the window.
  Cell unbounded_cell_of_local(const Vec2& local) const {
    return {static_cast<int>(std::floor(local.x() / resolution)),
            static_cast<int>(std::floor(local.y() / resolution))};
  }

  bool in_bounds(const Cell& c) const {
    return c.row >= 0 && c.row < cells_per_side && c.col >= 0 && c.col < cells_per_side;
  }

  std::optional<Cell> cell_of(const Vec2& world) const {
    if (!contains(world)) return std::nullopt;
    Cell c = unbounded_cell_of_local(to_local(world));
    // floor() can land on m for points a rounding error below the open edge.
    c.row = std::min(c.row, cells_per_side - 1);
    c.col = std::min(c.col, cells_per_side - 1);
    return c;
  }

  std::optional<int> state_of(const Vec2& world) const {
    const auto c = cell_of(world);
    if (!c) return std::nullopt;
    return state_index(*c);
  }

  int state_index(const Cell& c) const { return c.row * cells_per_side + c.col; }
  Cell cell_at(int state) const { return {state / cells_per_side, state % cells_per_side}; }

  Vec2 cell_center(const Cell& c) const {
    return to_world({(c.row + 0.5) * resolution, (c.col + 0.5) * resolution});
  }
  Vec2 cell_center(int state) const { return cell_center(cell_at(state)); }

  /// Cell the robot occupies when the window is placed with `ahead_of`.
  Cell robot_cell() const { return {0, cells_per_side / 2}; }

  /// Window laterally centred on `robot` and extending forward along `bearing`,
  /// with the robot at the centre of its cell in the back row.
  static GridWindow ahead_of(const Vec2& robot, double bearing, int cells_per_side = 3,
                             double resolution = 1.0) {
    GridWindow w;
    w.orientation = wrap_angle(bearing);
    w.cells_per_side = cells_per_side;
    w.resolution = resolution;
    w.validate();
    const double lateral = (cells_per_side / 2 + 0.5) * resolution;
    w.origin = robot - 0.5 * resolution * w.forward_axis() - lateral * w.left_axis();
    return w;
  }
};

}  // namespace socnav
