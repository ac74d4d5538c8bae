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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include <Eigen/Core>

namespace socnav {

using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

inline Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

inline Vec2 clamp_norm(const Vec2& v, double max_norm) {
  const double n = v.norm();
  if (n > max_norm && n > 0.0) return v * (max_norm / n);
  return v;
}

/// Axis-aligned rectangle, closed on all sides.
struct Rect {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  bool contains(const Vec2& p) const {
    return p.x() >= min_x && p.x() <= max_x && p.y() >= min_y && p.y() <= max_y;
  }

  Vec2 closest_point(const Vec2& p) const {
    return {std::clamp(p.x(), min_x, max_x), std::clamp(p.y(), min_y, max_y)};
  }

  bool operator==(const Rect&) const = default;
};

/// Distance along the ray origin + t * dir (t >= 0) to the first point of the
/// rectangle, or nullopt on a miss. An origin inside the rectangle hits at 0.
inline std::optional<double> ray_rect_hit(const Vec2& origin, const Vec2& dir, const Rect& r) {
  if (r.contains(origin)) return 0.0;
  double t_near = 0.0;
  double t_far = std::numeric_limits<double>::infinity();
  const double lo[2] = {r.min_x, r.min_y};
  const double hi[2] = {r.max_x, r.max_y};
  for (int axis = 0; axis < 2; ++axis) {
    const double o = origin[axis];
    const double d = dir[axis];
    if (std::abs(d) < 1e-15) {
      if (o < lo[axis] || o > hi[axis]) return std::nullopt;
      continue;
    }
    double t0 = (lo[axis] - o) / d;
    double t1 = (hi[axis] - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  return t_near;
}

}  // namespace socnav
