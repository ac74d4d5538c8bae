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

// Demonstration archives as JSON Lines.
//
//   {"record":"archive", "format":"socnav.demo_archive", "version":1, "sim":{...}, "nav":{...}}
//   {"record":"episode", "id":..., "scenario":{...}, "dt":..., "steps":N, "windows":W, ...}
//   {"record":"step", "episode":..., "t":0, "robot":{...}, "command":[vx,vy] | null, "pedestrians":[...]}
//   ... N step records, then W window records:
//   {"record":"window", "episode":..., "step":..., "window":{...}, "waypoint":[x,y], "goal_state":..,
//    "visited":[...], "names":[...], "layers":[[...], ...]}
//
// Doubles are written in shortest round-trip form, so reading an archive
// reproduces every stored value bit for bit.

#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "socnav/crowd_sim.hpp"
#include "socnav/feature_stack.hpp"
#include "socnav/nav_runtime.hpp"
#include "socnav/tmedirl.hpp"

namespace socnav {

inline constexpr int kArchiveVersion = 1;
inline constexpr const char* kArchiveFormat = "socnav.demo_archive";

using nlohmann::json;

// ---------------------------------------------------------------------------
// Value conversions
// ---------------------------------------------------------------------------

namespace io {

inline json vec(const Vec2& v) { return json::array({v.x(), v.y()}); }

inline Vec2 vec(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::runtime_error("expected a 2-element array, got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json rect(const Rect& r) { return json::array({r.min_x, r.min_y, r.max_x, r.max_y}); }

inline Rect rect(const json& j) {
  if (!j.is_array() || j.size() != 4) throw std::runtime_error("expected [min_x, min_y, max_x, max_y], got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

inline json scenario(const Scenario& s) {
  json obstacles = json::array();
  for (const auto& r : s.static_obstacles) obstacles.push_back(rect(r));
  return {{"kind", std::string(to_string(s.kind))},
          {"pedestrian_count", s.pedestrian_count},
          {"circle_radius", s.circle_radius},
          {"seed", s.seed},
          {"static_obstacles", obstacles}};
}

inline Scenario scenario(const json& j) {
  Scenario s;
  s.kind = scenario_kind_from_string(j.at("kind").get<std::string>());
  s.pedestrian_count = j.at("pedestrian_count").get<int>();
  s.circle_radius = j.at("circle_radius").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& r : j.at("static_obstacles")) s.static_obstacles.push_back(rect(r));
  return s;
}

inline json sim_params(const SimParams& p) {
  return {{"dt", p.dt},
          {"relaxation_time", p.relaxation_time},
          {"desired_speed", p.desired_speed},
          {"max_pedestrian_speed", p.max_pedestrian_speed},
          {"arrival_radius", p.arrival_radius},
          {"goal_tolerance", p.goal_tolerance},
          {"pedestrian_radius", p.pedestrian_radius},
          {"repulsion_strength", p.repulsion_strength},
          {"repulsion_range", p.repulsion_range},
          {"anisotropy", p.anisotropy},
          {"obstacle_strength", p.obstacle_strength},
          {"obstacle_range", p.obstacle_range},
          {"robot_radius", p.robot_radius},
          {"robot_repulsion_strength", p.robot_repulsion_strength},
          {"robot_repulsion", p.robot_repulsion},
          {"robot_anticipation", p.robot_anticipation},
          {"robot_max_speed", p.robot_max_speed},
          {"min_spacing", p.min_spacing},
          {"turnaround_radius", p.turnaround_radius}};
}

inline SimParams sim_params(const json& j) {
  SimParams p;
  p.dt = j.at("dt").get<double>();
  p.relaxation_time = j.at("relaxation_time").get<double>();
  p.desired_speed = j.at("desired_speed").get<double>();
  p.max_pedestrian_speed = j.at("max_pedestrian_speed").get<double>();
  p.arrival_radius = j.at("arrival_radius").get<double>();
  p.goal_tolerance = j.at("goal_tolerance").get<double>();
  p.pedestrian_radius = j.at("pedestrian_radius").get<double>();
  p.repulsion_strength = j.at("repulsion_strength").get<double>();
  p.repulsion_range = j.at("repulsion_range").get<double>();
  p.anisotropy = j.at("anisotropy").get<double>();
  p.obstacle_strength = j.at("obstacle_strength").get<double>();
  p.obstacle_range = j.at("obstacle_range").get<double>();
  p.robot_radius = j.at("robot_radius").get<double>();
  p.robot_repulsion_strength = j.at("robot_repulsion_strength").get<double>();
  p.robot_repulsion = j.at("robot_repulsion").get<bool>();
  p.robot_anticipation = j.at("robot_anticipation").get<double>();
  p.robot_max_speed = j.at("robot_max_speed").get<double>();
  p.min_spacing = j.at("min_spacing").get<double>();
  p.turnaround_radius = j.at("turnaround_radius").get<double>();
  return p;
}

inline json nav_config(const NavConfig& c) {
  const auto& f = c.features;
  return {{"waypoint_spacing", c.waypoint_spacing},
          {"waypoint_advance_radius", c.waypoint_advance_radius},
          {"goal_radius", c.goal_radius},
          {"collision_radius", c.collision_radius},
          {"timeout", c.timeout},
          {"kp", c.kp},
          {"cells_per_side", c.cells_per_side},
          {"resolution", c.resolution},
          {"gamma_mdp", c.gamma_mdp},
          {"diagonal_actions", c.diagonal_actions},
          {"max_window_ticks", c.max_window_ticks},
          {"prediction_horizon", f.prediction_horizon},
          {"gamma_pred", f.gamma_pred},
          {"social_alpha", f.social.alpha},
          {"social_beta", f.social.beta},
          {"density_radius", f.social.density_radius},
          {"d_social_min", f.social.d_social_min},
          {"d_social_max", f.social.d_social_max},
          {"ray_step_deg", f.rays.angular_step_deg},
          {"ray_max_range", f.rays.max_range},
          {"v_thrd", c.svcr.v_thrd},
          {"omega_thrd", c.svcr.omega_thrd}};
}

inline NavConfig nav_config(const json& j) {
  NavConfig c;
  c.waypoint_spacing = j.at("waypoint_spacing").get<double>();
  c.waypoint_advance_radius = j.at("waypoint_advance_radius").get<double>();
  c.goal_radius = j.at("goal_radius").get<double>();
  c.collision_radius = j.at("collision_radius").get<double>();
  c.timeout = j.at("timeout").get<double>();
  c.kp = j.at("kp").get<double>();
  c.cells_per_side = j.at("cells_per_side").get<int>();
  c.resolution = j.at("resolution").get<double>();
  c.gamma_mdp = j.at("gamma_mdp").get<double>();
  c.diagonal_actions = j.at("diagonal_actions").get<bool>();
  c.max_window_ticks = j.at("max_window_ticks").get<int>();
  c.features.prediction_horizon = j.at("prediction_horizon").get<int>();
  c.features.gamma_pred = j.at("gamma_pred").get<double>();
  c.features.social.alpha = j.at("social_alpha").get<double>();
  c.features.social.beta = j.at("social_beta").get<double>();
  c.features.social.density_radius = j.at("density_radius").get<double>();
  c.features.social.d_social_min = j.at("d_social_min").get<double>();
  c.features.social.d_social_max = j.at("d_social_max").get<double>();
  c.features.rays.angular_step_deg = j.at("ray_step_deg").get<double>();
  c.features.rays.max_range = j.at("ray_max_range").get<double>();
  c.svcr.v_thrd = j.at("v_thrd").get<double>();
  c.svcr.omega_thrd = j.at("omega_thrd").get<double>();
  return c;
}

inline json robot(const RobotState& r) {
  return {{"position", vec(r.position)}, {"heading", r.heading}, {"speed", r.speed}};
}

inline RobotState robot(const json& j) {
  return {vec(j.at("position")), j.at("heading").get<double>(), j.at("speed").get<double>()};
}

inline json pedestrian(const PedestrianState& p) {
  return {{"id", p.id},
          {"position", vec(p.position)},
          {"linear_velocity", vec(p.linear_velocity)},
          {"angular_velocity", p.angular_velocity},
          {"goal", vec(p.goal)},
          {"heading", p.heading},
          {"home", vec(p.home)}};
}

inline PedestrianState pedestrian(const json& j) {
  PedestrianState p;
  p.id = j.at("id").get<int>();
  p.position = vec(j.at("position"));
  p.linear_velocity = vec(j.at("linear_velocity"));
  p.angular_velocity = j.at("angular_velocity").get<double>();
  p.goal = vec(j.at("goal"));
  p.heading = j.at("heading").get<double>();
  p.home = vec(j.at("home"));
  return p;
}

inline json window(const GridWindow& w) {
  return {{"origin", vec(w.origin)},
          {"orientation", w.orientation},
          {"cells_per_side", w.cells_per_side},
          {"resolution", w.resolution}};
}

inline GridWindow window(const json& j) {
  GridWindow w;
  w.origin = vec(j.at("origin"));
  w.orientation = j.at("orientation").get<double>();
  w.cells_per_side = j.at("cells_per_side").get<int>();
  w.resolution = j.at("resolution").get<double>();
  w.validate();
  return w;
}

}  // namespace io

// ---------------------------------------------------------------------------
// Archive
// ---------------------------------------------------------------------------

/// Everything besides the raw states needed to recompute features and scores.
struct ArchiveSettings {
  SimParams sim;
  NavConfig nav;
};

struct DemoArchive {
  int version = kArchiveVersion;
  ArchiveSettings settings;
  std::vector<Demonstration> demonstrations;
};

inline void write_archive_header(std::ostream& os, const ArchiveSettings& s) {
  const json j{{"record", "archive"},
               {"format", kArchiveFormat},
               {"version", kArchiveVersion},
               {"sim", io::sim_params(s.sim)},
               {"nav", io::nav_config(s.nav)}};
  os << j.dump() << '\n';
}

inline void write_demonstration(std::ostream& os, const Demonstration& d) {
  if (d.robot_states.size() != d.pedestrian_history.size() || d.commands.size() + 1 != d.robot_states.size())
    throw std::invalid_argument("write_demonstration: inconsistent state and command counts");
  const json header{{"record", "episode"},
                    {"id", d.id},
                    {"scenario", io::scenario(d.scenario)},
                    {"dt", d.dt},
                    {"steps", d.robot_states.size()},
                    {"windows", d.windows.size()},
                    {"trajectory_length", d.trajectory_length},
                    {"sudden_changes", d.sudden_changes},
                    {"svcr", d.svcr},
                    {"complete", d.complete}};
  os << header.dump() << '\n';
  for (std::size_t t = 0; t < d.robot_states.size(); ++t) {
    json peds = json::array();
    for (const auto& p : d.pedestrian_history[t]) peds.push_back(io::pedestrian(p));
    const json step{{"record", "step"},
                    {"episode", d.id},
                    {"t", t},
                    {"robot", io::robot(d.robot_states[t])},
                    {"command", t < d.commands.size() ? io::vec(d.commands[t]) : json(nullptr)},
                    {"pedestrians", peds}};
    os << step.dump() << '\n';
  }
  for (const auto& w : d.windows) {
    const json rec{{"record", "window"},
                   {"episode", d.id},
                   {"step", w.step},
                   {"window", io::window(w.window)},
                   {"waypoint", io::vec(w.waypoint)},
                   {"goal_state", w.goal_state ? json(*w.goal_state) : json(nullptr)},
                   {"visited", w.visited},
                   {"names", w.features.names},
                   {"layers", w.features.layers}};
    os << rec.dump() << '\n';
  }
}

namespace detail {

inline json parse_line(const std::string& line, std::size_t number) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw std::runtime_error("archive line " + std::to_string(number) + ": " + e.what());
  }
}

inline void expect_record(const json& j, const char* kind, std::size_t number) {
  if (j.value("record", "") != kind)
    throw std::runtime_error("archive line " + std::to_string(number) + ": expected a '" + kind + "' record");
}

}  // namespace detail

inline DemoArchive read_archive(std::istream& is) {
  DemoArchive archive;
  std::string line;
  std::size_t number = 0;
  auto next = [&]() -> std::optional<json> {
    while (std::getline(is, line)) {
      ++number;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      return detail::parse_line(line, number);
    }
    return std::nullopt;
  };

  const auto head = next();
  if (!head) throw std::runtime_error("read_archive: empty archive");
  detail::expect_record(*head, "archive", number);
  if (head->value("format", "") != kArchiveFormat) throw std::runtime_error("read_archive: not a demonstration archive");
  if (!head->contains("version")) throw std::runtime_error("read_archive: missing version");
  archive.version = head->at("version").get<int>();
  if (archive.version != kArchiveVersion)
    throw std::runtime_error("read_archive: unsupported version " + std::to_string(archive.version));
  archive.settings.sim = io::sim_params(head->at("sim"));
  archive.settings.nav = io::nav_config(head->at("nav"));

  while (const auto ep = next()) {
    detail::expect_record(*ep, "episode", number);
    Demonstration d;
    d.id = ep->at("id").get<std::string>();
    d.scenario = io::scenario(ep->at("scenario"));
    d.dt = ep->at("dt").get<double>();
    d.trajectory_length = ep->at("trajectory_length").get<double>();
    d.sudden_changes = ep->at("sudden_changes").get<int>();
    d.svcr = ep->at("svcr").get<double>();
    d.complete = ep->at("complete").get<bool>();
    const auto steps = ep->at("steps").get<std::size_t>();
    const auto windows = ep->at("windows").get<std::size_t>();
    for (std::size_t t = 0; t < steps; ++t) {
      const auto s = next();
      if (!s) throw std::runtime_error("read_archive: episode " + d.id + " is truncated");
      detail::expect_record(*s, "step", number);
      if (s->at("t").get<std::size_t>() != t) throw std::runtime_error("read_archive: steps out of order in " + d.id);
      d.robot_states.push_back(io::robot(s->at("robot")));
      std::vector<PedestrianState> peds;
      for (const auto& p : s->at("pedestrians")) peds.push_back(io::pedestrian(p));
      d.pedestrian_history.push_back(std::move(peds));
      const auto& cmd = s->at("command");
      if (!cmd.is_null()) d.commands.push_back(io::vec(cmd));
    }
    if (d.commands.size() + 1 != d.robot_states.size())
      throw std::runtime_error("read_archive: command count does not match steps in " + d.id);
    for (std::size_t k = 0; k < windows; ++k) {
      const auto w = next();
      if (!w) throw std::runtime_error("read_archive: episode " + d.id + " is truncated");
      detail::expect_record(*w, "window", number);
      WindowRecord rec;
      rec.step = w->at("step").get<int>();
      rec.window = io::window(w->at("window"));
      rec.waypoint = io::vec(w->at("waypoint"));
      if (!w->at("goal_state").is_null()) rec.goal_state = w->at("goal_state").get<int>();
      rec.visited = w->at("visited").get<std::vector<int>>();
      rec.features.window = rec.window;
      rec.features.names = w->at("names").get<std::vector<std::string>>();
      rec.features.layers = w->at("layers").get<std::vector<Layer>>();
      if (rec.features.names.size() != rec.features.layers.size())
        throw std::runtime_error("read_archive: layer names and layers differ in count in " + d.id);
      for (const auto& l : rec.features.layers)
        if (static_cast<int>(l.size()) != rec.window.state_count())
          throw std::runtime_error("read_archive: layer size does not match the window in " + d.id);
      for (int s : rec.visited)
        if (s < 0 || s >= rec.window.state_count()) throw std::runtime_error("read_archive: visited state out of range");
      d.windows.push_back(std::move(rec));
    }
    archive.demonstrations.push_back(std::move(d));
  }
  return archive;
}

inline void write_archive(std::ostream& os, const DemoArchive& archive) {
  write_archive_header(os, archive.settings);
  for (const auto& d : archive.demonstrations) write_demonstration(os, d);
}

inline DemoArchive load_archive(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open archive " + path.string());
  return read_archive(in);
}

inline void save_archive(const std::filesystem::path& path, const DemoArchive& archive) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write archive " + path.string());
  write_archive(out, archive);
}

/// Appends one episode, writing the header first when the file is new or empty.
/// An existing archive must have been written with the same settings.
inline void append_demonstration(const std::filesystem::path& path, const ArchiveSettings& settings,
                                 const Demonstration& demo) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  if (!fresh) {
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    const json head = detail::parse_line(first, 1);
    detail::expect_record(head, "archive", 1);
    if (head.at("sim") != io::sim_params(settings.sim) || head.at("nav") != io::nav_config(settings.nav))
      throw std::runtime_error("append_demonstration: archive " + path.string() + " uses different settings");
  }
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot write archive " + path.string());
  if (fresh) write_archive_header(out, settings);
  write_demonstration(out, demo);
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

/// World at tick t rebuilt from the recorded raw state.
inline WorldState world_at(const Demonstration& d, std::size_t t, const ArchiveSettings& settings) {
  if (t >= d.robot_states.size()) throw std::out_of_range("world_at: tick out of range");
  WorldState w = make_scenario(d.scenario, settings.sim);
  w.clock.step_index = static_cast<std::int64_t>(t);
  w.clock.dt = d.dt;
  w.robot = d.robot_states[t];
  w.pedestrians = d.pedestrian_history[t];
  return w;
}

/// Feature maps of every window recomputed from raw states.
inline std::vector<FeatureMap> recompute_features(const Demonstration& d, const ArchiveSettings& settings) {
  std::vector<FeatureMap> out;
  for (const auto& w : d.windows)
    out.push_back(build_feature_map(world_at(d, static_cast<std::size_t>(w.step), settings), w.window, w.waypoint,
                                    settings.nav.features));
  return out;
}

/// True when every stored feature map equals its recomputation exactly.
inline bool features_replay_exactly(const Demonstration& d, const ArchiveSettings& settings) {
  const auto fresh = recompute_features(d, settings);
  for (std::size_t k = 0; k < d.windows.size(); ++k)
    if (!(fresh[k] == d.windows[k].features)) return false;
  return true;
}

/// Re-simulates the episode from its scenario under the recorded commands.
inline Demonstration replay_commands(const Demonstration& d, const ArchiveSettings& settings) {
  return collect_demo(d.scenario, recorded_source(d.commands, !d.complete), settings.nav, settings.sim, d.id);
}

}  // namespace socnav
