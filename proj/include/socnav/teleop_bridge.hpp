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

// Teleoperation session: the message protocol and the per-tick state machine
// that turns a stream of driving commands into recorded demonstrations. The
// session is transport-agnostic and single-threaded; teleop_server.hpp puts it
// behind a WebSocket. docs/teleop_protocol.md documents the schema.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "socnav/crowd_sim.hpp"
#include "socnav/demo_archive.hpp"
#include "socnav/feature_stack.hpp"
#include "socnav/nav_runtime.hpp"
#include "socnav/reward_net.hpp"

namespace socnav {

inline constexpr const char* kTeleopSchema = "socnav.teleop/1";

enum class MessageKind { state_update, command, start_episode, end_episode, episode_saved, error };

inline std::string_view to_string(MessageKind k) {
  switch (k) {
    case MessageKind::state_update: return "state_update";
    case MessageKind::command: return "command";
    case MessageKind::start_episode: return "start_episode";
    case MessageKind::end_episode: return "end_episode";
    case MessageKind::episode_saved: return "episode_saved";
    case MessageKind::error: return "error";
  }
  return "error";
}

inline std::optional<MessageKind> message_kind_from_string(std::string_view s) {
  for (auto k : {MessageKind::state_update, MessageKind::command, MessageKind::start_episode,
                 MessageKind::end_episode, MessageKind::episode_saved, MessageKind::error})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct TeleopMessage {
  MessageKind kind = MessageKind::error;
  std::int64_t seq = 0;
  nlohmann::json payload = nlohmann::json::object();

  nlohmann::json to_json() const {
    return {{"schema", kTeleopSchema}, {"seq", seq}, {"kind", std::string(to_string(kind))}, {"payload", payload}};
  }
  std::string dump() const { return to_json().dump(); }

  /// Parses and validates the envelope; throws std::invalid_argument on malformed input.
  static TeleopMessage parse(const std::string& text) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("message must be a JSON object");
    if (j.value("schema", "") != kTeleopSchema) throw std::invalid_argument("unsupported schema, expected socnav.teleop/1");
    if (!j.contains("seq") || !j["seq"].is_number_integer()) throw std::invalid_argument("missing integer seq");
    if (!j.contains("kind") || !j["kind"].is_string()) throw std::invalid_argument("missing kind");
    const auto kind = message_kind_from_string(j["kind"].get<std::string>());
    if (!kind) throw std::invalid_argument("unknown kind " + j["kind"].get<std::string>());
    TeleopMessage m;
    m.kind = *kind;
    m.seq = j["seq"].get<std::int64_t>();
    if (j.contains("payload")) {
      if (!j["payload"].is_object()) throw std::invalid_argument("payload must be an object");
      m.payload = j["payload"];
    }
    return m;
  }
};

struct TeleopConfig {
  std::string session_id = "teleop";
  Scenario scenario;  // template for every episode; start_episode may override fields
  NavConfig nav;
  SimParams sim;
  double stale_after = 0.5;  // s of simulated time
  std::filesystem::path archive;  // empty: episodes are kept in memory only
};

/**
 * One UI client's session. The owner calls handle() for every inbound message
 * and tick() once per simulation tick; both return the outbound messages.
 * Commands are latest-wins and fall back to zero once older than stale_after.
 */
class TeleopSession {
 public:
  explicit TeleopSession(TeleopConfig config, std::optional<RewardModel> model = std::nullopt)
      : config_(std::move(config)), model_(std::move(model)) {
    config_.nav.validate();
    if (!(config_.stale_after > 0.0)) throw std::invalid_argument("TeleopSession: stale_after must be > 0");
  }

  bool recording() const { return runner_.has_value(); }
  const std::optional<EpisodeRunner>& runner() const { return runner_; }
  const std::vector<Demonstration>& saved() const { return saved_; }
  const TeleopConfig& config() const { return config_; }
  /// Velocity (world frame) the next tick would apply.
  Vec2 pending_command() const { return active_command(); }

  std::vector<TeleopMessage> handle(const std::string& text) {
    TeleopMessage m;
    try {
      m = TeleopMessage::parse(text);
    } catch (const std::invalid_argument& e) {
      return {error(e.what(), std::nullopt)};
    }
    return handle(m);
  }

  std::vector<TeleopMessage> handle(const TeleopMessage& m) {
    if (last_inbound_seq_ && m.seq <= *last_inbound_seq_)
      return {error("sequence number " + std::to_string(m.seq) + " is not greater than " +
                        std::to_string(*last_inbound_seq_),
                    m.seq)};
    last_inbound_seq_ = m.seq;
    try {
      switch (m.kind) {
        case MessageKind::command: return on_command(m);
        case MessageKind::start_episode: return on_start(m);
        case MessageKind::end_episode: return on_end(m);
        default: return {error("clients may not send " + std::string(to_string(m.kind)), m.seq)};
      }
    } catch (const std::exception& e) {
      return {error(e.what(), m.seq)};
    }
  }

  /// Advances one tick while recording and reports the resulting state.
  std::vector<TeleopMessage> tick() {
    std::vector<TeleopMessage> out;
    if (runner_) {
      runner_->step(active_command());
      if (runner_->finished()) {
        out.push_back(state_update());
        out.push_back(finish(true));
        return out;
      }
    }
    out.push_back(state_update());
    return out;
  }

  /// A new client connected: its sequence numbers start afresh.
  void reset_connection() { last_inbound_seq_.reset(); }

  TeleopMessage make_error(const std::string& what) { return error(what, std::nullopt); }

  /// Transport lost: an episode in progress is saved as incomplete.
  std::vector<TeleopMessage> disconnect() {
    if (!runner_) return {};
    runner_->end(false);
    return {finish(false)};
  }

  TeleopMessage state_update() {
    nlohmann::json p;
    p["recording"] = recording();
    if (!runner_) {
      p["episode"] = nullptr;
      return outbound(MessageKind::state_update, std::move(p));
    }
    const WorldState& w = runner_->world();
    const NavConfig& nav = config_.nav;
    p["episode"] = episode_id_;
    p["tick"] = w.clock.step_index;
    p["time"] = w.clock.time();
    p["robot"] = {{"position", io::vec(w.robot.position)}, {"heading", w.robot.heading}, {"speed", w.robot.speed}};
    p["goal"] = io::vec(w.robot_goal);
    p["waypoint"] = io::vec(runner_->track().current());
    const auto radii = social_radii(w.pedestrians, nav.features.social);
    nlohmann::json peds = nlohmann::json::array();
    for (std::size_t i = 0; i < w.pedestrians.size(); ++i) {
      const auto& ped = w.pedestrians[i];
      peds.push_back({{"id", ped.id},
                      {"position", io::vec(ped.position)},
                      {"velocity", io::vec(ped.linear_velocity)},
                      {"social_radius", radii[i]}});
    }
    p["pedestrians"] = std::move(peds);
    nlohmann::json obstacles = nlohmann::json::array();
    for (const auto& r : w.obstacles) obstacles.push_back(io::rect(r));
    p["obstacles"] = std::move(obstacles);
    const GridWindow win = window_for(w.robot, runner_->track().current(), nav);
    const double side = win.side_length();
    p["window"] = io::window(win);
    p["window"]["corners"] = {io::vec(win.to_world({0.0, 0.0})), io::vec(win.to_world({side, 0.0})),
                              io::vec(win.to_world({side, side})), io::vec(win.to_world({0.0, side}))};
    if (model_) {
      const RewardMap r = model_->forward(build_feature_map(w, win, runner_->track().current(), nav.features));
      nlohmann::json grid = nlohmann::json::array();
      for (int row = 0; row < win.cells_per_side; ++row) {
        nlohmann::json line = nlohmann::json::array();
        for (int col = 0; col < win.cells_per_side; ++col) line.push_back(r[win.state_index({row, col})]);
        grid.push_back(std::move(line));
      }
      p["reward_grid"] = std::move(grid);
    } else {
      p["reward_grid"] = nullptr;
    }
    return outbound(MessageKind::state_update, std::move(p));
  }

 private:
  std::vector<TeleopMessage> on_command(const TeleopMessage& m) {
    if (!m.payload.contains("linear")) throw std::invalid_argument("command payload needs 'linear': [vx, vy]");
    const Vec2 v = io::vec(m.payload.at("linear"));
    if (!v.allFinite()) throw std::invalid_argument("command velocity must be finite");
    const std::string frame = m.payload.value("frame", "robot");
    if (frame != "robot" && frame != "world") throw std::invalid_argument("frame must be 'robot' or 'world'");
    command_ = Command{v, frame == "robot", current_time()};
    return {};
  }

  std::vector<TeleopMessage> on_start(const TeleopMessage& m) {
    if (runner_) throw std::logic_error("an episode is already being recorded");
    Scenario s = config_.scenario;
    s.seed = config_.scenario.seed + static_cast<std::uint64_t>(episodes_started_);
    const auto& p = m.payload;
    if (p.contains("kind")) s.kind = scenario_kind_from_string(p.at("kind").get<std::string>());
    if (p.contains("pedestrian_count")) s.pedestrian_count = p.at("pedestrian_count").get<int>();
    if (p.contains("circle_radius")) s.circle_radius = p.at("circle_radius").get<double>();
    if (p.contains("seed")) s.seed = p.at("seed").get<std::uint64_t>();
    episode_id_ = config_.session_id + "-" + std::to_string(episodes_started_);
    runner_.emplace(s, config_.nav, config_.sim, episode_id_);
    ++episodes_started_;
    command_.reset();
    if (runner_->finished()) return {state_update(), finish(true)};
    return {state_update()};
  }

  std::vector<TeleopMessage> on_end(const TeleopMessage&) {
    if (!runner_) throw std::logic_error("no episode is being recorded");
    runner_->end(true);
    return {finish(true)};
  }

  TeleopMessage finish(bool connected) {
    Demonstration demo = runner_->demonstration();
    const Termination why = runner_->termination();
    runner_.reset();
    command_.reset();
    nlohmann::json p{{"episode", demo.id},
                     {"complete", demo.complete},
                     {"termination", std::string(to_string(why))},
                     {"steps", demo.robot_states.size()},
                     {"trajectory_length", demo.trajectory_length},
                     {"sudden_changes", demo.sudden_changes},
                     {"svcr", demo.svcr}};
    if (!config_.archive.empty()) {
      append_demonstration(config_.archive, ArchiveSettings{config_.sim, config_.nav}, demo);
      p["archive"] = config_.archive.string();
    } else {
      p["archive"] = nullptr;
    }
    p["connected"] = connected;
    saved_.push_back(std::move(demo));
    return outbound(MessageKind::episode_saved, std::move(p));
  }

  double current_time() const { return runner_ ? runner_->world().clock.time() : 0.0; }

  Vec2 active_command() const {
    if (!command_ || !runner_) return Vec2::Zero();
    if (current_time() - command_->received_at > config_.stale_after + 1e-9) return Vec2::Zero();
    if (!command_->robot_frame) return command_->velocity;
    // The robot frame is the grid window's: x towards the current waypoint, y to its left.
    const RobotState& robot = runner_->world().robot;
    return rotate(command_->velocity, bearing_to(robot.position, runner_->track().current(), robot.heading));
  }

  TeleopMessage error(const std::string& what, std::optional<std::int64_t> in_reply_to) {
    nlohmann::json p{{"message", what}};
    p["in_reply_to"] = in_reply_to ? nlohmann::json(*in_reply_to) : nlohmann::json(nullptr);
    return outbound(MessageKind::error, std::move(p));
  }

  TeleopMessage outbound(MessageKind kind, nlohmann::json payload) { return {kind, ++out_seq_, std::move(payload)}; }

  struct Command {
    Vec2 velocity;
    bool robot_frame;
    double received_at;  // simulated time
  };

  TeleopConfig config_;
  std::optional<RewardModel> model_;
  std::optional<EpisodeRunner> runner_;
  std::optional<Command> command_;
  std::optional<std::int64_t> last_inbound_seq_;
  std::int64_t out_seq_ = 0;
  int episodes_started_ = 0;
  std::string episode_id_;
  std::vector<Demonstration> saved_;
};

}  // namespace socnav
