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

#include <filesystem>
#include <sstream>

#include "socnav/teleop_bridge.hpp"
#include "socnav/teleop_server.hpp"

namespace socnav {
namespace {

using nlohmann::json;

std::string msg(const std::string& kind, std::int64_t seq, json payload = json::object()) {
  return json{{"schema", kTeleopSchema}, {"seq", seq}, {"kind", kind}, {"payload", payload}}.dump();
}

std::string command(std::int64_t seq, double vx, double vy, const std::string& frame = "robot") {
  return msg("command", seq, {{"linear", {vx, vy}}, {"frame", frame}});
}

TeleopConfig config(int pedestrians = 2) {
  TeleopConfig c;
  c.scenario.pedestrian_count = pedestrians;
  c.scenario.seed = 11;
  return c;
}

std::string bytes(const Demonstration& d) {
  std::ostringstream os;
  write_demonstration(os, d);
  return os.str();
}

TEST(TeleopMessage, ParsesAndRejects) {
  const TeleopMessage m = TeleopMessage::parse(command(3, 0.1, 0.2));
  EXPECT_EQ(m.kind, MessageKind::command);
  EXPECT_EQ(m.seq, 3);
  EXPECT_EQ(TeleopMessage::parse(m.dump()).to_json(), m.to_json());
  EXPECT_THROW(TeleopMessage::parse("{"), std::invalid_argument);
  EXPECT_THROW(TeleopMessage::parse("[1]"), std::invalid_argument);
  EXPECT_THROW(TeleopMessage::parse(R"({"schema":"other/1","seq":1,"kind":"command"})"), std::invalid_argument);
  EXPECT_THROW(TeleopMessage::parse(R"({"schema":"socnav.teleop/1","seq":"1","kind":"command"})"),
               std::invalid_argument);
  EXPECT_THROW(TeleopMessage::parse(R"({"schema":"socnav.teleop/1","seq":1,"kind":"fly"})"), std::invalid_argument);
  EXPECT_THROW(TeleopMessage::parse(R"({"schema":"socnav.teleop/1","seq":1,"kind":"command","payload":3})"),
               std::invalid_argument);
}

TEST(TeleopSession, IdleSessionReportsNoEpisode) {
  TeleopSession s(config());
  const auto out = s.tick();
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].kind, MessageKind::state_update);
  EXPECT_FALSE(out[0].payload["recording"].get<bool>());
  EXPECT_TRUE(out[0].payload["episode"].is_null());
}

TEST(TeleopSession, HoldsStillWithoutCommands) {
  TeleopSession s(config());
  s.handle(msg("start_episode", 1));
  const Vec2 start = s.runner()->world().robot.position;
  for (int k = 0; k < 3; ++k) s.tick();
  EXPECT_EQ(s.runner()->world().robot.position, start);
}

TEST(TeleopSession, RobotFrameCommandDrivesTowardsTheWaypoint) {
  TeleopSession s(config(0));
  s.handle(msg("start_episode", 1));
  const Vec2 start = s.runner()->world().robot.position;  // (0, -4), waypoint straight up
  EXPECT_TRUE(s.handle(command(2, 0.5, 0.0)).empty());
  s.tick();
  const Vec2 moved = s.runner()->world().robot.position - start;
  EXPECT_NEAR(moved.x(), 0.0, 1e-12);
  EXPECT_NEAR(moved.y(), 0.05, 1e-12);
  s.handle(command(3, 0.5, 0.0, "world"));
  s.tick();
  EXPECT_NEAR((s.runner()->world().robot.position - start).x(), 0.05, 1e-12);
}

TEST(TeleopSession, StaleCommandsDecayToZero) {
  TeleopSession s(config(0));
  s.handle(msg("start_episode", 1));
  s.handle(command(2, 0.4, 0.0));
  for (int k = 0; k < 5; ++k) s.tick();  // 0.5 s: still fresh
  EXPECT_GT(s.pending_command().norm(), 0.0);
  s.tick();
  EXPECT_EQ(s.pending_command(), Vec2::Zero());
  const Vec2 held = s.runner()->world().robot.position;
  s.tick();
  EXPECT_EQ(s.runner()->world().robot.position, held);
}

TEST(TeleopSession, SequenceAndProtocolErrorsKeepTheSessionAlive) {
  TeleopSession s(config());
  s.handle(msg("start_episode", 5));
  auto out = s.handle(command(5, 1.0, 0.0));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].kind, MessageKind::error);
  EXPECT_EQ(out[0].payload["in_reply_to"], 5);

  out = s.handle("not json");
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].kind, MessageKind::error);
  EXPECT_TRUE(out[0].payload["in_reply_to"].is_null());

  EXPECT_EQ(s.handle(msg("state_update", 6))[0].kind, MessageKind::error);
  EXPECT_EQ(s.handle(msg("start_episode", 7))[0].kind, MessageKind::error);  // already recording
  EXPECT_EQ(s.handle(msg("command", 8, {{"linear", {1.0}}}))[0].kind, MessageKind::error);
  EXPECT_EQ(s.handle(msg("command", 9, {{"linear", {1.0, 0.0}}, {"frame", "map"}}))[0].kind, MessageKind::error);

  EXPECT_TRUE(s.handle(command(10, 0.5, 0.0)).empty());
  EXPECT_TRUE(s.recording());
  EXPECT_GT(s.pending_command().norm(), 0.0);

  // Outbound sequence numbers increase strictly.
  std::int64_t last = 0;
  for (const auto& m : s.tick()) {
    EXPECT_GT(m.seq, last);
    last = m.seq;
  }
}

TEST(TeleopSession, StateUpdateCarriesTheWorld) {
  TeleopSession plain(config(3));
  plain.handle(msg("start_episode", 1));
  const json p = plain.tick()[0].payload;
  EXPECT_EQ(p["tick"], 1);
  EXPECT_EQ(p["pedestrians"].size(), 3u);
  EXPECT_TRUE(p["pedestrians"][0].contains("social_radius"));
  EXPECT_EQ(p["window"]["corners"].size(), 4u);
  EXPECT_TRUE(p["reward_grid"].is_null());

  TeleopSession with_model(config(3), RewardModel::initialize({4, 8, 1}, 1));
  with_model.handle(msg("start_episode", 1));
  const json q = with_model.tick()[0].payload;
  ASSERT_EQ(q["reward_grid"].size(), 3u);
  EXPECT_EQ(q["reward_grid"][0].size(), 3u);
}

TEST(TeleopSession, EndSavesACompleteEpisode) {
  TeleopSession s(config());
  s.handle(msg("start_episode", 1, {{"pedestrian_count", 4}, {"seed", 99}}));
  s.handle(command(2, 0.8, 0.1));
  for (int k = 0; k < 10; ++k) s.tick();
  const auto out = s.handle(msg("end_episode", 3));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].kind, MessageKind::episode_saved);
  EXPECT_TRUE(out[0].payload["complete"].get<bool>());
  EXPECT_EQ(out[0].payload["steps"], 11);
  ASSERT_EQ(s.saved().size(), 1u);
  EXPECT_EQ(s.saved()[0].scenario.seed, 99u);
  EXPECT_EQ(s.saved()[0].scenario.pedestrian_count, 4);
  EXPECT_FALSE(s.recording());
}

TEST(TeleopSession, DisconnectSavesAnIncompleteEpisode) {
  TeleopSession s(config());
  EXPECT_TRUE(s.disconnect().empty());
  s.handle(msg("start_episode", 1));
  s.handle(command(2, 0.8, 0.0));
  for (int k = 0; k < 4; ++k) s.tick();
  const auto out = s.disconnect();
  ASSERT_EQ(out.size(), 1u);
  EXPECT_FALSE(out[0].payload["complete"].get<bool>());
  EXPECT_FALSE(out[0].payload["connected"].get<bool>());
  EXPECT_FALSE(s.saved()[0].complete);
  EXPECT_TRUE(training_demonstrations(s.saved()).empty());
  // A new client starts its own sequence.
  s.reset_connection();
  EXPECT_EQ(s.handle(msg("start_episode", 1))[0].kind, MessageKind::state_update);
}

TEST(TeleopSession, GoalReachedEndsTheEpisode) {
  TeleopSession s(config(0));
  s.handle(msg("start_episode", 1, {{"circle_radius", 0.5}}));
  std::vector<TeleopMessage> out;
  for (int k = 0; k < 20 && s.recording(); ++k) {
    s.handle(command(2 + k, 1.0, 0.0));
    out = s.tick();
  }
  ASSERT_FALSE(s.recording());
  EXPECT_EQ(out.back().kind, MessageKind::episode_saved);
  EXPECT_EQ(out.back().payload["termination"], "goal");
}

TEST(TeleopSession, ScriptedClientReplayIsByteIdentical) {
  // The same inbound script and tick pattern, run twice, and then the saved
  // demo re-simulated from its command log: all three match byte for byte.
  auto run = [] {
    TeleopSession s(config(4));
    std::int64_t seq = 0;
    s.handle(msg("start_episode", ++seq));
    for (int k = 0; k < 40; ++k) {
      if (k % 3 == 0) s.handle(command(++seq, 0.9 * std::cos(0.2 * k), 0.5 * std::sin(0.3 * k)));
      s.tick();
    }
    s.handle(msg("end_episode", ++seq));
    return s.saved().at(0);
  };
  const Demonstration a = run(), b = run();
  EXPECT_EQ(bytes(a), bytes(b));
  const TeleopConfig c = config(4);
  EXPECT_EQ(bytes(replay_commands(a, {c.sim, c.nav})), bytes(a));
}

TEST(TeleopSession, ArchivedEpisodeRescoresToTheStoredSvcr) {
  const auto path = std::filesystem::temp_directory_path() / "socnav_teleop_archive.jsonl";
  std::filesystem::remove(path);
  TeleopConfig c = config(6);
  c.archive = path;
  TeleopSession s(c);
  s.handle(msg("start_episode", 1));
  for (int k = 0; k < 60; ++k) {
    if (k % 4 == 0) s.handle(command(2 + k, 1.0, (k % 8 == 0) ? 0.6 : -0.6));
    s.tick();
  }
  const auto out = s.handle(msg("end_episode", 1000));
  EXPECT_EQ(out[0].payload["archive"], path.string());
  const DemoArchive archive = load_archive(path);
  ASSERT_EQ(archive.demonstrations.size(), 1u);
  const Demonstration& d = archive.demonstrations[0];
  EXPECT_EQ(compute_svcr(d, archive.settings.nav.svcr).rate, out[0].payload["svcr"].get<double>());
  EXPECT_EQ(d.svcr, s.saved()[0].svcr);
  EXPECT_TRUE(features_replay_exactly(d, archive.settings));
  std::filesystem::remove(path);
}

// ---------------------------------------------------------------------------
// Over a real socket
// ---------------------------------------------------------------------------

namespace net = boost::asio;
namespace websocket = boost::beast::websocket;

class Client {
 public:
  explicit Client(unsigned short port) : ws_(ioc_) {
    net::ip::tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/");
    ws_.text(true);
  }

  void send(const std::string& text) { ws_.write(net::buffer(text)); }

  TeleopMessage read() {
    boost::beast::flat_buffer buf;
    ws_.read(buf);
    return TeleopMessage::parse(boost::beast::buffers_to_string(buf.data()));
  }

  /// Reads until a message of `kind` arrives; gives up after `limit` messages.
  std::optional<TeleopMessage> await(MessageKind kind, int limit = 500) {
    for (int k = 0; k < limit; ++k) {
      TeleopMessage m = read();
      if (m.kind == kind) return m;
    }
    return std::nullopt;
  }

  /// Reads until a state update reports an episode in progress.
  bool await_recording(int limit = 500) {
    for (int k = 0; k < limit; ++k) {
      const TeleopMessage m = read();
      if (m.kind == MessageKind::state_update && m.payload["recording"].get<bool>()) return true;
    }
    return false;
  }

  void drop() {
    boost::system::error_code ec;
    ws_.next_layer().close(ec);
  }

 private:
  net::io_context ioc_;
  websocket::stream<net::ip::tcp::socket> ws_;
};

TEST(TeleopServer, RecordsAnEpisodeOverWebSocket) {
  ServerOptions opts;
  opts.port = 0;
  opts.tick_period = std::chrono::milliseconds(5);
  TeleopServer server(config(2), opts);
  server.start();
  ASSERT_NE(server.port(), 0);
  {
    Client client(server.port());
    client.send(msg("start_episode", 1));
    client.send(command(2, 0.7, 0.0));
    const auto update = client.await(MessageKind::state_update);
    ASSERT_TRUE(update);
    // Let some recorded ticks pass, then finish.
    int recorded = 0;
    while (recorded < 10) {
      const auto m = client.await(MessageKind::state_update);
      ASSERT_TRUE(m);
      if (m->payload["recording"].get<bool>()) ++recorded;
    }
    client.send("garbage");
    const auto err = client.await(MessageKind::error);
    ASSERT_TRUE(err);
    client.send(msg("end_episode", 3));
    const auto saved = client.await(MessageKind::episode_saved);
    ASSERT_TRUE(saved);
    EXPECT_TRUE(saved->payload["complete"].get<bool>());

    // Second episode, cut short by dropping the connection.
    client.send(msg("start_episode", 4));
    client.send(command(5, 0.5, 0.2));
    ASSERT_TRUE(client.await_recording());
    client.drop();
  }
  std::vector<Demonstration> saved;
  for (int k = 0; k < 400 && saved.size() < 2; ++k) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    saved = server.saved();
  }
  server.stop();
  ASSERT_EQ(saved.size(), 2u);
  EXPECT_TRUE(saved[0].complete);
  EXPECT_GT(saved[0].commands.size(), 9u);
  EXPECT_FALSE(saved[1].complete);
  const TeleopConfig c = config(2);
  EXPECT_EQ(bytes(replay_commands(saved[0], {c.sim, c.nav})), bytes(saved[0]));
  EXPECT_EQ(bytes(replay_commands(saved[1], {c.sim, c.nav})), bytes(saved[1]));
}

TEST(TeleopServer, ReconnectingClientStartsANewSequence) {
  ServerOptions opts;
  opts.port = 0;
  opts.tick_period = std::chrono::milliseconds(5);
  TeleopServer server(config(0), opts);
  server.start();
  {
    Client first(server.port());
    first.send(msg("start_episode", 1));
    first.drop();
  }
  // The first client may drop before its episode starts; either way the
  // server frees the session, and the new client's seq 1 is accepted.
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  Client second(server.port());
  second.send(msg("start_episode", 1));
  std::optional<TeleopMessage> m;
  for (int k = 0; k < 200; ++k) {
    m = second.read();
    ASSERT_NE(m->kind, MessageKind::error) << m->dump();
    if (m->kind == MessageKind::state_update && m->payload["recording"].get<bool>()) break;
  }
  EXPECT_TRUE(m->payload["recording"].get<bool>());
  second.send(msg("end_episode", 2));
  ASSERT_TRUE(second.await(MessageKind::episode_saved));
  server.stop();
  const auto saved = server.saved();
  ASSERT_EQ(saved.size(), 2u);
  EXPECT_FALSE(saved[0].complete);
  EXPECT_TRUE(saved[1].complete);
}

}  // namespace
}  // namespace socnav
