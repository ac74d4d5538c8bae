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

// The socnav command line. Every flag has a config-file key of the same name:
// world flags at the top level, subcommand flags under [simulate], [train], ...
// run() is separate from main() so tests can drive it in-process.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "socnav/demo_archive.hpp"
#include "socnav/nav_runtime.hpp"
#include "socnav/reward_net.hpp"
#include "socnav/teleop_server.hpp"
#include "socnav/tmedirl.hpp"

namespace socnav::cli {

using nlohmann::json;

inline constexpr const char* kConfigEnv = "SOCNAV_CONFIG";

struct WorldOptions {
  std::string kind = "circle_crossing";
  Scenario scenario;
  std::vector<std::string> obstacles;  // "min_x,min_y,max_x,max_y"
  SimParams sim;
  NavConfig nav;
};

struct RewardChoice {
  std::string model;  // checkpoint path; wins over `reward`
  std::string reward = "expert";
};

struct SimulateOptions {
  RewardChoice reward;
  bool trace = false;
  std::string report;
};

struct ServeOptions {
  std::string address = "127.0.0.1";
  int port = 8765;
  int tick_ms = 100;
  double stale_after = 0.5;
  std::string session = "teleop";
  std::string model;
  std::string archive;
  int max_episodes = 0;  // 0: until interrupted
};

struct CollectOptions {
  std::string source = "scripted";
  int episodes = 10;
  double p_noise = 0.5;
  int noisy_every = 2;
  std::string out;
  std::string report;
  ServeOptions serve;  // teleop source only
};

struct TrainOptions {
  std::vector<std::string> archives;
  std::string out;
  TrainingConfig training;
  std::vector<int> hidden = {32, 32};
  bool include_incomplete = false;
  bool epoch_accuracy = true;
  std::string log;
};

struct EvaluateOptions {
  RewardChoice reward;
  int episodes = 50;
  unsigned threads = 0;
  std::string held_out;
  std::string report;
};

struct RankOptions {
  std::string archive;
  bool verify = false;
  std::string report;
};

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

inline Rect parse_rect(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    v.push_back(std::stod(item, &used));
    if (used != item.size()) throw std::invalid_argument("bad obstacle: " + text);
  }
  if (v.size() != 4 || !(v[0] < v[2] && v[1] < v[3])) throw std::invalid_argument("bad obstacle: " + text);
  return {v[0], v[1], v[2], v[3]};
}

inline Scenario build_scenario(const WorldOptions& w) {
  Scenario s = w.scenario;
  s.kind = scenario_kind_from_string(w.kind);
  for (const auto& o : w.obstacles) s.static_obstacles.push_back(parse_rect(o));
  s.validate();
  return s;
}

using AnyReward = std::variant<LinearReward, RewardModel>;

inline RewardModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model " + path);
  return load_checkpoint(in);
}

inline AnyReward load_reward(const RewardChoice& c) {
  if (!c.model.empty()) return load_model(c.model);
  if (c.reward == "expert") return LinearReward::expert();
  if (c.reward == "goal_only") return LinearReward::goal_only();
  throw std::invalid_argument("unknown reward: " + c.reward);
}

inline std::string reward_label(const RewardChoice& c) { return c.model.empty() ? c.reward : c.model; }

/// Records go to the report file when one is given, otherwise to `out`; the
/// table then goes to whichever stream the records did not take.
class Sinks {
 public:
  Sinks(const std::string& report, std::ostream& out, std::ostream& err) : out_(out), err_(err) {
    if (report.empty()) return;
    file_.open(report, std::ios::trunc);
    if (!file_) throw std::runtime_error("cannot write " + report);
  }
  std::ostream& records() { return file_.is_open() ? static_cast<std::ostream&>(file_) : out_; }
  std::ostream& table() { return file_.is_open() ? out_ : err_; }
  void record(const json& j) { records() << j.dump() << '\n'; }

 private:
  std::ostream& out_;
  std::ostream& err_;
  std::ofstream file_;
};

inline std::string demo_bytes(const Demonstration& d) {
  std::ostringstream os;
  write_demonstration(os, d);
  return os.str();
}

inline json demo_record(const Demonstration& d) {
  return {{"record", "demo"},       {"id", d.id},
          {"complete", d.complete}, {"steps", d.commands.size()},
          {"length", d.trajectory_length}, {"sudden_changes", d.sudden_changes},
          {"svcr", d.svcr}};
}

inline std::atomic<bool>& interrupted() {
  static std::atomic<bool> flag{false};
  return flag;
}

inline void on_interrupt(int) { interrupted().store(true); }

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline int simulate(const WorldOptions& world, const SimulateOptions& o, std::ostream& out, std::ostream& err) {
  const Scenario scenario = build_scenario(world);
  const AnyReward reward = load_reward(o.reward);
  const CommandSource source = std::visit([&](const auto& r) { return planner_source(r, world.nav); }, reward);
  EpisodeRunner runner(scenario, world.nav, world.sim);
  Sinks sinks(o.report, out, err);
  auto trace = [&](const EpisodeRunner& r) {
    if (!o.trace) return;
    const WorldState& w = r.world();
    json peds = json::array();
    for (const auto& p : w.pedestrians) peds.push_back(io::vec(p.position));
    sinks.record({{"record", "tick"},
                  {"tick", w.clock.step_index},
                  {"time", w.clock.time()},
                  {"robot", io::vec(w.robot.position)},
                  {"heading", w.robot.heading},
                  {"speed", w.robot.speed},
                  {"waypoint", io::vec(r.track().current())},
                  {"pedestrians", peds}});
  };
  trace(runner);
  while (!runner.finished()) {
    const CommandStep c = source(runner.world(), runner.track());
    runner.step(c.velocity);
    trace(runner);
  }
  const EpisodeResult result = runner.result();
  json j = to_json(result);
  j["record"] = "episode";
  j["scenario"] = std::string(to_string(scenario.kind));
  j["seed"] = scenario.seed;
  j["reward"] = reward_label(o.reward);
  sinks.record(j);
  sinks.table() << summary_table(summarize({scenario}, {result}));
  return 0;
}

inline int serve_until(const WorldOptions& world, const ServeOptions& o, std::ostream& out, std::ostream& err) {
  if (o.port < 0 || o.port > 65535) throw std::invalid_argument("port must lie in [0, 65535]");
  if (o.tick_ms < 1) throw std::invalid_argument("tick-ms must be >= 1");
  TeleopConfig config;
  config.session_id = o.session;
  config.scenario = build_scenario(world);
  config.nav = world.nav;
  config.sim = world.sim;
  config.stale_after = o.stale_after;
  config.archive = o.archive;
  std::optional<RewardModel> model;
  if (!o.model.empty()) model = load_model(o.model);
  ServerOptions options;
  options.address = o.address;
  options.port = static_cast<unsigned short>(o.port);
  options.tick_period = std::chrono::milliseconds(o.tick_ms);

  TeleopServer server(config, options, std::move(model));
  server.start();
  interrupted().store(false);
  auto previous_int = std::signal(SIGINT, on_interrupt);
  auto previous_term = std::signal(SIGTERM, on_interrupt);
  out << json{{"record", "listening"}, {"address", o.address}, {"port", server.port()}}.dump() << std::endl;
  std::size_t reported = 0;
  while (!interrupted().load()) {
    const auto saved = server.saved();
    for (; reported < saved.size(); ++reported) out << demo_record(saved[reported]).dump() << std::endl;
    if (o.max_episodes > 0 && saved.size() >= static_cast<std::size_t>(o.max_episodes)) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  server.stop();
  std::signal(SIGINT, previous_int);
  std::signal(SIGTERM, previous_term);
  const auto saved = server.saved();
  const auto complete = std::count_if(saved.begin(), saved.end(), [](const auto& d) { return d.complete; });
  err << "saved " << saved.size() << " episode(s), " << saved.size() - complete << " incomplete\n";
  return 0;
}

inline int collect(const WorldOptions& world, const CollectOptions& o, std::ostream& out, std::ostream& err) {
  if (o.out.empty()) throw std::invalid_argument("collect needs --out");
  if (o.source == "teleop") {
    ServeOptions s = o.serve;
    s.archive = o.out;
    if (s.max_episodes == 0) s.max_episodes = o.episodes;
    return serve_until(world, s, out, err);
  }
  if (o.source != "scripted") throw std::invalid_argument("unknown source: " + o.source);
  const ArchiveSettings settings{world.sim, world.nav};
  const auto demos =
      scripted_demonstrations(build_scenario(world), o.episodes, o.p_noise, o.noisy_every, world.nav, world.sim);
  Sinks sinks(o.report, out, err);
  double svcr_sum = 0.0;
  for (const auto& d : demos) {
    append_demonstration(o.out, settings, d);
    sinks.record(demo_record(d));
    svcr_sum += d.svcr;
  }
  auto& t = sinks.table();
  t << std::left << std::setw(22) << "archive" << o.out << '\n';
  t << std::setw(22) << "demonstrations" << demos.size() << '\n';
  t << std::setw(22) << "mean svcr" << std::fixed << std::setprecision(4)
    << (demos.empty() ? 0.0 : svcr_sum / static_cast<double>(demos.size())) << '\n';
  return 0;
}

inline DemoArchive load_archives(const std::vector<std::string>& paths) {
  if (paths.empty()) throw std::invalid_argument("no archive given");
  DemoArchive all = load_archive(paths.front());
  for (std::size_t k = 1; k < paths.size(); ++k) {
    DemoArchive next = load_archive(paths[k]);
    if (io::sim_params(next.settings.sim) != io::sim_params(all.settings.sim) ||
        io::nav_config(next.settings.nav) != io::nav_config(all.settings.nav))
      throw std::runtime_error("archive " + paths[k] + " was recorded with different settings");
    for (auto& d : next.demonstrations) all.demonstrations.push_back(std::move(d));
  }
  return all;
}

inline int train_command(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  if (o.out.empty()) throw std::invalid_argument("train needs --out");
  const DemoArchive archive = load_archives(o.archives);
  const auto dataset = training_demonstrations(archive.demonstrations, o.include_incomplete);
  const std::size_t excluded = archive.demonstrations.size() - dataset.size();
  if (dataset.size() < 2) throw std::runtime_error("need at least two usable demonstrations");

  // The MDP must match the one the demonstrations were planned on.
  TrainingConfig config = o.training;
  config.gamma_mdp = archive.settings.nav.gamma_mdp;
  config.diagonal_actions = archive.settings.nav.diagonal_actions;
  config.widths = {static_cast<int>(FeatureMap::standard_names().size())};
  config.widths.insert(config.widths.end(), o.hidden.begin(), o.hidden.end());
  config.widths.push_back(1);
  config.validate();

  Sinks sinks(o.log, out, err);
  std::size_t windows = 0;
  for (const auto& d : dataset) windows += d.windows.size();
  sinks.record({{"record", "dataset"},
                {"demonstrations", dataset.size()},
                {"excluded_incomplete", excluded},
                {"windows", windows}});
  std::optional<EpochStats> last;
  const RewardModel model = train(
      std::span<const Demonstration>(dataset), config,
      [&](const EpochStats& s) {
        sinks.record(to_json(s));
        last = s;
      },
      o.epoch_accuracy);
  {
    const std::filesystem::path path(o.out);
    const std::filesystem::path tmp = path.string() + ".tmp";
    std::ofstream f(tmp, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + o.out);
    save_checkpoint(model, f);
    f.close();
    if (!f) throw std::runtime_error("failed writing " + o.out);
    std::filesystem::rename(tmp, path);
  }
  sinks.record({{"record", "checkpoint"}, {"path", o.out}, {"epochs", config.epochs}});

  auto& t = sinks.table();
  t << std::left << std::setw(22) << "demonstrations" << dataset.size() << '\n';
  t << std::setw(22) << "excluded incomplete" << excluded << '\n';
  t << std::setw(22) << "epochs" << config.epochs << '\n';
  if (last) {
    t << std::setw(22) << "final likelihood" << std::fixed << std::setprecision(4) << last->likelihood << '\n';
    t << std::setw(22) << "final ranking loss"
      << (last->ranking_loss ? std::to_string(*last->ranking_loss) : std::string("n/a")) << '\n';
    t << std::setw(22) << "pairwise accuracy"
      << (last->pairwise_accuracy ? std::to_string(*last->pairwise_accuracy) : std::string("n/a")) << '\n';
  }
  t << std::setw(22) << "checkpoint" << o.out << '\n';
  return 0;
}

inline int evaluate_command(const WorldOptions& world, const EvaluateOptions& o, std::ostream& out,
                            std::ostream& err) {
  const Scenario scenario = build_scenario(world);
  const AnyReward reward = load_reward(o.reward);
  std::vector<Demonstration> held;
  if (!o.held_out.empty()) held = training_demonstrations(load_archive(o.held_out).demonstrations);
  const EvaluationReport rep = std::visit(
      [&](const auto& r) {
        return evaluate(r, std::span<const Scenario>(&scenario, 1), o.episodes, world.nav,
                        std::span<const Demonstration>(held), o.threads, world.sim);
      },
      reward);
  Sinks sinks(o.report, out, err);
  write_report(sinks.records(), rep);
  sinks.table() << summary_table(rep);
  return 0;
}

inline int rank_command(const RankOptions& o, std::ostream& out, std::ostream& err) {
  if (o.archive.empty()) throw std::invalid_argument("rank needs --archive");
  const DemoArchive archive = load_archive(o.archive);
  const auto& demos = archive.demonstrations;
  std::vector<std::size_t> order(demos.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return demos[a].svcr < demos[b].svcr; });

  Sinks sinks(o.report, out, err);
  auto& t = sinks.table();
  t << std::left << std::setw(6) << "rank" << std::setw(28) << "id" << std::setw(10) << "complete" << std::setw(8)
    << "steps" << std::setw(10) << "length" << std::setw(8) << "n_s" << "svcr";
  if (o.verify) t << "  verified";
  t << '\n';
  int failures = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const Demonstration& d = demos[order[r]];
    json j = demo_record(d);
    j["record"] = "rank";
    j["rank"] = r + 1;
    bool ok = true;
    if (o.verify) {
      const SvcrResult rescored = compute_svcr(d, archive.settings.nav.svcr);
      const bool svcr_ok = rescored.sudden_changes == d.sudden_changes && rescored.rate == d.svcr &&
                           trajectory_length(d.robot_states) == d.trajectory_length;
      const bool features_ok = features_replay_exactly(d, archive.settings);
      const bool replay_ok = demo_bytes(replay_commands(d, archive.settings)) == demo_bytes(d);
      ok = svcr_ok && features_ok && replay_ok;
      j["verify"] = {{"svcr", svcr_ok}, {"features", features_ok}, {"replay", replay_ok}};
      failures += ok ? 0 : 1;
    }
    sinks.record(j);
    t << std::setw(6) << r + 1 << std::setw(28) << d.id << std::setw(10) << (d.complete ? "yes" : "no")
      << std::setw(8) << d.commands.size() << std::setw(10) << std::fixed << std::setprecision(3)
      << d.trajectory_length << std::setw(8) << d.sudden_changes << std::setprecision(4) << d.svcr;
    if (o.verify) t << "  " << (ok ? "ok" : "MISMATCH");
    t << '\n';
  }
  if (o.verify) {
    sinks.record({{"record", "verification"}, {"demonstrations", demos.size()}, {"failures", failures}});
    err << (failures == 0 ? "all " + std::to_string(demos.size()) + " demonstration(s) replay exactly\n"
                          : std::to_string(failures) + " demonstration(s) failed verification\n");
  }
  return failures == 0 ? 0 : 3;
}

// ---------------------------------------------------------------------------
// Option wiring
// ---------------------------------------------------------------------------

inline void add_world_options(CLI::App& app, WorldOptions& w) {
  const char* g = "Scenario";
  app.add_option("--scenario", w.kind, "circle_crossing, corridor or random_goals")
      ->check(CLI::IsMember({"circle_crossing", "corridor", "random_goals"}))
      ->group(g);
  app.add_option("--pedestrians", w.scenario.pedestrian_count)->check(CLI::NonNegativeNumber)->group(g);
  app.add_option("--radius", w.scenario.circle_radius, "Scenario radius (m)")->check(CLI::PositiveNumber)->group(g);
  app.add_option("--scenario-seed", w.scenario.seed)->group(g);
  app.add_option("--obstacle", w.obstacles, "Static rectangle min_x,min_y,max_x,max_y; repeatable")->group(g);

  g = "Simulation";
  auto& s = w.sim;
  app.add_option("--dt", s.dt, "Tick length (s)")->check(CLI::PositiveNumber)->group(g);
  app.add_option("--relaxation-time", s.relaxation_time)->group(g);
  app.add_option("--desired-speed", s.desired_speed)->group(g);
  app.add_option("--max-pedestrian-speed", s.max_pedestrian_speed)->group(g);
  app.add_option("--arrival-radius", s.arrival_radius)->group(g);
  app.add_option("--pedestrian-radius", s.pedestrian_radius)->group(g);
  app.add_option("--repulsion-strength", s.repulsion_strength)->group(g);
  app.add_option("--repulsion-range", s.repulsion_range)->group(g);
  app.add_option("--anisotropy", s.anisotropy)->check(CLI::Range(0.0, 1.0))->group(g);
  app.add_option("--obstacle-strength", s.obstacle_strength)->group(g);
  app.add_option("--obstacle-range", s.obstacle_range)->group(g);
  app.add_option("--robot-radius", s.robot_radius)->group(g);
  app.add_option("--robot-repulsion-strength", s.robot_repulsion_strength)->group(g);
  app.add_flag("--robot-repulsion,!--no-robot-repulsion", s.robot_repulsion, "Pedestrians react to the robot")
      ->group(g);
  app.add_option("--robot-anticipation", s.robot_anticipation)->group(g);
  app.add_option("--robot-max-speed", s.robot_max_speed)->check(CLI::PositiveNumber)->group(g);
  app.add_option("--min-spacing", s.min_spacing)->group(g);
  app.add_option("--turnaround-radius", s.turnaround_radius)->group(g);

  g = "Navigation";
  auto& n = w.nav;
  app.add_option("--waypoint-spacing", n.waypoint_spacing)->group(g);
  app.add_option("--waypoint-advance-radius", n.waypoint_advance_radius)->group(g);
  app.add_option("--goal-radius", n.goal_radius)->group(g);
  app.add_option("--collision-radius", n.collision_radius)->group(g);
  app.add_option("--timeout", n.timeout, "Episode limit (s)")->group(g);
  app.add_option("--kp", n.kp)->group(g);
  app.add_option("--cells-per-side", n.cells_per_side)->group(g);
  app.add_option("--resolution", n.resolution, "Cell size (m)")->group(g);
  app.add_option("--gamma-mdp", n.gamma_mdp)->group(g);
  app.add_flag("--diagonal-actions", n.diagonal_actions)->group(g);
  app.add_option("--max-window-ticks", n.max_window_ticks)->group(g);
  app.add_option("--prediction-horizon", n.features.prediction_horizon)->group(g);
  app.add_option("--gamma-pred", n.features.gamma_pred)->group(g);
  app.add_option("--social-alpha", n.features.social.alpha)->group(g);
  app.add_option("--social-beta", n.features.social.beta)->group(g);
  app.add_option("--density-radius", n.features.social.density_radius)->group(g);
  app.add_option("--v-thrd", n.svcr.v_thrd, "Sudden speed change threshold (m/s)")->group(g);
  app.add_option("--omega-thrd", n.svcr.omega_thrd, "Sudden turn rate threshold (rad/s)")->group(g);
}

inline void add_reward_options(CLI::App& app, RewardChoice& r) {
  app.add_option("--model", r.model, "Reward model checkpoint");
  app.add_option("--reward", r.reward, "Hand-weighted reward when no model is given")
      ->check(CLI::IsMember({"expert", "goal_only"}));
}

inline void add_serve_options(CLI::App& app, ServeOptions& s, bool with_archive) {
  app.add_option("--address", s.address);
  app.add_option("--port", s.port, "0 picks a free port")->check(CLI::Range(0, 65535));
  app.add_option("--tick-ms", s.tick_ms, "Wall-clock tick period (ms)")->check(CLI::PositiveNumber);
  app.add_option("--stale-after", s.stale_after, "Commands older than this (s) decay to zero");
  app.add_option("--session", s.session);
  app.add_option("--model", s.model, "Checkpoint whose reward grid is streamed to the UI");
  if (with_archive) app.add_option("--archive", s.archive, "Archive saved episodes are appended to");
  app.add_option("--max-episodes", s.max_episodes, "Stop after this many saved episodes; 0 runs until interrupted")
      ->check(CLI::NonNegativeNumber);
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Crowd navigation with ranked inverse reinforcement learning.", "socnav"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", std::string("TOML config file; falls back to $") + kConfigEnv)->envname(kConfigEnv);
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1, 1);
  app.fallthrough();

  WorldOptions world;
  add_world_options(app, world);

  SimulateOptions sim_o;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run one planner episode");
  add_reward_options(*simulate_cmd, sim_o.reward);
  simulate_cmd->add_flag("--trace", sim_o.trace, "Emit a record per tick");
  simulate_cmd->add_option("--report", sim_o.report, "Write records here instead of stdout");

  CollectOptions col_o;
  auto* collect_cmd = app.add_subcommand("collect", "Record demonstrations into an archive");
  collect_cmd->add_option("--source", col_o.source)->check(CLI::IsMember({"scripted", "teleop"}));
  collect_cmd->add_option("--episodes", col_o.episodes)->check(CLI::NonNegativeNumber);
  collect_cmd->add_option("--p-noise", col_o.p_noise, "Random-action probability of noisy episodes")
      ->check(CLI::Range(0.0, 1.0));
  collect_cmd->add_option("--noisy-every", col_o.noisy_every, "Every n-th episode is noisy; 0 for none")
      ->check(CLI::NonNegativeNumber);
  collect_cmd->add_option("--out", col_o.out, "Archive to append to");
  collect_cmd->add_option("--report", col_o.report);
  add_serve_options(*collect_cmd, col_o.serve, false);

  TrainOptions train_o;
  auto* train_cmd = app.add_subcommand("train", "Fit a reward model to archived demonstrations");
  train_cmd->add_option("--archive", train_o.archives, "Demonstration archive; repeatable");
  train_cmd->add_option("--out", train_o.out, "Checkpoint path");
  train_cmd->add_option("--epochs", train_o.training.epochs)->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--lr", train_o.training.learning_rate)->check(CLI::PositiveNumber);
  train_cmd->add_option("--weight-decay", train_o.training.weight_decay)->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--lambda-rank", train_o.training.lambda_rank, "0 disables the ranking term")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--horizon", train_o.training.horizon)->check(CLI::PositiveNumber);
  train_cmd->add_option("--pairs-per-epoch", train_o.training.pairs_per_epoch, "0: half the dataset");
  train_cmd->add_option("--seed", train_o.training.seed);
  train_cmd->add_option("--hidden", train_o.hidden, "Hidden layer widths")->delimiter(',');
  train_cmd->add_flag("--include-incomplete", train_o.include_incomplete, "Also train on disconnected episodes");
  train_cmd->add_flag("--epoch-accuracy,!--no-epoch-accuracy", train_o.epoch_accuracy);
  train_cmd->add_option("--log", train_o.log, "Write epoch records here instead of stdout");

  EvaluateOptions eval_o;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Run seeded episodes and report metrics");
  add_reward_options(*evaluate_cmd, eval_o.reward);
  evaluate_cmd->add_option("--episodes", eval_o.episodes)->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--threads", eval_o.threads, "0 uses every core");
  evaluate_cmd->add_option("--held-out", eval_o.held_out, "Archive for pairwise ranking accuracy");
  evaluate_cmd->add_option("--report", eval_o.report);

  RankOptions rank_o;
  auto* rank_cmd = app.add_subcommand("rank", "Order archived demonstrations by SVCR");
  rank_cmd->add_option("--archive", rank_o.archive);
  rank_cmd->add_flag("--verify", rank_o.verify, "Replay every demonstration and check it bit for bit");
  rank_cmd->add_option("--report", rank_o.report);

  ServeOptions serve_o;
  auto* serve_cmd = app.add_subcommand("serve", "Accept a teleoperation client over WebSocket");
  add_serve_options(*serve_cmd, serve_o, true);

  // CLI11 silently skips a missing file named by the environment.
  const bool config_flag = std::any_of(argv + 1, argv + argc, [](const char* a) {
    return std::string_view(a) == "--config" || std::string_view(a).starts_with("--config=");
  });
  if (const char* env = std::getenv(kConfigEnv); !config_flag && env && *env && !std::filesystem::exists(env)) {
    err << "socnav: " << kConfigEnv << " names a missing file: " << env << '\n';
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    world.nav.validate();
    if (*simulate_cmd) return simulate(world, sim_o, out, err);
    if (*collect_cmd) return collect(world, col_o, out, err);
    if (*train_cmd) return train_command(train_o, out, err);
    if (*evaluate_cmd) return evaluate_command(world, eval_o, out, err);
    if (*rank_cmd) return rank_command(rank_o, out, err);
    if (*serve_cmd) return serve_until(world, serve_o, out, err);
  } catch (const std::exception& e) {
    err << "socnav: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace socnav::cli
