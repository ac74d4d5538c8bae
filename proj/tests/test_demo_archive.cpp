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
#include <fstream>
#include <sstream>

#include "socnav/demo_archive.hpp"

namespace socnav {
namespace {

std::string bytes(const Demonstration& d) {
  std::ostringstream os;
  write_demonstration(os, d);
  return os.str();
}

Demonstration sample(std::uint64_t seed, double p_noise, const ArchiveSettings& settings = {}) {
  Scenario s;
  s.pedestrian_count = 5;
  s.seed = seed;
  s.static_obstacles = {{1.0, -1.0, 1.5, 0.5}};
  ScriptedExpert expert(p_noise, seed, settings.nav);
  return collect_demo(s, std::ref(expert), settings.nav, settings.sim);
}

class TempFile {
 public:
  explicit TempFile(const std::string& name) : path_(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove(path_);
  }
  ~TempFile() { std::filesystem::remove(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

TEST(DemoArchive, RoundTripIsBitExact) {
  ArchiveSettings settings;
  settings.sim.desired_speed = 1.1;
  settings.nav.features.gamma_pred = 0.85;
  DemoArchive a;
  a.settings = settings;
  a.demonstrations = {sample(1, 0.0, settings), sample(2, 0.5, settings)};
  std::stringstream ss;
  write_archive(ss, a);
  const std::string first = ss.str();
  const DemoArchive b = read_archive(ss);
  ASSERT_EQ(b.demonstrations.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& x = a.demonstrations[k];
    const auto& y = b.demonstrations[k];
    EXPECT_EQ(x.robot_states, y.robot_states);
    EXPECT_EQ(x.pedestrian_history, y.pedestrian_history);
    EXPECT_EQ(x.commands, y.commands);
    EXPECT_EQ(x.svcr, y.svcr);
    EXPECT_EQ(x.scenario, y.scenario);
    ASSERT_EQ(x.windows.size(), y.windows.size());
    for (std::size_t w = 0; w < x.windows.size(); ++w) {
      EXPECT_EQ(x.windows[w].features, y.windows[w].features);
      EXPECT_EQ(x.windows[w].visited, y.windows[w].visited);
    }
  }
  EXPECT_EQ(io::sim_params(b.settings.sim), io::sim_params(settings.sim));
  EXPECT_EQ(io::nav_config(b.settings.nav), io::nav_config(settings.nav));
  std::stringstream again;
  write_archive(again, b);
  EXPECT_EQ(again.str(), first);
}

TEST(DemoArchive, StoredFeaturesReplayExactly) {
  const ArchiveSettings settings;
  for (std::uint64_t seed : {3u, 4u}) {
    std::stringstream ss;
    write_archive(ss, {kArchiveVersion, settings, {sample(seed, 0.3)}});
    const DemoArchive back = read_archive(ss);
    EXPECT_TRUE(features_replay_exactly(back.demonstrations[0], back.settings));
  }
  // A tampered layer is detected.
  Demonstration d = sample(5, 0.0);
  d.windows[0].features.layers[0][0] += 1e-12;
  EXPECT_FALSE(features_replay_exactly(d, settings));
}

TEST(DemoArchive, ReplayingRecordedCommandsReproducesTheDemo) {
  const ArchiveSettings settings;
  for (double p : {0.0, 0.5}) {
    const Demonstration d = sample(6, p);
    EXPECT_EQ(bytes(replay_commands(d, settings)), bytes(d));
  }
  const Demonstration cut = collect_demo(Scenario{}, recorded_source({Vec2(0.3, 0.8), Vec2(0.1, 0.9)}, true));
  EXPECT_EQ(bytes(replay_commands(cut, settings)), bytes(cut));
}

TEST(DemoArchive, AppendWritesOneHeaderAndChecksSettings) {
  TempFile file("socnav_append_test.jsonl");
  const ArchiveSettings settings;
  append_demonstration(file.path(), settings, sample(7, 0.0));
  append_demonstration(file.path(), settings, sample(8, 0.5));
  const DemoArchive a = load_archive(file.path());
  EXPECT_EQ(a.demonstrations.size(), 2u);
  std::ifstream in(file.path());
  std::string line;
  int headers = 0;
  while (std::getline(in, line)) headers += nlohmann::json::parse(line)["record"] == "archive";
  EXPECT_EQ(headers, 1);
  ArchiveSettings other = settings;
  other.nav.timeout = 20.0;
  EXPECT_THROW(append_demonstration(file.path(), other, sample(9, 0.0)), std::runtime_error);
}

TEST(DemoArchive, RejectsBadInput) {
  std::stringstream empty;
  EXPECT_THROW(read_archive(empty), std::runtime_error);

  std::stringstream good;
  write_archive(good, {kArchiveVersion, {}, {sample(10, 0.0)}});
  const std::string text = good.str();

  auto header = nlohmann::json::parse(text.substr(0, text.find('\n')));
  header["version"] = 2;
  std::stringstream future(header.dump() + text.substr(text.find('\n')));
  EXPECT_THROW(read_archive(future), std::runtime_error);

  header.erase("version");
  std::stringstream unversioned(header.dump() + text.substr(text.find('\n')));
  EXPECT_THROW(read_archive(unversioned), std::runtime_error);

  // Drop the final line: the last window record goes missing.
  const std::string trimmed = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  std::stringstream truncated(trimmed);
  EXPECT_THROW(read_archive(truncated), std::runtime_error);

  std::stringstream garbage(text.substr(0, text.find('\n') + 1) + "{oops\n");
  EXPECT_THROW(read_archive(garbage), std::runtime_error);
}

TEST(DemoArchive, KeepsIncompleteFlag) {
  Demonstration d = collect_demo(Scenario{}, recorded_source({Vec2(0.0, 1.0)}, true));
  ASSERT_FALSE(d.complete);
  std::stringstream ss;
  write_archive(ss, {kArchiveVersion, {}, {d}});
  EXPECT_FALSE(read_archive(ss).demonstrations[0].complete);
}

}  // namespace
}  // namespace socnav
