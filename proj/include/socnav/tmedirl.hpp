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

// Trajectory-ranked maximum-entropy deep IRL: demonstration scoring by the
// sudden velocity change rate of nearby pedestrians, the visitation-matching
// gradient, the pairwise ranking loss, and the training loop combining them.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "socnav/crowd_sim.hpp"
#include "socnav/feature_stack.hpp"
#include "socnav/grid_mdp.hpp"
#include "socnav/reward_net.hpp"

namespace socnav {

/// A fixed grid window the robot traversed, with the cells it visited in order.
struct WindowRecord {
  int step = 0;  // tick at which the window was opened
  GridWindow window;
  Vec2 waypoint = Vec2::Zero();
  std::optional<int> goal_state;
  FeatureMap features;
  std::vector<int> visited;  // 4-connected state path, first entry = start cell

  bool operator==(const WindowRecord&) const = default;
};

/**
 * One recorded episode. robot_states and pedestrian_history are indexed by
 * tick; commands[t] moved the world from tick t to t + 1. windows are ordered
 * by opening tick and the latest window opened at or before t is the one
 * active at t.
 */
struct Demonstration {
  std::string id;
  double dt = 0.1;
  Scenario scenario;
  std::vector<RobotState> robot_states;
  std::vector<Vec2> commands;
  std::vector<std::vector<PedestrianState>> pedestrian_history;
  std::vector<WindowRecord> windows;
  double trajectory_length = 0.0;  // l_R
  int sudden_changes = 0;          // n_s
  double svcr = 0.0;               // epsilon_s
  bool complete = true;

  bool operator==(const Demonstration&) const = default;
};

struct SvcrConfig {
  double v_thrd = 0.3;      // m/s
  double omega_thrd = 0.5;  // rad/s

  void validate() const {
    if (!(v_thrd > 0.0 && omega_thrd > 0.0)) throw std::invalid_argument("SvcrConfig: thresholds must be > 0");
  }
};

struct SvcrResult {
  int sudden_changes = 0;
  double rate = 0.0;
};

inline double trajectory_length(std::span<const RobotState> states) {
  double l = 0.0;
  for (std::size_t t = 1; t < states.size(); ++t) l += (states[t].position - states[t - 1].position).norm();
  return l;
}

/// Index of the window active at tick t, or -1 before the first window opens.
inline int active_window(const Demonstration& demo, int t) {
  int active = -1;
  for (std::size_t w = 0; w < demo.windows.size() && demo.windows[w].step <= t; ++w) active = static_cast<int>(w);
  return active;
}

/**
 * Sudden velocity change rate. For every tick t >= 1 and every pedestrian
 * present at t - 1 and t, a sudden change is counted when the pedestrian lies
 * in the active window footprint and either the linear velocity change norm
 * reaches v_thrd or the angular velocity change magnitude reaches omega_thrd.
 * The count is divided by the robot path length (0 for a stationary robot).
 */
inline SvcrResult compute_svcr(const Demonstration& demo, const SvcrConfig& config = {}) {
  config.validate();
  const int steps = static_cast<int>(demo.pedestrian_history.size());
  if (steps < 2 || demo.robot_states.size() < 2) throw std::invalid_argument("compute_svcr: need >= 2 time steps");
  SvcrResult out;
  for (int t = 1; t < steps; ++t) {
    const int w = active_window(demo, t);
    if (w < 0) continue;
    const GridWindow& footprint = demo.windows[w].window;
    std::map<int, const PedestrianState*> previous;
    for (const auto& p : demo.pedestrian_history[t - 1]) previous[p.id] = &p;
    for (const auto& now : demo.pedestrian_history[t]) {
      const auto it = previous.find(now.id);
      if (it == previous.end()) continue;
      const PedestrianState& before = *it->second;
      const double dv = (before.linear_velocity - now.linear_velocity).norm();
      const double dw = std::abs(before.angular_velocity - now.angular_velocity);
      if (footprint.contains(now.position) && (dv >= config.v_thrd || dw >= config.omega_thrd)) ++out.sudden_changes;
    }
  }
  const double l_r = trajectory_length(demo.robot_states);
  out.rate = l_r > 0.0 ? out.sudden_changes / l_r : 0.0;
  return out;
}

/// Recomputes l_R, n_s and epsilon_s in place.
inline void score_demonstration(Demonstration& demo, const SvcrConfig& config = {}) {
  demo.trajectory_length = trajectory_length(demo.robot_states);
  const auto s = compute_svcr(demo, config);
  demo.sudden_changes = s.sudden_changes;
  demo.svcr = s.rate;
}

// ---------------------------------------------------------------------------
// Trajectory reward and ranking loss
// ---------------------------------------------------------------------------

/// Discounted reward over the visited states of all windows, with one running step index.
template <class RewardFn>
double trajectory_reward(const Demonstration& demo, const RewardFn& reward, double gamma_mdp) {
  if (demo.windows.empty()) throw std::invalid_argument("trajectory_reward: demonstration has no windows");
  double total = 0.0;
  double weight = 1.0;
  for (const auto& w : demo.windows) {
    const RewardMap r = reward(w.features);
    for (int s : w.visited) {
      total += weight * r[s];
      weight *= gamma_mdp;
    }
  }
  return total;
}

/// d trajectory_reward / d theta.
inline GradientAccumulator trajectory_reward_gradient(const Demonstration& demo, const RewardModel& model,
                                                      double gamma_mdp) {
  GradientAccumulator grad = model.parameters().zeros_like();
  double weight = 1.0;
  for (const auto& w : demo.windows) {
    std::vector<double> error(w.features.state_count(), 0.0);
    for (int s : w.visited) {
      error[s] += weight;
      weight *= gamma_mdp;
    }
    grad += model.backward(w.features, error);
  }
  return grad;
}

struct RankingLoss {
  double loss = 0.0;
  double d_ri = 0.0;
  double d_rj = 0.0;
};

/// -log(exp r_j / (exp r_i + exp r_j)) where demo j is the better-ranked one.
inline RankingLoss ranking_loss(double r_i, double r_j) {
  const double x = r_i - r_j;
  const double softplus = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  const double sigmoid = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return {softplus, sigmoid, -sigmoid};
}

/// Same loss with the better demonstration identified by SVCR: requires eps_j < eps_i.
inline RankingLoss ranking_loss(double r_i, double r_j, double eps_i, double eps_j) {
  if (!(eps_j < eps_i)) throw std::invalid_argument("ranking_loss: demo j must have the strictly lower SVCR");
  return ranking_loss(r_i, r_j);
}

// ---------------------------------------------------------------------------
// Visitation-matching gradient
// ---------------------------------------------------------------------------

/// Demonstrations fit for training. Episodes cut short by a disconnect are
/// dropped unless `include_incomplete` is set.
inline std::vector<Demonstration> training_demonstrations(std::span<const Demonstration> all,
                                                          bool include_incomplete = false) {
  std::vector<Demonstration> out;
  for (const auto& d : all)
    if (d.complete || include_incomplete) out.push_back(d);
  return out;
}

struct TrainingConfig {
  int epochs = 200;
  double learning_rate = 1e-2;
  double weight_decay = 1e-4;  // lambda_reg
  double lambda_rank = 1.0;
  int horizon = 6;             // cap on the per-window path length used for visitation matching
  std::uint64_t seed = 0;
  int pairs_per_epoch = 0;     // 0: half the dataset size
  double gamma_mdp = 0.9;
  bool diagonal_actions = false;
  std::vector<int> widths = {4, 32, 32, 1};

  void validate() const {
    if (epochs < 0 || !(learning_rate > 0.0) || weight_decay < 0.0 || lambda_rank < 0.0 || horizon < 1 ||
        pairs_per_epoch < 0 || !(gamma_mdp >= 0.0 && gamma_mdp < 1.0))
      throw std::invalid_argument("TrainingConfig: invalid value");
  }
};

inline GridMdp window_mdp(const WindowRecord& w, const TrainingConfig& config) {
  GridMdp mdp;
  mdp.m_side = w.window.cells_per_side;
  mdp.gamma = config.gamma_mdp;
  mdp.goal_state = w.goal_state;
  mdp.diagonal_actions = config.diagonal_actions;
  return mdp;
}

struct MedirlGradient {
  GradientAccumulator grad;  // ascent direction of the demonstration log-likelihood
  double log_likelihood = 0.0;
  double svf_l1 = 0.0;
  int windows = 0;
};

/**
 * (mu_D - E[mu]) . dr/dtheta averaged over the windows of one demonstration.
 * Each window is its own local MDP started from the first visited cell, with
 * the horizon equal to the (capped) number of recorded transitions.
 */
inline MedirlGradient medirl_gradient(const Demonstration& demo, const RewardModel& model,
                                      const TrainingConfig& config) {
  MedirlGradient out{model.parameters().zeros_like(), 0.0, 0.0, 0};
  for (const auto& w : demo.windows) {
    if (w.visited.size() < 2) continue;
    const std::size_t len = std::min<std::size_t>(w.visited.size(), static_cast<std::size_t>(config.horizon) + 1);
    const std::vector<int> path(w.visited.begin(), w.visited.begin() + static_cast<std::ptrdiff_t>(len));
    const int horizon = static_cast<int>(len) - 1;
    const GridMdp mdp = window_mdp(w, config);
    const RewardMap rewards = model.forward(w.features);
    const StochasticPolicy policy = soft_value_iteration(mdp, rewards, horizon);
    const auto expected = expected_svf(mdp, policy, path.front(), horizon);
    const std::vector<std::vector<int>> one{path};
    const auto empirical = demo_svf(one, mdp);
    std::vector<double> error(mdp.state_count());
    for (int s = 0; s < mdp.state_count(); ++s) {
      error[s] = empirical[s] - expected[s];
      out.svf_l1 += std::abs(error[s]);
    }
    out.grad += model.backward(w.features, error);
    out.log_likelihood += path_log_likelihood(mdp, policy, path);
    ++out.windows;
  }
  if (out.windows > 0) {
    const double k = 1.0 / out.windows;
    out.grad *= k;
    out.log_likelihood *= k;
    out.svf_l1 *= k;
  }
  return out;
}

struct PairGradient {
  GradientAccumulator medirl;        // ascent, summed over both demonstrations
  GradientAccumulator ranking;       // gradient of the ranking loss (descent direction)
  GradientAccumulator loss_gradient; // -medirl + lambda_rank * ranking
  bool ranked = false;
  double ranking_loss = 0.0;
  double log_likelihood = 0.0;
  double svf_l1 = 0.0;
};

/**
 * Combined gradient for one sampled pair. The demonstration with the lower
 * SVCR is the better one; equal SVCR skips the ranking term.
 */
inline PairGradient pair_gradient(const Demonstration& a, const Demonstration& b, const RewardModel& model,
                                  const TrainingConfig& config) {
  PairGradient out;
  const MedirlGradient ga = medirl_gradient(a, model, config);
  const MedirlGradient gb = medirl_gradient(b, model, config);
  out.medirl = ga.grad;
  out.medirl += gb.grad;
  out.log_likelihood = 0.5 * (ga.log_likelihood + gb.log_likelihood);
  out.svf_l1 = 0.5 * (ga.svf_l1 + gb.svf_l1);
  out.ranking = model.parameters().zeros_like();

  if (a.svcr != b.svcr) {
    const Demonstration& worse = a.svcr > b.svcr ? a : b;
    const Demonstration& better = a.svcr > b.svcr ? b : a;
    const double r_i = trajectory_reward(worse, model, config.gamma_mdp);
    const double r_j = trajectory_reward(better, model, config.gamma_mdp);
    const RankingLoss rl = ranking_loss(r_i, r_j);
    GradientAccumulator gi = trajectory_reward_gradient(worse, model, config.gamma_mdp);
    GradientAccumulator gj = trajectory_reward_gradient(better, model, config.gamma_mdp);
    gi *= rl.d_ri;
    gj *= rl.d_rj;
    out.ranking = gi;
    out.ranking += gj;
    out.ranked = true;
    out.ranking_loss = rl.loss;
  }

  out.loss_gradient = out.medirl;
  out.loss_gradient *= -1.0;
  if (out.ranked && config.lambda_rank != 0.0) {
    GradientAccumulator weighted = out.ranking;
    weighted *= config.lambda_rank;
    out.loss_gradient += weighted;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation and training loop
// ---------------------------------------------------------------------------

/**
 * Fraction of demonstration pairs with distinct SVCR in which the higher-SVCR
 * demonstration earns strictly lower discounted reward. Ties count as wrong;
 * nullopt when no pair qualifies.
 */
template <class RewardFn>
std::optional<double> pairwise_accuracy(std::span<const Demonstration> dataset, const RewardFn& reward,
                                        double gamma_mdp = 0.9) {
  if (dataset.size() < 2) throw std::invalid_argument("pairwise_accuracy: need at least two demonstrations");
  std::vector<double> returns;
  returns.reserve(dataset.size());
  for (const auto& d : dataset) returns.push_back(trajectory_reward(d, reward, gamma_mdp));
  int correct = 0, total = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    for (std::size_t j = i + 1; j < dataset.size(); ++j) {
      if (dataset[i].svcr == dataset[j].svcr) continue;
      ++total;
      const bool i_worse = dataset[i].svcr > dataset[j].svcr;
      const double worse = i_worse ? returns[i] : returns[j];
      const double better = i_worse ? returns[j] : returns[i];
      if (worse < better) ++correct;
    }
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / total;
}

struct EpochStats {
  int epoch = 0;
  double likelihood = 0.0;  // mean per-window path log-likelihood
  std::optional<double> ranking_loss;
  int ranked_pairs = 0;
  int pairs = 0;
  std::optional<double> pairwise_accuracy;
  double svf_l1 = 0.0;
  bool ranking_skipped = false;  // every sampled pair tied on SVCR
};

inline nlohmann::json to_json(const EpochStats& s) {
  nlohmann::json j{{"record", "epoch"},       {"epoch", s.epoch},   {"likelihood", s.likelihood},
                   {"ranked_pairs", s.ranked_pairs}, {"pairs", s.pairs}, {"svf_l1", s.svf_l1},
                   {"ranking_skipped", s.ranking_skipped}};
  j["ranking_loss"] = s.ranking_loss ? nlohmann::json(*s.ranking_loss) : nlohmann::json(nullptr);
  j["pairwise_accuracy"] = s.pairwise_accuracy ? nlohmann::json(*s.pairwise_accuracy) : nlohmann::json(nullptr);
  return j;
}

struct TrainingState {
  RewardModel model;
  AdamState optimizer;
  std::mt19937_64 rng;
  int epoch = 0;

  static TrainingState start(const TrainingConfig& config) {
    TrainingState s{RewardModel::initialize(config.widths, config.seed), {}, std::mt19937_64(config.seed ^ 0x5eedULL), 0};
    s.optimizer = AdamState::for_model(s.model);
    return s;
  }
};

/**
 * One epoch: sample pairs_per_epoch random pairs and apply one optimiser step
 * per pair, in sampling order.
 */
inline EpochStats train_epoch(std::span<const Demonstration> dataset, TrainingState& state,
                              const TrainingConfig& config, bool compute_accuracy = true) {
  config.validate();
  if (dataset.size() < 2) throw std::invalid_argument("train_epoch: need at least two demonstrations");
  const int n = static_cast<int>(dataset.size());
  const int pairs = config.pairs_per_epoch > 0 ? config.pairs_per_epoch : std::max(1, n / 2);
  const AdamConfig adam{config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay};

  EpochStats stats;
  stats.epoch = ++state.epoch;
  stats.pairs = pairs;
  double ranking_sum = 0.0;
  for (int k = 0; k < pairs; ++k) {
    std::uniform_int_distribution<int> pick(0, n - 1);
    const int i = pick(state.rng);
    int j = pick(state.rng);
    while (j == i) j = pick(state.rng);
    const PairGradient g = pair_gradient(dataset[i], dataset[j], state.model, config);
    stats.likelihood += g.log_likelihood;
    stats.svf_l1 += g.svf_l1;
    if (g.ranked) {
      ++stats.ranked_pairs;
      ranking_sum += g.ranking_loss;
    }
    state.model = apply_update(std::move(state.model), g.loss_gradient, state.optimizer, adam);
  }
  stats.likelihood /= pairs;
  stats.svf_l1 /= pairs;
  if (stats.ranked_pairs > 0) stats.ranking_loss = ranking_sum / stats.ranked_pairs;
  stats.ranking_skipped = stats.ranked_pairs == 0;
  if (compute_accuracy) stats.pairwise_accuracy = pairwise_accuracy(dataset, state.model, config.gamma_mdp);
  return stats;
}

/// Runs config.epochs epochs from a fresh seeded model.
template <class OnEpoch>
RewardModel train(std::span<const Demonstration> dataset, const TrainingConfig& config, OnEpoch&& on_epoch,
                  bool compute_accuracy = true) {
  TrainingState state = TrainingState::start(config);
  for (int e = 0; e < config.epochs; ++e) on_epoch(train_epoch(dataset, state, config, compute_accuracy));
  return state.model;
}

inline RewardModel train(std::span<const Demonstration> dataset, const TrainingConfig& config) {
  return train(dataset, config, [](const EpochStats&) {}, false);
}

}  // namespace socnav
