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

// The local grid MDP: deterministic transitions between window cells, value
// iteration for planning, and the maximum-entropy backward/forward passes used
// by the reward-learning gradient.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "socnav/grid_window.hpp"

namespace socnav {

enum class Action : int { up = 0, down, left, right, stop, up_left, up_right, down_left, down_right };

inline constexpr int kBasicActionCount = 5;
inline constexpr int kExtendedActionCount = 9;

/// Row/column offset of each action; rows run forward, columns to the left.
inline constexpr std::array<Cell, kExtendedActionCount> kActionOffsets{{
    {1, 0}, {-1, 0}, {0, 1}, {0, -1}, {0, 0}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};

/// Per-state scalar reward, indexed like GridWindow states.
using RewardMap = std::vector<double>;

struct GridMdp {
  int m_side = 3;
  double gamma = 0.9;
  std::optional<int> goal_state;  // absorbing under every action when set
  bool diagonal_actions = false;

  void validate() const {
    if (m_side < 2) throw std::invalid_argument("GridMdp: m_side must be >= 2");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("GridMdp: gamma must lie in [0, 1)");
    if (goal_state && (*goal_state < 0 || *goal_state >= state_count()))
      throw std::invalid_argument("GridMdp: goal_state out of range");
  }

  int state_count() const { return m_side * m_side; }
  int action_count() const { return diagonal_actions ? kExtendedActionCount : kBasicActionCount; }
  bool valid_state(int s) const { return s >= 0 && s < state_count(); }

  /// Deterministic successor; moves off the grid stay put.
  int next(int state, int action) const {
    if (goal_state && state == *goal_state) return state;
    const Cell off = kActionOffsets[action];
    const int row = state / m_side + off.row;
    const int col = state % m_side + off.col;
    if (row < 0 || row >= m_side || col < 0 || col >= m_side) return state;
    return row * m_side + col;
  }
};

namespace detail {

inline void check_rewards(const GridMdp& mdp, std::span<const double> rewards) {
  if (static_cast<int>(rewards.size()) != mdp.state_count())
    throw std::invalid_argument("reward map size does not match the MDP state count");
  for (double r : rewards)
    if (!std::isfinite(r)) throw std::invalid_argument("reward map contains a non-finite value");
}

inline double log_sum_exp(std::span<const double> xs) {
  const double hi = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(hi)) return hi;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - hi);
  return hi + std::log(sum);
}

}  // namespace detail

struct ValueIterationResult {
  std::vector<double> values;
  std::vector<int> greedy;  // action per state
  int sweeps = 0;
};

/**
 * Solves V(s) = r(s) + gamma * max_a V(next(s, a)) by synchronous sweeps until
 * successive iterates differ by less than `tol` in the sup norm. The greedy
 * policy breaks ties towards the lowest action index.
 */
inline ValueIterationResult value_iteration(const GridMdp& mdp, std::span<const double> rewards, double tol = 1e-10) {
  mdp.validate();
  detail::check_rewards(mdp, rewards);
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be > 0");
  const int n = mdp.state_count();
  const int na = mdp.action_count();
  ValueIterationResult out;
  out.values.assign(n, 0.0);
  std::vector<double> next(n);
  while (true) {
    double delta = 0.0;
    for (int s = 0; s < n; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < na; ++a) best = std::max(best, out.values[mdp.next(s, a)]);
      next[s] = rewards[s] + mdp.gamma * best;
      delta = std::max(delta, std::abs(next[s] - out.values[s]));
    }
    out.values.swap(next);
    ++out.sweeps;
    if (delta < tol) break;
  }
  out.greedy.assign(n, 0);
  for (int s = 0; s < n; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < na; ++a) {
      const double v = out.values[mdp.next(s, a)];
      if (v > best) {
        best = v;
        out.greedy[s] = a;
      }
    }
  }
  return out;
}

/**
 * Time-indexed stochastic policy: probability of each action at each step and
 * state. A stationary policy stores a single table used at every step.
 */
class StochasticPolicy {
 public:
  StochasticPolicy() = default;
  StochasticPolicy(int state_count, int action_count, int horizon)
      : state_count_(state_count),
        action_count_(action_count),
        tables_(horizon, std::vector<double>(static_cast<std::size_t>(state_count) * action_count, 0.0)) {}

  static StochasticPolicy stationary(int state_count, int action_count, std::vector<double> table) {
    StochasticPolicy p;
    p.state_count_ = state_count;
    p.action_count_ = action_count;
    p.tables_.push_back(std::move(table));
    p.stationary_ = true;
    return p;
  }

  static StochasticPolicy from_greedy(const GridMdp& mdp, std::span<const int> greedy) {
    std::vector<double> table(static_cast<std::size_t>(mdp.state_count()) * mdp.action_count(), 0.0);
    for (int s = 0; s < mdp.state_count(); ++s) table[s * mdp.action_count() + greedy[s]] = 1.0;
    return stationary(mdp.state_count(), mdp.action_count(), std::move(table));
  }

  bool is_stationary() const { return stationary_; }
  int state_count() const { return state_count_; }
  int action_count() const { return action_count_; }
  /// Number of steps covered; unbounded for stationary policies.
  int horizon() const { return stationary_ ? std::numeric_limits<int>::max() : static_cast<int>(tables_.size()); }

  double prob(int step, int state, int action) const { return table(step)[state * action_count_ + action]; }
  double& prob(int step, int state, int action) {
    return tables_[stationary_ ? 0 : step][state * action_count_ + action];
  }

  std::span<const double> distribution(int step, int state) const {
    return std::span<const double>(table(step)).subspan(static_cast<std::size_t>(state) * action_count_,
                                                        action_count_);
  }

  int argmax(int step, int state) const {
    const auto d = distribution(step, state);
    return static_cast<int>(std::max_element(d.begin(), d.end()) - d.begin());
  }

 private:
  const std::vector<double>& table(int step) const { return tables_[stationary_ ? 0 : step]; }

  int state_count_ = 0;
  int action_count_ = 0;
  std::vector<std::vector<double>> tables_;
  bool stationary_ = false;
};

/**
 * Finite-horizon maximum-entropy backward pass.
 *
 * With W_H(s) = d^H r(s) and W_t(s) = d^t r(s) + logsumexp_a W_{t+1}(next(s,a)),
 * the step-t policy is pi_t(a|s) = exp(W_{t+1}(next(s,a)) - logsumexp). Every
 * action sequence a_0..a_{H-1} from s_0 then has probability proportional to
 * exp(sum_k d^k r(s_k)) over its H+1 visited states. `discount` = 1 gives the
 * undiscounted path reward the visitation gradient assumes.
 */
inline StochasticPolicy soft_value_iteration(const GridMdp& mdp, std::span<const double> rewards, int horizon,
                                             double discount = 1.0) {
  mdp.validate();
  detail::check_rewards(mdp, rewards);
  if (horizon < 1) throw std::invalid_argument("soft_value_iteration: horizon must be >= 1");
  if (!(discount > 0.0 && discount <= 1.0)) throw std::invalid_argument("soft_value_iteration: discount in (0, 1]");
  const int n = mdp.state_count();
  const int na = mdp.action_count();
  StochasticPolicy policy(n, na, horizon);

  std::vector<double> w(n);
  double weight = std::pow(discount, horizon);
  for (int s = 0; s < n; ++s) w[s] = weight * rewards[s];

  std::vector<double> q(na);
  std::vector<double> w_prev(n);
  for (int t = horizon - 1; t >= 0; --t) {
    weight = std::pow(discount, t);
    for (int s = 0; s < n; ++s) {
      for (int a = 0; a < na; ++a) q[a] = w[mdp.next(s, a)];
      const double lse = detail::log_sum_exp(q);
      for (int a = 0; a < na; ++a) policy.prob(t, s, a) = std::exp(q[a] - lse);
      w_prev[s] = weight * rewards[s] + lse;
    }
    w.swap(w_prev);
  }
  return policy;
}

/**
 * Expected state visitation counts over steps 0..horizon when starting in
 * `start_state` and following `policy`. Sums to horizon + 1.
 */
inline std::vector<double> expected_svf(const GridMdp& mdp, const StochasticPolicy& policy, int start_state,
                                        int horizon) {
  mdp.validate();
  if (!mdp.valid_state(start_state)) throw std::invalid_argument("expected_svf: start_state out of range");
  if (horizon < 0) throw std::invalid_argument("expected_svf: horizon must be >= 0");
  if (policy.state_count() != mdp.state_count() || policy.action_count() != mdp.action_count())
    throw std::invalid_argument("expected_svf: policy shape does not match the MDP");
  if (horizon > policy.horizon()) throw std::invalid_argument("expected_svf: policy shorter than horizon");
  const int n = mdp.state_count();
  const int na = mdp.action_count();
  std::vector<double> mass(n, 0.0), next(n);
  mass[start_state] = 1.0;
  std::vector<double> svf = mass;
  for (int t = 0; t < horizon; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int s = 0; s < n; ++s) {
      if (mass[s] == 0.0) continue;
      for (int a = 0; a < na; ++a) next[mdp.next(s, a)] += mass[s] * policy.prob(t, s, a);
    }
    mass.swap(next);
    for (int s = 0; s < n; ++s) svf[s] += mass[s];
  }
  return svf;
}

/// Per-demonstration visit counts averaged over the demonstrations.
inline std::vector<double> demo_svf(std::span<const std::vector<int>> demonstrations, const GridMdp& mdp) {
  if (demonstrations.empty()) throw std::invalid_argument("demo_svf: no demonstrations");
  std::vector<double> svf(mdp.state_count(), 0.0);
  for (const auto& demo : demonstrations)
    for (int s : demo) {
      if (!mdp.valid_state(s)) throw std::invalid_argument("demo_svf: state out of range");
      svf[s] += 1.0;
    }
  for (double& v : svf) v /= static_cast<double>(demonstrations.size());
  return svf;
}

/// log P(state path | start) under the policy; -inf for an infeasible step.
inline double path_log_likelihood(const GridMdp& mdp, const StochasticPolicy& policy, std::span<const int> path) {
  double ll = 0.0;
  for (std::size_t t = 0; t + 1 < path.size(); ++t) {
    double p = 0.0;
    for (int a = 0; a < mdp.action_count(); ++a)
      if (mdp.next(path[t], a) == path[t + 1]) p += policy.prob(static_cast<int>(t), path[t], a);
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    ll += std::log(p);
  }
  return ll;
}

}  // namespace socnav
