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

// Fully-connected reward network mapping per-cell feature vectors to per-cell
// rewards, with hand-written reverse-mode gradients.

#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "socnav/feature_stack.hpp"
#include "socnav/grid_mdp.hpp"

namespace socnav {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Parameters (or a same-shaped gradient) of a stack of dense layers.
struct MlpParameters {
  std::vector<DenseLayer> layers;

  MlpParameters zeros_like() const {
    MlpParameters z;
    for (const auto& l : layers)
      z.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    return z;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  bool same_shape(const MlpParameters& o) const {
    if (layers.size() != o.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i].weight.rows() != o.layers[i].weight.rows() || layers[i].weight.cols() != o.layers[i].weight.cols() ||
          layers[i].bias.size() != o.layers[i].bias.size())
        return false;
    return true;
  }

  /// Layer by layer, weights row-major then biases.
  std::vector<double> flatten() const {
    std::vector<double> flat;
    flat.reserve(size());
    for (const auto& l : layers) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) flat.push_back(l.weight(r, c));
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) flat.push_back(l.bias[r]);
    }
    return flat;
  }

  void assign(std::span<const double> flat) {
    if (flat.size() != size()) throw std::invalid_argument("MlpParameters: flat parameter count mismatch");
    std::size_t k = 0;
    for (auto& l : layers) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[k++];
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = flat[k++];
    }
  }

  MlpParameters& operator+=(const MlpParameters& o) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].weight += o.layers[i].weight;
      layers[i].bias += o.layers[i].bias;
    }
    return *this;
  }

  MlpParameters& operator*=(double k) {
    for (auto& l : layers) {
      l.weight *= k;
      l.bias *= k;
    }
    return *this;
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  bool operator==(const MlpParameters& o) const { return same_shape(o) && flatten() == o.flatten(); }
};

using GradientAccumulator = MlpParameters;

/**
 * r = f(phi; theta): tanh hidden layers and a linear scalar head.
 * widths = {n_features, h_1, ..., h_k, 1}.
 */
class RewardModel {
 public:
  RewardModel() = default;

  static RewardModel initialize(std::vector<int> widths = {4, 32, 32, 1}, std::uint64_t seed = 0) {
    if (widths.size() < 2) throw std::invalid_argument("RewardModel: need at least input and output widths");
    for (int w : widths)
      if (w < 1) throw std::invalid_argument("RewardModel: widths must be positive");
    if (widths.back() != 1) throw std::invalid_argument("RewardModel: output width must be 1");
    RewardModel m;
    m.widths_ = std::move(widths);
    m.seed_ = seed;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i + 1 < m.widths_.size(); ++i) {
      const int in = m.widths_[i], out = m.widths_[i + 1];
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      std::uniform_real_distribution<double> u(-bound, bound);
      DenseLayer l{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
      for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) l.weight(r, c) = u(rng);
      for (int r = 0; r < out; ++r) l.bias[r] = u(rng);
      m.params_.layers.push_back(std::move(l));
    }
    return m;
  }

  /// Model with every parameter set to zero.
  static RewardModel zeros(std::vector<int> widths = {4, 32, 32, 1}) {
    RewardModel m = initialize(std::move(widths), 0);
    m.params_ = m.params_.zeros_like();
    return m;
  }

  const std::vector<int>& widths() const { return widths_; }
  std::uint64_t seed() const { return seed_; }
  int feature_count() const { return widths_.front(); }
  const MlpParameters& parameters() const { return params_; }
  MlpParameters& parameters() { return params_; }

  /// Rewards for a feature_count x cells batch.
  Eigen::VectorXd forward(const Eigen::MatrixXd& features) const {
    check_input(features.rows());
    Eigen::MatrixXd h = features;
    for (std::size_t i = 0; i < params_.layers.size(); ++i) {
      const auto& l = params_.layers[i];
      Eigen::MatrixXd z = (l.weight * h).colwise() + l.bias;
      h = last(i) ? z : Eigen::MatrixXd(z.array().tanh());
    }
    return h.row(0).transpose();
  }

  RewardMap forward(const FeatureMap& fm) const {
    const Eigen::VectorXd r = forward(fm.matrix());
    return RewardMap(r.data(), r.data() + r.size());
  }

  RewardMap operator()(const FeatureMap& fm) const { return forward(fm); }

  /// sum_s error(s) * d r(s) / d theta.
  GradientAccumulator backward(const Eigen::MatrixXd& features, std::span<const double> error) const {
    check_input(features.rows());
    if (static_cast<Eigen::Index>(error.size()) != features.cols())
      throw std::invalid_argument("RewardModel::backward: error length must equal the cell count");
    const std::size_t nl = params_.layers.size();
    std::vector<Eigen::MatrixXd> acts{features};
    for (std::size_t i = 0; i < nl; ++i) {
      const auto& l = params_.layers[i];
      Eigen::MatrixXd z = (l.weight * acts.back()).colwise() + l.bias;
      acts.push_back(last(i) ? z : Eigen::MatrixXd(z.array().tanh()));
    }
    GradientAccumulator grad = params_.zeros_like();
    Eigen::MatrixXd delta = Eigen::Map<const Eigen::RowVectorXd>(error.data(), static_cast<Eigen::Index>(error.size()));
    for (std::size_t i = nl; i-- > 0;) {
      grad.layers[i].weight = delta * acts[i].transpose();
      grad.layers[i].bias = delta.rowwise().sum();
      if (i == 0) break;
      delta = (params_.layers[i].weight.transpose() * delta).array() * (1.0 - acts[i].array().square());
    }
    return grad;
  }

  GradientAccumulator backward(const FeatureMap& fm, std::span<const double> error) const {
    return backward(fm.matrix(), error);
  }

  bool operator==(const RewardModel& o) const { return widths_ == o.widths_ && seed_ == o.seed_ && params_ == o.params_; }

 private:
  bool last(std::size_t i) const { return i + 1 == params_.layers.size(); }

  void check_input(Eigen::Index rows) const {
    if (rows != feature_count())
      throw std::invalid_argument("RewardModel: feature dimension " + std::to_string(rows) + " does not match " +
                                  std::to_string(feature_count()));
  }

  std::vector<int> widths_;
  std::uint64_t seed_ = 0;
  MlpParameters params_;
};

// ---------------------------------------------------------------------------
// Optimiser
// ---------------------------------------------------------------------------

/// Adam with decoupled L2 weight decay on the weight matrices (biases are not decayed).
struct AdamConfig {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

struct AdamState {
  MlpParameters first_moment;
  MlpParameters second_moment;
  std::int64_t step = 0;

  static AdamState for_model(const RewardModel& model) {
    return {model.parameters().zeros_like(), model.parameters().zeros_like(), 0};
  }
};

/// One descent step on `gradient` (a loss gradient: the update moves against it).
inline RewardModel apply_update(RewardModel model, const GradientAccumulator& gradient, AdamState& state,
                                const AdamConfig& config) {
  auto& params = model.parameters();
  if (!params.same_shape(gradient)) throw std::invalid_argument("apply_update: gradient shape mismatch");
  if (state.first_moment.layers.empty()) state = AdamState::for_model(model);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  const double lr = config.learning_rate;

  auto update = [&](auto& theta, const auto& g, auto& m, auto& v, bool decay) {
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = (config.beta2 * v.array() + (1.0 - config.beta2) * g.array().square()).matrix();
    auto step = ((m.array() / c1) / ((v.array() / c2).sqrt() + config.epsilon)).eval();
    if (decay) theta.array() -= lr * config.weight_decay * theta.array();
    theta.array() -= lr * step;
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weight, gradient.layers[i].weight, state.first_moment.layers[i].weight,
           state.second_moment.layers[i].weight, true);
    update(params.layers[i].bias, gradient.layers[i].bias, state.first_moment.layers[i].bias,
           state.second_moment.layers[i].bias, false);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json checkpoint_json(const RewardModel& model) {
  return {{"format", "socnav.reward_model"},
          {"version", kCheckpointVersion},
          {"activation", "tanh"},
          {"widths", model.widths()},
          {"seed", model.seed()},
          {"parameters", model.parameters().flatten()}};
}

inline void save_checkpoint(const RewardModel& model, std::ostream& os) { os << checkpoint_json(model).dump() << '\n'; }

inline RewardModel load_checkpoint(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("load_checkpoint: malformed checkpoint: ") + e.what());
  }
  if (j.value("format", "") != "socnav.reward_model") throw std::runtime_error("load_checkpoint: not a reward model");
  if (!j.contains("version")) throw std::runtime_error("load_checkpoint: missing version");
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: unsupported version " + j.at("version").dump());
  RewardModel model = RewardModel::initialize(j.at("widths").get<std::vector<int>>(), j.at("seed").get<std::uint64_t>());
  model.parameters().assign(j.at("parameters").get<std::vector<double>>());
  if (!model.parameters().all_finite()) throw std::runtime_error("load_checkpoint: non-finite parameters");
  return model;
}

}  // namespace socnav
