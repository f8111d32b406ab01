#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imbal/battery_env.hpp"
#include "imbal/checkpoint.hpp"
#include "imbal/market_data.hpp"
#include "imbal/nn.hpp"

namespace imbal {

enum class AgentKind { kDqn, kDdqn };
std::string to_string(AgentKind kind);
AgentKind agent_kind_from_string(std::string_view s);

/// Fixed, equally spaced return support z_i = v_min + i (v_max - v_min)/(N-1).
struct AtomGrid {
  std::size_t count = 51;
  double v_min = -1e5;
  double v_max = 1e5;

  double spacing() const { return (v_max - v_min) / static_cast<double>(count - 1); }
  double value(std::size_t i) const { return v_min + spacing() * static_cast<double>(i); }
  std::vector<double> values() const;
  void validate() const;
};

struct ReturnDistribution {
  std::vector<double> atom_values;
  std::vector<double> probabilities;

  double mean() const;
};

/// Projects the distribution of r + gamma Z (Z on `atoms` with probabilities
/// `probs`) back onto the support, splitting each shifted atom's mass between
/// its two neighbours in proportion to proximity. Targets outside
/// [v_min, v_max] are clipped to the boundary atom.
std::vector<double> categorical_projection(std::span<const double> probs, double reward,
                                           double gamma, const AtomGrid& atoms);

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Transition& t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_[i]; }
  /// Uniform sampling with replacement.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;

  /// Items in insertion order, oldest first.
  std::vector<Transition> ordered() const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

struct TrainConfig {
  double gamma = 0.999;
  double tau = 0.1;
  int episodes = 50000;
  std::size_t minibatch = 16384;
  std::size_t buffer_capacity = 1000000;
  double learning_rate = 5e-4;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_anneal_fraction = 0.4;
  int updates_per_step = 1;
  // Environment steps between update rounds.
  int update_interval = 1;
  std::vector<std::size_t> hidden_layers{256, 128};
  AtomGrid atoms;
  int validation_interval = 250;
  double initial_soc = 0.5;
  // Rewards are multiplied by this before entering the replay buffer. Reported
  // profits are always in EUR.
  double reward_scale = 1.0;
  // Greedy next action of the distributional target: picked from the target
  // network's expectations (default) or the online network's.
  bool target_argmax_online = false;
  std::uint64_t seed = 0;

  void validate() const;
  double epsilon_at(int episode) const;
};

struct AgentNets {
  AgentKind kind = AgentKind::kDqn;
  AtomGrid atoms;
  FeedForwardNet online;
  FeedForwardNet target;

  std::size_t output_dim() const;
};

AgentNets make_agent_nets(AgentKind kind, const std::vector<std::size_t>& hidden,
                          const AtomGrid& atoms, std::uint64_t seed);

/// Per-action expected return from a network output column.
std::array<double, kNumActions> action_values(AgentKind kind, const AtomGrid& atoms,
                                              std::span<const double> output);
std::array<double, kNumActions> action_values(const FeedForwardNet& net, AgentKind kind,
                                              const AtomGrid& atoms, const Features& x);
/// Softmax over one action's atom logits of a distributional head.
std::vector<double> action_distribution(std::span<const double> output, std::size_t action,
                                        std::size_t atom_count);

Action greedy_action(const std::array<double, kNumActions>& values);
Action select_action(const AgentNets& nets, const Features& x, double epsilon, Rng& rng);

/// Minibatch in network layout: one column of features per transition.
struct TransitionBatch {
  Eigen::MatrixXd states;
  Eigen::MatrixXd next_states;
  std::vector<Action> actions;
  std::vector<double> rewards;
  std::vector<bool> done;

  std::size_t size() const { return actions.size(); }
};

TransitionBatch make_batch(std::span<const Transition> transitions, const NormStats& norm);

/// r + gamma max_a Q_target(s', a); terminal transitions use r alone.
std::vector<double> dqn_td_targets(const TransitionBatch& batch, const AgentNets& nets, double gamma);

void soft_update(const FeedForwardNet& online, FeedForwardNet& target, double tau);

struct LossAndGrad {
  double loss = 0.0;
  NetGradients grads;
};

/// Mean squared TD error against fixed targets; gradients w.r.t. the online net.
LossAndGrad dqn_loss(const TransitionBatch& batch, const AgentNets& nets, double gamma);
/// Projected target distributions for a distributional batch.
std::vector<std::vector<double>> ddqn_targets(const TransitionBatch& batch, const AgentNets& nets,
                                              double gamma, bool argmax_online = false);
/// Mean KL(projected target || predicted distribution of the taken action).
LossAndGrad ddqn_loss(const TransitionBatch& batch, const AgentNets& nets, double gamma,
                      bool argmax_online = false);

struct CurvePoint {
  int episode = 0;
  double validation_profit = 0.0;  // EUR / day / MWh
};
using LearningCurve = std::vector<CurvePoint>;

void write_curve_csv(const std::filesystem::path& path, const LearningCurve& curve);

/// Days and normalization used for one training run.
struct TrainingData {
  std::vector<DayProfile> train;
  std::vector<DayProfile> validation;
  NormStats norm;
};

TrainingData make_training_data(const DatasetSplit& split, const BatteryParams& battery);

/// Average greedy daily profit per MWh of capacity over `days`.
double greedy_profit(const FeedForwardNet& net, AgentKind kind, const AtomGrid& atoms,
                     const std::vector<DayProfile>& days, const BatteryParams& battery,
                     const NormStats& norm, double initial_soc);

struct TrainResult {
  AgentNets nets;
  Checkpoint checkpoint;
  LearningCurve curve;
};

TrainResult train(AgentKind kind, const TrainingData& data, const BatteryParams& battery,
                  const TrainConfig& config);
TrainResult train(AgentKind kind, const DatasetSplit& split, const BatteryParams& battery,
                  const TrainConfig& config);

/// Checkpoint <-> agent conversion (atoms live in the checkpoint's extra).
Checkpoint to_checkpoint(const AgentNets& nets, const NormStats& norm, std::uint64_t seed,
                         std::uint64_t episodes);
AgentNets agent_from_checkpoint(const Checkpoint& ckpt);

}  // namespace imbal
