#include <cmath>
#include <fstream>
#include <iomanip>

#include "imbal/agents.hpp"
#include "imbal/error.hpp"

namespace imbal {

void write_curve_csv(const std::filesystem::path& path, const LearningCurve& curve) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << "episode,validation_profit_eur_per_day_per_mwh\n" << std::setprecision(17);
  for (const CurvePoint& p : curve) out << p.episode << ',' << p.validation_profit << '\n';
}

TrainingData make_training_data(const DatasetSplit& split, const BatteryParams& battery) {
  TrainingData data;
  data.train = make_day_profiles(split.train, battery);
  data.validation = make_day_profiles(split.validation, battery);
  if (!split.train.empty()) data.norm = compute_norm_stats(split.train);
  return data;
}

double greedy_profit(const FeedForwardNet& net, AgentKind kind, const AtomGrid& atoms,
                     const std::vector<DayProfile>& days, const BatteryParams& battery,
                     const NormStats& norm, double initial_soc) {
  if (days.empty()) return 0.0;
  BatteryEnv env(battery);
  double total = 0.0;
  for (const DayProfile& day : days) {
    EnvState s = env.reset(day, initial_soc);
    while (!env.done()) {
      const Action a = greedy_action(action_values(net, kind, atoms, encode_state(s, norm)));
      const StepResult r = env.step(a);
      total += r.reward;
      s = r.next_state;
    }
  }
  return total / static_cast<double>(days.size()) / battery.capacity_mwh;
}

TrainResult train(AgentKind kind, const TrainingData& data, const BatteryParams& battery,
                  const TrainConfig& config) {
  config.validate();
  battery.validate();
  if (data.train.empty()) throw Error(ErrorKind::kInsufficientData, "training split is empty");

  TrainResult result;
  Rng rng(config.seed);
  result.nets = make_agent_nets(kind, config.hidden_layers, config.atoms, config.seed);
  AgentNets& nets = result.nets;
  AdamState adam = AdamState::for_net(nets.online, config.learning_rate);
  ReplayBuffer buffer(config.buffer_capacity);
  BatteryEnv env(battery);
  std::uniform_int_distribution<std::size_t> pick_day(0, data.train.size() - 1);

  std::uint64_t env_steps = 0;
  std::vector<Transition> scratch;
  for (int episode = 0; episode < config.episodes; ++episode) {
    const double eps = config.epsilon_at(episode);
    EnvState s = env.reset(data.train[pick_day(rng)], config.initial_soc);
    while (!env.done()) {
      const Action a = select_action(nets, encode_state(s, data.norm), eps, rng);
      const StepResult r = env.step(a);
      buffer.push(Transition{s, a, r.reward * config.reward_scale, r.next_state, r.done});
      s = r.next_state;
      ++env_steps;
      if (buffer.size() < config.minibatch || env_steps % static_cast<std::uint64_t>(config.update_interval) != 0)
        continue;
      for (int u = 0; u < config.updates_per_step; ++u) {
        scratch.clear();
        for (std::size_t i : buffer.sample_indices(config.minibatch, rng)) scratch.push_back(buffer.at(i));
        const TransitionBatch batch = make_batch(scratch, data.norm);
        LossAndGrad lg = kind == AgentKind::kDqn
                             ? dqn_loss(batch, nets, config.gamma)
                             : ddqn_loss(batch, nets, config.gamma, config.target_argmax_online);
        if (!std::isfinite(lg.loss))
          throw Error(ErrorKind::kDivergence, "loss became non-finite at episode " +
                                                  std::to_string(episode) + ", step " +
                                                  std::to_string(env_steps));
        adam_step(nets.online, lg.grads, adam);
        soft_update(nets.online, nets.target, config.tau);
      }
    }
    const bool last = episode + 1 == config.episodes;
    if (!data.validation.empty() && ((episode + 1) % config.validation_interval == 0 || last)) {
      result.curve.push_back(CurvePoint{
          episode + 1, greedy_profit(nets.online, kind, nets.atoms, data.validation, battery,
                                     data.norm, config.initial_soc)});
    }
  }
  if (!nets.online.all_finite()) throw Error(ErrorKind::kDivergence, "network parameters became non-finite");
  result.checkpoint = to_checkpoint(nets, data.norm, config.seed, static_cast<std::uint64_t>(config.episodes));
  return result;
}

TrainResult train(AgentKind kind, const DatasetSplit& split, const BatteryParams& battery,
                  const TrainConfig& config) {
  return train(kind, make_training_data(split, battery), battery, config);
}

}  // namespace imbal
