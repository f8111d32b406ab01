#include "imbal/agents.hpp"

#include <algorithm>
#include <cmath>

#include "imbal/error.hpp"
#include "imbal/kernels.hpp"

namespace imbal {

std::string to_string(AgentKind kind) { return kind == AgentKind::kDqn ? "dqn" : "ddqn"; }

AgentKind agent_kind_from_string(std::string_view s) {
  if (s == "dqn") return AgentKind::kDqn;
  if (s == "ddqn") return AgentKind::kDdqn;
  throw Error(ErrorKind::kInvalidArgument, "unknown agent kind '" + std::string(s) + "'");
}

std::vector<double> AtomGrid::values() const {
  std::vector<double> z(count);
  for (std::size_t i = 0; i < count; ++i) z[i] = value(i);
  return z;
}

void AtomGrid::validate() const {
  if (count < 2 || !(v_max > v_min))
    throw Error(ErrorKind::kInvalidArgument, "atom grid needs count >= 2 and v_max > v_min");
}

double ReturnDistribution::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < atom_values.size(); ++i) m += atom_values[i] * probabilities[i];
  return m;
}

std::vector<double> categorical_projection(std::span<const double> probs, double reward,
                                           double gamma, const AtomGrid& atoms) {
  if (probs.size() != atoms.count)
    throw Error(ErrorKind::kDimensionMismatch, "distribution size differs from atom count");
  const double dz = atoms.spacing();
  const auto last = static_cast<double>(atoms.count - 1);
  std::vector<double> out(atoms.count, 0.0);
  for (std::size_t j = 0; j < atoms.count; ++j) {
    if (probs[j] == 0.0) continue;
    const double tz = std::clamp(reward + gamma * atoms.value(j), atoms.v_min, atoms.v_max);
    const double b = std::clamp((tz - atoms.v_min) / dz, 0.0, last);
    const double lo = std::floor(b);
    const double hi = std::ceil(b);
    const auto l = static_cast<std::size_t>(lo);
    const auto u = static_cast<std::size_t>(hi);
    if (l == u) {
      out[l] += probs[j];
    } else {
      out[l] += probs[j] * (hi - b);
      out[u] += probs[j] * (b - lo);
    }
  }
  return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorKind::kInvalidArgument, "replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 20));
}

void ReplayBuffer::push(const Transition& t) {
  if (items_.size() < capacity_) {
    items_.push_back(t);
  } else {
    items_[next_] = t;
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const {
  if (items_.size() < count)
    throw Error(ErrorKind::kInsufficientData, "replay buffer smaller than minibatch");
  std::uniform_int_distribution<std::size_t> dist(0, items_.size() - 1);
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = dist(rng);
  return idx;
}

std::vector<Transition> ReplayBuffer::ordered() const {
  if (items_.size() < capacity_) return items_;
  std::vector<Transition> out;
  out.reserve(items_.size());
  for (std::size_t k = 0; k < items_.size(); ++k) out.push_back(items_[(next_ + k) % capacity_]);
  return out;
}

void TrainConfig::validate() const {
  auto bad = [](const char* what) { throw Error(ErrorKind::kInvalidArgument, what); };
  if (!(gamma > 0.0 && gamma <= 1.0)) bad("gamma must lie in (0,1]");
  if (!(tau > 0.0 && tau <= 1.0)) bad("tau must lie in (0,1]");
  if (episodes < 0) bad("episodes must be non-negative");
  if (minibatch == 0 || buffer_capacity == 0) bad("minibatch and buffer capacity must be positive");
  if (minibatch > buffer_capacity) bad("minibatch larger than buffer capacity");
  if (updates_per_step <= 0 || update_interval <= 0) bad("update counts must be positive");
  if (validation_interval <= 0) bad("validation interval must be positive");
  if (!(learning_rate > 0.0)) bad("learning rate must be positive");
  if (!(reward_scale > 0.0)) bad("reward scale must be positive");
  atoms.validate();
}

double TrainConfig::epsilon_at(int episode) const {
  const double anneal = epsilon_anneal_fraction * episodes;
  if (anneal <= 0.0 || episode >= anneal) return epsilon_end;
  return epsilon_start + (epsilon_end - epsilon_start) * (episode / anneal);
}

std::size_t AgentNets::output_dim() const {
  return kind == AgentKind::kDqn ? kNumActions : kNumActions * atoms.count;
}

AgentNets make_agent_nets(AgentKind kind, const std::vector<std::size_t>& hidden,
                          const AtomGrid& atoms, std::uint64_t seed) {
  AgentNets nets;
  nets.kind = kind;
  nets.atoms = atoms;
  std::vector<std::size_t> dims{kFeatureDim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(nets.output_dim());
  nets.online = FeedForwardNet::initialized(dims, seed);
  nets.target = nets.online;
  return nets;
}

std::vector<double> action_distribution(std::span<const double> output, std::size_t action,
                                        std::size_t atom_count) {
  return softmax(output.subspan(action * atom_count, atom_count));
}

std::array<double, kNumActions> action_values(AgentKind kind, const AtomGrid& atoms,
                                              std::span<const double> output) {
  std::array<double, kNumActions> q{};
  if (kind == AgentKind::kDqn) {
    for (std::size_t a = 0; a < kNumActions; ++a) q[a] = output[a];
    return q;
  }
  for (std::size_t a = 0; a < kNumActions; ++a) {
    const auto p = action_distribution(output, a, atoms.count);
    double m = 0.0;
    for (std::size_t i = 0; i < atoms.count; ++i) m += p[i] * atoms.value(i);
    q[a] = m;
  }
  return q;
}

std::array<double, kNumActions> action_values(const FeedForwardNet& net, AgentKind kind,
                                              const AtomGrid& atoms, const Features& x) {
  const Eigen::VectorXd out = net.forward(x);
  return action_values(kind, atoms, std::span<const double>(out.data(), static_cast<std::size_t>(out.size())));
}

Action greedy_action(const std::array<double, kNumActions>& values) {
  return action_from_index(static_cast<std::size_t>(
      std::max_element(values.begin(), values.end()) - values.begin()));
}

Action select_action(const AgentNets& nets, const Features& x, double epsilon, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (epsilon > 0.0 && unit(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, kNumActions - 1);
    return action_from_index(pick(rng));
  }
  return greedy_action(action_values(nets.online, nets.kind, nets.atoms, x));
}

TransitionBatch make_batch(std::span<const Transition> transitions, const NormStats& norm) {
  TransitionBatch b;
  const auto n = static_cast<Eigen::Index>(transitions.size());
  b.states.resize(static_cast<Eigen::Index>(kFeatureDim), n);
  b.next_states.resize(static_cast<Eigen::Index>(kFeatureDim), n);
  b.actions.reserve(transitions.size());
  b.rewards.reserve(transitions.size());
  b.done.reserve(transitions.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    const Transition& t = transitions[static_cast<std::size_t>(j)];
    const Features f = encode_state(t.state, norm);
    const Features g = encode_state(t.next_state, norm);
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
      b.states(static_cast<Eigen::Index>(i), j) = f[i];
      b.next_states(static_cast<Eigen::Index>(i), j) = g[i];
    }
    b.actions.push_back(t.action);
    b.rewards.push_back(t.reward);
    b.done.push_back(t.done);
  }
  return b;
}

std::vector<double> dqn_td_targets(const TransitionBatch& batch, const AgentNets& nets, double gamma) {
  const Eigen::MatrixXd next_q = kernels::parallel::forward_batch(nets.target, batch.next_states);
  std::vector<double> y(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    if (batch.done[j]) {
      y[j] = batch.rewards[j];
      continue;
    }
    y[j] = batch.rewards[j] + gamma * next_q.col(static_cast<Eigen::Index>(j)).maxCoeff();
  }
  return y;
}

void soft_update(const FeedForwardNet& online, FeedForwardNet& target, double tau) {
  if (online.layer_dims() != target.layer_dims())
    throw Error(ErrorKind::kDimensionMismatch, "soft_update: topologies differ");
  for (std::size_t l = 0; l < online.layers().size(); ++l) {
    auto& t = target.layers()[l];
    const auto& o = online.layers()[l];
    t.weights = tau * o.weights + (1.0 - tau) * t.weights;
    t.biases = tau * o.biases + (1.0 - tau) * t.biases;
  }
}

LossAndGrad dqn_loss(const TransitionBatch& batch, const AgentNets& nets, double gamma) {
  const std::vector<double> y = dqn_td_targets(batch, nets, gamma);
  const kernels::ForwardCache cache = kernels::parallel::forward_cached(nets.online, batch.states);
  const Eigen::MatrixXd& q = cache.activations.back();
  const auto n = static_cast<double>(batch.size());
  Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  LossAndGrad out;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    const auto a = static_cast<Eigen::Index>(index_of(batch.actions[j]));
    const double err = y[j] - q(a, col);
    out.loss += err * err / n;
    upstream(a, col) = -2.0 * err / n;
  }
  out.grads = kernels::parallel::backward_batch(nets.online, cache, upstream);
  return out;
}

std::vector<std::vector<double>> ddqn_targets(const TransitionBatch& batch, const AgentNets& nets,
                                              double gamma, bool argmax_online) {
  const std::size_t n_atoms = nets.atoms.count;
  const Eigen::MatrixXd next_t = kernels::parallel::forward_batch(nets.target, batch.next_states);
  Eigen::MatrixXd next_o;
  if (argmax_online) next_o = kernels::parallel::forward_batch(nets.online, batch.next_states);
  std::vector<std::vector<double>> targets(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    std::span<const double> out_t(next_t.col(col).data(), static_cast<std::size_t>(next_t.rows()));
    const Eigen::MatrixXd& chooser = argmax_online ? next_o : next_t;
    std::span<const double> out_c(chooser.col(col).data(), static_cast<std::size_t>(chooser.rows()));
    const std::size_t a_star = index_of(greedy_action(action_values(AgentKind::kDdqn, nets.atoms, out_c)));
    const std::vector<double> p = action_distribution(out_t, a_star, n_atoms);
    targets[j] = categorical_projection(p, batch.rewards[j], batch.done[j] ? 0.0 : gamma, nets.atoms);
  }
  return targets;
}

LossAndGrad ddqn_loss(const TransitionBatch& batch, const AgentNets& nets, double gamma,
                      bool argmax_online) {
  const std::size_t n_atoms = nets.atoms.count;
  const auto targets = ddqn_targets(batch, nets, gamma, argmax_online);
  const kernels::ForwardCache cache = kernels::parallel::forward_cached(nets.online, batch.states);
  const Eigen::MatrixXd& logits = cache.activations.back();
  const auto n = static_cast<double>(batch.size());
  Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  LossAndGrad out;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    const std::size_t a = index_of(batch.actions[j]);
    std::span<const double> row(logits.col(col).data(), static_cast<std::size_t>(logits.rows()));
    const std::vector<double> p = action_distribution(row, a, n_atoms);
    const std::vector<double>& m = targets[j];
    out.loss += kl_divergence(m, p) / n;
    // d/dlogits KL(m || softmax(logits)) = p - m, with the floor's flat region
    // contributing nothing.
    std::vector<double> gp(n_atoms), gq(n_atoms);
    kl_divergence_grad(m, p, gp, gq);
    const std::vector<double> gl = softmax_backward(p, gq);
    for (std::size_t i = 0; i < n_atoms; ++i)
      upstream(static_cast<Eigen::Index>(a * n_atoms + i), col) = gl[i] / n;
  }
  out.grads = kernels::parallel::backward_batch(nets.online, cache, upstream);
  return out;
}

Checkpoint to_checkpoint(const AgentNets& nets, const NormStats& norm, std::uint64_t seed,
                         std::uint64_t episodes) {
  Checkpoint c;
  c.agent_kind = to_string(nets.kind);
  c.net = nets.online;
  c.norm_stats = norm;
  c.seed = seed;
  c.episodes = episodes;
  if (nets.kind == AgentKind::kDdqn)
    c.extra["atoms"] = {{"count", nets.atoms.count}, {"v_min", nets.atoms.v_min}, {"v_max", nets.atoms.v_max}};
  return c;
}

AgentNets agent_from_checkpoint(const Checkpoint& ckpt) {
  AgentNets nets;
  nets.kind = agent_kind_from_string(ckpt.agent_kind);
  if (nets.kind == AgentKind::kDdqn) {
    if (!ckpt.extra.contains("atoms"))
      throw Error(ErrorKind::kLengthMismatch, "ddqn checkpoint lacks atom settings");
    const auto& a = ckpt.extra.at("atoms");
    nets.atoms.count = a.at("count").get<std::size_t>();
    nets.atoms.v_min = a.at("v_min").get<double>();
    nets.atoms.v_max = a.at("v_max").get<double>();
    nets.atoms.validate();
  }
  if (ckpt.net.input_dim() != kFeatureDim || ckpt.net.output_dim() != nets.output_dim())
    throw Error(ErrorKind::kDimensionMismatch, "checkpoint network shape does not fit agent kind");
  nets.online = ckpt.net;
  nets.target = ckpt.net;
  return nets;
}

}  // namespace imbal
