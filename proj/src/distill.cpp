#include <algorithm>
#include <cmath>
#include <random>

#include "imbal/config.hpp"
#include "imbal/error.hpp"
#include "imbal/kernels.hpp"
#include "imbal/policy_correction.hpp"

namespace imbal {

namespace {

Eigen::MatrixXd feature_matrix(std::span<const EnvState> states, const NormStats& norm) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(kFeatureDim), static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Features f = encode_state(states[i], norm);
    for (std::size_t k = 0; k < kFeatureDim; ++k)
      x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = f[k];
  }
  return x;
}

std::vector<Probs> column_softmax(const Eigen::MatrixXd& logits) {
  std::vector<Probs> out(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const auto p = softmax(std::span<const double>(logits.col(j).data(), kNumActions));
    out[static_cast<std::size_t>(j)] = {p[0], p[1], p[2]};
  }
  return out;
}

std::vector<Action> argmax_all(const std::vector<Probs>& probs) {
  std::vector<Action> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = argmax_action(probs[i]);
  return out;
}

void check_student_shape(const FeedForwardNet& net) {
  if (net.layer_dims().size() < 2 || net.input_dim() != kFeatureDim || net.output_dim() != kNumActions)
    throw Error(ErrorKind::kDimensionMismatch, "student network must map 5 features to 3 logits");
}

}  // namespace

void DistillConfig::validate() const {
  if (epochs < 0) throw Error(ErrorKind::kInvalidArgument, "distill.epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::kInvalidArgument, "distill.learning_rate must be positive");
  if (batches_per_epoch < 1) throw Error(ErrorKind::kInvalidArgument, "distill.batches_per_epoch must be >= 1");
  if (probe_interval < 1) throw Error(ErrorKind::kInvalidArgument, "distill.probe_interval must be >= 1");
  for (std::size_t h : hidden_layers)
    if (h == 0) throw Error(ErrorKind::kInvalidArgument, "distill.hidden_layers entries must be positive");
  if (trajectory_states + lattice_prices * lattice_socs == 0)
    throw Error(ErrorKind::kInvalidArgument, "distill batch would be empty");
  if (!(lattice_price_max > lattice_price_min) || !(lattice_soc_max >= lattice_soc_min))
    throw Error(ErrorKind::kInvalidArgument, "distill lattice bounds must be ordered");
  if (initial_soc < 0.0 || initial_soc > 1.0) throw Error(ErrorKind::kInvalidArgument, "distill.initial_soc outside [0, 1]");
}

std::vector<Probs> StudentModel::layer_free(std::span<const EnvState> states) const {
  if (states.empty()) return {};
  return column_softmax(kernels::parallel::forward_batch(net, feature_matrix(states, norm)));
}

std::vector<Probs> StudentModel::with_layer(std::span<const EnvState> states) const {
  if (states.empty()) return {};
  const std::vector<Probs> raw = layer_free(states);
  return correct_policy(states, raw, constraints).probs;
}

Checkpoint to_checkpoint(const StudentModel& student, std::uint64_t seed, std::uint64_t epochs) {
  check_student_shape(student.net);
  Checkpoint c;
  c.agent_kind = "student";
  c.net = student.net;
  c.norm_stats = student.norm;
  c.seed = seed;
  c.episodes = epochs;
  c.extra["constraints"] = student.constraints;
  return c;
}

StudentModel student_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.agent_kind != "student")
    throw Error(ErrorKind::kInvalidArgument, "checkpoint holds a '" + ckpt.agent_kind + "', not a student");
  check_student_shape(ckpt.net);
  StudentModel s;
  s.net = ckpt.net;
  s.norm = ckpt.norm_stats;
  if (auto it = ckpt.extra.find("constraints"); it != ckpt.extra.end()) {
    try {
      it->get_to(s.constraints);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kParse, std::string("student constraints: ") + e.what());
    }
  }
  s.constraints.validate();
  return s;
}

DistillStep distill_gradient(const FeedForwardNet& student, std::span<const EnvState> states, const NormStats& norm,
                             std::span<const Probs> teacher, const ConstraintConfig& config) {
  check_student_shape(student);
  if (teacher.size() != states.size())
    throw Error(ErrorKind::kDimensionMismatch, "distill_gradient: one teacher target per state required");
  DistillStep step;
  const auto cache = kernels::parallel::forward_cached(student, feature_matrix(states, norm));
  const std::vector<Probs> pre = column_softmax(cache.activations.back());
  const Correction corr = correct_policy(states, pre, config);
  const DistillLoss dl = distill_loss(pre, corr.probs, teacher, config.omega, config.swap_kl);
  const std::vector<Probs> through = project_policy_backward(corr.projection, dl.grad_post, &step.degenerate);

  Eigen::MatrixXd upstream(static_cast<Eigen::Index>(kNumActions), static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) {
    Probs g{};
    for (std::size_t k = 0; k < kNumActions; ++k) g[k] = dl.grad_pre[i][k] + through[i][k];
    const auto gl = softmax_backward(pre[i], g);
    for (std::size_t k = 0; k < kNumActions; ++k)
      upstream(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = gl[k];
  }
  step.loss = dl.loss;
  step.grads = kernels::parallel::backward_batch(student, cache, upstream);
  return step;
}

double distill_objective(const FeedForwardNet& student, std::span<const EnvState> states, const NormStats& norm,
                         std::span<const Probs> teacher, const ConstraintConfig& config,
                         const ConstraintSet& constraints) {
  check_student_shape(student);
  const std::vector<Probs> pre = column_softmax(kernels::parallel::forward_batch(student, feature_matrix(states, norm)));
  const Projection proj = project_policy(pre, constraints);
  return distill_loss(pre, proj.probs, teacher, config.omega, config.swap_kl).loss;
}

DistillResult train_student(const Checkpoint& teacher_ckpt, const std::vector<DayProfile>& train_days,
                            const BatteryParams& battery, const ConstraintConfig& config,
                            const DistillConfig& distill, const GridSpec& probe) {
  config.validate();
  distill.validate();
  probe.validate();
  battery.validate();
  const AgentNets teacher = agent_from_checkpoint(teacher_ckpt);
  if (teacher.online.input_dim() != kFeatureDim)
    throw Error(ErrorKind::kDimensionMismatch, "teacher expects a different feature vector");
  const NormStats norm = teacher_ckpt.norm_stats;

  // Greedy teacher rollouts over the training days.
  std::vector<EnvState> pool;
  BatteryEnv env(battery);
  for (const DayProfile& day : train_days) {
    EnvState s = env.reset(day, distill.initial_soc);
    while (!env.done()) {
      pool.push_back(s);
      const auto q = action_values(teacher.online, teacher.kind, teacher.atoms, encode_state(s, norm));
      s = env.step(greedy_action(q)).next_state;
    }
  }
  if (pool.empty() && distill.trajectory_states > 0)
    throw Error(ErrorKind::kInsufficientData, "train_student: no training days for teacher rollouts");

  std::vector<std::size_t> dims{kFeatureDim};
  dims.insert(dims.end(), distill.hidden_layers.begin(), distill.hidden_layers.end());
  dims.push_back(kNumActions);

  DistillResult result;
  StudentModel& student = result.student;
  student.net = FeedForwardNet::initialized(dims, distill.seed);
  student.norm = norm;
  student.constraints = config;

  Rng rng(distill.seed ^ 0x5d1f7a3cULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AdamState adam = AdamState::for_net(student.net, distill.learning_rate);
  std::vector<EnvState> violation_pool;

  auto probe_student = [&]() {
    violation_pool.clear();
    result.last_probe = verify_properties(
        [&](std::span<const EnvState> s) { return argmax_all(student.layer_free(s)); }, probe, config,
        Exec::kParallel, &violation_pool);
  };

  for (int epoch = 0; epoch < distill.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int b = 0; b < distill.batches_per_epoch; ++b) {
      std::vector<EnvState> batch;
      if (!pool.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (std::size_t i = 0; i < distill.trajectory_states; ++i) batch.push_back(pool[pick(rng)]);
      }
      // Jittered lattice at one calendar context so dominating pairs exist.
      {
        std::uniform_int_distribution<std::size_t> pick_ctx(0, probe.contexts.size() - 1);
        const CalendarContext ctx = probe.contexts[pick_ctx(rng)];
        const double dp = (distill.lattice_price_max - distill.lattice_price_min) /
                          static_cast<double>(std::max<std::size_t>(distill.lattice_prices, 1));
        const double ds = (distill.lattice_soc_max - distill.lattice_soc_min) /
                          static_cast<double>(std::max<std::size_t>(distill.lattice_socs, 1));
        for (std::size_t i = 0; i < distill.lattice_prices; ++i) {
          const double price = distill.lattice_price_min + dp * (static_cast<double>(i) + unit(rng));
          for (std::size_t j = 0; j < distill.lattice_socs; ++j) {
            const double soc = distill.lattice_soc_min + ds * (static_cast<double>(j) + unit(rng));
            batch.push_back({ctx.minute_of_qh, ctx.qh_of_day, ctx.month, soc, price});
          }
        }
      }
      if (!violation_pool.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, violation_pool.size() - 1);
        const std::size_t n = std::min(distill.violation_states, violation_pool.size());
        for (std::size_t i = 0; i < n; ++i) batch.push_back(violation_pool[pick(rng)]);
      }

      const std::vector<Probs> targets =
          teacher_policy_batch(teacher, feature_matrix(batch, norm), config.kd_temperature);
      DistillStep step = distill_gradient(student.net, batch, norm, targets, config);
      if (!std::isfinite(step.loss)) throw Error(ErrorKind::kDivergence, "distillation loss is not finite");
      adam_step(student.net, step.grads, adam);
      if (!student.net.all_finite()) throw Error(ErrorKind::kDivergence, "student parameters are not finite");
      epoch_loss += step.loss;
      result.degenerate_backward += step.degenerate;
    }
    result.epoch_losses.push_back(epoch_loss / distill.batches_per_epoch);
    if ((epoch + 1) % distill.probe_interval == 0 || epoch + 1 == distill.epochs) probe_student();
  }
  result.checkpoint = to_checkpoint(student, distill.seed, static_cast<std::uint64_t>(distill.epochs));
  return result;
}

}  // namespace imbal
