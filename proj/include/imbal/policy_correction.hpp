#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imbal/agents.hpp"
#include "imbal/battery_env.hpp"
#include "imbal/checkpoint.hpp"
#include "imbal/kernels.hpp"
#include "imbal/nn.hpp"
#include "json.hpp"

namespace imbal {

/// Probability vector over actions, indexed [discharge, idle, charge].
using Probs = std::array<double, kNumActions>;

struct ConstraintConfig {
  double price_lower = -500.0;  // at or below: charging must be the argmax
  double price_upper = 1500.0;  // at or above: discharging must be the argmax
  double margin = 1e-3;         // strict-argmax probability margin
  double omega = 1e-4;          // weight of the teacher-imitation term
  double kd_temperature = 1.0;  // softmax temperature for teacher targets
  // Use KL(teacher || post) + KL(post || pre) instead of the literal order.
  bool swap_kl = false;

  void validate() const;
};

enum class Property : std::uint8_t { kP1 = 0, kP2 = 1, kP3 = 2 };
const char* to_string(Property p);

/// coeffs . x >= rhs on the probability vector of batch state `state`.
struct LinearConstraint {
  std::size_t state = 0;
  std::array<double, kNumActions> coeffs{};
  double rhs = 0.0;
  Property source = Property::kP1;
  // Batch index of the state whose hint produced a P3 row.
  std::optional<std::size_t> partner;
};

struct ConstraintSet {
  std::size_t batch_size = 0;
  std::vector<LinearConstraint> rows;

  /// Row indices grouped by state.
  std::vector<std::vector<std::size_t>> rows_by_state() const;
};

/// Same-calendar states ordered by (price, soc) componentwise: for each state
/// the largest value (in action order) over the other states that dominate
/// it, or nullopt when none does.
std::vector<std::optional<std::size_t>> dominating_max(std::span<const EnvState> states,
                                                        std::span<const std::size_t> values);

/// Property 1/2 rows per state plus Property 3 rows instantiated against
/// the hinted argmax of every dominating partner: a charge hint forces the
/// state's argmax to charge, an idle hint forbids discharge as argmax.
ConstraintSet build_constraints(std::span<const EnvState> states, const ConstraintConfig& config,
                                std::span<const Action> hints);

/// Active constraints of one state's projection. The simplex equality row is
/// implicit; `normals` holds the active inequality normals.
struct ActiveSet {
  std::vector<std::array<double, kNumActions>> normals;
  std::vector<double> multipliers;
  std::vector<std::size_t> rows;  // constraint-set rows; SIZE_MAX marks x_k >= 0
  bool degenerate = false;
};

struct Projection {
  std::vector<Probs> probs;
  std::vector<ActiveSet> active;
  std::size_t degenerate_count = 0;
};

/// Least-squares projection of each probability vector onto the simplex
/// intersected with its constraint rows (exact active-set enumeration).
Projection project_policy(std::span<const Probs> inputs, const ConstraintSet& constraints,
                          Exec exec = Exec::kParallel);

/// Vector-Jacobian product of the projection: upstream projected onto the
/// null space of the active constraints (simplex row included).
std::vector<Probs> project_policy_backward(const Projection& forward, std::span<const Probs> upstream,
                                           std::size_t* degenerate_warnings = nullptr);

/// Projected policy whose argmax satisfies all three properties over the
/// batch: hints are regenerated from the projected argmax until no
/// dominating pair is out of order.
struct Correction {
  std::vector<Probs> probs;
  ConstraintSet constraints;
  Projection projection;
  int rounds = 0;
};
Correction correct_policy(std::span<const EnvState> states, std::span<const Probs> raw,
                          const ConstraintConfig& config, Exec exec = Exec::kParallel);

Action argmax_action(const Probs& p);

/// softmax(action value / temperature) of the frozen teacher.
Probs teacher_policy(const AgentNets& teacher, const Features& x, double temperature);
std::vector<Probs> teacher_policy_batch(const AgentNets& teacher, const Eigen::MatrixXd& features,
                                        double temperature);

struct DistillLoss {
  double loss = 0.0;
  std::vector<Probs> grad_pre;   // direct dL/dpre
  std::vector<Probs> grad_post;  // dL/dpost
};

/// Mean over the batch of omega KL(post || teacher) + KL(pre || post).
DistillLoss distill_loss(std::span<const Probs> pre, std::span<const Probs> post,
                         std::span<const Probs> teacher, double omega, bool swap_kl = false);

struct CalendarContext {
  int minute_of_qh = 0;
  int qh_of_day = 0;
  int month = 1;
};

struct GridSpec {
  double price_min = -1000.0;
  double price_max = 2000.0;
  double price_step = 30.0;
  double soc_min = 0.1;
  double soc_max = 1.0;
  double soc_step = 0.0375;
  std::vector<CalendarContext> contexts{{0, 40, 11}, {0, 80, 1}, {0, 28, 4}, {0, 56, 7}};

  void validate() const;
  std::vector<double> prices() const;
  std::vector<double> socs() const;
  /// Cells of one context, price-major (index = price_idx * n_soc + soc_idx).
  std::vector<EnvState> states(const CalendarContext& context) const;
  std::size_t cell_count() const;
};

struct ViolationExample {
  EnvState state;
  Action action = Action::kIdle;
  std::optional<EnvState> partner;
  std::optional<Action> partner_action;
};

struct ViolationReport {
  std::size_t total_states = 0;
  std::size_t total_pairs = 0;
  std::array<std::size_t, 3> counts{};
  std::array<std::vector<ViolationExample>, 3> examples;
  // States taking part in at least one violation.
  std::size_t violating_states = 0;

  static constexpr std::size_t kMaxExamples = 10;

  std::size_t total_violations() const { return counts[0] + counts[1] + counts[2]; }
  double violating_fraction() const;
  void merge(const ViolationReport& other);
  nlohmann::json to_json() const;
};

using BatchPolicy = std::function<std::vector<Action>(std::span<const EnvState>)>;

/// Exhaustive per-context grid check; Property 3 is checked on adjacent grid
/// neighbours, which covers the full order on a lattice. `violating`, when
/// given, receives every state involved in a violation.
ViolationReport verify_properties(const BatchPolicy& policy, const GridSpec& grid,
                                  const ConstraintConfig& config, Exec exec = Exec::kParallel,
                                  std::vector<EnvState>* violating = nullptr);

/// Distilled student. `layer_free` is the deployed path; `with_layer` runs
/// the projection on top and is used for verification.
struct StudentModel {
  FeedForwardNet net;
  NormStats norm;
  ConstraintConfig constraints;

  std::vector<Probs> layer_free(std::span<const EnvState> states) const;
  std::vector<Probs> with_layer(std::span<const EnvState> states) const;
};

Checkpoint to_checkpoint(const StudentModel& student, std::uint64_t seed, std::uint64_t epochs);
StudentModel student_from_checkpoint(const Checkpoint& ckpt);

struct DistillConfig {
  int epochs = 600;
  double learning_rate = 1e-3;
  std::vector<std::size_t> hidden_layers{64, 32};
  int batches_per_epoch = 4;
  std::size_t trajectory_states = 256;  // per batch, from teacher rollouts
  std::size_t lattice_prices = 16;      // lattice block per batch
  std::size_t lattice_socs = 16;
  double lattice_price_min = -1000.0;
  double lattice_price_max = 2000.0;
  double lattice_soc_min = 0.1;
  double lattice_soc_max = 1.0;
  std::size_t violation_states = 64;  // per batch, from the latest probe
  int probe_interval = 1;            // epochs between probe-grid checks
  double initial_soc = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DistillResult {
  StudentModel student;
  Checkpoint checkpoint;
  std::vector<double> epoch_losses;
  std::optional<ViolationReport> last_probe;
  std::size_t degenerate_backward = 0;
};

/// Gradient of the batch distillation loss w.r.t. the student parameters,
/// through softmax, the corrective projection and both KL terms.
struct DistillStep {
  double loss = 0.0;
  NetGradients grads;
  std::size_t degenerate = 0;
};
DistillStep distill_gradient(const FeedForwardNet& student, std::span<const EnvState> states,
                             const NormStats& norm, std::span<const Probs> teacher,
                             const ConstraintConfig& config);
/// Loss only, with constraints held fixed (for finite-difference checks).
double distill_objective(const FeedForwardNet& student, std::span<const EnvState> states,
                         const NormStats& norm, std::span<const Probs> teacher,
                         const ConstraintConfig& config, const ConstraintSet& constraints);

DistillResult train_student(const Checkpoint& teacher, const std::vector<DayProfile>& train_days,
                            const BatteryParams& battery, const ConstraintConfig& config,
                            const DistillConfig& distill, const GridSpec& probe);

}  // namespace imbal
