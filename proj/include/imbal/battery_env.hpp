#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "imbal/market_data.hpp"

namespace imbal {

/// Discrete battery action. Index order matches the numeric order of the
/// power set point: discharge (-P_max) < idle (0) < charge (+P_max).
enum class Action : std::uint8_t { kDischarge = 0, kIdle = 1, kCharge = 2 };

inline constexpr std::size_t kNumActions = 3;
inline constexpr std::size_t kFeatureDim = 5;

inline constexpr std::size_t index_of(Action a) { return static_cast<std::size_t>(a); }
inline constexpr Action action_from_index(std::size_t i) { return static_cast<Action>(i); }
std::string_view to_string(Action a);

struct BatteryParams {
  double capacity_mwh = 8.0;
  double p_max_mw = 4.0;
  double eta_charge = std::sqrt(0.9);
  double eta_discharge = std::sqrt(0.9);
  double soc_min = 0.10;
  double soc_max = 1.0;
  int step_minutes = 2;
  // Reward is power x price x step hours (EUR). When false the reward is the
  // bare power x price product.
  bool reward_includes_dt = true;
  // Settle the commanded power even when the SoC bound cuts the step short.
  // By default only the energy actually exchanged is settled.
  bool settle_commanded_power = false;

  void validate() const;
  double step_hours() const { return step_minutes / 60.0; }
  int steps_per_day() const { return kMinutesPerDay / step_minutes; }
};

/// Signed power set point in MW.
double action_power(Action a, const BatteryParams& params);

/// Observation handed to the agent. `soc` is the pre-action state of charge.
struct EnvState {
  int minute_of_qh = 0;
  int qh_of_day = 0;
  int month = 1;
  double soc = 0.5;
  double indicative_price = 0.0;
};

struct Transition {
  EnvState state;
  Action action = Action::kIdle;
  double reward = 0.0;
  EnvState next_state;
  bool done = false;
};

/// One decision slot of an episode.
struct DaySlot {
  int minute_of_qh = 0;
  int qh_of_day = 0;
  double indicative_price = 0.0;
  double settled_price = 0.0;
};

/// Everything the environment needs to replay one day.
struct DayProfile {
  Date date;
  int month = 1;
  std::vector<DaySlot> slots;
};

/// Samples the day at every `step_minutes` minute from midnight: the
/// indicative price is read at the slot's starting minute and the settled
/// price of the quarter hour containing that minute applies to the step.
DayProfile make_day_profile(const PriceSeries& series, Date date, const BatteryParams& params);
std::vector<DayProfile> make_day_profiles(const PriceSeries& series, const BatteryParams& params);

double soc_transition(double soc, Action action, const BatteryParams& params);
double step_reward(Action action, double settled_price, const BatteryParams& params);

/// Grid power exchanged when `action` is applied at `soc`: the commanded
/// power, scaled down when the step ends on a SoC bound.
double delivered_power(double soc, Action action, const BatteryParams& params);
/// Reward of exchanging `power_mw` with the grid for one step.
double power_reward(double power_mw, double settled_price, const BatteryParams& params);

struct StepResult {
  EnvState next_state;
  double reward = 0.0;
  bool done = false;
};

class BatteryEnv {
 public:
  explicit BatteryEnv(BatteryParams params);

  EnvState reset(const DayProfile& day, double initial_soc);
  EnvState reset(const PriceSeries& series, Date day, double initial_soc);
  StepResult step(Action action);

  const EnvState& state() const { return state_; }
  const BatteryParams& params() const { return params_; }
  const DayProfile& day() const { return day_; }
  std::size_t step_index() const { return slot_; }
  bool done() const { return done_; }
  /// Settled price applied to the current step.
  double current_settled_price() const { return day_.slots[slot_].settled_price; }

 private:
  BatteryParams params_;
  DayProfile day_;
  EnvState state_;
  std::size_t slot_ = 0;
  bool done_ = true;
};

struct NormStats {
  double price_mean = 0.0;
  double price_std = 1.0;
};

/// Mean and population standard deviation of all indicative prices.
NormStats compute_norm_stats(const PriceSeries& series);
NormStats compute_norm_stats(const std::vector<DayProfile>& days);

using Features = std::array<double, kFeatureDim>;

/// [minute/14, qh/95, (month-1)/11, soc, z-scored price].
Features encode_state(const EnvState& state, const NormStats& norm);

}  // namespace imbal
