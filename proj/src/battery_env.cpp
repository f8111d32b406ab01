#include "imbal/battery_env.hpp"

#include <algorithm>

#include "imbal/error.hpp"

namespace imbal {

std::string_view to_string(Action a) {
  switch (a) {
    case Action::kDischarge: return "discharge";
    case Action::kIdle: return "idle";
    case Action::kCharge: return "charge";
  }
  return "?";
}

void BatteryParams::validate() const {
  auto bad = [](const char* what) { throw Error(ErrorKind::kInvalidArgument, what); };
  if (!(capacity_mwh > 0.0)) bad("battery capacity must be positive");
  if (!(p_max_mw > 0.0)) bad("battery p_max must be positive");
  if (!(eta_charge > 0.0 && eta_charge <= 1.0)) bad("eta_charge must lie in (0,1]");
  if (!(eta_discharge > 0.0 && eta_discharge <= 1.0)) bad("eta_discharge must lie in (0,1]");
  if (!(soc_min >= 0.0 && soc_min < soc_max && soc_max <= 1.0)) bad("need 0 <= soc_min < soc_max <= 1");
  if (step_minutes <= 0 || kMinutesPerDay % step_minutes != 0)
    bad("step_minutes must divide 1440");
}

double action_power(Action a, const BatteryParams& params) {
  switch (a) {
    case Action::kDischarge: return -params.p_max_mw;
    case Action::kIdle: return 0.0;
    case Action::kCharge: return params.p_max_mw;
  }
  return 0.0;
}

double soc_transition(double soc, Action action, const BatteryParams& params) {
  const double p = action_power(action, params);
  const double energy = std::max(p, 0.0) * params.eta_charge + std::min(p, 0.0) / params.eta_discharge;
  const double next = soc + energy * params.step_hours() / params.capacity_mwh;
  return std::clamp(next, params.soc_min, params.soc_max);
}

double step_reward(Action action, double settled_price, const BatteryParams& params) {
  return power_reward(action_power(action, params), settled_price, params);
}

double power_reward(double power_mw, double settled_price, const BatteryParams& params) {
  const double scale = params.reward_includes_dt ? params.step_hours() : 1.0;
  return -power_mw * settled_price * scale;
}

double delivered_power(double soc, Action action, const BatteryParams& params) {
  const double p = action_power(action, params);
  if (p == 0.0 || params.settle_commanded_power) return p;
  const double energy = std::max(p, 0.0) * params.eta_charge + std::min(p, 0.0) / params.eta_discharge;
  const double raw = soc + energy * params.step_hours() / params.capacity_mwh;
  const double next = std::clamp(raw, params.soc_min, params.soc_max);
  if (next == raw) return p;
  const double stored = (next - soc) * params.capacity_mwh / params.step_hours();
  return p > 0.0 ? std::max(stored, 0.0) / params.eta_charge : std::min(stored, 0.0) * params.eta_discharge;
}

DayProfile make_day_profile(const PriceSeries& series, Date date, const BatteryParams& params) {
  auto range = series.find_day(date);
  if (!range) throw Error(ErrorKind::kUnknownDay, "day " + format_date(date) + " not in series");
  auto recs = series.day_records(*range);
  DayProfile day;
  day.date = date;
  day.month = static_cast<int>(static_cast<unsigned>(date.month()));
  day.slots.reserve(static_cast<std::size_t>(params.steps_per_day()));
  for (int minute = 0; minute < kMinutesPerDay; minute += params.step_minutes) {
    const PriceRecord& r = recs[static_cast<std::size_t>(minute)];
    day.slots.push_back(DaySlot{minute % kMinutesPerQuarterHour, minute / kMinutesPerQuarterHour,
                                r.indicative_price, r.settled_price});
  }
  return day;
}

std::vector<DayProfile> make_day_profiles(const PriceSeries& series, const BatteryParams& params) {
  std::vector<DayProfile> out;
  out.reserve(series.day_count());
  for (const DayRange& d : series.days()) out.push_back(make_day_profile(series, d.date, params));
  return out;
}

BatteryEnv::BatteryEnv(BatteryParams params) : params_(params) { params_.validate(); }

EnvState BatteryEnv::reset(const DayProfile& day, double initial_soc) {
  if (day.slots.empty()) throw Error(ErrorKind::kInvalidArgument, "day profile has no slots");
  if (!(initial_soc >= params_.soc_min && initial_soc <= params_.soc_max))
    throw Error(ErrorKind::kInvalidArgument, "initial soc outside [soc_min, soc_max]");
  day_ = day;
  slot_ = 0;
  done_ = false;
  const DaySlot& s = day_.slots.front();
  state_ = EnvState{s.minute_of_qh, s.qh_of_day, day_.month, initial_soc, s.indicative_price};
  return state_;
}

EnvState BatteryEnv::reset(const PriceSeries& series, Date day, double initial_soc) {
  return reset(make_day_profile(series, day, params_), initial_soc);
}

StepResult BatteryEnv::step(Action action) {
  if (done_) throw Error(ErrorKind::kEpisodeDone, "step called on a finished episode");
  StepResult out;
  out.reward = power_reward(delivered_power(state_.soc, action, params_), day_.slots[slot_].settled_price, params_);
  const double soc = soc_transition(state_.soc, action, params_);
  ++slot_;
  if (slot_ >= day_.slots.size()) {
    done_ = true;
    out.done = true;
    slot_ = day_.slots.size() - 1;
    state_.soc = soc;
  } else {
    const DaySlot& s = day_.slots[slot_];
    state_ = EnvState{s.minute_of_qh, s.qh_of_day, day_.month, soc, s.indicative_price};
  }
  out.next_state = state_;
  return out;
}

namespace {
NormStats finish_stats(double sum, double sum_sq, std::size_t n) {
  if (n == 0) throw Error(ErrorKind::kInsufficientData, "no prices for normalization");
  NormStats s;
  s.price_mean = sum / static_cast<double>(n);
  s.price_std = std::sqrt(std::max(0.0, sum_sq / static_cast<double>(n) - s.price_mean * s.price_mean));
  return s;
}
}  // namespace

NormStats compute_norm_stats(const PriceSeries& series) {
  double sum = 0.0, sum_sq = 0.0;
  for (const PriceRecord& r : series.records()) {
    sum += r.indicative_price;
    sum_sq += r.indicative_price * r.indicative_price;
  }
  return finish_stats(sum, sum_sq, series.records().size());
}

NormStats compute_norm_stats(const std::vector<DayProfile>& days) {
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (const DayProfile& d : days)
    for (const DaySlot& s : d.slots) {
      sum += s.indicative_price;
      sum_sq += s.indicative_price * s.indicative_price;
      ++n;
    }
  return finish_stats(sum, sum_sq, n);
}

Features encode_state(const EnvState& state, const NormStats& norm) {
  if (!(norm.price_std > 0.0))
    throw Error(ErrorKind::kInvalidArgument, "price standard deviation must be positive");
  return Features{state.minute_of_qh / 14.0, state.qh_of_day / 95.0, (state.month - 1) / 11.0,
                  state.soc, (state.indicative_price - norm.price_mean) / norm.price_std};
}

}  // namespace imbal
