#include "imbal/eval.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <ostream>

#include "imbal/error.hpp"
#include "imbal/rbc.hpp"

namespace imbal {

namespace {

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Energy cost of one step in EUR, negated.
double step_profit(double soc, Action a, double settled, const BatteryParams& battery) {
  return -delivered_power(soc, a, battery) * settled * battery.step_hours();
}

}  // namespace

Action Controller::act(const EnvState& state) const {
  const auto out = policy(std::span<const EnvState>(&state, 1));
  if (out.size() != 1) throw Error(ErrorKind::kDimensionMismatch, "controller returned wrong batch size");
  return out.front();
}

Controller make_constant_controller(Action action) {
  return {std::string(to_string(action)),
          [action](std::span<const EnvState> s) { return std::vector<Action>(s.size(), action); }};
}

Controller make_rbc_controller(const RbcThresholds& thresholds) {
  return {"rbc", [thresholds](std::span<const EnvState> states) {
            std::vector<Action> out(states.size());
            for (std::size_t i = 0; i < states.size(); ++i) out[i] = rbc_action(states[i].indicative_price, thresholds);
            return out;
          }};
}

Controller make_agent_controller(std::string name, AgentNets nets, NormStats norm) {
  if (nets.online.input_dim() != kFeatureDim)
    throw Error(ErrorKind::kDimensionMismatch, "agent network does not take the 5-feature observation");
  return {std::move(name), [nets = std::move(nets), norm](std::span<const EnvState> states) {
            std::vector<Action> out(states.size());
            for (std::size_t i = 0; i < states.size(); ++i)
              out[i] = greedy_action(action_values(nets.online, nets.kind, nets.atoms, encode_state(states[i], norm)));
            return out;
          }};
}

Controller make_student_controller(std::string name, StudentModel student, bool with_layer) {
  return {std::move(name), [student = std::move(student), with_layer](std::span<const EnvState> states) {
            const std::vector<Probs> p = with_layer ? student.with_layer(states) : student.layer_free(states);
            std::vector<Action> out(p.size());
            for (std::size_t i = 0; i < p.size(); ++i) out[i] = argmax_action(p[i]);
            return out;
          }};
}

Controller controller_from_checkpoint(std::string name, const Checkpoint& ckpt, bool with_layer) {
  if (ckpt.agent_kind == "student") return make_student_controller(std::move(name), student_from_checkpoint(ckpt), with_layer);
  return make_agent_controller(std::move(name), agent_from_checkpoint(ckpt), ckpt.norm_stats);
}

ProfitReport backtest(const Controller& controller, const std::vector<DayProfile>& days, const BatteryParams& battery,
                      double initial_soc, bool carry_soc) {
  battery.validate();
  ProfitReport report;
  BatteryEnv env(battery);
  double soc = initial_soc;
  for (const DayProfile& day : days) {
    EnvState s = env.reset(day, carry_soc ? soc : initial_soc);
    double profit = 0.0;
    while (!env.done()) {
      const Action a = controller.act(s);
      profit += step_profit(s.soc, a, env.current_settled_price(), battery);
      s = env.step(a).next_state;
    }
    soc = s.soc;
    report.days.push_back({day.date, profit, soc});
    report.total_profit += profit;
  }
  report.day_count = days.size();
  if (report.day_count > 0)
    report.profit_per_day_per_mwh =
        report.total_profit / static_cast<double>(report.day_count) / battery.capacity_mwh;
  return report;
}

ProfitReport backtest(const Controller& controller, const PriceSeries& series, const BatteryParams& battery,
                      double initial_soc, bool carry_soc) {
  return backtest(controller, make_day_profiles(series, battery), battery, initial_soc, carry_soc);
}

double percent_difference(double a, double b) {
  if (b == 0.0) throw Error(ErrorKind::kInvalidArgument, "percentage difference against a zero baseline");
  return (a - b) / b * 100.0;
}

ComparisonTable compare_profits(std::vector<std::string> names, std::vector<double> profits) {
  if (names.size() != profits.size()) throw Error(ErrorKind::kDimensionMismatch, "one profit per controller required");
  if (names.size() < 2) throw Error(ErrorKind::kInvalidArgument, "comparison needs at least two controllers");
  ComparisonTable t;
  t.names = std::move(names);
  t.profits = std::move(profits);
  const std::size_t n = t.profits.size();
  t.pct.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      t.pct[i][j] = t.profits[j] == 0.0 ? std::nan("") : percent_difference(t.profits[i], t.profits[j]);
  return t;
}

ComparisonTable compare_controllers(const std::vector<Controller>& controllers, const std::vector<DayProfile>& days,
                                    const BatteryParams& battery, double initial_soc, bool carry_soc) {
  std::vector<std::string> names;
  std::vector<double> profits;
  for (const Controller& c : controllers) {
    names.push_back(c.name);
    profits.push_back(backtest(c, days, battery, initial_soc, carry_soc).profit_per_day_per_mwh);
  }
  return compare_profits(std::move(names), std::move(profits));
}

void write_comparison_csv(std::ostream& out, const ComparisonTable& t) {
  out << "controller,profit_eur_per_day_per_mwh";
  for (const auto& n : t.names) out << ",pct_vs_" << n;
  out << '\n';
  for (std::size_t i = 0; i < t.names.size(); ++i) {
    out << t.names[i] << ',' << num(t.profits[i]);
    for (std::size_t j = 0; j < t.names.size(); ++j) out << ',' << num(t.pct[i][j]);
    out << '\n';
  }
}

std::vector<HeatmapTable> policy_heatmap(const Controller& controller, const GridSpec& grid) {
  grid.validate();
  std::vector<HeatmapTable> out;
  for (const auto& ctx : grid.contexts) {
    const auto states = grid.states(ctx);
    const auto actions = controller.policy(states);
    HeatmapTable t{ctx, {}};
    t.rows.reserve(states.size());
    for (std::size_t i = 0; i < states.size(); ++i)
      t.rows.push_back({states[i].indicative_price, states[i].soc, actions[i]});
    out.push_back(std::move(t));
  }
  return out;
}

void write_heatmap_csv(std::ostream& out, const HeatmapTable& t) {
  out << "price_eur_mwh,soc,action_index,action\n";
  for (const auto& r : t.rows)
    out << num(r.price) << ',' << num(r.soc) << ',' << index_of(r.action) << ',' << to_string(r.action) << '\n';
}

std::string heatmap_file_name(const CalendarContext& c) {
  return "heatmap_" + std::to_string(c.minute_of_qh) + "_" + std::to_string(c.qh_of_day) + "_" +
         std::to_string(c.month) + ".csv";
}

std::vector<HistogramBin> price_histogram(std::span<const double> values, double bin_width) {
  if (!(bin_width > 0.0)) throw Error(ErrorKind::kInvalidArgument, "histogram bin width must be positive");
  if (values.empty()) throw Error(ErrorKind::kInsufficientData, "histogram of an empty series");
  std::map<long long, std::size_t> counts;
  for (double v : values) ++counts[static_cast<long long>(std::floor(v / bin_width))];
  std::vector<HistogramBin> bins;
  const double n = static_cast<double>(values.size());
  for (const auto& [k, c] : counts)
    bins.push_back({static_cast<double>(k) * bin_width, static_cast<double>(k + 1) * bin_width,
                    static_cast<double>(c) / n});
  return bins;
}

std::vector<HistogramBin> price_histogram(const PriceSeries& series, double bin_width) {
  return price_histogram(quarter_hour_settled_prices(series), bin_width);
}

void write_histogram_csv(std::ostream& out, const std::vector<HistogramBin>& bins) {
  out << "bin_lower_eur_mwh,bin_upper_eur_mwh,frequency\n";
  for (const auto& b : bins) out << num(b.lower) << ',' << num(b.upper) << ',' << num(b.frequency) << '\n';
}

double fraction_below(const PriceSeries& series, double threshold) {
  const auto prices = quarter_hour_settled_prices(series);
  if (prices.empty()) throw Error(ErrorKind::kInsufficientData, "empty series");
  const auto below = std::count_if(prices.begin(), prices.end(), [&](double p) { return p < threshold; });
  return static_cast<double>(below) / static_cast<double>(prices.size());
}

std::vector<TraceRow> day_trace(const Controller& controller, const DayProfile& day, const BatteryParams& battery,
                                double initial_soc) {
  std::vector<TraceRow> rows;
  BatteryEnv env(battery);
  EnvState s = env.reset(day, initial_soc);
  int minute = 0;
  while (!env.done()) {
    TraceRow r;
    r.minute_of_day = minute;
    r.indicative_price = s.indicative_price;
    r.settled_price = env.current_settled_price();
    r.action = controller.act(s);
    r.soc = s.soc;
    r.reward = step_profit(r.soc, r.action, r.settled_price, battery);
    s = env.step(r.action).next_state;
    r.soc_after = s.soc;
    rows.push_back(r);
    minute += battery.step_minutes;
  }
  return rows;
}

std::vector<TraceRow> day_trace(const Controller& controller, const PriceSeries& series, Date day,
                                const BatteryParams& battery, double initial_soc) {
  return day_trace(controller, make_day_profile(series, day, battery), battery, initial_soc);
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << "minute_of_day,indicative_price_eur_mwh,settled_price_eur_mwh,action,soc,soc_after,reward_eur\n";
  for (const auto& r : rows)
    out << r.minute_of_day << ',' << num(r.indicative_price) << ',' << num(r.settled_price) << ','
        << to_string(r.action) << ',' << num(r.soc) << ',' << num(r.soc_after) << ',' << num(r.reward) << '\n';
}

}  // namespace imbal
