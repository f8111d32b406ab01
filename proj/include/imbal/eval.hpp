#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "imbal/agents.hpp"
#include "imbal/battery_env.hpp"
#include "imbal/market_data.hpp"
#include "imbal/policy_correction.hpp"

namespace imbal {

/// Named greedy policy evaluated on batches of states.
struct Controller {
  std::string name;
  BatchPolicy policy;

  Action act(const EnvState& state) const;
};

Controller make_constant_controller(Action action);
Controller make_rbc_controller(const RbcThresholds& thresholds);
Controller make_agent_controller(std::string name, AgentNets nets, NormStats norm);
Controller make_student_controller(std::string name, StudentModel student, bool with_layer);
/// dqn/ddqn checkpoints become agent controllers, student checkpoints the
/// layer-free (or with-layer) student.
Controller controller_from_checkpoint(std::string name, const Checkpoint& ckpt, bool with_layer = false);

struct DayProfit {
  Date date;
  double profit = 0.0;  // EUR
  double final_soc = 0.0;
};

struct ProfitReport {
  double total_profit = 0.0;  // EUR
  std::size_t day_count = 0;
  double profit_per_day_per_mwh = 0.0;
  std::vector<DayProfit> days;
};

/// Greedy rollout over every day. SoC starts each day at `initial_soc`
/// unless `carry_soc` is set, in which case it carries over from the
/// previous day. Profit is the negated energy cost in EUR.
ProfitReport backtest(const Controller& controller, const std::vector<DayProfile>& days,
                      const BatteryParams& battery, double initial_soc, bool carry_soc = false);
ProfitReport backtest(const Controller& controller, const PriceSeries& series, const BatteryParams& battery,
                      double initial_soc, bool carry_soc = false);

/// (a - b) / b * 100.
double percent_difference(double a, double b);

struct ComparisonTable {
  std::vector<std::string> names;
  std::vector<double> profits;  // EUR / day / MWh
  // pct[i][j] = percent_difference(profits[i], profits[j]).
  std::vector<std::vector<double>> pct;
};

ComparisonTable compare_profits(std::vector<std::string> names, std::vector<double> profits);
ComparisonTable compare_controllers(const std::vector<Controller>& controllers, const std::vector<DayProfile>& days,
                                    const BatteryParams& battery, double initial_soc, bool carry_soc = false);
void write_comparison_csv(std::ostream& out, const ComparisonTable& table);

struct HeatmapRow {
  double price = 0.0;
  double soc = 0.0;
  Action action = Action::kIdle;
};

struct HeatmapTable {
  CalendarContext context;
  std::vector<HeatmapRow> rows;
};

std::vector<HeatmapTable> policy_heatmap(const Controller& controller, const GridSpec& grid);
void write_heatmap_csv(std::ostream& out, const HeatmapTable& table);
/// "heatmap_<minute>_<qh>_<month>.csv"
std::string heatmap_file_name(const CalendarContext& context);

struct HistogramBin {
  double lower = 0.0;
  double upper = 0.0;
  double frequency = 0.0;
};

/// Normalized frequencies of quarter-hour settled prices in bins of
/// `bin_width` anchored at multiples of the width.
std::vector<HistogramBin> price_histogram(const PriceSeries& series, double bin_width);
std::vector<HistogramBin> price_histogram(std::span<const double> values, double bin_width);
void write_histogram_csv(std::ostream& out, const std::vector<HistogramBin>& bins);
/// Share of quarter-hour settled prices strictly below `threshold`.
double fraction_below(const PriceSeries& series, double threshold);

struct TraceRow {
  int minute_of_day = 0;
  double indicative_price = 0.0;
  double settled_price = 0.0;
  Action action = Action::kIdle;
  double soc = 0.0;  // before the action
  double soc_after = 0.0;
  double reward = 0.0;  // EUR
};

std::vector<TraceRow> day_trace(const Controller& controller, const DayProfile& day, const BatteryParams& battery,
                                double initial_soc);
std::vector<TraceRow> day_trace(const Controller& controller, const PriceSeries& series, Date day,
                                const BatteryParams& battery, double initial_soc);
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);

}  // namespace imbal
