#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace imbal {

using Date = std::chrono::year_month_day;
using Timestamp = std::chrono::sys_time<std::chrono::minutes>;

inline constexpr int kMinutesPerDay = 1440;
inline constexpr int kMinutesPerQuarterHour = 15;
inline constexpr int kQuarterHoursPerDay = 96;

/// One minute of market data. Prices are EUR/MWh; `settled_price` is the
/// final imbalance price of the quarter hour containing `timestamp`.
struct PriceRecord {
  Timestamp timestamp;
  double indicative_price = 0.0;
  double settled_price = 0.0;
};

struct DayRange {
  Date date;
  std::size_t begin = 0;  // index of the first record
  std::size_t end = 0;    // one past the last record
};

/// Validated, immutable minute-resolution price series made of complete
/// days only (1440 records each).
class PriceSeries {
 public:
  PriceSeries() = default;

  /// Validates ordering and quarter-hour consistency, then keeps only the
  /// complete days. The number of dropped incomplete days is written to
  /// `dropped_days` when provided.
  static PriceSeries from_records(std::vector<PriceRecord> records,
                                  std::size_t* dropped_days = nullptr);

  const std::vector<PriceRecord>& records() const { return records_; }
  const std::vector<DayRange>& days() const { return days_; }
  std::size_t day_count() const { return days_.size(); }
  bool empty() const { return records_.empty(); }

  std::optional<DayRange> find_day(Date date) const;
  std::span<const PriceRecord> day_records(const DayRange& day) const;

  /// Sub-series holding the days for which `keep` returns true.
  template <typename Pred>
  PriceSeries filter_days(Pred keep) const {
    PriceSeries out;
    for (const DayRange& d : days_) {
      if (!keep(d.date)) continue;
      DayRange nd{d.date, out.records_.size(), 0};
      out.records_.insert(out.records_.end(), records_.begin() + d.begin,
                          records_.begin() + d.end);
      nd.end = out.records_.size();
      out.days_.push_back(nd);
    }
    return out;
  }

 private:
  std::vector<PriceRecord> records_;
  std::vector<DayRange> days_;
};

struct LoadResult {
  PriceSeries series;
  std::size_t dropped_days = 0;
};

LoadResult load_price_csv(const std::filesystem::path& path);
LoadResult parse_price_csv(std::istream& in);
void write_price_csv(std::ostream& out, const PriceSeries& series);
void write_price_csv(const std::filesystem::path& path, const PriceSeries& series);

Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);
Date parse_date(std::string_view text);
std::string format_date(Date date);

enum class SplitPart { kTrain, kValidation, kTest };
SplitPart split_part_of(Date date);

struct DatasetSplit {
  PriceSeries train;
  PriceSeries validation;
  PriceSeries test;
};

/// Day-of-month 1..20 train, 21..25 validation, the rest test.
DatasetSplit split_dataset(const PriceSeries& series);

struct RbcThresholds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Linear interpolation between order statistics at position (n-1)*q.
double quantile(std::span<const double> values, double q);
RbcThresholds quartiles(std::span<const double> values);

/// One settled price per quarter hour of the series.
std::vector<double> quarter_hour_settled_prices(const PriceSeries& series);
RbcThresholds quartile_thresholds(const PriceSeries& series);

struct SynthConfig {
  int days = 31;
  Date start_date{std::chrono::year{2023}, std::chrono::January, std::chrono::day{1}};
  double level = 90.0;           // EUR/MWh the base process reverts to
  double reversion_rate = 0.02;  // per minute
  double noise_scale = 6.0;      // EUR/MWh per sqrt(minute)
  double daily_amplitude = 50.0; // two-peaked daily profile added to level
  double spike_probability = 0.002;  // per minute
  double spike_min = 300.0;          // spike magnitude range, sign random
  double spike_max = 2000.0;
};

PriceSeries generate_synthetic_prices(const SynthConfig& config, std::uint64_t seed);

}  // namespace imbal
