#include <cmath>
#include <numbers>
#include <random>

#include "imbal/error.hpp"
#include "imbal/market_data.hpp"

namespace imbal {

PriceSeries generate_synthetic_prices(const SynthConfig& config, std::uint64_t seed) {
  if (config.days <= 0)
    throw Error(ErrorKind::kInvalidArgument, "synthetic day count must be positive");
  if (config.spike_probability < 0.0 || config.spike_probability > 1.0 ||
      config.spike_min > config.spike_max || config.noise_scale < 0.0)
    throw Error(ErrorKind::kInvalidArgument, "invalid synthetic price configuration");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<PriceRecord> records;
  records.reserve(static_cast<std::size_t>(config.days) * kMinutesPerDay);
  const std::chrono::sys_days start{config.start_date};

  // Deviation of the base process from its (time-varying) level.
  double deviation = 0.0;
  std::vector<double> quarter(kMinutesPerQuarterHour);
  for (int day = 0; day < config.days; ++day) {
    const std::chrono::sys_days d = start + std::chrono::days{day};
    for (int qh = 0; qh < kQuarterHoursPerDay; ++qh) {
      double sum = 0.0;
      for (int m = 0; m < kMinutesPerQuarterHour; ++m) {
        const int minute = qh * kMinutesPerQuarterHour + m;
        const double hour = minute / 60.0;
        // Morning and evening peaks, night and midday valleys.
        const double profile =
            -config.daily_amplitude * std::cos(2.0 * std::numbers::pi * hour / 12.0);
        deviation += -config.reversion_rate * deviation + config.noise_scale * normal(rng);
        double price = config.level + profile + deviation;
        const double u = unit(rng);
        const double mag = config.spike_min + (config.spike_max - config.spike_min) * unit(rng);
        const bool up = unit(rng) < 0.5;
        if (u < config.spike_probability) price += up ? mag : -mag;
        quarter[m] = price;
        sum += price;
      }
      const double settled = sum / kMinutesPerQuarterHour;
      for (int m = 0; m < kMinutesPerQuarterHour; ++m) {
        PriceRecord rec;
        rec.timestamp = d + std::chrono::minutes{qh * kMinutesPerQuarterHour + m};
        rec.indicative_price = quarter[m];
        rec.settled_price = settled;
        records.push_back(rec);
      }
    }
  }
  return PriceSeries::from_records(std::move(records));
}

}  // namespace imbal
