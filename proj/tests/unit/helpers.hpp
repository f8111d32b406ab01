#pragma once

#include <functional>

#include "doctest.h"
#include "imbal/error.hpp"
#include "imbal/market_data.hpp"

#define CHECK_THROWS_KIND(expr, expected_kind)                  \
  do {                                                          \
    bool caught_ = false;                                       \
    try {                                                       \
      (void)(expr);                                             \
    } catch (const ::imbal::Error& e_) {                        \
      caught_ = true;                                           \
      CHECK_MESSAGE(e_.kind() == (expected_kind), e_.what());   \
    }                                                           \
    CHECK_MESSAGE(caught_, "expected imbal::Error: " #expr);    \
  } while (false)

namespace testing {

inline imbal::Date date(int y, unsigned m, unsigned d) {
  return imbal::Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
}

/// Full days starting at `start`; indicative(day_index, minute_of_day) gives
/// the minute price and the settled price is the quarter-hour mean.
inline imbal::PriceSeries make_series(imbal::Date start, int days,
                                      const std::function<double(int, int)>& indicative) {
  std::vector<imbal::PriceRecord> recs;
  const auto t0 = std::chrono::sys_days{start};
  for (int d = 0; d < days; ++d) {
    for (int qh = 0; qh < imbal::kQuarterHoursPerDay; ++qh) {
      double sum = 0.0;
      for (int m = 0; m < 15; ++m) sum += indicative(d, qh * 15 + m);
      for (int m = 0; m < 15; ++m) {
        const int minute = qh * 15 + m;
        imbal::PriceRecord r;
        r.timestamp = std::chrono::time_point_cast<std::chrono::minutes>(t0) +
                      std::chrono::minutes{d * imbal::kMinutesPerDay + minute};
        r.indicative_price = indicative(d, minute);
        r.settled_price = sum / 15.0;
        recs.push_back(r);
      }
    }
  }
  return imbal::PriceSeries::from_records(std::move(recs));
}

inline imbal::PriceSeries constant_series(imbal::Date start, int days, double price) {
  return make_series(start, days, [price](int, int) { return price; });
}

}  // namespace testing
