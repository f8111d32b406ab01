#include "imbal/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "imbal/error.hpp"

namespace imbal {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kOrdering: return "ordering error";
    case ErrorKind::kConsistency: return "consistency error";
    case ErrorKind::kInsufficientData: return "insufficient data";
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kUnknownDay: return "unknown day";
    case ErrorKind::kEpisodeDone: return "episode done";
    case ErrorKind::kDimensionMismatch: return "dimension mismatch";
    case ErrorKind::kUnsupportedVersion: return "unsupported version";
    case ErrorKind::kLengthMismatch: return "length mismatch";
    case ErrorKind::kNonFinite: return "non-finite value";
    case ErrorKind::kInfeasible: return "infeasible";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kIo: return "i/o error";
  }
  return "error";
}

namespace {

constexpr const char* kCsvHeader =
    "timestamp_utc,indicative_price_eur_mwh,settled_price_eur_mwh";

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  // from_chars rejects a leading '+'.
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v,
                                   std::chars_format::fixed);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

int minute_of_day(Timestamp ts) {
  auto day = std::chrono::floor<std::chrono::days>(ts);
  return static_cast<int>((ts - day).count());
}

Date date_of(Timestamp ts) {
  return Date{std::chrono::floor<std::chrono::days>(ts)};
}

}  // namespace

Date parse_date(std::string_view text) {
  // YYYY-MM-DD
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw Error(ErrorKind::kParse, "bad date '" + std::string(text) + "'");
  int y = 0, m = 0, d = 0;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) ||
      !parse_int(text.substr(8, 2), d))
    throw Error(ErrorKind::kParse, "bad date '" + std::string(text) + "'");
  Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
            std::chrono::day{static_cast<unsigned>(d)}};
  if (!date.ok()) throw Error(ErrorKind::kParse, "bad date '" + std::string(text) + "'");
  return date;
}

std::string format_date(Date date) {
  std::ostringstream os;
  os << std::setfill('0') << std::setw(4) << static_cast<int>(date.year()) << '-'
     << std::setw(2) << static_cast<unsigned>(date.month()) << '-' << std::setw(2)
     << static_cast<unsigned>(date.day());
  return os.str();
}

Timestamp parse_timestamp(std::string_view text) {
  // YYYY-MM-DDTHH:MM[:SS][Z|+00:00]; only whole minutes are accepted.
  text = trim(text);
  auto fail = [&]() -> Error {
    return Error(ErrorKind::kParse, "bad timestamp '" + std::string(text) + "'");
  };
  if (text.size() < 16 || (text[10] != 'T' && text[10] != ' ') || text[13] != ':')
    throw fail();
  Date date = parse_date(text.substr(0, 10));
  int hh = 0, mm = 0, ss = 0;
  if (!parse_int(text.substr(11, 2), hh) || !parse_int(text.substr(14, 2), mm)) throw fail();
  std::string_view rest = text.substr(16);
  if (!rest.empty() && rest.front() == ':') {
    if (rest.size() < 3 || !parse_int(rest.substr(1, 2), ss)) throw fail();
    rest.remove_prefix(3);
  }
  if (rest == "Z" || rest == "z" || rest == "+00:00" || rest.empty()) {
  } else {
    throw fail();
  }
  if (hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss != 0) throw fail();
  return std::chrono::sys_days{date} + std::chrono::hours{hh} + std::chrono::minutes{mm};
}

std::string format_timestamp(Timestamp ts) {
  int mod = minute_of_day(ts);
  std::ostringstream os;
  os << format_date(date_of(ts)) << 'T' << std::setfill('0') << std::setw(2) << mod / 60
     << ':' << std::setw(2) << mod % 60 << ":00Z";
  return os.str();
}

PriceSeries PriceSeries::from_records(std::vector<PriceRecord> records,
                                      std::size_t* dropped_days) {
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].timestamp <= records[i - 1].timestamp)
      throw Error(ErrorKind::kOrdering,
                  "timestamps not strictly increasing at record " + std::to_string(i) +
                      " (" + format_timestamp(records[i].timestamp) + ")");
  }
  // Quarter-hour consistency is checked on every record, including those of
  // days that are about to be dropped.
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto qh_prev = records[i - 1].timestamp.time_since_epoch().count() / 15;
    const auto qh_cur = records[i].timestamp.time_since_epoch().count() / 15;
    if (qh_prev == qh_cur && records[i].settled_price != records[i - 1].settled_price)
      throw Error(ErrorKind::kConsistency,
                  "settled price changes within the quarter hour at " +
                      format_timestamp(records[i].timestamp));
  }

  PriceSeries out;
  std::size_t dropped = 0;
  std::size_t i = 0;
  while (i < records.size()) {
    const Date d = date_of(records[i].timestamp);
    std::size_t j = i;
    while (j < records.size() && date_of(records[j].timestamp) == d) ++j;
    // Strictly increasing minute timestamps within one day: 1440 records
    // means every minute is present.
    if (j - i == static_cast<std::size_t>(kMinutesPerDay)) {
      DayRange range{d, out.records_.size(), 0};
      out.records_.insert(out.records_.end(), records.begin() + i, records.begin() + j);
      range.end = out.records_.size();
      out.days_.push_back(range);
    } else {
      ++dropped;
    }
    i = j;
  }
  if (dropped_days) *dropped_days = dropped;
  return out;
}

std::optional<DayRange> PriceSeries::find_day(Date date) const {
  auto it = std::lower_bound(days_.begin(), days_.end(), date,
                             [](const DayRange& r, Date d) { return r.date < d; });
  if (it == days_.end() || it->date != date) return std::nullopt;
  return *it;
}

std::span<const PriceRecord> PriceSeries::day_records(const DayRange& day) const {
  return std::span<const PriceRecord>(records_).subspan(day.begin, day.end - day.begin);
}

LoadResult parse_price_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line))
    throw Error(ErrorKind::kParse, "line 1: missing header");
  ++line_no;
  if (trim(line) != kCsvHeader)
    throw Error(ErrorKind::kParse, std::string("line 1: expected header '") + kCsvHeader + "'");

  std::vector<PriceRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = trim(line);
    if (row.empty()) continue;
    auto c1 = row.find(',');
    auto c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
    if (c2 == std::string_view::npos || row.find(',', c2 + 1) != std::string_view::npos)
      throw Error(ErrorKind::kParse,
                  "line " + std::to_string(line_no) + ": expected 3 fields");
    PriceRecord rec;
    try {
      rec.timestamp = parse_timestamp(row.substr(0, c1));
    } catch (const Error& e) {
      throw Error(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    auto ind = parse_number(row.substr(c1 + 1, c2 - c1 - 1));
    auto set = parse_number(row.substr(c2 + 1));
    if (!ind || !set)
      throw Error(ErrorKind::kParse,
                  "line " + std::to_string(line_no) + ": bad number in '" +
                      std::string(row) + "'");
    rec.indicative_price = *ind;
    rec.settled_price = *set;
    records.push_back(rec);
  }
  LoadResult result;
  result.series = PriceSeries::from_records(std::move(records), &result.dropped_days);
  return result;
}

LoadResult load_price_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return parse_price_csv(in);
}

void write_price_csv(std::ostream& out, const PriceSeries& series) {
  out << kCsvHeader << '\n';
  char buf[64];
  for (const PriceRecord& r : series.records()) {
    out << format_timestamp(r.timestamp);
    // Shortest round-trip form, so writing then reading is lossless.
    auto p1 = std::to_chars(buf, buf + sizeof buf, r.indicative_price, std::chars_format::fixed);
    out << ',' << std::string_view(buf, p1.ptr - buf);
    auto p2 = std::to_chars(buf, buf + sizeof buf, r.settled_price, std::chars_format::fixed);
    out << ',' << std::string_view(buf, p2.ptr - buf) << '\n';
  }
}

void write_price_csv(const std::filesystem::path& path, const PriceSeries& series) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  write_price_csv(out, series);
}

SplitPart split_part_of(Date date) {
  const unsigned dom = static_cast<unsigned>(date.day());
  if (dom <= 20) return SplitPart::kTrain;
  if (dom <= 25) return SplitPart::kValidation;
  return SplitPart::kTest;
}

DatasetSplit split_dataset(const PriceSeries& series) {
  DatasetSplit split;
  split.train = series.filter_days([](Date d) { return split_part_of(d) == SplitPart::kTrain; });
  split.validation =
      series.filter_days([](Date d) { return split_part_of(d) == SplitPart::kValidation; });
  split.test = series.filter_days([](Date d) { return split_part_of(d) == SplitPart::kTest; });
  return split;
}

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::kInsufficientData, "quantile of empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

RbcThresholds quartiles(std::span<const double> values) {
  if (values.size() < 4)
    throw Error(ErrorKind::kInsufficientData,
                "need at least 4 settled prices, got " + std::to_string(values.size()));
  return RbcThresholds{quantile(values, 0.25), quantile(values, 0.75)};
}

std::vector<double> quarter_hour_settled_prices(const PriceSeries& series) {
  std::vector<double> out;
  out.reserve(series.records().size() / kMinutesPerQuarterHour);
  for (const DayRange& d : series.days())
    for (std::size_t i = d.begin; i < d.end; i += kMinutesPerQuarterHour)
      out.push_back(series.records()[i].settled_price);
  return out;
}

RbcThresholds quartile_thresholds(const PriceSeries& series) {
  const std::vector<double> prices = quarter_hour_settled_prices(series);
  return quartiles(prices);
}

}  // namespace imbal
