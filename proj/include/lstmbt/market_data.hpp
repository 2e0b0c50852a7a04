#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lstmbt/decimal.hpp"

namespace lstmbt {

// Raised for malformed, missing, or invariant-violating market data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Date = std::chrono::year_month_day;

inline std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

// Strict ISO-8601 calendar date, "YYYY-MM-DD".
inline std::optional<Date> parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto num = [&](std::size_t from, std::size_t len) -> int {
    int v = 0;
    for (std::size_t k = from; k < from + len; ++k) {
      if (s[k] < '0' || s[k] > '9') return -1;
      v = v * 10 + (s[k] - '0');
    }
    return v;
  };
  int y = num(0, 4), m = num(5, 2), d = num(8, 2);
  if (y < 0 || m < 0 || d < 0) return std::nullopt;
  Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
            std::chrono::day{static_cast<unsigned>(d)}};
  if (!date.ok()) return std::nullopt;
  return date;
}

struct Bar {
  Date date;
  Decimal adj_close;

  friend bool operator==(const Bar&, const Bar&) = default;
};

struct PriceSeries {
  std::string ticker;
  std::vector<Bar> bars;

  std::size_t size() const { return bars.size(); }
  bool empty() const { return bars.empty(); }

  std::vector<double> closes() const {
    std::vector<double> out;
    out.reserve(bars.size());
    for (const auto& b : bars) out.push_back(b.adj_close.to_double());
    return out;
  }

  std::vector<Date> dates() const {
    std::vector<Date> out;
    out.reserve(bars.size());
    for (const auto& b : bars) out.push_back(b.date);
    return out;
  }

  // Slice [first, last) keeping the ticker.
  PriceSeries slice(std::size_t first, std::size_t last) const {
    return PriceSeries{ticker, std::vector<Bar>(bars.begin() + static_cast<std::ptrdiff_t>(first),
                                                bars.begin() + static_cast<std::ptrdiff_t>(last))};
  }

  friend bool operator==(const PriceSeries&, const PriceSeries&) = default;
};

// Checks positivity, strict date ordering, and minimum length.
inline void validate(const PriceSeries& series) {
  if (series.bars.size() < 2)
    throw DataError("series '" + series.ticker + "' has " + std::to_string(series.bars.size()) +
                    " bars; at least 2 required");
  for (std::size_t k = 0; k < series.bars.size(); ++k) {
    if (series.bars[k].adj_close <= Decimal{})
      throw DataError("non-positive price at index " + std::to_string(k));
    if (k > 0 && series.bars[k - 1].date >= series.bars[k].date)
      throw DataError("dates not strictly increasing at index " + std::to_string(k));
  }
}

struct SplitSeries {
  PriceSeries train;
  PriceSeries test;
  double split_ratio = 0.8;
};

namespace detail {

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string_view trim_field(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t k = 0; k <= line.size(); ++k) {
    if (k == line.size() || line[k] == ',') {
      fields.push_back(trim_field(line.substr(start, k - start)));
      start = k + 1;
    }
  }
  return fields;
}

inline bool is_adj_close_header(std::string_view name) {
  auto lower = to_lower(name);
  return lower == "adj close" || lower == "adjclose" || lower == "adj_close";
}

}  // namespace detail

// Reads "Date" and adjusted-close columns from a headed CSV stream. Rows are
// numbered from 1 (the header), matching a spreadsheet view of the file.
inline PriceSeries parse_csv(std::istream& in, std::string ticker) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV: missing header row");

  auto header = detail::split_fields(line);
  std::ptrdiff_t date_col = -1, price_col = -1;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (detail::to_lower(header[k]) == "date" && date_col < 0) date_col = static_cast<std::ptrdiff_t>(k);
    if (detail::is_adj_close_header(header[k]) && price_col < 0) price_col = static_cast<std::ptrdiff_t>(k);
  }
  if (date_col < 0) throw DataError("missing 'Date' column in header");
  if (price_col < 0) throw DataError("missing adjusted-close column ('Adj Close') in header");
  const auto needed = static_cast<std::size_t>(std::max(date_col, price_col));

  std::vector<std::pair<Bar, std::size_t>> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim_field(line).empty()) continue;
    auto fields = detail::split_fields(line);
    if (fields.size() <= needed)
      throw DataError("missing column at row " + std::to_string(row));
    auto date = parse_date(fields[static_cast<std::size_t>(date_col)]);
    if (!date) throw DataError("unparseable date at row " + std::to_string(row));
    auto price = Decimal::parse(fields[static_cast<std::size_t>(price_col)]);
    if (!price) throw DataError("unparseable price at row " + std::to_string(row));
    if (*price <= Decimal{}) throw DataError("non-positive price at row " + std::to_string(row));
    rows.push_back({Bar{*date, *price}, row});
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first.date < b.first.date; });
  PriceSeries series{std::move(ticker), {}};
  series.bars.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (k > 0 && rows[k - 1].first.date == rows[k].first.date) {
      auto first = std::min(rows[k - 1].second, rows[k].second);
      auto second = std::max(rows[k - 1].second, rows[k].second);
      throw DataError("duplicate date " + format_date(rows[k].first.date) + " at row " +
                      std::to_string(second) + " (first seen at row " + std::to_string(first) + ")");
    }
    series.bars.push_back(rows[k].first);
  }
  if (series.bars.size() < 2)
    throw DataError("series '" + series.ticker + "' has " + std::to_string(series.bars.size()) +
                    " rows; at least 2 required");
  return series;
}

inline PriceSeries parse_csv(const std::filesystem::path& path, std::string ticker) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path.string());
  try {
    return parse_csv(in, std::move(ticker));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_csv(const PriceSeries& series, std::ostream& out) {
  out << "Date,Adj Close\n";
  for (const auto& bar : series.bars) out << format_date(bar.date) << ',' << bar.adj_close.to_string() << '\n';
}

// Chronological prefix/suffix split; train gets floor(ratio * n) bars.
inline SplitSeries split_train_test(const PriceSeries& series, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0))
    throw DataError("split ratio " + std::to_string(ratio) + " outside (0, 1)");
  const std::size_t n = series.size();
  if (n < 2) throw DataError("series too short to split: " + std::to_string(n) + " bars");
  // The small epsilon keeps products such as 0.7 * 10 from flooring to 6.
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  if (n_train < 1) throw DataError("train side empty for ratio " + std::to_string(ratio));
  if (n_train >= n) throw DataError("test side empty for ratio " + std::to_string(ratio));
  return SplitSeries{series.slice(0, n_train), series.slice(n_train, n), ratio};
}

}  // namespace lstmbt
