#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lstmbt/anomaly_detector.hpp"
#include "lstmbt/backtester.hpp"
#include "lstmbt/market_data.hpp"
#include "lstmbt/price_predictor.hpp"

namespace lstmbt {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class StrategyId { buy_and_hold = 0, predictor = 1, breakout = 2 };

inline std::string strategy_name(StrategyId s) {
  switch (s) {
    case StrategyId::buy_and_hold: return "Buy & Hold";
    case StrategyId::predictor: return "Strategy 1";
    case StrategyId::breakout: return "Strategy 2";
  }
  return "?";
}

inline std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

// "53.53%" style, or "N/A" when there were no trades.
inline std::string format_success_rate(const std::optional<double>& rate) {
  if (!rate) return "N/A";
  return fixed(*rate * 100.0, 2) + "%";
}

// ---------------------------------------------------------------------------
// Density estimates

struct DensityEstimate {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
};

inline double sample_stddev(std::span<const double> samples) {
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0));
}

// Scott's rule for one dimension: sigma * n^(-1/5).
inline double scott_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) throw std::invalid_argument("KDE needs at least 2 samples");
  const double sigma = sample_stddev(samples);
  if (!(sigma > 0.0)) throw std::invalid_argument("KDE samples have zero variance");
  return sigma * std::pow(static_cast<double>(samples.size()), -0.2);
}

inline double kde_at(std::span<const double> samples, double bandwidth, double x) {
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  double sum = 0.0;
  for (double s : samples) {
    const double u = (x - s) / bandwidth;
    sum += std::exp(-0.5 * u * u);
  }
  return sum * kInvSqrt2Pi / (bandwidth * static_cast<double>(samples.size()));
}

// Gaussian KDE with Scott's bandwidth on a uniform grid over
// [min - 3h, max + 3h]. Samples are sorted first so the result does not
// depend on their order.
inline DensityEstimate gaussian_kde(std::span<const double> samples, std::size_t grid_points = 512) {
  if (grid_points < 2) throw std::invalid_argument("KDE grid needs at least 2 points");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  DensityEstimate est;
  est.bandwidth = scott_bandwidth(sorted);
  const double lo = sorted.front() - 3.0 * est.bandwidth;
  const double hi = sorted.back() + 3.0 * est.bandwidth;
  const double step = (hi - lo) / static_cast<double>(grid_points - 1);
  est.grid.resize(grid_points);
  est.density.resize(grid_points);
  for (std::size_t k = 0; k < grid_points; ++k) {
    est.grid[k] = lo + step * static_cast<double>(k);
    est.density[k] = kde_at(sorted, est.bandwidth, est.grid[k]);
  }
  return est;
}

// Enough grid points that spacing stays below a quarter bandwidth, so the
// trapezoidal integral of the estimate is accurate.
inline std::size_t suggested_grid_points(std::span<const double> samples, std::size_t min_points = 512,
                                         std::size_t max_points = 20000) {
  const double h = scott_bandwidth(samples);
  auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  const double span = (*hi - *lo) + 6.0 * h;
  const auto needed = static_cast<std::size_t>(std::ceil(span / (0.25 * h))) + 1;
  return std::clamp(needed, min_points, max_points);
}

inline double trapezoid(std::span<const double> x, std::span<const double> y) {
  double area = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) area += 0.5 * (y[k] + y[k - 1]) * (x[k] - x[k - 1]);
  return area;
}

struct Histogram {
  std::vector<double> edges;  // bins + 1 edges
  std::vector<std::size_t> counts;
};

// Equal-width histogram with the bin count chosen so an average bin holds
// about `per_bin` samples.
inline Histogram histogram(std::span<const double> samples, std::size_t per_bin = 50) {
  if (samples.empty()) throw std::invalid_argument("histogram of empty sample");
  const auto bins = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(samples.size()) / static_cast<double>(per_bin))));
  auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it;
  const double hi = *hi_it > lo ? *hi_it : lo + 1.0;
  Histogram h;
  h.counts.assign(bins, 0);
  for (std::size_t k = 0; k <= bins; ++k)
    h.edges.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins));
  for (double x : samples) {
    auto k = static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(bins));
    ++h.counts[std::min(k, bins - 1)];
  }
  return h;
}

// ---------------------------------------------------------------------------
// Comparison table

struct ComparisonRow {
  std::string stock;
  StrategyId strategy = StrategyId::buy_and_hold;
  BacktestReport report;
};

inline std::vector<std::string> table_cells(const ComparisonRow& row) {
  const auto& r = row.report;
  const std::string na = "N/A";
  std::vector<std::string> cells{row.stock, strategy_name(row.strategy)};
  if (r.counts_applicable) {
    cells.push_back(std::to_string(r.profitable));
    cells.push_back(std::to_string(r.unprofitable));
    cells.push_back(std::to_string(r.total));
    cells.push_back(format_success_rate(r.success_rate));
  } else {
    cells.insert(cells.end(), {na, na, na, na});
  }
  cells.push_back(r.profit.to_fixed(2));
  return cells;
}

inline const std::vector<std::string>& table_header() {
  static const std::vector<std::string> header{"Stock",        "Strategy",    "Profitable", "Unprofitable",
                                               "Total",        "Success Rate", "Profits ($)"};
  return header;
}

// Column-aligned plain-text table.
inline std::string render_comparison_table(std::span<const ComparisonRow> rows) {
  if (rows.empty()) throw std::invalid_argument("render_comparison_table: no rows");
  std::vector<std::vector<std::string>> cells{table_header()};
  for (const auto& r : rows) cells.push_back(table_cells(r));
  std::vector<std::size_t> width(table_header().size(), 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());

  std::ostringstream out;
  auto rule = [&] {
    for (std::size_t c = 0; c < width.size(); ++c) out << (c ? "-+-" : "") << std::string(width[c], '-');
    out << '\n';
  };
  for (std::size_t l = 0; l < cells.size(); ++l) {
    for (std::size_t c = 0; c < cells[l].size(); ++c) {
      out << (c ? " | " : "");
      // Text columns left-aligned, numbers right-aligned.
      if (c < 2)
        out << cells[l][c] << std::string(width[c] - cells[l][c].size(), ' ');
      else
        out << std::string(width[c] - cells[l][c].size(), ' ') << cells[l][c];
    }
    out << '\n';
    if (l == 0) rule();
  }
  return out.str();
}

using Json = nlohmann::ordered_json;

inline Json report_json(const std::string& stock, StrategyId strategy, const BacktestReport& r,
                        std::optional<std::uint64_t> seed = std::nullopt) {
  Json j;
  j["stock"] = stock;
  j["strategy"] = strategy_name(strategy);
  if (r.counts_applicable) {
    j["profitable"] = r.profitable;
    j["unprofitable"] = r.unprofitable;
    j["total"] = r.total;
    j["success_rate"] = r.success_rate ? Json(*r.success_rate) : Json(nullptr);
    j["success_rate_text"] = format_success_rate(r.success_rate);
    j["forced_exits"] = r.forced_exits;
  } else {
    j["profitable"] = nullptr;
    j["unprofitable"] = nullptr;
    j["total"] = nullptr;
    j["success_rate"] = nullptr;
    j["success_rate_text"] = "N/A";
  }
  j["profit"] = r.profit.to_double();
  j["profit_exact"] = r.profit.to_string();
  if (seed) j["seed"] = *seed;
  return j;
}

inline Json comparison_json(std::span<const ComparisonRow> rows, std::optional<std::uint64_t> seed = std::nullopt) {
  Json j = Json::array();
  for (const auto& r : rows) j.push_back(report_json(r.stock, r.strategy, r.report, seed));
  return j;
}

// ---------------------------------------------------------------------------
// CSV writers

inline void write_ledger_csv(const Ledger& ledger, std::ostream& out) {
  out << "entry_date,entry_price,exit_date,exit_price,pnl,forced_exit\n";
  for (const auto& t : ledger.trades())
    out << format_date(t.entry_date) << ',' << t.entry_price.to_string() << ',' << format_date(t.exit_date) << ','
        << t.exit_price.to_string() << ',' << t.pnl.to_string() << ',' << (t.forced_exit ? "true" : "false") << '\n';
}

inline void write_predictions_csv(const PredictionSeries& p, std::ostream& out) {
  out << "date,actual,predicted\n";
  for (std::size_t k = 0; k < p.size(); ++k)
    out << format_date(p.dates[k]) << ',' << fixed(p.actual[k], 6) << ',' << fixed(p.predicted[k], 6) << '\n';
}

inline void write_anomalies_csv(std::span<const AnomalyLabel> labels, std::ostream& out) {
  out << "date,mae,is_anomaly\n";
  for (const auto& l : labels)
    out << format_date(l.date) << ',' << fixed(l.reconstruction_mae, 8) << ',' << (l.is_anomaly ? 1 : 0) << '\n';
}

inline void write_density_csv(const DensityEstimate& d, std::ostream& out) {
  out << "grid,density\n";
  for (std::size_t k = 0; k < d.grid.size(); ++k) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "%.10g,%.10g\n", d.grid[k], d.density[k]);
    out << buf;
  }
}

inline void write_histogram_csv(const Histogram& h, std::ostream& out) {
  out << "bin_start,bin_end,count\n";
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,", h.edges[k], h.edges[k + 1]);
    out << buf << h.counts[k] << '\n';
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

template <typename Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  std::ostringstream buf;
  writer(buf);
  write_text_file(path, buf.str());
}

// ---------------------------------------------------------------------------
// SVG overlays

struct SvgSeries {
  std::string label;
  std::string color;
  std::vector<double> values;
};

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Line chart of one or more equally long series; markers (indices) are drawn
// as circles on the first series.
inline std::string render_svg_chart(const std::string& title, std::span<const SvgSeries> series,
                                    std::span<const std::size_t> markers = {}, const std::string& first_label = "",
                                    const std::string& last_label = "") {
  constexpr double W = 960, H = 480, L = 70, R = 20, T = 50, B = 50;
  double lo = INFINITY, hi = -INFINITY;
  std::size_t n = 0;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (n == 0) throw std::invalid_argument("render_svg_chart: no data");
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  auto px = [&](std::size_t k) { return L + (W - L - R) * (n > 1 ? static_cast<double>(k) / static_cast<double>(n - 1) : 0.5); };
  auto py = [&](double v) { return T + (H - T - B) * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\">\n"
      << "  <rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
      << "  <text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
      << xml_escape(title) << "</text>\n"
      << "  <line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n"
      << "  <line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
      << "  <text x=\"" << L - 6 << "\" y=\"" << T + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << fixed(hi, 2) << "</text>\n"
      << "  <text x=\"" << L - 6 << "\" y=\"" << H - B << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << fixed(lo, 2) << "</text>\n"
      << "  <text x=\"" << L << "\" y=\"" << H - B + 18 << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << xml_escape(first_label) << "</text>\n"
      << "  <text x=\"" << W - R << "\" y=\"" << H - B + 18
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(last_label) << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    svg << "  <polyline class=\"series\" fill=\"none\" stroke=\"" << series[s].color << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t k = 0; k < series[s].values.size(); ++k)
      svg << (k ? " " : "") << fixed(px(k), 2) << ',' << fixed(py(series[s].values[k]), 2);
    svg << "\"/>\n";
    svg << "  <text x=\"" << L + 10 << "\" y=\"" << T + 16 * (s + 1) << "\" fill=\"" << series[s].color
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(series[s].label) << "</text>\n";
  }
  for (std::size_t k : markers) {
    if (series.empty() || k >= series[0].values.size()) continue;
    svg << "  <circle class=\"anomaly\" cx=\"" << fixed(px(k), 2) << "\" cy=\"" << fixed(py(series[0].values[k]), 2)
        << "\" r=\"3\" fill=\"red\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

// Writes <stem>.csv and <stem>.svg for a price series.
inline void emit_price_overlay(const PriceSeries& s, const std::filesystem::path& stem) {
  if (s.empty()) throw std::invalid_argument("emit_price_overlay: empty series");
  write_file(stem.string() + ".csv", [&](std::ostream& o) { write_csv(s, o); });
  std::vector<SvgSeries> lines{{s.ticker + " adjusted close", "steelblue", s.closes()}};
  write_text_file(stem.string() + ".svg",
                  render_svg_chart(s.ticker + " adjusted close", lines, {}, format_date(s.bars.front().date),
                                   format_date(s.bars.back().date)));
}

inline void emit_prediction_overlay(const PredictionSeries& p, const std::filesystem::path& stem,
                                    const std::string& title) {
  if (p.size() == 0) throw std::invalid_argument("emit_prediction_overlay: empty series");
  write_file(stem.string() + ".csv", [&](std::ostream& o) { write_predictions_csv(p, o); });
  std::vector<SvgSeries> lines{{"actual", "steelblue", p.actual}, {"predicted", "darkorange", p.predicted}};
  write_text_file(stem.string() + ".svg",
                  render_svg_chart(title, lines, {}, format_date(p.dates.front()), format_date(p.dates.back())));
}

// CSV (date, close, mae, is_anomaly) plus a price chart with anomaly days
// marked.
inline void emit_anomaly_overlay(const PriceSeries& series, std::span<const AnomalyLabel> labels,
                                 const std::filesystem::path& stem, const std::string& title) {
  if (series.empty()) throw std::invalid_argument("emit_anomaly_overlay: empty series");
  if (labels.size() != series.size())
    throw std::invalid_argument("emit_anomaly_overlay: labels not aligned with series");
  std::vector<std::size_t> markers;
  write_file(stem.string() + ".csv", [&](std::ostream& o) {
    o << "date,close,mae,is_anomaly\n";
    for (std::size_t k = 0; k < labels.size(); ++k) {
      o << format_date(labels[k].date) << ',' << series.bars[k].adj_close.to_string() << ','
        << fixed(labels[k].reconstruction_mae, 8) << ',' << (labels[k].is_anomaly ? 1 : 0) << '\n';
      if (labels[k].is_anomaly) markers.push_back(k);
    }
  });
  std::vector<SvgSeries> lines{{"close", "steelblue", series.closes()}};
  write_text_file(stem.string() + ".svg",
                  render_svg_chart(title, lines, markers, format_date(series.bars.front().date),
                                   format_date(series.bars.back().date)));
}

}  // namespace lstmbt
