#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lstmbt/anomaly_detector.hpp"
#include "lstmbt/decimal.hpp"
#include "lstmbt/market_data.hpp"
#include "lstmbt/price_predictor.hpp"

namespace lstmbt {

class LedgerError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Trade {
  Date entry_date;
  std::size_t entry_index = 0;  // trading-day ordinal within the traded series
  Decimal entry_price;
  Date exit_date;
  std::size_t exit_index = 0;
  Decimal exit_price;
  Decimal pnl;
  bool forced_exit = false;
};

struct Position {
  Date entry_date;
  std::size_t entry_index = 0;
  Decimal entry_price;
};

// Long-only book holding at most one share.
class Ledger {
 public:
  bool holding() const { return position_.has_value(); }
  const std::optional<Position>& position() const { return position_; }
  const std::vector<Trade>& trades() const { return trades_; }

  void buy(std::size_t index, Date date, Decimal price) {
    if (position_) throw LedgerError("buy while already holding a share (index " + std::to_string(index) + ")");
    if (!trades_.empty() && index < trades_.back().exit_index)
      throw LedgerError("buy at index " + std::to_string(index) + " before previous exit");
    position_ = Position{date, index, price};
  }

  void sell(std::size_t index, Date date, Decimal price, bool forced = false) {
    if (!position_) throw LedgerError("sell while flat (index " + std::to_string(index) + ")");
    if (index <= position_->entry_index || date <= position_->entry_date)
      throw LedgerError("exit at index " + std::to_string(index) + " not after entry");
    trades_.push_back(Trade{position_->entry_date, position_->entry_index, position_->entry_price, date, index, price,
                            price - position_->entry_price, forced});
    position_.reset();
  }

 private:
  std::optional<Position> position_;
  std::vector<Trade> trades_;
};

struct BacktestReport {
  bool counts_applicable = true;  // false for buy-and-hold
  std::size_t profitable = 0;
  std::size_t unprofitable = 0;
  std::size_t total = 0;
  std::size_t forced_exits = 0;
  std::optional<double> success_rate;  // profitable / total, absent when total == 0
  Decimal profit;
};

struct BacktestResult {
  Ledger ledger;
  BacktestReport report;
};

// Zero-pnl trades count as unprofitable.
inline BacktestReport compute_report(const Ledger& ledger) {
  if (ledger.holding()) throw LedgerError("compute_report: position still open");
  BacktestReport r;
  for (const auto& t : ledger.trades()) {
    if (t.pnl > Decimal{})
      ++r.profitable;
    else
      ++r.unprofitable;
    if (t.forced_exit) ++r.forced_exits;
    r.profit += t.pnl;
  }
  r.total = r.profitable + r.unprofitable;
  if (r.total > 0) r.success_rate = static_cast<double>(r.profitable) / static_cast<double>(r.total);
  return r;
}

// One share bought at the first close and sold at the last.
inline BacktestReport run_buy_and_hold(const PriceSeries& series) {
  if (series.size() < 2) throw DataError("buy-and-hold needs at least 2 bars");
  BacktestReport r;
  r.counts_applicable = false;
  r.profit = series.bars.back().adj_close - series.bars.front().adj_close;
  return r;
}

enum class Action { wait, buy, sell };

// Default Strategy-1 rule: hold while the predicted one-day change is
// positive, sell at a predicted local peak. Day t sees predicted[t + 1],
// which the model produced from closes up to day t.
struct PredictedPeakRule {
  Action operator()(std::span<const double> predicted, std::size_t t, bool holding) const {
    if (t + 1 >= predicted.size()) return Action::wait;
    const bool rising = predicted[t + 1] > predicted[t];
    if (!holding && rising) return Action::buy;
    if (holding && !rising) return Action::sell;
    return Action::wait;
  }
};

namespace detail {

inline void apply_action(Ledger& ledger, const PriceSeries& series, std::size_t t, Action a) {
  const auto& bar = series.bars[t];
  if (a == Action::buy && !ledger.holding() && t + 1 < series.size())
    ledger.buy(t, bar.date, bar.adj_close);
  else if (a == Action::sell && ledger.holding() && ledger.position()->entry_index < t)
    ledger.sell(t, bar.date, bar.adj_close);
}

// Forces any open position out at the final close and fills the report.
inline void close_out(BacktestResult& res, const PriceSeries& series) {
  if (res.ledger.holding())
    res.ledger.sell(series.size() - 1, series.bars.back().date, series.bars.back().adj_close, true);
  res.report = compute_report(res.ledger);
}

}  // namespace detail

template <typename Rule>
concept TradingRule = requires(const Rule& r, std::span<const double> p, std::size_t t, bool h) {
  { r(p, t, h) } -> std::same_as<Action>;
};

// Executes an action per bar at that bar's close. Buys while holding and
// sells while flat are ignored; buys on the final bar are ignored (no later
// close to exit at). An open position is force-closed at the final close.
inline BacktestResult simulate_actions(const PriceSeries& series, std::span<const Action> actions) {
  if (actions.size() != series.size())
    throw std::invalid_argument("simulate_actions: " + std::to_string(actions.size()) + " actions for " +
                                std::to_string(series.size()) + " bars");
  BacktestResult res;
  for (std::size_t t = 0; t < series.size(); ++t) detail::apply_action(res.ledger, series, t, actions[t]);
  detail::close_out(res, series);
  return res;
}

template <TradingRule Rule = PredictedPeakRule>
BacktestResult run_strategy1(const PriceSeries& test, const PredictionSeries& predictions, const Rule& rule = {}) {
  if (predictions.size() != test.size() || predictions.predicted.size() != test.size())
    throw std::invalid_argument("run_strategy1: " + std::to_string(predictions.size()) + " predictions for " +
                                std::to_string(test.size()) + " test bars");
  for (std::size_t t = 0; t < test.size(); ++t)
    if (predictions.dates[t] != test.bars[t].date)
      throw std::invalid_argument("run_strategy1: prediction date " + format_date(predictions.dates[t]) +
                                  " misaligned with test bar " + format_date(test.bars[t].date));

  // Actions depend on holding state, so decide bar by bar.
  BacktestResult res;
  const std::span<const double> predicted(predictions.predicted);
  for (std::size_t t = 0; t < test.size(); ++t)
    detail::apply_action(res.ledger, test, t, rule(predicted, t, res.ledger.holding()));
  detail::close_out(res, test);
  return res;
}

inline constexpr std::size_t kDefaultHoldDays = 3;

// Buys at the close of each flagged day while flat and sells hold_days
// trading days later. Signals while holding are skipped; the exit day itself
// may open a new position after the sale. Exits past the end of data are
// forced at the final close.
inline BacktestResult run_strategy2(const PriceSeries& test, std::span<const AnomalyLabel> labels,
                                    std::size_t hold_days = kDefaultHoldDays) {
  if (hold_days < 1) throw std::invalid_argument("run_strategy2: hold_days must be >= 1");
  if (labels.size() != test.size())
    throw std::invalid_argument("run_strategy2: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(test.size()) + " test bars");
  for (std::size_t t = 0; t < test.size(); ++t)
    if (labels[t].date != test.bars[t].date)
      throw std::invalid_argument("run_strategy2: label date " + format_date(labels[t].date) +
                                  " misaligned with test bar " + format_date(test.bars[t].date));

  BacktestResult res;
  const std::size_t n = test.size();
  std::size_t exit_at = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const auto& bar = test.bars[t];
    if (res.ledger.holding() && t == exit_at) res.ledger.sell(t, bar.date, bar.adj_close);
    if (!res.ledger.holding() && labels[t].is_anomaly && t + 1 < n) {
      res.ledger.buy(t, bar.date, bar.adj_close);
      exit_at = t + hold_days;
    }
  }
  detail::close_out(res, test);
  return res;
}

}  // namespace lstmbt
