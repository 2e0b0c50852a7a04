#pragma once

#include <concepts>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lstmbt/market_data.hpp"
#include "lstmbt/nn/train.hpp"
#include "lstmbt/preprocess.hpp"

namespace lstmbt {

// One-step-ahead predictions aligned to test bars. predicted[i] and
// actual[i] both refer to dates[i]; values are in dollars.
struct PredictionSeries {
  std::vector<Date> dates;
  std::vector<double> predicted;
  std::vector<double> actual;

  std::size_t size() const { return dates.size(); }
};

struct PricePredictor {
  nn::LstmRegressor model;
  MinMaxScaler scaler;
  nn::TrainConfig config;
  nn::RegressorConfig architecture;
  std::vector<double> loss_history;
};

inline PricePredictor fit_predictor(const SplitSeries& split, const nn::TrainConfig& config,
                                    nn::RegressorConfig architecture = {}) {
  config.validate();
  const auto lookback = static_cast<std::size_t>(config.lookback);
  if (split.train.size() <= lookback)
    throw DataError("train split has " + std::to_string(split.train.size()) + " bars; need more than lookback " +
                    std::to_string(lookback));
  architecture.dropout = config.dropout;

  PricePredictor p;
  p.config = config;
  p.architecture = architecture;
  p.scaler = fit_scaler(split.train);
  const auto closes = split.train.closes();
  const auto normalized = p.scaler.transform(std::span<const double>(closes));
  auto ds = make_windows(normalized, lookback);

  nn::Rng init_rng(nn::derive_seed(config.seed, nn::kInitStream));
  p.model = nn::LstmRegressor::init(config.lookback, architecture, init_rng);
  nn::Matrix targets = ds.targets;
  p.loss_history = nn::train(p.model, ds.inputs, targets, config).loss_history;
  return p;
}

// Maps a (samples x lookback) matrix of normalized windows to one normalized
// prediction per row.
template <typename F>
concept WindowPredictor = requires(const F& f, const nn::Matrix& windows) {
  { f(windows) } -> std::convertible_to<nn::Vector>;
};

// Windows the test split with the last `lookback` training bars prepended, so
// every test bar, including the first, gets a prediction.
template <WindowPredictor F>
PredictionSeries predict_with(const F& predict_windows, const MinMaxScaler& scaler, std::size_t lookback,
                              const SplitSeries& split) {
  if (split.test.size() <= lookback)
    throw DataError("test split has " + std::to_string(split.test.size()) + " bars; need more than lookback " +
                    std::to_string(lookback));
  if (split.train.size() < lookback)
    throw DataError("train split shorter than lookback; cannot build first test window");

  std::vector<double> context;
  context.reserve(lookback + split.test.size());
  for (std::size_t k = split.train.size() - lookback; k < split.train.size(); ++k)
    context.push_back(split.train.bars[k].adj_close.to_double());
  for (const auto& bar : split.test.bars) context.push_back(bar.adj_close.to_double());

  const auto normalized = scaler.transform(std::span<const double>(context));
  const auto ds = make_windows(normalized, lookback);
  const nn::Vector raw = predict_windows(ds.inputs);
  if (raw.size() != ds.samples()) throw std::logic_error("predict_with: predictor returned wrong row count");

  PredictionSeries out;
  out.dates = split.test.dates();
  out.actual = split.test.closes();
  out.predicted.reserve(out.actual.size());
  for (nn::Index i = 0; i < raw.size(); ++i) out.predicted.push_back(scaler.inverse_transform(raw(i)));
  return out;
}

inline PredictionSeries predict_test(const PricePredictor& predictor, const SplitSeries& split) {
  return predict_with([&](const nn::Matrix& w) { return predictor.model.predict(w); }, predictor.scaler,
                      static_cast<std::size_t>(predictor.model.lookback), split);
}

inline std::vector<double> squared_errors(const PredictionSeries& p) {
  if (p.predicted.size() != p.actual.size())
    throw std::invalid_argument("squared_errors: predicted and actual lengths differ");
  std::vector<double> out(p.predicted.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double d = p.predicted[k] - p.actual[k];
    out[k] = d * d;
  }
  return out;
}

}  // namespace lstmbt
