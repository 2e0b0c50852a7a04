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

inline constexpr double kDefaultAnomalyThreshold = 0.55;

struct AnomalyDetector {
  nn::LstmAutoencoder model;
  MinMaxScaler scaler;
  nn::TrainConfig config;
  nn::AutoencoderConfig architecture;
  std::vector<double> loss_history;
};

struct ReconstructionError {
  Date date;
  double mae = 0.0;
};

struct AnomalyLabel {
  Date date;
  double reconstruction_mae = 0.0;
  bool is_anomaly = false;
};

// How the reconstruction MAE is compared against the threshold.
enum class ThresholdRule { at_least, greater_than };

// Trains on every window of the training split; the split is taken as
// anomaly-free and is not filtered.
inline AnomalyDetector fit_autoencoder(const SplitSeries& split, const nn::TrainConfig& config,
                                       nn::AutoencoderConfig architecture = {}) {
  config.validate();
  const auto lookback = static_cast<std::size_t>(config.lookback);
  if (split.train.size() <= lookback)
    throw DataError("train split has " + std::to_string(split.train.size()) + " bars; need more than lookback " +
                    std::to_string(lookback));
  architecture.dropout = config.dropout;

  AnomalyDetector d;
  d.config = config;
  d.architecture = architecture;
  d.scaler = fit_scaler(split.train);
  const auto closes = split.train.closes();
  const auto windows = make_reconstruction_windows(d.scaler.transform(std::span<const double>(closes)), lookback);

  nn::Rng init_rng(nn::derive_seed(config.seed, nn::kInitStream));
  d.model = nn::LstmAutoencoder::init(config.lookback, architecture, init_rng);
  d.loss_history = nn::train(d.model, windows, windows, config).loss_history;
  return d;
}

// Maps (samples x lookback) normalized windows to same-shape reconstructions.
template <typename F>
concept WindowReconstructor = requires(const F& f, const nn::Matrix& windows) {
  { f(windows) } -> std::convertible_to<nn::Matrix>;
};

// One MAE per window of `series`, dated by the window's last bar.
template <WindowReconstructor F>
std::vector<ReconstructionError> reconstruction_errors_with(const F& reconstruct, const MinMaxScaler& scaler,
                                                            std::size_t lookback, const PriceSeries& series) {
  if (series.size() <= lookback)
    throw DataError("series has " + std::to_string(series.size()) + " bars; need more than lookback " +
                    std::to_string(lookback));
  const auto closes = series.closes();
  const auto windows = make_reconstruction_windows(scaler.transform(std::span<const double>(closes)), lookback);
  const nn::Matrix rec = reconstruct(windows);
  if (rec.rows() != windows.rows() || rec.cols() != windows.cols())
    throw std::logic_error("reconstruction shape " + nn::shape_string(rec) + " != window shape " +
                           nn::shape_string(windows));

  std::vector<ReconstructionError> out;
  out.reserve(static_cast<std::size_t>(windows.rows()));
  for (nn::Index i = 0; i < windows.rows(); ++i) {
    const double mae = (rec.row(i) - windows.row(i)).cwiseAbs().mean();
    out.push_back({series.bars[static_cast<std::size_t>(i) + lookback - 1].date, mae});
  }
  return out;
}

inline std::vector<ReconstructionError> reconstruction_errors(const AnomalyDetector& detector,
                                                              const PriceSeries& series) {
  return reconstruction_errors_with([&](const nn::Matrix& w) { return detector.model.reconstruct(w); },
                                    detector.scaler, static_cast<std::size_t>(detector.model.lookback), series);
}

// Test-split errors with the last lookback - 1 training bars prepended, so
// there is exactly one error per test bar.
inline PriceSeries test_context(const SplitSeries& split, std::size_t lookback) {
  if (lookback == 0 || split.train.size() < lookback - 1)
    throw DataError("train split shorter than lookback - 1; cannot build first test window");
  PriceSeries ctx = split.train.slice(split.train.size() - (lookback - 1), split.train.size());
  ctx.bars.insert(ctx.bars.end(), split.test.bars.begin(), split.test.bars.end());
  return ctx;
}

inline std::vector<ReconstructionError> detect_test(const AnomalyDetector& detector, const SplitSeries& split) {
  return reconstruction_errors(detector, test_context(split, static_cast<std::size_t>(detector.model.lookback)));
}

inline std::vector<AnomalyLabel> label_anomalies(std::span<const ReconstructionError> errors, double threshold,
                                                 ThresholdRule rule = ThresholdRule::at_least) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw std::invalid_argument("anomaly threshold must be in (0, 1], got " + std::to_string(threshold));
  std::vector<AnomalyLabel> out;
  out.reserve(errors.size());
  for (const auto& e : errors) {
    const bool flagged = rule == ThresholdRule::at_least ? e.mae >= threshold : e.mae > threshold;
    out.push_back({e.date, e.mae, flagged});
  }
  return out;
}

}  // namespace lstmbt
