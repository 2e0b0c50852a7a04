#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lstmbt/market_data.hpp"
#include "lstmbt/nn/tensor.hpp"

namespace lstmbt {

class DegenerateScalerError : public std::domain_error {
 public:
  DegenerateScalerError() : std::domain_error("degenerate scaler: max == min, inverse undefined") {}
};

// Min-max scaling to [0, 1] fitted on training prices. Values outside the
// fitted range map outside [0, 1]; nothing is clipped.
struct MinMaxScaler {
  double min = 0.0;
  double max = 0.0;

  bool degenerate() const { return !(max > min); }

  double transform(double x) const {
    if (degenerate()) return 0.0;
    return (x - min) / (max - min);
  }

  double inverse_transform(double y) const {
    if (degenerate()) throw DegenerateScalerError();
    return min + y * (max - min);
  }

  std::vector<double> transform(std::span<const double> xs) const {
    std::vector<double> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(transform(x));
    return out;
  }

  friend bool operator==(const MinMaxScaler&, const MinMaxScaler&) = default;
};

inline MinMaxScaler fit_scaler(std::span<const double> train) {
  if (train.empty()) throw std::invalid_argument("fit_scaler: empty training data");
  auto [lo, hi] = std::minmax_element(train.begin(), train.end());
  return MinMaxScaler{*lo, *hi};
}

inline MinMaxScaler fit_scaler(const PriceSeries& train) {
  auto closes = train.closes();
  return fit_scaler(std::span<const double>(closes));
}

// samples x lookback inputs with one-step-ahead targets.
struct WindowedDataset {
  nn::Matrix inputs;
  nn::Vector targets;
  nn::Index lookback = 0;

  nn::Index samples() const { return inputs.rows(); }
};

// Row i holds values[i, i + lookback) and targets values[i + lookback].
inline WindowedDataset make_windows(std::span<const double> values, std::size_t lookback) {
  if (lookback == 0) throw std::invalid_argument("make_windows: lookback must be positive");
  if (values.size() <= lookback)
    throw std::invalid_argument("make_windows: need more than " + std::to_string(lookback) +
                                " values, got " + std::to_string(values.size()));
  const auto rows = static_cast<nn::Index>(values.size() - lookback);
  const auto cols = static_cast<nn::Index>(lookback);
  WindowedDataset ds{nn::Matrix(rows, cols), nn::Vector(rows), cols};
  for (nn::Index i = 0; i < rows; ++i) {
    for (nn::Index j = 0; j < cols; ++j) ds.inputs(i, j) = values[static_cast<std::size_t>(i + j)];
    ds.targets(i) = values[static_cast<std::size_t>(i + cols)];
  }
  return ds;
}

// All len - lookback + 1 windows; row i holds values[i, i + lookback). Used
// for reconstruction, where every window including the last one matters.
inline nn::Matrix make_reconstruction_windows(std::span<const double> values, std::size_t lookback) {
  if (lookback == 0) throw std::invalid_argument("make_reconstruction_windows: lookback must be positive");
  if (values.size() < lookback)
    throw std::invalid_argument("make_reconstruction_windows: need at least " + std::to_string(lookback) +
                                " values, got " + std::to_string(values.size()));
  const auto rows = static_cast<nn::Index>(values.size() - lookback + 1);
  const auto cols = static_cast<nn::Index>(lookback);
  nn::Matrix windows(rows, cols);
  for (nn::Index i = 0; i < rows; ++i)
    for (nn::Index j = 0; j < cols; ++j) windows(i, j) = values[static_cast<std::size_t>(i + j)];
  return windows;
}

}  // namespace lstmbt
