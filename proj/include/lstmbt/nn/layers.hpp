#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "lstmbt/nn/tensor.hpp"

namespace lstmbt::nn {

// Fully connected output head, applied column-wise.
struct DenseParams {
  Matrix weights;  // out x in
  Matrix bias;     // out x 1

  Index input_size() const { return weights.cols(); }
  Index output_size() const { return weights.rows(); }
  bool finite() const { return weights.allFinite() && bias.allFinite(); }

  static DenseParams init(Index input_size, Index output_size, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(input_size));
    DenseParams d{Matrix(output_size, input_size), Matrix::Zero(output_size, 1)};
    for (Index c = 0; c < input_size; ++c)
      for (Index r = 0; r < output_size; ++r) d.weights(r, c) = rng.uniform(-bound, bound);
    return d;
  }
};

inline Matrix dense_forward(const DenseParams& d, const Matrix& x) {
  if (x.rows() != d.input_size())
    throw ShapeError("dense_forward: input rows " + std::to_string(x.rows()) + " != " +
                     std::to_string(d.input_size()));
  Matrix y = d.weights * x;
  y.colwise() += d.bias.col(0);
  return y;
}

// Accumulates parameter gradients and returns dLoss/dx.
inline Matrix dense_backward(const DenseParams& d, const Matrix& x, const Matrix& dy, Matrix& d_weights,
                             Matrix& d_bias) {
  if (dy.rows() != d.output_size() || dy.cols() != x.cols())
    throw ShapeError("dense_backward: upstream gradient " + shape_string(dy) + " does not match input " +
                     shape_string(x));
  d_weights.noalias() += dy * x.transpose();
  d_bias.col(0) += dy.rowwise().sum();
  return d.weights.transpose() * dy;
}

struct DropoutSpec {
  double rate = 0.0;

  DropoutSpec() = default;
  explicit DropoutSpec(double r) : rate(r) {
    if (!(r >= 0.0 && r < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1), got " + std::to_string(r));
  }
};

// Inverted dropout mask: each entry is 0 with probability rate, otherwise
// 1 / (1 - rate), so the expected masked activation equals the input.
inline Matrix dropout_mask(Index rows, Index cols, const DropoutSpec& spec, Rng& rng) {
  const double keep_scale = 1.0 / (1.0 - spec.rate);
  Matrix mask(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) mask(r, c) = rng.uniform() < spec.rate ? 0.0 : keep_scale;
  return mask;
}

inline void check_loss_inputs(const Matrix& pred, const Matrix& target, const char* name) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError(std::string(name) + ": shape mismatch " + shape_string(pred) + " vs " + shape_string(target));
  if (pred.size() == 0) throw ShapeError(std::string(name) + ": empty input");
}

inline double mse_loss(const Matrix& pred, const Matrix& target) {
  check_loss_inputs(pred, target, "mse_loss");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

inline double mae_loss(const Matrix& pred, const Matrix& target) {
  check_loss_inputs(pred, target, "mae_loss");
  return (pred - target).cwiseAbs().sum() / static_cast<double>(pred.size());
}

inline Matrix mse_gradient(const Matrix& pred, const Matrix& target) {
  check_loss_inputs(pred, target, "mse_gradient");
  return (2.0 / static_cast<double>(pred.size())) * (pred - target);
}

// Subgradient; zero where pred == target.
inline Matrix mae_gradient(const Matrix& pred, const Matrix& target) {
  check_loss_inputs(pred, target, "mae_gradient");
  const double scale = 1.0 / static_cast<double>(pred.size());
  return (pred - target).unaryExpr([scale](double d) { return d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0); });
}

}  // namespace lstmbt::nn
