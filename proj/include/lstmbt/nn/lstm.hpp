#pragma once

#include <cmath>
#include <string>

#include "lstmbt/nn/tensor.hpp"

namespace lstmbt::nn {

// Row-block order of the stacked gate matrices.
enum class Gate : int { input = 0, forget = 1, output = 2, candidate = 3 };

inline constexpr int kGateCount = 4;

// One LSTM layer. Weights for the four gates are stacked vertically in the
// order of Gate, so input_weights is 4H x in, recurrent_weights is 4H x H and
// bias is 4H x 1.
struct LstmParams {
  Matrix input_weights;
  Matrix recurrent_weights;
  Matrix bias;

  Index hidden_size() const { return recurrent_weights.cols(); }
  Index input_size() const { return input_weights.cols(); }

  auto gate_input_weights(Gate g) { return input_weights.middleRows(static_cast<int>(g) * hidden_size(), hidden_size()); }
  auto gate_input_weights(Gate g) const {
    return input_weights.middleRows(static_cast<int>(g) * hidden_size(), hidden_size());
  }
  auto gate_recurrent_weights(Gate g) {
    return recurrent_weights.middleRows(static_cast<int>(g) * hidden_size(), hidden_size());
  }
  auto gate_recurrent_weights(Gate g) const {
    return recurrent_weights.middleRows(static_cast<int>(g) * hidden_size(), hidden_size());
  }
  auto gate_bias(Gate g) { return bias.middleRows(static_cast<int>(g) * hidden_size(), hidden_size()); }
  auto gate_bias(Gate g) const { return bias.middleRows(static_cast<int>(g) * hidden_size(), hidden_size()); }

  bool finite() const { return input_weights.allFinite() && recurrent_weights.allFinite() && bias.allFinite(); }

  // Uniform in [-1/sqrt(H), 1/sqrt(H)] with forget-gate bias 1.
  static LstmParams init(Index input_size, Index hidden_size, Rng& rng) {
    if (input_size <= 0 || hidden_size <= 0) throw ShapeError("LstmParams::init: sizes must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
    auto fill = [&](Index rows, Index cols) {
      Matrix m(rows, cols);
      for (Index c = 0; c < cols; ++c)
        for (Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
      return m;
    };
    LstmParams p;
    p.input_weights = fill(kGateCount * hidden_size, input_size);
    p.recurrent_weights = fill(kGateCount * hidden_size, hidden_size);
    p.bias = fill(kGateCount * hidden_size, 1);
    p.gate_bias(Gate::forget).setOnes();
    return p;
  }

  static LstmParams zeros(Index input_size, Index hidden_size) {
    LstmParams p;
    p.input_weights = Matrix::Zero(kGateCount * hidden_size, input_size);
    p.recurrent_weights = Matrix::Zero(kGateCount * hidden_size, hidden_size);
    p.bias = Matrix::Zero(kGateCount * hidden_size, 1);
    return p;
  }
};

namespace detail {

// tanh through exp, which Eigen vectorizes for double; saturates cleanly to
// +-1 when exp over- or underflows.
template <typename ArrayExpr>
auto fast_tanh(const ArrayExpr& x) {
  return 1.0 - 2.0 / ((2.0 * x).exp() + 1.0);
}

template <typename Block>
void activate_gates(Block&& z, Index hidden) {
  auto sig = z.topRows(3 * hidden).array();
  sig = 1.0 / (1.0 + (-sig).exp());
  auto cand = z.bottomRows(hidden).array();
  cand = fast_tanh(cand);
}

}  // namespace detail

// Activations of a single step, kept for the backward pass.
struct CellCache {
  Vector x, h_prev, c_prev;
  Vector input_gate, forget_gate, output_gate, candidate;
  Vector c, tanh_c;
};

struct CellOutput {
  Vector h;
  Vector c;
  CellCache cache;
};

// Single-sample LSTM step:
//   c = f * c_prev + i * g,  h = o * tanh(c)
inline CellOutput lstm_cell_forward(const LstmParams& p, const Vector& x, const Vector& h_prev,
                                    const Vector& c_prev) {
  const Index H = p.hidden_size();
  if (x.size() != p.input_size() || h_prev.size() != H || c_prev.size() != H)
    throw ShapeError("lstm_cell_forward: expected x[" + std::to_string(p.input_size()) + "], h/c[" +
                     std::to_string(H) + "], got x[" + std::to_string(x.size()) + "], h[" +
                     std::to_string(h_prev.size()) + "], c[" + std::to_string(c_prev.size()) + "]");
  Matrix z = p.input_weights * x + p.recurrent_weights * h_prev + p.bias;
  detail::activate_gates(z.col(0), H);

  CellOutput out;
  auto& k = out.cache;
  k.x = x;
  k.h_prev = h_prev;
  k.c_prev = c_prev;
  k.input_gate = z.col(0).segment(0, H);
  k.forget_gate = z.col(0).segment(H, H);
  k.output_gate = z.col(0).segment(2 * H, H);
  k.candidate = z.col(0).segment(3 * H, H);
  k.c = (k.forget_gate.array() * c_prev.array() + k.input_gate.array() * k.candidate.array()).matrix();
  k.tanh_c = detail::fast_tanh(k.c.array()).matrix();
  out.c = k.c;
  out.h = (k.output_gate.array() * k.tanh_c.array()).matrix();
  return out;
}

// Batched sequence layout: a sequence of T steps over a batch of B samples is
// a (features x T*B) matrix whose column block [t*B, (t+1)*B) is step t.
struct LstmLayerCache {
  Index steps = 0;
  Index batch = 0;
  Matrix inputs;      // in x T*B
  Matrix gates;       // 4H x T*B, activated
  Matrix cells;       // H x T*B
  Matrix tanh_cells;  // H x T*B
  Matrix hidden;      // H x T*B
};

// Runs the layer over a full sequence from zero initial state and returns the
// hidden state at every step (H x T*B).
inline const Matrix& lstm_layer_forward(const LstmParams& p, const Matrix& inputs, Index batch,
                                        LstmLayerCache& cache) {
  const Index H = p.hidden_size();
  if (batch <= 0 || inputs.cols() % batch != 0)
    throw ShapeError("lstm_layer_forward: input columns " + std::to_string(inputs.cols()) +
                     " not a multiple of batch " + std::to_string(batch));
  if (inputs.rows() != p.input_size())
    throw ShapeError("lstm_layer_forward: input rows " + std::to_string(inputs.rows()) + " != layer input size " +
                     std::to_string(p.input_size()));
  const Index T = inputs.cols() / batch;
  const Index B = batch;
  cache.steps = T;
  cache.batch = B;
  cache.inputs = inputs;
  cache.gates.noalias() = p.input_weights * inputs;
  cache.gates.colwise() += p.bias.col(0);
  cache.cells.resize(H, T * B);
  cache.tanh_cells.resize(H, T * B);
  cache.hidden.resize(H, T * B);

  for (Index t = 0; t < T; ++t) {
    auto z = cache.gates.middleCols(t * B, B);
    if (t > 0) z.noalias() += p.recurrent_weights * cache.hidden.middleCols((t - 1) * B, B);
    detail::activate_gates(z, H);
    auto i = z.topRows(H).array();
    auto f = z.middleRows(H, H).array();
    auto o = z.middleRows(2 * H, H).array();
    auto g = z.bottomRows(H).array();
    auto c = cache.cells.middleCols(t * B, B).array();
    if (t > 0)
      c = f * cache.cells.middleCols((t - 1) * B, B).array() + i * g;
    else
      c = i * g;
    auto tc = cache.tanh_cells.middleCols(t * B, B).array();
    tc = detail::fast_tanh(c);
    cache.hidden.middleCols(t * B, B).array() = o * tc;
  }
  return cache.hidden;
}

struct LstmGradRefs {
  Matrix& input_weights;
  Matrix& recurrent_weights;
  Matrix& bias;
};

// Backpropagation through time. d_hidden is dLoss/dh at every step (H x T*B);
// parameter gradients are accumulated into grads and dLoss/dinputs returned.
inline Matrix lstm_layer_backward(const LstmParams& p, const LstmLayerCache& cache, const Matrix& d_hidden,
                                  LstmGradRefs grads) {
  const Index H = p.hidden_size();
  const Index T = cache.steps;
  const Index B = cache.batch;
  if (cache.hidden.rows() != H || cache.inputs.rows() != p.input_size())
    throw ShapeError("lstm_layer_backward: cache does not belong to this layer");
  if (d_hidden.rows() != H || d_hidden.cols() != T * B)
    throw ShapeError("lstm_layer_backward: upstream gradient " + shape_string(d_hidden) + " != " +
                     std::to_string(H) + "x" + std::to_string(T * B));

  Matrix dz(kGateCount * H, T * B);
  Matrix dh_next = Matrix::Zero(H, B);
  Matrix dc_next = Matrix::Zero(H, B);
  Matrix dh(H, B), dc(H, B);

  for (Index t = T - 1; t >= 0; --t) {
    const auto z = cache.gates.middleCols(t * B, B);
    const auto i = z.topRows(H).array();
    const auto f = z.middleRows(H, H).array();
    const auto o = z.middleRows(2 * H, H).array();
    const auto g = z.bottomRows(H).array();
    const auto tc = cache.tanh_cells.middleCols(t * B, B).array();

    dh = d_hidden.middleCols(t * B, B) + dh_next;
    dc.array() = dc_next.array() + dh.array() * o * (1.0 - tc.square());

    auto dzt = dz.middleCols(t * B, B);
    dzt.topRows(H).array() = dc.array() * g * i * (1.0 - i);
    if (t > 0)
      dzt.middleRows(H, H).array() = dc.array() * cache.cells.middleCols((t - 1) * B, B).array() * f * (1.0 - f);
    else
      dzt.middleRows(H, H).setZero();
    dzt.middleRows(2 * H, H).array() = dh.array() * tc * o * (1.0 - o);
    dzt.bottomRows(H).array() = dc.array() * i * (1.0 - g.square());

    dc_next.array() = dc.array() * f;
    if (t > 0) dh_next.noalias() = p.recurrent_weights.transpose() * dzt;
  }

  grads.input_weights.noalias() += dz * cache.inputs.transpose();
  grads.bias.col(0) += dz.rowwise().sum();
  if (T > 1)
    grads.recurrent_weights.noalias() +=
        dz.rightCols((T - 1) * B) * cache.hidden.leftCols((T - 1) * B).transpose();
  return p.input_weights.transpose() * dz;
}

}  // namespace lstmbt::nn
