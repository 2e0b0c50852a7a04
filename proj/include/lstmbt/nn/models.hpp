#pragma once

#include <span>
#include <string>
#include <vector>

#include "lstmbt/nn/layers.hpp"
#include "lstmbt/nn/lstm.hpp"
#include "lstmbt/nn/tensor.hpp"

namespace lstmbt::nn {

enum class Mode { inference, training };

// Packs selected rows of a (samples x steps) matrix into the batched sequence
// layout (1 x steps*B), column t*B + b holding rows(indices[b], t).
inline Matrix gather_sequence(const Matrix& rows, std::span<const Index> indices) {
  const auto B = static_cast<Index>(indices.size());
  const Index T = rows.cols();
  Matrix out(1, T * B);
  for (Index b = 0; b < B; ++b) {
    const Index r = indices[static_cast<std::size_t>(b)];
    for (Index t = 0; t < T; ++t) out(0, t * B + b) = rows(r, t);
  }
  return out;
}

// Inverse of gather_sequence for a (1 x steps*B) block: returns B x steps.
inline Matrix scatter_sequence(const Matrix& seq, Index batch) {
  const Index T = seq.cols() / batch;
  Matrix out(batch, T);
  for (Index b = 0; b < batch; ++b)
    for (Index t = 0; t < T; ++t) out(b, t) = seq(0, t * batch + b);
  return out;
}

struct StackCache {
  std::vector<LstmLayerCache> layers;
  std::vector<Matrix> masks;  // empty when dropout is inactive
  Matrix output;              // top hidden sequence after dropout
};

// Stacked LSTM layers with inverted dropout on every layer's output
// sequence in training mode.
struct LstmStack {
  std::vector<LstmParams> layers;
  DropoutSpec dropout;

  static LstmStack init(Index input_size, std::span<const Index> hidden_sizes, DropoutSpec dropout, Rng& rng) {
    if (hidden_sizes.empty()) throw ShapeError("LstmStack::init: at least one layer required");
    LstmStack s;
    s.dropout = dropout;
    Index in = input_size;
    for (Index h : hidden_sizes) {
      s.layers.push_back(LstmParams::init(in, h, rng));
      in = h;
    }
    return s;
  }

  Index input_size() const { return layers.front().input_size(); }
  Index output_size() const { return layers.back().hidden_size(); }
  std::size_t tensor_count() const { return 3 * layers.size(); }

  void append_parameters(std::vector<Matrix*>& out) {
    for (auto& l : layers) {
      out.push_back(&l.input_weights);
      out.push_back(&l.recurrent_weights);
      out.push_back(&l.bias);
    }
  }

  void append_zero_gradients(Gradients& out) const {
    for (const auto& l : layers) {
      out.push_back(Matrix::Zero(l.input_weights.rows(), l.input_weights.cols()));
      out.push_back(Matrix::Zero(l.recurrent_weights.rows(), l.recurrent_weights.cols()));
      out.push_back(Matrix::Zero(l.bias.rows(), l.bias.cols()));
    }
  }

  void forward(const Matrix& inputs, Index batch, Mode mode, Rng& rng, StackCache& cache) const {
    const bool drop = mode == Mode::training && dropout.rate > 0.0;
    cache.layers.resize(layers.size());
    cache.masks.clear();
    const Matrix* x = &inputs;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Matrix& h = lstm_layer_forward(layers[l], *x, batch, cache.layers[l]);
      if (drop) {
        cache.masks.push_back(dropout_mask(h.rows(), h.cols(), dropout, rng));
        cache.output = h.cwiseProduct(cache.masks.back());
      } else {
        cache.output = h;
      }
      x = &cache.output;
      // The next layer copies its input into its own cache, so reusing
      // cache.output as scratch is safe.
    }
  }

  // grads holds 3 tensors per layer starting at the stack's offset.
  Matrix backward(const StackCache& cache, Matrix d_output, std::span<Matrix> grads) const {
    if (cache.layers.size() != layers.size()) throw ShapeError("LstmStack::backward: cache layer count mismatch");
    if (grads.size() != tensor_count()) throw ShapeError("LstmStack::backward: gradient tensor count mismatch");
    const bool drop = !cache.masks.empty();
    for (std::size_t l = layers.size(); l-- > 0;) {
      if (drop) d_output = d_output.cwiseProduct(cache.masks[l]);
      d_output = lstm_layer_backward(layers[l], cache.layers[l], d_output,
                                     LstmGradRefs{grads[3 * l], grads[3 * l + 1], grads[3 * l + 2]});
    }
    return d_output;
  }

  bool finite() const {
    for (const auto& l : layers)
      if (!l.finite()) return false;
    return true;
  }
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients gradients;
};

struct RegressorConfig {
  std::vector<Index> hidden_sizes{50, 50};
  double dropout = 0.2;
};

// Stacked LSTM reading a univariate window and emitting one scalar from the
// final hidden state through a dense head. Trained with MSE.
class LstmRegressor {
 public:
  LstmStack stack;
  DenseParams head;
  Index lookback = 0;

  static LstmRegressor init(Index lookback, const RegressorConfig& cfg, Rng& rng) {
    if (lookback <= 0) throw ShapeError("LstmRegressor: lookback must be positive");
    LstmRegressor m;
    m.lookback = lookback;
    m.stack = LstmStack::init(1, cfg.hidden_sizes, DropoutSpec(cfg.dropout), rng);
    m.head = DenseParams::init(m.stack.output_size(), 1, rng);
    return m;
  }

  struct ForwardPass {
    const LstmRegressor* owner = nullptr;
    Index batch = 0;
    StackCache stack;
    Matrix last_hidden;  // H x B
    Matrix output;       // 1 x B
  };

  struct BackwardResult {
    Gradients gradients;
    Matrix d_inputs;  // 1 x T*B
  };

  // inputs is (1 x lookback*B) in the batched sequence layout.
  ForwardPass forward(const Matrix& inputs, Index batch, Mode mode, Rng& rng) const {
    if (inputs.rows() != 1 || batch <= 0 || inputs.cols() != lookback * batch)
      throw ShapeError("LstmRegressor::forward: expected 1x" + std::to_string(lookback * batch) + ", got " +
                       shape_string(inputs));
    ForwardPass fp;
    fp.owner = this;
    fp.batch = batch;
    stack.forward(inputs, batch, mode, rng, fp.stack);
    fp.last_hidden = fp.stack.output.rightCols(batch);
    fp.output = dense_forward(head, fp.last_hidden);
    return fp;
  }

  ForwardPass forward(const Matrix& inputs, Index batch) const {
    Rng unused(0);
    return forward(inputs, batch, Mode::inference, unused);
  }

  BackwardResult backward(const ForwardPass& fp, const Matrix& d_output) const {
    if (fp.owner != this) throw ShapeError("LstmRegressor::backward: forward pass belongs to another model");
    if (d_output.rows() != 1 || d_output.cols() != fp.batch)
      throw ShapeError("LstmRegressor::backward: d_output " + shape_string(d_output) + " != 1x" +
                       std::to_string(fp.batch));
    BackwardResult r;
    r.gradients = zero_gradients();
    const std::size_t n = stack.tensor_count();
    Matrix d_last = dense_backward(head, fp.last_hidden, d_output, r.gradients[n], r.gradients[n + 1]);
    Matrix d_top = Matrix::Zero(stack.output_size(), lookback * fp.batch);
    d_top.rightCols(fp.batch) = d_last;
    r.d_inputs = stack.backward(fp.stack, std::move(d_top), std::span<Matrix>(r.gradients.data(), n));
    return r;
  }

  std::vector<Matrix*> parameters() {
    std::vector<Matrix*> out;
    stack.append_parameters(out);
    out.push_back(&head.weights);
    out.push_back(&head.bias);
    return out;
  }

  Gradients zero_gradients() const {
    Gradients g;
    stack.append_zero_gradients(g);
    g.push_back(Matrix::Zero(head.weights.rows(), head.weights.cols()));
    g.push_back(Matrix::Zero(head.bias.rows(), head.bias.cols()));
    return g;
  }

  // targets is (1 x B).
  LossAndGradients loss_and_gradients(const Matrix& inputs, const Matrix& targets, Index batch, Rng& rng) const {
    auto fp = forward(inputs, batch, Mode::training, rng);
    LossAndGradients out;
    out.loss = mse_loss(fp.output, targets);
    out.gradients = backward(fp, mse_gradient(fp.output, targets)).gradients;
    return out;
  }

  // Inference over many windows (samples x lookback), returned per sample.
  Vector predict(const Matrix& windows, Index chunk = 256) const {
    if (windows.cols() != lookback)
      throw ShapeError("LstmRegressor::predict: windows have " + std::to_string(windows.cols()) +
                       " columns, lookback is " + std::to_string(lookback));
    Vector out(windows.rows());
    std::vector<Index> idx;
    for (Index start = 0; start < windows.rows(); start += chunk) {
      const Index b = std::min(chunk, windows.rows() - start);
      idx.resize(static_cast<std::size_t>(b));
      for (Index k = 0; k < b; ++k) idx[static_cast<std::size_t>(k)] = start + k;
      out.segment(start, b) = forward(gather_sequence(windows, idx), b).output.row(0).transpose();
    }
    return out;
  }

  bool finite() const { return stack.finite() && head.finite(); }
};

struct AutoencoderConfig {
  std::vector<Index> encoder_sizes{32, 16};
  std::vector<Index> decoder_sizes{16, 32};
  double dropout = 0.2;
};

// Sequence autoencoder: the encoder's final hidden state is the latent code,
// repeated at every step as decoder input; a dense head maps each decoder
// step back to one value. Trained with MAE.
class LstmAutoencoder {
 public:
  LstmStack encoder;
  LstmStack decoder;
  DenseParams head;
  Index lookback = 0;

  static LstmAutoencoder init(Index lookback, const AutoencoderConfig& cfg, Rng& rng) {
    if (lookback <= 0) throw ShapeError("LstmAutoencoder: lookback must be positive");
    LstmAutoencoder m;
    m.lookback = lookback;
    m.encoder = LstmStack::init(1, cfg.encoder_sizes, DropoutSpec(cfg.dropout), rng);
    m.decoder = LstmStack::init(m.encoder.output_size(), cfg.decoder_sizes, DropoutSpec(cfg.dropout), rng);
    m.head = DenseParams::init(m.decoder.output_size(), 1, rng);
    return m;
  }

  Index latent_size() const { return encoder.output_size(); }

  struct ForwardPass {
    const LstmAutoencoder* owner = nullptr;
    Index batch = 0;
    StackCache encoder;
    StackCache decoder;
    Matrix output;  // 1 x T*B reconstruction
  };

  struct BackwardResult {
    Gradients gradients;
    Matrix d_inputs;
  };

  ForwardPass forward(const Matrix& inputs, Index batch, Mode mode, Rng& rng) const {
    if (inputs.rows() != 1 || batch <= 0 || inputs.cols() != lookback * batch)
      throw ShapeError("LstmAutoencoder::forward: expected 1x" + std::to_string(lookback * batch) + ", got " +
                       shape_string(inputs));
    ForwardPass fp;
    fp.owner = this;
    fp.batch = batch;
    encoder.forward(inputs, batch, mode, rng, fp.encoder);
    Matrix repeated = fp.encoder.output.rightCols(batch).replicate(1, lookback);
    decoder.forward(repeated, batch, mode, rng, fp.decoder);
    fp.output = dense_forward(head, fp.decoder.output);
    return fp;
  }

  ForwardPass forward(const Matrix& inputs, Index batch) const {
    Rng unused(0);
    return forward(inputs, batch, Mode::inference, unused);
  }

  BackwardResult backward(const ForwardPass& fp, const Matrix& d_output) const {
    if (fp.owner != this) throw ShapeError("LstmAutoencoder::backward: forward pass belongs to another model");
    if (d_output.rows() != 1 || d_output.cols() != lookback * fp.batch)
      throw ShapeError("LstmAutoencoder::backward: d_output " + shape_string(d_output) + " != 1x" +
                       std::to_string(lookback * fp.batch));
    BackwardResult r;
    r.gradients = zero_gradients();
    const std::size_t ne = encoder.tensor_count();
    const std::size_t nd = decoder.tensor_count();
    Matrix d_dec = dense_backward(head, fp.decoder.output, d_output, r.gradients[ne + nd], r.gradients[ne + nd + 1]);
    Matrix d_repeated = decoder.backward(fp.decoder, std::move(d_dec), std::span<Matrix>(r.gradients.data() + ne, nd));
    Matrix d_enc = Matrix::Zero(latent_size(), lookback * fp.batch);
    auto d_latent = d_enc.rightCols(fp.batch);
    for (Index t = 0; t < lookback; ++t) d_latent += d_repeated.middleCols(t * fp.batch, fp.batch);
    r.d_inputs = encoder.backward(fp.encoder, std::move(d_enc), std::span<Matrix>(r.gradients.data(), ne));
    return r;
  }

  std::vector<Matrix*> parameters() {
    std::vector<Matrix*> out;
    encoder.append_parameters(out);
    decoder.append_parameters(out);
    out.push_back(&head.weights);
    out.push_back(&head.bias);
    return out;
  }

  Gradients zero_gradients() const {
    Gradients g;
    encoder.append_zero_gradients(g);
    decoder.append_zero_gradients(g);
    g.push_back(Matrix::Zero(head.weights.rows(), head.weights.cols()));
    g.push_back(Matrix::Zero(head.bias.rows(), head.bias.cols()));
    return g;
  }

  // targets is (1 x T*B), normally equal to inputs.
  LossAndGradients loss_and_gradients(const Matrix& inputs, const Matrix& targets, Index batch, Rng& rng) const {
    auto fp = forward(inputs, batch, Mode::training, rng);
    LossAndGradients out;
    out.loss = mae_loss(fp.output, targets);
    out.gradients = backward(fp, mae_gradient(fp.output, targets)).gradients;
    return out;
  }

  // Reconstructions (samples x lookback) for windows (samples x lookback).
  Matrix reconstruct(const Matrix& windows, Index chunk = 256) const {
    if (windows.cols() != lookback)
      throw ShapeError("LstmAutoencoder::reconstruct: windows have " + std::to_string(windows.cols()) +
                       " columns, lookback is " + std::to_string(lookback));
    Matrix out(windows.rows(), lookback);
    std::vector<Index> idx;
    for (Index start = 0; start < windows.rows(); start += chunk) {
      const Index b = std::min(chunk, windows.rows() - start);
      idx.resize(static_cast<std::size_t>(b));
      for (Index k = 0; k < b; ++k) idx[static_cast<std::size_t>(k)] = start + k;
      out.middleRows(start, b) = scatter_sequence(forward(gather_sequence(windows, idx), b).output, b);
    }
    return out;
  }

  bool finite() const { return encoder.finite() && decoder.finite() && head.finite(); }
};

}  // namespace lstmbt::nn
