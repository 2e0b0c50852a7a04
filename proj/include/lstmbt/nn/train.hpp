#pragma once

#include <concepts>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "lstmbt/nn/adam.hpp"
#include "lstmbt/nn/models.hpp"

namespace lstmbt::nn {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  Index lookback = 60;
  double dropout = 0.2;
  double learning_rate = 0.001;
  std::uint64_t seed = 42;
  double clip_norm = 5.0;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1, got " + std::to_string(epochs));
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1, got " + std::to_string(batch_size));
    if (lookback < 1) throw std::invalid_argument("lookback must be >= 1, got " + std::to_string(lookback));
    if (!(dropout >= 0.0 && dropout < 1.0))
      throw std::invalid_argument("dropout must be in [0, 1), got " + std::to_string(dropout));
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  }
};

// Seed streams derived from TrainConfig::seed.
enum SeedStream : std::uint64_t { kInitStream = 0, kTrainStream = 1 };

class TrainingError : public std::runtime_error {
 public:
  TrainingError(int epoch, long batch, const std::string& what)
      : std::runtime_error("training failed at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                           ": " + what),
        epoch_(epoch),
        batch_(batch) {}

  int epoch() const { return epoch_; }
  long batch() const { return batch_; }

 private:
  int epoch_;
  long batch_;
};

template <typename Model>
concept TrainableModel = requires(Model& m, const Model& cm, const Matrix& x, Index b, Rng& rng) {
  { m.parameters() } -> std::same_as<std::vector<Matrix*>>;
  { cm.loss_and_gradients(x, x, b, rng) } -> std::same_as<LossAndGradients>;
  { cm.finite() } -> std::same_as<bool>;
};

struct TrainResult {
  std::vector<double> loss_history;  // sample-weighted mean training loss per epoch
  long optimizer_steps = 0;
};

// Mini-batch training. inputs is (samples x steps); targets is
// (samples x outputs). Each epoch visits a seeded permutation of the samples,
// including the final partial batch.
template <TrainableModel Model>
TrainResult train(Model& model, const Matrix& inputs, const Matrix& targets, const TrainConfig& cfg) {
  cfg.validate();
  if (inputs.rows() == 0) throw std::invalid_argument("train: empty dataset");
  if (targets.rows() != inputs.rows())
    throw ShapeError("train: " + std::to_string(inputs.rows()) + " input rows but " +
                     std::to_string(targets.rows()) + " target rows");

  Rng rng(derive_seed(cfg.seed, kTrainStream));
  AdamState adam;
  adam.learning_rate = cfg.learning_rate;
  auto params = model.parameters();

  std::vector<Index> order(static_cast<std::size_t>(inputs.rows()));
  std::iota(order.begin(), order.end(), Index{0});

  TrainResult result;
  result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
  const auto n = order.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double weighted = 0.0;
    long batch_index = 0;
    for (std::size_t start = 0; start < n; start += bs, ++batch_index) {
      const std::size_t count = std::min(bs, n - start);
      std::span<const Index> idx(order.data() + start, count);
      const auto b = static_cast<Index>(count);
      auto lg = model.loss_and_gradients(gather_sequence(inputs, idx), gather_sequence(targets, idx), b, rng);
      if (!std::isfinite(lg.loss)) throw TrainingError(epoch, batch_index, "non-finite loss");
      clip_global_norm(lg.gradients, cfg.clip_norm);
      try {
        adam_step(adam, params, lg.gradients);
      } catch (const NonFiniteGradientError& e) {
        throw TrainingError(epoch, batch_index, e.what());
      }
      ++result.optimizer_steps;
      weighted += lg.loss * static_cast<double>(count);
    }
    if (!model.finite()) throw TrainingError(epoch, batch_index, "non-finite parameters");
    result.loss_history.push_back(weighted / static_cast<double>(n));
  }
  return result;
}

}  // namespace lstmbt::nn
