#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "lstmbt/nn/adam.hpp"
#include "lstmbt/nn/layers.hpp"
#include "lstmbt/nn/lstm.hpp"
#include "lstmbt/nn/models.hpp"
#include "lstmbt/nn/train.hpp"
#include "oracles.hpp"

using namespace lstmbt::nn;

namespace {

Matrix random_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-scale, scale);
  return m;
}

void randomize(std::vector<Matrix*> params, Rng& rng, double scale) {
  for (auto* p : params) *p = random_matrix(p->rows(), p->cols(), rng, scale);
}

LstmRegressor small_regressor(std::uint64_t seed, double dropout = 0.0) {
  Rng rng(seed);
  RegressorConfig cfg{{4, 4}, dropout};
  auto m = LstmRegressor::init(5, cfg, rng);
  randomize(m.parameters(), rng, 0.8);
  return m;
}

Matrix sine_windows(Index samples, Index lookback, double period, Index offset = 0) {
  Matrix x(samples, lookback);
  for (Index i = 0; i < samples; ++i)
    for (Index j = 0; j < lookback; ++j)
      x(i, j) = 0.5 + 0.4 * std::sin(2.0 * M_PI * static_cast<double>(i + j + offset) / period);
  return x;
}

}  // namespace

TEST(LstmCell, ZeroParametersGiveZeroState) {
  auto p = LstmParams::zeros(3, 5);
  auto out = lstm_cell_forward(p, Vector::Ones(3), Vector::Zero(5), Vector::Zero(5));
  EXPECT_TRUE(out.h.isZero(0.0));
  EXPECT_TRUE(out.c.isZero(0.0));
  EXPECT_TRUE(out.cache.input_gate.isConstant(0.5));
  EXPECT_TRUE(out.cache.forget_gate.isConstant(0.5));
  EXPECT_TRUE(out.cache.output_gate.isConstant(0.5));
  EXPECT_TRUE(out.cache.candidate.isZero(0.0));
}

TEST(LstmCell, GateRangesOverRandomDraws) {
  Rng rng(7);
  for (int draw = 0; draw < 1000; ++draw) {
    LstmParams p{random_matrix(16, 3, rng, 3.0), random_matrix(16, 4, rng, 3.0), random_matrix(16, 1, rng, 3.0)};
    auto out = lstm_cell_forward(p, random_matrix(3, 1, rng, 2.0), random_matrix(4, 1, rng), random_matrix(4, 1, rng));
    const auto& k = out.cache;
    for (const Vector* gate : {&k.input_gate, &k.forget_gate, &k.output_gate}) {
      ASSERT_GT(gate->minCoeff(), 0.0);
      ASSERT_LT(gate->maxCoeff(), 1.0);
    }
    ASSERT_GT(k.candidate.minCoeff(), -1.0);
    ASSERT_LT(k.candidate.maxCoeff(), 1.0);
  }
}

TEST(LstmCell, HiddenWithZeroCellIsOutputTimesTanhOfInputTimesCandidate) {
  Rng rng(3);
  LstmParams p = LstmParams::init(2, 6, rng);
  auto out = lstm_cell_forward(p, random_matrix(2, 1, rng), random_matrix(6, 1, rng), Vector::Zero(6));
  const auto& k = out.cache;
  for (Index j = 0; j < 6; ++j)
    EXPECT_NEAR(out.h(j), k.output_gate(j) * std::tanh(k.input_gate(j) * k.candidate(j)), 1e-14);
}

TEST(LstmCell, RejectsDimensionMismatch) {
  auto p = LstmParams::zeros(3, 5);
  EXPECT_THROW(lstm_cell_forward(p, Vector::Ones(2), Vector::Zero(5), Vector::Zero(5)), ShapeError);
  EXPECT_THROW(lstm_cell_forward(p, Vector::Ones(3), Vector::Zero(4), Vector::Zero(5)), ShapeError);
}

TEST(LstmLayer, BatchedSequenceMatchesRepeatedCellSteps) {
  Rng rng(11);
  LstmParams p = LstmParams::init(2, 3, rng);
  const Index T = 4, B = 3;
  Matrix x = random_matrix(2, T * B, rng);
  LstmLayerCache cache;
  const Matrix& h = lstm_layer_forward(p, x, B, cache);
  for (Index b = 0; b < B; ++b) {
    Vector hs = Vector::Zero(3), cs = Vector::Zero(3);
    for (Index t = 0; t < T; ++t) {
      auto step = lstm_cell_forward(p, x.col(t * B + b), hs, cs);
      hs = step.h;
      cs = step.c;
      for (Index j = 0; j < 3; ++j) EXPECT_NEAR(h(j, t * B + b), hs(j), 1e-14);
    }
  }
}

TEST(Gradients, RegressorMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto model = small_regressor(seed);
    Rng rng(seed + 100);
    const Index B = 3;
    Matrix x = random_matrix(1, 5 * B, rng);
    Matrix y = random_matrix(1, B, rng);
    auto fp = model.forward(x, B);
    auto back = model.backward(fp, mse_gradient(fp.output, y));
    auto check = oracle::finite_difference_check(model.parameters(), back.gradients,
                                                 [&] { return mse_loss(model.forward(x, B).output, y); });
    EXPECT_TRUE(check.mismatches.empty()) << "seed " << seed << ": " << check.mismatches.size() << " of "
                                          << check.checked << " entries, worst " << check.worst_rel_error;
  }
}

TEST(Gradients, RegressorWithFixedDropoutMaskMatchesFiniteDifferences) {
  auto model = small_regressor(5, 0.3);
  Rng data(9);
  const Index B = 2;
  Matrix x = random_matrix(1, 5 * B, data);
  Matrix w = random_matrix(1, B, data);
  auto loss = [&] {
    Rng mask_rng(77);
    return (model.forward(x, B, Mode::training, mask_rng).output.cwiseProduct(w)).sum();
  };
  Rng mask_rng(77);
  auto fp = model.forward(x, B, Mode::training, mask_rng);
  ASSERT_FALSE(fp.stack.masks.empty());
  auto back = model.backward(fp, w);
  auto check = oracle::finite_difference_check(model.parameters(), back.gradients, loss);
  EXPECT_TRUE(check.mismatches.empty()) << "worst " << check.worst_rel_error;
}

TEST(Gradients, AutoencoderMatchesFiniteDifferences) {
  Rng rng(21);
  AutoencoderConfig cfg{{4, 3}, {3, 4}, 0.0};
  auto model = LstmAutoencoder::init(5, cfg, rng);
  randomize(model.parameters(), rng, 0.8);
  const Index B = 2;
  Matrix x = random_matrix(1, 5 * B, rng);
  Matrix w = random_matrix(1, 5 * B, rng);
  auto fp = model.forward(x, B);
  auto back = model.backward(fp, w);
  auto check = oracle::finite_difference_check(model.parameters(), back.gradients,
                                               [&] { return model.forward(x, B).output.cwiseProduct(w).sum(); },
                                               1e-4, 1e-4, oracle::Difference::richardson);
  EXPECT_TRUE(check.mismatches.empty()) << "worst " << check.worst_rel_error;
}

TEST(Gradients, InputGradientMatchesFiniteDifferences) {
  auto model = small_regressor(4);
  Rng rng(8);
  Matrix x = random_matrix(1, 5, rng);
  auto back = model.backward(model.forward(x, 1), Matrix::Ones(1, 1));
  for (Index t = 0; t < 5; ++t) {
    Matrix up = x, down = x;
    up(0, t) += 1e-5;
    down(0, t) -= 1e-5;
    const double fd = (model.forward(up, 1).output(0, 0) - model.forward(down, 1).output(0, 0)) / 2e-5;
    EXPECT_NEAR(back.d_inputs(0, t), fd, 1e-4 * (std::fabs(fd) + 1e-8));
  }
}

TEST(Gradients, ZeroUpstreamGivesZeroGradients) {
  auto model = small_regressor(6);
  Rng rng(1);
  Matrix x = random_matrix(1, 10, rng);
  auto back = model.backward(model.forward(x, 2), Matrix::Zero(1, 2));
  for (const auto& g : back.gradients) EXPECT_TRUE(g.isZero(0.0));
  EXPECT_TRUE(back.d_inputs.isZero(0.0));
}

TEST(Gradients, SeriesValuesOutsideTheWindowGetNoGradient) {
  auto model = small_regressor(12);
  Rng rng(2);
  Matrix series = random_matrix(1, 12, rng);
  const Index start = 4;
  Matrix window = series.middleCols(start, 5);
  auto back = model.backward(model.forward(window, 1), Matrix::Ones(1, 1));
  Matrix series_grad = Matrix::Zero(1, 12);
  series_grad.middleCols(start, 5) = back.d_inputs;
  for (Index k = 0; k < 12; ++k) {
    if (k < start || k >= start + 5) {
      EXPECT_EQ(series_grad(0, k), 0.0);
    }
  }
  EXPECT_GT(back.d_inputs.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradients, StaleCacheRejected) {
  auto a = small_regressor(1);
  auto b = small_regressor(2);
  Rng rng(0);
  Matrix x = random_matrix(1, 5, rng);
  auto fp = a.forward(x, 1);
  EXPECT_THROW(b.backward(fp, Matrix::Ones(1, 1)), ShapeError);
  EXPECT_THROW(a.backward(fp, Matrix::Ones(1, 2)), ShapeError);
}

TEST(SequenceForward, InferenceIgnoresRngSeed) {
  auto model = small_regressor(3, 0.2);
  Rng data(5);
  Matrix x = random_matrix(1, 5 * 4, data);
  Rng r1(1), r2(999);
  auto a = model.forward(x, 4, Mode::inference, r1).output;
  auto b = model.forward(x, 4, Mode::inference, r2).output;
  EXPECT_EQ(a, b);
}

TEST(SequenceForward, ZeroDropoutTrainingEqualsInference) {
  auto model = small_regressor(3, 0.0);
  Rng data(5);
  Matrix x = random_matrix(1, 5 * 4, data);
  Rng r(1);
  EXPECT_EQ(model.forward(x, 4, Mode::training, r).output, model.forward(x, 4).output);
}

TEST(SequenceForward, WrongWindowLengthRejected) {
  auto model = small_regressor(3);
  EXPECT_THROW(model.forward(Matrix::Zero(1, 6), 1), ShapeError);
}

TEST(Dropout, KeptFractionNearOneMinusRate) {
  Rng rng(2024);
  DropoutSpec spec(0.2);
  Matrix mask = dropout_mask(100, 100, spec, rng);  // 10^4 draws
  const double kept = static_cast<double>((mask.array() > 0.0).count()) / 1e4;
  EXPECT_NEAR(kept, 0.80, 0.01);
  EXPECT_TRUE(((mask.array() == 0.0) || (mask.array() == 1.25)).all());
}

TEST(Dropout, InvertedScalingPreservesExpectation) {
  Rng rng(99);
  DropoutSpec spec(0.2);
  Matrix mask = dropout_mask(1, 100000, spec, rng);
  EXPECT_NEAR(mask.mean(), 1.0, 0.01);
}

TEST(Dropout, RateOutOfRangeRejected) {
  EXPECT_THROW(DropoutSpec(1.0), std::invalid_argument);
  EXPECT_THROW(DropoutSpec(-0.1), std::invalid_argument);
}

TEST(Loss, IdenticalVectorsGiveZero) {
  Matrix a(1, 3);
  a << 0.1, 0.2, 0.3;
  EXPECT_EQ(mse_loss(a, a), 0.0);
  EXPECT_EQ(mae_loss(a, a), 0.0);
}

TEST(Loss, HandArithmetic) {
  Matrix p(1, 2), t(1, 2);
  p << 0, 1;
  t << 1, 1;
  EXPECT_DOUBLE_EQ(mse_loss(p, t), 0.5);
  EXPECT_DOUBLE_EQ(mae_loss(p, t), 0.5);
}

TEST(Loss, MaeBoundedBySqrtMse) {
  Rng rng(31);
  for (int k = 0; k < 1000; ++k) {
    const auto n = static_cast<Index>(1 + rng.below(20));
    Matrix p = random_matrix(1, n, rng, 5.0), t = random_matrix(1, n, rng, 5.0);
    ASSERT_LE(mae_loss(p, t), std::sqrt(mse_loss(p, t)) + 1e-12);
  }
}

TEST(Loss, MismatchAndEmptyRejected) {
  EXPECT_THROW(mse_loss(Matrix::Zero(1, 2), Matrix::Zero(1, 3)), ShapeError);
  EXPECT_THROW(mae_loss(Matrix::Zero(1, 0), Matrix::Zero(1, 0)), ShapeError);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Matrix p = Matrix::Constant(2, 2, 0.7);
  AdamState s;
  std::vector<Matrix*> params{&p};
  std::vector<Matrix> grads{Matrix::Zero(2, 2)};
  for (int k = 0; k < 5; ++k) adam_step(s, params, grads);
  EXPECT_TRUE(p.isConstant(0.7, 0.0));
  EXPECT_EQ(s.step, 5);
}

TEST(Adam, FirstStepClosedForm) {
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  Matrix p = Matrix::Constant(1, 1, 1.0);
  AdamState s;
  std::vector<Matrix*> params{&p};
  std::vector<Matrix> grads{Matrix::Constant(1, 1, 1.0)};
  adam_step(s, params, grads);
  EXPECT_NEAR(p(0, 0), 1.0 - 0.001 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, DeterministicAcrossRuns) {
  auto run = [] {
    Matrix p = Matrix::Constant(3, 1, 0.2);
    AdamState s;
    Rng rng(5);
    std::vector<Matrix*> params{&p};
    for (int k = 0; k < 10; ++k) {
      std::vector<Matrix> g{random_matrix(3, 1, rng)};
      adam_step(s, params, g);
    }
    return p;
  };
  Matrix a = run(), b = run();
  EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * 3), 0);
}

TEST(Adam, RejectsShapeMismatchAndNonFinite) {
  Matrix p = Matrix::Zero(2, 1);
  AdamState s;
  std::vector<Matrix*> params{&p};
  std::vector<Matrix> wrong{Matrix::Zero(3, 1)};
  EXPECT_THROW(adam_step(s, params, wrong), ShapeError);
  std::vector<Matrix> nan{Matrix::Constant(2, 1, std::nan(""))};
  EXPECT_THROW(adam_step(s, params, nan), NonFiniteGradientError);
}

TEST(Adam, GlobalNormClipping) {
  std::vector<Matrix> g{Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, 4.0)};
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 5.0);
  EXPECT_NEAR(g[0](0, 0), 0.6, 1e-15);
  EXPECT_NEAR(g[1](0, 0), 0.8, 1e-15);
}

TEST(Train, HistoryHasOneEntryPerEpoch) {
  Rng rng(1);
  auto model = LstmRegressor::init(5, {{4}, 0.2}, rng);
  Matrix x = sine_windows(40, 5, 20.0);
  Matrix y = sine_windows(40, 1, 20.0, 5);
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.batch_size = 32;
  cfg.lookback = 5;
  auto result = train(model, x, y, cfg);
  EXPECT_EQ(result.loss_history.size(), 100u);
  EXPECT_EQ(result.optimizer_steps, 200);  // 40 samples: batches of 32 and 8
  EXPECT_TRUE(model.finite());
}

TEST(Train, SineLossDecreases) {
  Rng rng(derive_seed(42, kInitStream));
  auto model = LstmRegressor::init(60, {}, rng);
  Matrix x = sine_windows(440, 60, 50.0);
  Matrix y = sine_windows(440, 1, 50.0, 60);
  TrainConfig cfg;
  cfg.epochs = 5;
  auto result = train(model, x, y, cfg);
  EXPECT_LT(result.loss_history.back(), result.loss_history.front());
}

TEST(Train, SameSeedSameHistoryAndParameters) {
  auto run = [] {
    Rng rng(3);
    auto model = LstmRegressor::init(6, {{5, 5}, 0.2}, rng);
    Matrix x = sine_windows(50, 6, 17.0);
    Matrix y = sine_windows(50, 1, 17.0, 6);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 8;
    cfg.lookback = 6;
    auto r = train(model, x, y, cfg);
    return std::make_pair(r.loss_history, model.head.weights);
  };
  auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Train, NonFiniteLossAbortsWithLocation) {
  Rng rng(1);
  auto model = LstmRegressor::init(3, {{2}, 0.0}, rng);
  Matrix x = Matrix::Constant(10, 3, 0.5);
  Matrix y = Matrix::Constant(10, 1, 0.5);
  y(4, 0) = std::numeric_limits<double>::infinity();
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.lookback = 3;
  try {
    train(model, x, y, cfg);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.epoch(), 1);
    EXPECT_GE(e.batch(), 0);
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
  }
}

TEST(Train, RejectsEmptyDatasetAndBadConfig) {
  Rng rng(1);
  auto model = LstmRegressor::init(3, {{2}, 0.0}, rng);
  TrainConfig cfg;
  cfg.lookback = 3;
  EXPECT_THROW(train(model, Matrix(0, 3), Matrix(0, 1), cfg), std::invalid_argument);
  cfg.epochs = 0;
  EXPECT_THROW(train(model, Matrix::Zero(2, 3), Matrix::Zero(2, 1), cfg), std::invalid_argument);
}
