#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lstmbt/nn/tensor.hpp"

namespace lstmbt::nn {

class NonFiniteGradientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamState {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

// Bias-corrected Adam update. Moment buffers are created lazily on the first
// call with zero initial values.
inline void adam_step(AdamState& state, std::span<Matrix* const> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size())
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->rows() != grads[k].rows() || params[k]->cols() != grads[k].cols())
      throw ShapeError("adam_step: tensor " + std::to_string(k) + " is " + shape_string(*params[k]) +
                       " but gradient is " + shape_string(grads[k]));
    if (!grads[k].allFinite())
      throw NonFiniteGradientError("adam_step: non-finite gradient in tensor " + std::to_string(k));
  }
  if (state.first_moment.empty()) {
    for (auto* p : params) {
      state.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  } else if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                     " tensors, got " + std::to_string(params.size()));
  }

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    m = state.beta1 * m + (1.0 - state.beta1) * grads[k];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[k].cwiseProduct(grads[k]);
    params[k]->array() -=
        state.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  }
}

// Rescales gradients in place so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
inline double clip_global_norm(std::span<Matrix> grads, double max_norm) {
  double norm = std::sqrt(squared_norm(grads));
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& g : grads) g *= scale;
  }
  return norm;
}

}  // namespace lstmbt::nn
