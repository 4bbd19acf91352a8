#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tricycle/tensor.hpp"

namespace tricycle {

/// First/second moment estimates for one parameter group.
template <typename Scalar>
struct AdamState {
  std::vector<ArrayX<Scalar>> first_moment;
  std::vector<ArrayX<Scalar>> second_moment;
  std::uint64_t step = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);

  static AdamState for_parameters(std::span<const Tensor<Scalar>> params) {
    AdamState state;
    for (const auto& p : params) {
      state.first_moment.push_back(ArrayX<Scalar>::Zero(p.numel()));
      state.second_moment.push_back(ArrayX<Scalar>::Zero(p.numel()));
    }
    return state;
  }
};

/// One bias-corrected ADAM update using the gradients stored on `params`.
/// A parameter without a gradient is treated as having a zero gradient.
template <typename Scalar>
void adam_step(std::span<const Tensor<Scalar>> params, AdamState<Scalar>& state, Scalar lr) {
  if (!(lr >= Scalar(0))) throw std::invalid_argument("adam_step: learning rate must be non-negative");
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
    throw ShapeError("adam_step: optimizer state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].size() != params[i].numel() || state.second_moment[i].size() != params[i].numel())
      throw ShapeError("adam_step: moment shape mismatch for parameter " + std::to_string(i));
  }

  state.step += 1;
  const Scalar t = static_cast<Scalar>(state.step);
  const Scalar correction1 = Scalar(1) - std::pow(state.beta1, t);
  const Scalar correction2 = Scalar(1) - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    ArrayX<Scalar>& m = state.first_moment[i];
    ArrayX<Scalar>& v = state.second_moment[i];
    if (params[i].has_grad()) {
      const ArrayX<Scalar>& grad = params[i].grad();
      m = state.beta1 * m + (Scalar(1) - state.beta1) * grad;
      v = state.beta2 * v + (Scalar(1) - state.beta2) * grad.square();
    } else {
      m *= state.beta1;
      v *= state.beta2;
    }
    params[i].mutable_value() -= lr * (m / correction1) / ((v / correction2).sqrt() + state.epsilon);
  }
}

}  // namespace tricycle
