#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tricycle/tensor.hpp"

namespace tricycle {

/// Central-difference estimate of d f / d x, perturbing x in place one
/// coordinate at a time. x is restored before returning.
inline ArrayX<double> finite_diff_grad(const std::function<double()>& f, const Tensor<double>& x,
                                       double step = 1e-6) {
  ArrayX<double>& values = x.mutable_value();
  ArrayX<double> grad(values.size());
  for (Index i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + step;
    const double plus = f();
    values[i] = saved - step;
    const double minus = f();
    values[i] = saved;
    grad[i] = (plus - minus) / (2.0 * step);
  }
  return grad;
}

/// max |a - b| / max(max|a|, max|b|); 0 when both are zero.
inline double relative_error(const ArrayX<double>& a, const ArrayX<double>& b) {
  if (a.size() != b.size()) throw ShapeError("relative_error: size mismatch");
  if (a.size() == 0) return 0.0;
  const double scale = std::max(a.abs().maxCoeff(), b.abs().maxCoeff());
  if (scale == 0.0) return 0.0;
  return (a - b).abs().maxCoeff() / scale;
}

/// One entry of the gradient-check suite.
struct GradCheckCase {
  std::string name;
  /// Inputs whose gradients are checked. They must require grad.
  std::vector<Tensor<double>> inputs;
  /// Builds the scalar objective in the given graph.
  std::function<Tensor<double>(Graph<double>&)> objective;
};

struct GradCheckResult {
  std::string name;
  double worst_relative_error = 0.0;
  bool passed = false;
};

/// Compares backward() against central differences for every input of `c`.
inline GradCheckResult run_gradcheck(const GradCheckCase& c, double tolerance = 1e-4, double step = 1e-6) {
  for (const auto& in : c.inputs) in.zero_grad();
  Graph<double> graph;
  const Tensor<double> loss = c.objective(graph);
  graph.backward(loss);

  GradCheckResult result{c.name, 0.0, true};
  for (const auto& in : c.inputs) {
    const ArrayX<double> analytic = in.has_grad() ? in.grad() : ArrayX<double>::Zero(in.numel());
    const ArrayX<double> numeric = finite_diff_grad(
        [&] {
          Graph<double> probe(false);
          return c.objective(probe).item();
        },
        in, step);
    result.worst_relative_error = std::max(result.worst_relative_error, relative_error(analytic, numeric));
  }
  result.passed = result.worst_relative_error <= tolerance;
  return result;
}

/// The built-in suite: every differentiable op plus every loss term on a
/// tiny generator pair, all at 64-bit.
std::vector<GradCheckCase> builtin_gradcheck_cases(std::uint64_t seed = 7);

}  // namespace tricycle
