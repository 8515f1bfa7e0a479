#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "actree/nn/graph.hpp"
#include "actree/nn/parameter_store.hpp"

namespace actree::nn {

struct NonFiniteGradient : std::runtime_error {
  explicit NonFiniteGradient(const std::string& param)
      : std::runtime_error("non-finite gradient for parameter '" + param + "'"), name(param) {}
  std::string name;
};

/// acc += g², p −= lr·g/(√acc + ε) for every trainable parameter touched in
/// `grads`, then clears `grads`. Checks every gradient before touching any
/// parameter.
void adagrad_step(ParameterStore& store, Gradients& grads, double learning_rate, double epsilon = 1e-10);
inline void adagrad_step(ParameterStore& store, double learning_rate, double epsilon = 1e-10) {
  adagrad_step(store, store.gradients(), learning_rate, epsilon);
}

/// Builds the scalar loss on a fresh graph over the store.
using LossFn = std::function<Var(Graph&)>;

struct GradCheckEntry {
  std::string name;
  double relative_error = 0.0;  // ‖a − n‖∞ / max(‖a‖∞, ‖n‖∞, floor)
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_error() const;
  /// Parameters whose error reaches `tolerance`.
  std::vector<std::string> failures(double tolerance) const;
};

Gradients analytic_gradients(const LossFn& loss, const ParameterStore& store);
/// Central differences over every trainable entry.
Gradients numeric_gradients(const LossFn& loss, ParameterStore& store, double epsilon);
GradCheckReport compare_gradients(const ParameterStore& store, const Gradients& analytic,
                                  const Gradients& numeric, double floor = 1e-6);
GradCheckReport grad_check(const LossFn& loss, ParameterStore& store, double epsilon = 1e-6);

}  // namespace actree::nn
