#include "actree/nn/optim.hpp"

#include <algorithm>
#include <cmath>

namespace actree::nn {

void adagrad_step(ParameterStore& store, Gradients& grads, double learning_rate, double epsilon) {
  for (ParamId id = 0; id < store.size(); ++id)
    if (store.trainable(id) && grads.touched(id) && !grads.get(id).allFinite())
      throw NonFiniteGradient(store.name(id));
  for (ParamId id = 0; id < store.size(); ++id) {
    if (!store.trainable(id) || !grads.touched(id)) continue;
    const auto& g = grads.get(id);
    auto& acc = store.accumulator(id);
    acc.array() += g.array().square();
    store.value(id).array() -= learning_rate * g.array() / (acc.array().sqrt() + epsilon);
  }
  grads.clear();
}

double GradCheckReport::max_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.relative_error);
  return m;
}

std::vector<std::string> GradCheckReport::failures(double tolerance) const {
  std::vector<std::string> out;
  for (const auto& e : entries)
    if (!(e.relative_error < tolerance)) out.push_back(e.name);
  return out;
}

Gradients analytic_gradients(const LossFn& loss, const ParameterStore& store) {
  Graph g(store);
  Var l = loss(g);
  auto grads = store.make_gradients();
  g.backward(l, grads);
  return grads;
}

Gradients numeric_gradients(const LossFn& loss, ParameterStore& store, double epsilon) {
  auto grads = store.make_gradients();
  auto eval = [&] {
    Graph g(store);
    return g.scalar_value(loss(g));
  };
  for (ParamId id = 0; id < store.size(); ++id) {
    if (!store.trainable(id)) continue;
    auto& value = store.value(id);
    auto& out = grads.at(id, value.rows(), value.cols());
    for (Eigen::Index k = 0; k < value.size(); ++k) {
      const double saved = value.data()[k];
      value.data()[k] = saved + epsilon;
      const double up = eval();
      value.data()[k] = saved - epsilon;
      const double down = eval();
      value.data()[k] = saved;
      out.data()[k] = (up - down) / (2.0 * epsilon);
    }
  }
  return grads;
}

GradCheckReport compare_gradients(const ParameterStore& store, const Gradients& analytic, const Gradients& numeric,
                                  double floor) {
  GradCheckReport report;
  for (ParamId id = 0; id < store.size(); ++id) {
    if (!store.trainable(id)) continue;
    const auto& v = store.value(id);
    Matrix a = analytic.touched(id) ? analytic.get(id) : Matrix::Zero(v.rows(), v.cols());
    Matrix n = numeric.touched(id) ? numeric.get(id) : Matrix::Zero(v.rows(), v.cols());
    GradCheckEntry e;
    e.name = store.name(id);
    e.analytic_norm = a.size() ? a.cwiseAbs().maxCoeff() : 0.0;
    e.numeric_norm = n.size() ? n.cwiseAbs().maxCoeff() : 0.0;
    const double diff = a.size() ? (a - n).cwiseAbs().maxCoeff() : 0.0;
    e.relative_error = diff / std::max({e.analytic_norm, e.numeric_norm, floor});
    report.entries.push_back(std::move(e));
  }
  return report;
}

GradCheckReport grad_check(const LossFn& loss, ParameterStore& store, double epsilon) {
  auto analytic = analytic_gradients(loss, store);
  auto numeric = numeric_gradients(loss, store, epsilon);
  return compare_gradients(store, analytic, numeric);
}

}  // namespace actree::nn
