#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "actree/nn/parameter_store.hpp"

namespace actree::nn {

double log_sum_exp(const Matrix& v);
double log_sigmoid(double x);

/// Handle to a value recorded on a Graph.
struct Var {
  static constexpr std::uint32_t kInvalid = 0xffffffffu;
  std::uint32_t index = kInvalid;
  bool valid() const noexcept { return index != kInvalid; }
};

/// Parameters of one gated recurrent cell, stacked gate-wise as
/// [reset; update; candidate].
struct GruVars {
  Var w_input;   // 3h x in
  Var w_hidden;  // 3h x h
  Var b_input;   // 3h
  Var b_hidden;  // 3h
};

/// Define-by-run reverse-mode tape. Every operation computes its value
/// eagerly; backward() walks the tape in reverse and accumulates parameter
/// gradients into a Gradients buffer. Parameter values are read by reference
/// from the store, which must not change while the graph is alive.
class Graph {
 public:
  explicit Graph(const ParameterStore& store);

  Var constant(Matrix value);
  Var scalar(double value);
  /// Memoised per parameter; frozen parameters behave as constants.
  Var param(ParamId id);
  /// Columns are rows `rows[j]` of the parameter (width x rows.size()).
  Var gather_rows(ParamId table, std::span<const int> rows);

  Var matmul(Var a, Var b);     // a b
  Var matmul_tn(Var a, Var b);  // aᵀ b
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double factor);
  Var add_column_bias(Var x, Var bias);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var vconcat(std::initializer_list<Var> parts);
  Var column(Var a, int j);
  Var row(Var a, int i);  // as a column vector
  Var dot(Var a, Var b);
  Var softmax(Var a);  // over a column vector
  Var sum(std::span<const Var> scalars);

  /// log σ(z) for a scalar z, computed stably.
  Var log_sigmoid(Var z);
  /// log softmax(logits)[target].
  Var log_softmax_at(Var logits, int target);
  /// −Σ_c q_c log softmax(logits)_c with q = (1−ε)·onehot(target) + ε/K.
  Var smoothed_nll(Var logits, int target, double smoothing);

  /// One cell step: h' = (1−z)⊙n + z⊙h.
  Var gru_cell(Var x, Var h, const GruVars& p);
  /// Runs a cell over the columns of `inputs` (in x T) from a zero state;
  /// returns all hidden states as columns (h x T), in input order.
  Var gru_sequence(Var inputs, const GruVars& p, bool reverse);

  const Matrix& value(Var v) const;
  double scalar_value(Var v) const { return value(v)(0, 0); }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and back-propagates. `loss` must be 1x1.
  void backward(Var loss, Gradients& grads);

 private:
  enum class Op : std::uint8_t {
    constant, param, gather_rows, matmul, matmul_tn, add, sub, mul, scale, add_column_bias, sigmoid, tanh,
    vconcat, column, row, dot, softmax, sum, log_sigmoid, log_softmax_at, smoothed_nll, gru_cell, gru_sequence
  };

  struct Node {
    Op op = Op::constant;
    std::vector<std::uint32_t> in;
    Matrix value;
    const Matrix* ref = nullptr;  // parameters are read in place
    Matrix aux;                   // op-specific cache for backward
    std::vector<int> ints;
    double real = 0.0;
    ParamId param = 0;
    bool needs_grad = false;
  };

  Var push(Node node);
  const Matrix& val(std::uint32_t i) const {
    const auto& n = nodes_[i];
    return n.ref ? *n.ref : n.value;
  }
  bool needs(std::uint32_t i) const { return nodes_[i].needs_grad; }
  /// Gradient sink for input node `i` with the value's shape.
  Matrix& grad_of(std::uint32_t i, std::vector<Matrix>& grads, std::vector<char>& have, Gradients& out);
  std::vector<std::uint32_t> inputs_of(std::initializer_list<Var> vars) const;

  const ParameterStore* store_;
  std::vector<Node> nodes_;
  std::vector<Var> param_vars_;
};

}  // namespace actree::nn
