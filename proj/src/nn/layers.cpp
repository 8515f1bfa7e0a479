#include "actree/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace actree::nn {

Matrix glorot(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  return m;
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

GruParams GruParams::create(ParameterStore& store, const std::string& prefix, int input_dim, int hidden_dim,
                            std::mt19937_64& rng) {
  GruParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.w_input = store.add(prefix + "/w_input", glorot(3 * hidden_dim, input_dim, rng));
  p.w_hidden = store.add(prefix + "/w_hidden", glorot(3 * hidden_dim, hidden_dim, rng));
  p.b_input = store.add(prefix + "/b_input", Matrix::Zero(3 * hidden_dim, 1));
  p.b_hidden = store.add(prefix + "/b_hidden", Matrix::Zero(3 * hidden_dim, 1));
  return p;
}

GruParams GruParams::find(const ParameterStore& store, const std::string& prefix) {
  GruParams p;
  p.w_input = store.id(prefix + "/w_input");
  p.w_hidden = store.id(prefix + "/w_hidden");
  p.b_input = store.id(prefix + "/b_input");
  p.b_hidden = store.id(prefix + "/b_hidden");
  p.input_dim = static_cast<int>(store.value(p.w_input).cols());
  p.hidden_dim = static_cast<int>(store.value(p.w_hidden).cols());
  return p;
}

GruVars GruParams::bind(Graph& g) const {
  return GruVars{g.param(w_input), g.param(w_hidden), g.param(b_input), g.param(b_hidden)};
}

EncoderParams EncoderParams::create(ParameterStore& store, int input_dim, int d, int layers, std::mt19937_64& rng) {
  if (layers < 1) throw std::invalid_argument("encoder needs at least one layer");
  EncoderParams e;
  e.d = d;
  int in = input_dim;
  for (int l = 0; l < layers; ++l) {
    const auto prefix = "encoder/layer" + std::to_string(l);
    e.layers.push_back({GruParams::create(store, prefix + "/forward", in, d, rng),
                        GruParams::create(store, prefix + "/backward", in, d, rng)});
    in = 2 * d;
  }
  e.proj_w = store.add("encoder/proj_w", glorot(d, 2 * d, rng));
  e.proj_b = store.add("encoder/proj_b", Matrix::Zero(d, 1));
  return e;
}

EncoderParams EncoderParams::find(const ParameterStore& store, int layers) {
  EncoderParams e;
  for (int l = 0; l < layers; ++l) {
    const auto prefix = "encoder/layer" + std::to_string(l);
    e.layers.push_back({GruParams::find(store, prefix + "/forward"), GruParams::find(store, prefix + "/backward")});
  }
  e.proj_w = store.id("encoder/proj_w");
  e.proj_b = store.id("encoder/proj_b");
  e.d = static_cast<int>(store.value(e.proj_w).rows());
  return e;
}

Var dropout(Graph& g, Var x, double rate, std::mt19937_64* rng) {
  if (rate <= 0.0 || rng == nullptr) return x;
  const auto& v = g.value(x);
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(v.rows(), v.cols());
  const double kept = 1.0 / (1.0 - rate);
  for (Eigen::Index j = 0; j < v.cols(); ++j)
    for (Eigen::Index i = 0; i < v.rows(); ++i) mask(i, j) = keep(*rng) ? kept : 0.0;
  return g.mul(x, g.constant(std::move(mask)));
}

Var encode_sentence(Graph& g, Var embedded, const EncoderParams& enc, double dropout_rate, std::mt19937_64* rng) {
  if (g.value(embedded).cols() == 0) throw std::invalid_argument("cannot encode an empty sentence");
  Var x = embedded;
  for (std::size_t l = 0; l < enc.layers.size(); ++l) {
    if (l > 0) x = dropout(g, x, dropout_rate, rng);
    const auto& layer = enc.layers[l];
    Var fwd = g.gru_sequence(x, layer.forward.bind(g), false);
    Var bwd = g.gru_sequence(x, layer.backward.bind(g), true);
    x = g.vconcat({fwd, bwd});
  }
  Var h = g.add_column_bias(g.matmul(g.param(enc.proj_w), x), g.param(enc.proj_b));
  return dropout(g, h, dropout_rate, rng);
}

AttentionParams AttentionParams::create(ParameterStore& store, const std::string& prefix, int d, int num_heads,
                                        std::mt19937_64& rng) {
  if (num_heads < 1) throw std::invalid_argument("attention needs at least one head");
  AttentionParams a;
  a.d = d;
  for (int k = 0; k < num_heads; ++k)
    a.heads.push_back(store.add(prefix + "/head" + std::to_string(k), glorot(d, d, rng)));
  return a;
}

AttentionParams AttentionParams::find(const ParameterStore& store, const std::string& prefix, int num_heads) {
  AttentionParams a;
  for (int k = 0; k < num_heads; ++k) a.heads.push_back(store.id(prefix + "/head" + std::to_string(k)));
  a.d = static_cast<int>(store.value(a.heads.front()).rows());
  return a;
}

AttentionKeys prepare_attention(Graph& g, Var memory, const AttentionParams& params) {
  AttentionKeys k;
  k.memory = memory;
  k.inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.d));
  for (auto head : params.heads) k.keys.push_back(g.matmul(g.param(head), memory));
  return k;
}

Var attend(Graph& g, Var query, const AttentionKeys& keys, AttentionTrace* trace) {
  if (trace) trace->weights.clear();
  Var pooled;
  for (auto key : keys.keys) {
    Var alpha = g.softmax(g.scale(g.matmul_tn(key, query), keys.inv_sqrt_d));
    Var head = g.matmul(keys.memory, alpha);
    pooled = pooled.valid() ? g.add(pooled, head) : head;
    if (trace) trace->weights.push_back(g.value(alpha).col(0));
  }
  if (trace) trace->pooled = g.value(pooled).col(0);
  return g.add(query, pooled);
}

}  // namespace actree::nn
