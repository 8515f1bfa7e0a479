#pragma once

#include <random>
#include <string>
#include <vector>

#include "actree/nn/graph.hpp"
#include "actree/nn/parameter_store.hpp"

namespace actree::nn {

/// Glorot-uniform matrix.
Matrix glorot(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);
/// Entries drawn from N(0, stddev²).
Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng);

struct GruParams {
  ParamId w_input = 0, w_hidden = 0, b_input = 0, b_hidden = 0;
  int input_dim = 0;
  int hidden_dim = 0;

  static GruParams create(ParameterStore& store, const std::string& prefix, int input_dim, int hidden_dim,
                          std::mt19937_64& rng);
  static GruParams find(const ParameterStore& store, const std::string& prefix);
  GruVars bind(Graph& g) const;
};

/// Stacked bidirectional GRU; the last layer's forward and backward states
/// are concatenated and projected to width d.
struct EncoderParams {
  struct Layer {
    GruParams forward;
    GruParams backward;
  };
  std::vector<Layer> layers;
  ParamId proj_w = 0;  // d x 2d
  ParamId proj_b = 0;  // d
  int d = 0;

  static EncoderParams create(ParameterStore& store, int input_dim, int d, int layers, std::mt19937_64& rng);
  static EncoderParams find(const ParameterStore& store, int layers);
};

/// Inverted-dropout mask application. Identity when rate is 0 or rng is null.
Var dropout(Graph& g, Var x, double rate, std::mt19937_64* rng);

/// (h_1..h_T) as the columns of a d x T matrix. Throws on T = 0.
Var encode_sentence(Graph& g, Var embedded, const EncoderParams& enc, double dropout_rate,
                    std::mt19937_64* rng);

/// K square head matrices of side d.
struct AttentionParams {
  std::vector<ParamId> heads;
  int d = 0;

  static AttentionParams create(ParameterStore& store, const std::string& prefix, int d, int num_heads,
                                std::mt19937_64& rng);
  static AttentionParams find(const ParameterStore& store, const std::string& prefix, int num_heads);
};

/// Per-sentence attention keys M_k H, shared by every query over the sentence.
struct AttentionKeys {
  Var memory;             // H, d x T
  std::vector<Var> keys;  // M_k H, d x T
  double inv_sqrt_d = 1.0;
};

AttentionKeys prepare_attention(Graph& g, Var memory, const AttentionParams& params);

struct AttentionTrace {
  std::vector<Vector> weights;  // α^k, one simplex vector of length T per head
  Vector pooled;                // Σ_k Hα^k
};

/// x + Σ_k H softmax(xᵀ M_k H / √d).
Var attend(Graph& g, Var query, const AttentionKeys& keys, AttentionTrace* trace = nullptr);

}  // namespace actree::nn
