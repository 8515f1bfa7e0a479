#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "actree/nn/graph.hpp"
#include "actree/nn/parameter_store.hpp"

namespace actree::nn {

/// Word vectors read from text: one token per line followed by its floats.
struct PretrainedVectors {
  int dim = 0;
  std::unordered_map<std::string, Vector> vectors;
};

PretrainedVectors load_pretrained(const std::filesystem::path& path);

/// Token lookup over a frozen pretrained block and a trainable free block
/// that starts at zero. Row 0 is the unknown token.
class EmbeddingTable {
 public:
  static constexpr int kUnknown = 0;

  EmbeddingTable() = default;

  /// Registers both blocks in the store. Tokens missing from `pretrained`
  /// keep a zero pretrained row; without a pretrained file every token gets a
  /// fixed pseudo-random vector derived from its spelling.
  static EmbeddingTable create(ParameterStore& store, std::vector<std::string> vocabulary,
                               const PretrainedVectors* pretrained, int pretrained_dim, int free_dim);
  static EmbeddingTable find(const ParameterStore& store, std::vector<std::string> vocabulary);

  int row(const std::string& token) const;
  int width() const noexcept { return pretrained_dim_ + free_dim_; }
  int pretrained_dim() const noexcept { return pretrained_dim_; }
  int free_dim() const noexcept { return free_dim_; }
  const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }
  ParamId pretrained_id() const noexcept { return pretrained_; }
  ParamId free_id() const noexcept { return free_; }

  /// Row per token; in training each token is replaced by the unknown row
  /// with probability `word_dropout`.
  std::vector<int> lookup(const std::vector<std::string>& sentence, double word_dropout, std::mt19937_64* rng,
                          bool training) const;

 private:
  std::vector<std::string> vocabulary_;  // vocabulary_[0] is the unknown token
  std::unordered_map<std::string, int> rows_;
  int pretrained_dim_ = 0;
  int free_dim_ = 0;
  ParamId pretrained_ = 0;
  ParamId free_ = 0;

  void index();
};

/// Embedded sentence as a width x T matrix (column t is token t).
Var embed_sentence(Graph& g, const EmbeddingTable& table, const std::vector<int>& rows);

}  // namespace actree::nn
