#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "actree/grammar/schema.hpp"
#include "actree/nn/embedding.hpp"
#include "actree/nn/layers.hpp"
#include "actree/nn/parameter_store.hpp"

namespace actree::parser {

enum class Variant { independent, seq2tree, sentencerec };

std::string_view to_string(Variant variant);
/// Throws std::invalid_argument listing the accepted names.
Variant parse_variant(std::string_view name);

struct ModelConfig {
  Variant variant = Variant::sentencerec;
  int d = 64;
  int heads = 2;
  int encoder_layers = 2;
  int pretrained_dim = 32;  // only used when no pretrained file is given
  int free_dim = 8;
};

inline constexpr nn::ParamId kNoParam = static_cast<nn::ParamId>(-1);

/// Per-node parameters. The root has none; required nodes have no
/// activation vector.
struct NodeParams {
  nn::ParamId query = kNoParam;       // v_n, d x 1
  nn::ParamId rec_input = kNoParam;   // v'_n, one row per label for categoricals (rows x d)
  nn::ParamId activation = kNoParam;  // p_n, d x 1
  nn::ParamId label = kNoParam;       // |C^n| x d
  nn::ParamId start = kNoParam;       // d x d
  nn::ParamId end = kNoParam;         // d x d
};

class ParserModel {
 public:
  static ParserModel create(const grammar::GrammarSchema& schema, const ModelConfig& config,
                            std::vector<std::string> vocabulary, const nn::PretrainedVectors* pretrained,
                            std::uint64_t seed);
  /// Fails if the checkpoint was trained against a different schema.
  static ParserModel load(const std::filesystem::path& path, const grammar::GrammarSchema& schema,
                          nlohmann::json* extra = nullptr);
  void save(const std::filesystem::path& path, const nlohmann::json& extra = nlohmann::json::object()) const;

  const grammar::GrammarSchema& schema() const noexcept { return schema_; }
  const ModelConfig& config() const noexcept { return config_; }
  Variant variant() const noexcept { return config_.variant; }
  /// Seq2Tree and SentenceRec share one parameter layout, so a model can be
  /// evaluated under either.
  void set_variant(Variant variant);
  bool recurrent() const noexcept { return config_.variant != Variant::independent; }

  nn::ParameterStore& store() noexcept { return store_; }
  const nn::ParameterStore& store() const noexcept { return store_; }
  const nn::EmbeddingTable& embedding() const noexcept { return embedding_; }
  const nn::EncoderParams& encoder() const noexcept { return encoder_; }
  const nn::AttentionParams& attention() const noexcept { return attention_; }
  const nn::GruParams& decoder() const noexcept { return decoder_; }
  const NodeParams& node(grammar::NodeIndex index) const { return nodes_.at(index); }

 private:
  grammar::GrammarSchema schema_;
  ModelConfig config_;
  nn::ParameterStore store_;
  nn::EmbeddingTable embedding_;
  nn::EncoderParams encoder_;
  nn::AttentionParams attention_;
  nn::GruParams decoder_;  // input 2d (child input ∘ parent state), hidden d
  std::vector<NodeParams> nodes_;

  void bind();
};

/// Sorted distinct tokens of the given sentences, preceded by the unknown
/// token "".
std::vector<std::string> build_vocabulary(const std::vector<std::vector<std::string>>& sentences);

}  // namespace actree::parser
