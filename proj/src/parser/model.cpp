#include "actree/parser/model.hpp"

#include <random>
#include <set>
#include <stdexcept>

namespace actree::parser {

using grammar::NodeKind;

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::independent: return "independent";
    case Variant::seq2tree: return "seq2tree";
    case Variant::sentencerec: return "sentencerec";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "independent") return Variant::independent;
  if (name == "seq2tree") return Variant::seq2tree;
  if (name == "sentencerec") return Variant::sentencerec;
  throw std::invalid_argument("unknown variant '" + std::string(name) +
                              "' (expected one of: independent, seq2tree, sentencerec)");
}

namespace {

std::string node_prefix(const grammar::NodeSpec& spec) { return "node/" + spec.id; }

}  // namespace

ParserModel ParserModel::create(const grammar::GrammarSchema& schema, const ModelConfig& config,
                                std::vector<std::string> vocabulary, const nn::PretrainedVectors* pretrained,
                                std::uint64_t seed) {
  if (config.d < 1 || config.heads < 1 || config.encoder_layers < 1)
    throw std::invalid_argument("model dimensions must be positive");
  ParserModel m;
  m.schema_ = schema;
  m.config_ = config;
  std::mt19937_64 rng(seed);
  auto& store = m.store_;
  m.embedding_ = nn::EmbeddingTable::create(store, std::move(vocabulary), pretrained, config.pretrained_dim,
                                            config.free_dim);
  m.config_.pretrained_dim = m.embedding_.pretrained_dim();
  const int d = config.d;
  m.encoder_ = nn::EncoderParams::create(store, m.embedding_.width(), d, config.encoder_layers, rng);
  m.attention_ = nn::AttentionParams::create(store, "attention", d, config.heads, rng);
  m.decoder_ = nn::GruParams::create(store, "decoder", 2 * d, d, rng);
  for (grammar::NodeIndex i = 0; i < schema.size(); ++i) {
    if (i == schema.root()) continue;
    const auto& spec = schema.node(i);
    const auto prefix = node_prefix(spec);
    const int rows = spec.kind == NodeKind::categorical ? static_cast<int>(spec.labels.size()) : 1;
    store.add(prefix + "/query", nn::gaussian(d, 1, 0.1, rng));
    store.add(prefix + "/rec_input", nn::gaussian(rows, d, 0.1, rng));
    if (!spec.required) store.add(prefix + "/activation", nn::glorot(d, 1, rng));
    if (spec.kind == NodeKind::categorical) store.add(prefix + "/label", nn::glorot(rows, d, rng));
    if (spec.kind == NodeKind::span) {
      store.add(prefix + "/start", nn::glorot(d, d, rng));
      store.add(prefix + "/end", nn::glorot(d, d, rng));
    }
  }
  m.bind();
  return m;
}

void ParserModel::bind() {
  nodes_.assign(schema_.size(), NodeParams{});
  for (grammar::NodeIndex i = 0; i < schema_.size(); ++i) {
    if (i == schema_.root()) continue;
    const auto prefix = node_prefix(schema_.node(i));
    auto get = [&](const char* part) { return store_.find(prefix + part).value_or(kNoParam); };
    auto& n = nodes_[i];
    n.query = get("/query");
    n.rec_input = get("/rec_input");
    n.activation = get("/activation");
    n.label = get("/label");
    n.start = get("/start");
    n.end = get("/end");
    if (n.query == kNoParam || n.rec_input == kNoParam)
      throw std::runtime_error("checkpoint lacks parameters for node " + schema_.node(i).id);
  }
}

void ParserModel::set_variant(Variant variant) { config_.variant = variant; }

void ParserModel::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  nlohmann::json meta;
  meta["variant"] = to_string(config_.variant);
  meta["d"] = config_.d;
  meta["heads"] = config_.heads;
  meta["encoder_layers"] = config_.encoder_layers;
  meta["pretrained_dim"] = config_.pretrained_dim;
  meta["free_dim"] = config_.free_dim;
  meta["schema_digest"] = schema_.digest();
  meta["vocabulary"] = embedding_.vocabulary();
  meta["extra"] = extra;
  store_.save(path, meta.dump());
}

ParserModel ParserModel::load(const std::filesystem::path& path, const grammar::GrammarSchema& schema,
                              nlohmann::json* extra) {
  ParserModel m;
  const auto meta = nlohmann::json::parse(m.store_.load(path));
  if (meta.at("schema_digest").get<std::string>() != schema.digest())
    throw std::runtime_error("checkpoint " + path.string() + " was trained with a different schema");
  m.schema_ = schema;
  m.config_.variant = parse_variant(meta.at("variant").get<std::string>());
  m.config_.d = meta.at("d").get<int>();
  m.config_.heads = meta.at("heads").get<int>();
  m.config_.encoder_layers = meta.at("encoder_layers").get<int>();
  m.config_.pretrained_dim = meta.at("pretrained_dim").get<int>();
  m.config_.free_dim = meta.at("free_dim").get<int>();
  m.embedding_ = nn::EmbeddingTable::find(m.store_, meta.at("vocabulary").get<std::vector<std::string>>());
  m.encoder_ = nn::EncoderParams::find(m.store_, m.config_.encoder_layers);
  m.attention_ = nn::AttentionParams::find(m.store_, "attention", m.config_.heads);
  m.decoder_ = nn::GruParams::find(m.store_, "decoder");
  m.bind();
  if (extra) *extra = meta.value("extra", nlohmann::json::object());
  return m;
}

std::vector<std::string> build_vocabulary(const std::vector<std::vector<std::string>>& sentences) {
  std::set<std::string> tokens;
  for (const auto& s : sentences) tokens.insert(s.begin(), s.end());
  tokens.erase("");
  std::vector<std::string> out{""};
  out.insert(out.end(), tokens.begin(), tokens.end());
  return out;
}

}  // namespace actree::parser
