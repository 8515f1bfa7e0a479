#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "actree/grammar/schema.hpp"
#include "actree/grammar/tree.hpp"
#include "actree/parser/model.hpp"

namespace actree::testing {

// Root with a required head, one optional internal child and one span each.
inline const grammar::GrammarSchema& toy_schema() {
  static const grammar::GrammarSchema schema = grammar::parse_schema(R"(internal root - root
categorical root:type root type required head labels=A,B,C
internal x root x
span x:s x s
categorical x:c x c labels=P,Q
span root:t root t
)");
  return schema;
}

inline const std::vector<std::string> kWords = {"move", "the", "red", "cube", "left", "of", "house"};
inline const std::vector<std::string> kToyWords = {"a", "b", "c"};

inline parser::Variant variant_of(int i) { return static_cast<parser::Variant>(i % 3); }

// Model with every trainable parameter shifted by N(0, scale²) so that
// decisions are far from the initial near-uniform regime.
inline parser::ParserModel random_model(const grammar::GrammarSchema& schema, parser::Variant variant, int d,
                                        std::uint64_t seed, const std::vector<std::string>& words,
                                        double scale = 0.5) {
  parser::ModelConfig config;
  config.variant = variant;
  config.d = d;
  config.heads = 2;
  config.encoder_layers = 2;
  config.pretrained_dim = 4;
  config.free_dim = 2;
  auto model = parser::ParserModel::create(schema, config, parser::build_vocabulary({words}), nullptr, seed);
  std::mt19937_64 rng(seed ^ 0x5eed);
  std::normal_distribution<double> noise(0.0, scale);
  for (nn::ParamId id = 0; id < model.store().size(); ++id) {
    if (!model.store().trainable(id)) continue;
    auto& v = model.store().value(id);
    for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] += noise(rng);
  }
  return model;
}

// Words drawn uniformly from `words` plus one out-of-vocabulary token.
inline std::vector<std::string> random_sentence(const std::vector<std::string>& words, int length,
                                                std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, words.size());
  std::vector<std::string> out;
  for (int i = 0; i < length; ++i) {
    const auto k = pick(rng);
    out.push_back(k == words.size() ? "unseen" : words[k]);
  }
  return out;
}

// Every valid tree over the schema for a sentence of the given length.
inline std::vector<grammar::ActionTree> enumerate_trees(const grammar::GrammarSchema& schema, int length) {
  using grammar::NodeKind;
  const auto order = schema.dfs();
  std::vector<grammar::ActionTree> out;
  std::function<void(std::size_t, grammar::ActionTree&)> rec = [&](std::size_t i, grammar::ActionTree& tree) {
    if (i == order.size()) {
      out.push_back(tree);
      return;
    }
    const auto n = order[i];
    if (n == schema.root() || !tree.is_active(schema.node(schema.parent(n)).id)) {
      rec(i + 1, tree);
      return;
    }
    const auto& spec = schema.node(n);
    if (!spec.required) rec(i + 1, tree);
    auto with = tree;
    with.active.insert(spec.id);
    if (spec.kind == NodeKind::categorical) {
      for (const auto& label : spec.labels) {
        auto t = with;
        t.labels[spec.id] = label;
        rec(i + 1, t);
      }
    } else if (spec.kind == NodeKind::span) {
      for (int s = 0; s < length; ++s)
        for (int e = s; e < length; ++e) {
          auto t = with;
          t.spans[spec.id] = {s, e};
          rec(i + 1, t);
        }
    } else {
      rec(i + 1, with);
    }
  };
  auto root = grammar::make_tree(schema, length);
  rec(0, root);
  return out;
}

inline std::vector<nn::ParamId> node_params(const parser::ParserModel& model, grammar::NodeIndex n) {
  const auto& p = model.node(n);
  std::vector<nn::ParamId> out;
  for (auto id : {p.query, p.rec_input, p.activation, p.label, p.start, p.end})
    if (id != parser::kNoParam) out.push_back(id);
  return out;
}

inline void perturb(parser::ParserModel& model, const std::vector<nn::ParamId>& ids, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  for (auto id : ids) {
    auto& v = model.store().value(id);
    for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] += noise(rng);
  }
}

}  // namespace actree::testing
