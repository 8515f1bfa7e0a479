#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "actree/grammar/schema.hpp"
#include "actree/grammar/tree.hpp"

namespace actree::grammar {

class DocumentError : public std::runtime_error {
 public:
  DocumentError(std::string key, const std::string& message);
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Canonical single-line nested-object form, keys in schema child order:
///
///   {"Build": {"schematic": {"has_name_": [4,4]}}}
///
/// When the schema has a head node its label wraps the document; otherwise the
/// root's children form the top-level object. Throws DocumentError if the tree
/// does not validate.
std::string serialize_tree(const ActionTree& tree, const GrammarSchema& schema);

/// Inverse of serialize_tree. Key order in the input is not significant. The
/// resulting tree is validated against `sentence_length`; any shape mismatch or
/// violation throws DocumentError naming the offending key.
ActionTree deserialize_tree(std::string_view text, const GrammarSchema& schema, int sentence_length);

/// Lowercases, splits on whitespace and separates leading/trailing
/// punctuation into tokens of their own.
std::vector<std::string> tokenize(std::string_view sentence);

}  // namespace actree::grammar
