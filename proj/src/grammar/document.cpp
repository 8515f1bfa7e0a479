#include "actree/grammar/document.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

#include "actree/util/text.hpp"

namespace actree::grammar {

using nlohmann::json;

DocumentError::DocumentError(std::string key, const std::string& message)
    : std::runtime_error("tree document error at key '" + key + "': " + message), key_(std::move(key)) {}

namespace {

void append_quoted(std::string& out, std::string_view s) { out += json(std::string(s)).dump(); }

void write_object(std::string& out, const ActionTree& tree, const GrammarSchema& schema, NodeIndex node) {
  out += '{';
  bool first = true;
  for (auto c : schema.children(node)) {
    const auto& spec = schema.node(c);
    if (schema.head() && c == *schema.head()) continue;
    if (!tree.active.contains(spec.id)) continue;
    if (!first) out += ", ";
    first = false;
    append_quoted(out, spec.key);
    out += ": ";
    switch (spec.kind) {
      case NodeKind::internal: write_object(out, tree, schema, c); break;
      case NodeKind::categorical: append_quoted(out, tree.labels.at(spec.id)); break;
      case NodeKind::span: {
        const auto& s = tree.spans.at(spec.id);
        out += '[' + std::to_string(s.start) + ',' + std::to_string(s.end) + ']';
        break;
      }
    }
  }
  out += '}';
}

void read_object(const json& obj, ActionTree& tree, const GrammarSchema& schema, NodeIndex node,
                 const std::string& path) {
  if (!obj.is_object()) throw DocumentError(path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    auto child = schema.child_by_key(node, key);
    if (!child || (schema.head() && *child == *schema.head()))
      throw DocumentError(key, "not a child of '" + schema.node(node).id + "'");
    const auto& spec = schema.node(*child);
    tree.active.insert(spec.id);
    switch (spec.kind) {
      case NodeKind::internal: read_object(value, tree, schema, *child, key); break;
      case NodeKind::categorical:
        if (!value.is_string()) throw DocumentError(key, "expected a label string");
        tree.labels[spec.id] = value.get<std::string>();
        break;
      case NodeKind::span:
        if (!value.is_array() || value.size() != 2 || !value[0].is_number_integer() || !value[1].is_number_integer())
          throw DocumentError(key, "expected a two-element integer range");
        tree.spans[spec.id] = Span{value[0].get<int>(), value[1].get<int>()};
        break;
    }
  }
}

}  // namespace

std::string serialize_tree(const ActionTree& tree, const GrammarSchema& schema) {
  auto report = validate_tree(tree, schema);
  if (!report.ok) {
    const auto& v = report.violations.front();
    throw DocumentError(v.node_id, "cannot serialize invalid tree: " + v.rule + " (" + v.message + ")");
  }
  std::string out;
  if (schema.head()) {
    out += '{';
    append_quoted(out, tree.labels.at(schema.node(*schema.head()).id));
    out += ": ";
    write_object(out, tree, schema, schema.root());
    out += '}';
  } else {
    write_object(out, tree, schema, schema.root());
  }
  return out;
}

ActionTree deserialize_tree(std::string_view text, const GrammarSchema& schema, int sentence_length) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DocumentError("", std::string("malformed document: ") + e.what());
  }
  auto tree = make_tree(schema, sentence_length);
  if (schema.head()) {
    if (!doc.is_object() || doc.size() != 1) throw DocumentError("", "expected a single action-type key");
    auto it = doc.begin();
    const auto head = *schema.head();
    if (schema.label_index(head, it.key()) < 0) throw DocumentError(it.key(), "unknown action type");
    tree.active.insert(schema.node(head).id);
    tree.labels[schema.node(head).id] = it.key();
    read_object(it.value(), tree, schema, schema.root(), it.key());
  } else {
    read_object(doc, tree, schema, schema.root(), "");
  }
  auto report = validate_tree(tree, schema);
  if (!report.ok) {
    const auto& v = report.violations.front();
    throw DocumentError(schema.find(v.node_id) ? schema.node(v.node_id).key : v.node_id,
                        v.rule + ": " + v.message);
  }
  return tree;
}

std::vector<std::string> tokenize(std::string_view sentence) {
  static constexpr std::string_view kTrailing = ".,!?;:\"')";
  static constexpr std::string_view kLeading = "\"'(";
  std::vector<std::string> tokens;
  for (auto word : util::split_whitespace(sentence)) {
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::size_t begin = 0;
    while (begin + 1 < word.size() && kLeading.find(word[begin]) != std::string_view::npos) {
      tokens.emplace_back(1, word[begin]);
      ++begin;
    }
    std::size_t end = word.size();
    std::vector<std::string> trailing;
    while (end > begin + 1 && kTrailing.find(word[end - 1]) != std::string_view::npos) {
      trailing.emplace_back(1, word[end - 1]);
      --end;
    }
    tokens.push_back(word.substr(begin, end - begin));
    tokens.insert(tokens.end(), trailing.rbegin(), trailing.rend());
  }
  return tokens;
}

}  // namespace actree::grammar
