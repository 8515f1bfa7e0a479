#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace actree::grammar {

enum class NodeKind { internal, categorical, span };

std::string_view to_string(NodeKind kind);

using NodeIndex = std::uint32_t;
inline constexpr NodeIndex kNoNode = static_cast<NodeIndex>(-1);

/// One node of the grammar. `key` is the name used for this node inside tree
/// documents; `id` is the globally unique path-like identifier
/// (e.g. `action_location:location_type`).
struct NodeSpec {
  std::string id;
  NodeKind kind = NodeKind::internal;
  std::string parent;  // empty for the root
  std::string key;
  /// Active whenever the parent is active; never predicted.
  bool required = false;
  /// Categorical child of the root whose label wraps the whole document.
  bool head = false;
  std::vector<std::string> labels;  // categorical vocabulary
};

class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string node_id, const std::string& message);
  const std::string& node_id() const noexcept { return node_id_; }

 private:
  std::string node_id_;
};

class SchemaParseError : public std::runtime_error {
 public:
  SchemaParseError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Immutable action-tree grammar: node universe, parent function, child order
/// and categorical vocabularies. Nodes are indexed in declaration order.
class GrammarSchema {
 public:
  /// Validates every structural invariant; throws SchemaError naming the node.
  static GrammarSchema from_nodes(std::vector<NodeSpec> nodes);

  std::size_t size() const noexcept { return nodes_.size(); }
  NodeIndex root() const noexcept { return root_; }

  const NodeSpec& node(NodeIndex index) const { return nodes_.at(index); }
  const NodeSpec& node(std::string_view id) const;
  std::optional<NodeIndex> find(std::string_view id) const;
  NodeIndex index_of(std::string_view id) const;

  NodeIndex parent(NodeIndex index) const { return parents_.at(index); }
  std::span<const NodeIndex> children(NodeIndex index) const { return children_.at(index); }
  NodeKind kind(NodeIndex index) const { return nodes_.at(index).kind; }
  std::optional<NodeIndex> head() const noexcept { return head_; }

  /// Child of `parent` whose document key is `key`.
  std::optional<NodeIndex> child_by_key(NodeIndex parent, std::string_view key) const;

  /// Position of `label` in the node's vocabulary, or -1.
  int label_index(NodeIndex index, std::string_view label) const;

  /// Pre-order traversal respecting child order; parents precede children.
  std::span<const NodeIndex> dfs() const noexcept { return dfs_; }

  /// True when `ancestor` lies on the path from `index` to the root (inclusive).
  bool is_ancestor(NodeIndex ancestor, NodeIndex index) const;

  /// Canonical textual form; two schemas with equal text are identical.
  std::string canonical_text() const;
  /// Hex digest of canonical_text(), stored in checkpoints for compatibility checks.
  std::string digest() const;

 private:
  std::vector<NodeSpec> nodes_;
  std::unordered_map<std::string, NodeIndex> by_id_;
  std::vector<NodeIndex> parents_;
  std::vector<std::vector<NodeIndex>> children_;
  std::vector<NodeIndex> dfs_;
  NodeIndex root_ = kNoNode;
  std::optional<NodeIndex> head_;
};

/// Parses the line-oriented schema format:
///
///   # comment
///   <kind> <id> <parent|-> <key> [required] [head] [labels=A,B,...]
///
/// Children are ordered by declaration.
GrammarSchema parse_schema(std::string_view text);
GrammarSchema load_schema(const std::filesystem::path& path);

std::vector<std::string> dfs_order(const GrammarSchema& schema);

}  // namespace actree::grammar
