#pragma once

#include <compare>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "actree/grammar/schema.hpp"

namespace actree::grammar {

/// Inclusive, 0-based token range.
struct Span {
  int start = 0;
  int end = 0;
  auto operator<=>(const Span&) const = default;
};

/// One parse over a tokenized sentence. Nodes absent from `active` are
/// inactive; only active categorical nodes carry labels and only active span
/// nodes carry ranges.
struct ActionTree {
  int sentence_length = 0;
  std::set<std::string> active;
  std::map<std::string, std::string> labels;
  std::map<std::string, Span> spans;

  bool operator==(const ActionTree&) const = default;

  bool is_active(std::string_view id) const { return active.contains(std::string(id)); }
};

/// A tree containing only the (always active) root.
ActionTree make_tree(const GrammarSchema& schema, int sentence_length);

/// Activates `index` and all of its ancestors.
void activate_path(ActionTree& tree, const GrammarSchema& schema, NodeIndex index);

/// Deactivates `index` and its whole subtree, dropping carried labels/spans.
void deactivate_subtree(ActionTree& tree, const GrammarSchema& schema, NodeIndex index);

struct Violation {
  std::string node_id;
  std::string rule;
  std::string message;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Violation> violations;
};

/// Rule names: unknown_node, root_inactive, inactive_parent, missing_required,
/// kind_mismatch, missing_label, unknown_label, missing_span, span_order,
/// span_bounds, value_on_inactive.
ValidationReport validate_tree(const ActionTree& tree, const GrammarSchema& schema);

/// Exact structural equality: active sets, labels and spans.
bool tree_equal(const ActionTree& a, const ActionTree& b);

/// Label of the head categorical (the action type), or empty when absent.
std::string head_label(const ActionTree& tree, const GrammarSchema& schema);

}  // namespace actree::grammar
