#include "actree/grammar/tree.hpp"

namespace actree::grammar {

ActionTree make_tree(const GrammarSchema& schema, int sentence_length) {
  ActionTree t;
  t.sentence_length = sentence_length;
  t.active.insert(schema.node(schema.root()).id);
  return t;
}

void activate_path(ActionTree& tree, const GrammarSchema& schema, NodeIndex index) {
  for (NodeIndex cur = index; cur != kNoNode; cur = schema.parent(cur)) {
    if (!tree.active.insert(schema.node(cur).id).second) break;
  }
}

void deactivate_subtree(ActionTree& tree, const GrammarSchema& schema, NodeIndex index) {
  const auto& id = schema.node(index).id;
  tree.active.erase(id);
  tree.labels.erase(id);
  tree.spans.erase(id);
  for (auto c : schema.children(index)) deactivate_subtree(tree, schema, c);
}

ValidationReport validate_tree(const ActionTree& tree, const GrammarSchema& schema) {
  ValidationReport report;
  auto add = [&](const std::string& id, std::string rule, std::string message) {
    report.violations.push_back({id, std::move(rule), std::move(message)});
  };

  const auto& root_id = schema.node(schema.root()).id;
  if (!tree.active.contains(root_id)) add(root_id, "root_inactive", "root must be active");

  for (const auto& id : tree.active) {
    auto idx = schema.find(id);
    if (!idx) {
      add(id, "unknown_node", "node is not in the schema");
      continue;
    }
    auto parent = schema.parent(*idx);
    if (parent != kNoNode && !tree.active.contains(schema.node(parent).id))
      add(id, "inactive_parent", "active node under inactive parent '" + schema.node(parent).id + "'");
    const auto kind = schema.kind(*idx);
    if (kind == NodeKind::categorical && !tree.labels.contains(id))
      add(id, "missing_label", "active categorical node has no label");
    if (kind == NodeKind::span && !tree.spans.contains(id)) add(id, "missing_span", "active span node has no range");
  }

  for (const auto& [id, label] : tree.labels) {
    auto idx = schema.find(id);
    if (!idx) {
      add(id, "unknown_node", "labelled node is not in the schema");
      continue;
    }
    if (schema.kind(*idx) != NodeKind::categorical) {
      add(id, "kind_mismatch", "label on a non-categorical node");
      continue;
    }
    if (!tree.active.contains(id)) add(id, "value_on_inactive", "inactive node carries a label");
    if (schema.label_index(*idx, label) < 0) add(id, "unknown_label", "label '" + label + "' not in vocabulary");
  }

  for (const auto& [id, span] : tree.spans) {
    auto idx = schema.find(id);
    if (!idx) {
      add(id, "unknown_node", "span node is not in the schema");
      continue;
    }
    if (schema.kind(*idx) != NodeKind::span) {
      add(id, "kind_mismatch", "range on a non-span node");
      continue;
    }
    if (!tree.active.contains(id)) add(id, "value_on_inactive", "inactive node carries a range");
    if (span.start > span.end)
      add(id, "span_order", "start " + std::to_string(span.start) + " > end " + std::to_string(span.end));
    if (span.start < 0 || span.end >= tree.sentence_length || span.end < 0 || span.start >= tree.sentence_length)
      add(id, "span_bounds", "range [" + std::to_string(span.start) + "," + std::to_string(span.end) +
                                 "] outside sentence of length " + std::to_string(tree.sentence_length));
  }

  for (NodeIndex i = 0; i < schema.size(); ++i) {
    const auto& spec = schema.node(i);
    if (!spec.required) continue;
    auto parent = schema.parent(i);
    if (tree.active.contains(schema.node(parent).id) && !tree.active.contains(spec.id))
      add(spec.id, "missing_required", "required node inactive under active parent");
  }

  report.ok = report.violations.empty();
  return report;
}

bool tree_equal(const ActionTree& a, const ActionTree& b) {
  return a.active == b.active && a.labels == b.labels && a.spans == b.spans;
}

std::string head_label(const ActionTree& tree, const GrammarSchema& schema) {
  if (!schema.head()) return {};
  auto it = tree.labels.find(schema.node(*schema.head()).id);
  return it == tree.labels.end() ? std::string{} : it->second;
}

}  // namespace actree::grammar
