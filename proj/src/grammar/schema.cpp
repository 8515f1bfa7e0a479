#include "actree/grammar/schema.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

#include "actree/util/digest.hpp"
#include "actree/util/text.hpp"

namespace actree::grammar {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::internal: return "internal";
    case NodeKind::categorical: return "categorical";
    case NodeKind::span: return "span";
  }
  return "?";
}

SchemaError::SchemaError(std::string node_id, const std::string& message)
    : std::runtime_error("schema error at node '" + node_id + "': " + message),
      node_id_(std::move(node_id)) {}

SchemaParseError::SchemaParseError(std::size_t line, const std::string& message)
    : std::runtime_error("schema parse error at line " + std::to_string(line) + ": " + message),
      line_(line) {}

GrammarSchema GrammarSchema::from_nodes(std::vector<NodeSpec> nodes) {
  GrammarSchema s;
  if (nodes.empty()) throw SchemaError("", "schema has no nodes");
  s.nodes_ = std::move(nodes);
  const auto n = s.nodes_.size();
  for (NodeIndex i = 0; i < n; ++i) {
    const auto& spec = s.nodes_[i];
    if (spec.id.empty()) throw SchemaError("", "empty node id");
    if (!s.by_id_.emplace(spec.id, i).second) throw SchemaError(spec.id, "duplicate id");
  }
  s.parents_.assign(n, kNoNode);
  s.children_.assign(n, {});
  for (NodeIndex i = 0; i < n; ++i) {
    const auto& spec = s.nodes_[i];
    if (spec.parent.empty()) {
      if (s.root_ != kNoNode) throw SchemaError(spec.id, "second root (root is '" + s.nodes_[s.root_].id + "')");
      s.root_ = i;
      continue;
    }
    auto it = s.by_id_.find(spec.parent);
    if (it == s.by_id_.end()) throw SchemaError(spec.id, "parent '" + spec.parent + "' does not exist");
    if (s.nodes_[it->second].kind != NodeKind::internal)
      throw SchemaError(spec.id, "parent '" + spec.parent + "' is not an internal node");
    s.parents_[i] = it->second;
    s.children_[it->second].push_back(i);
  }
  if (s.root_ == kNoNode) throw SchemaError("", "no root node");
  if (s.nodes_[s.root_].kind != NodeKind::internal)
    throw SchemaError(s.nodes_[s.root_].id, "root must be internal");

  for (NodeIndex i = 0; i < n; ++i) {
    const auto& spec = s.nodes_[i];
    if (spec.kind == NodeKind::categorical) {
      if (spec.labels.empty()) throw SchemaError(spec.id, "categorical node has an empty vocabulary");
      std::set<std::string> seen;
      for (const auto& l : spec.labels)
        if (!seen.insert(l).second) throw SchemaError(spec.id, "duplicate label '" + l + "'");
    } else if (!spec.labels.empty()) {
      throw SchemaError(spec.id, "only categorical nodes carry labels");
    }
    if (spec.key.empty()) throw SchemaError(spec.id, "empty document key");
    if (auto colon = spec.id.rfind(':'); colon != std::string::npos && spec.id.substr(0, colon) != spec.parent)
      throw SchemaError(spec.id, "id prefix does not name its parent '" + spec.parent + "'");
    if (spec.head) {
      if (spec.kind != NodeKind::categorical || s.parents_[i] != s.root_ || !spec.required)
        throw SchemaError(spec.id, "head node must be a required categorical child of the root");
      if (s.head_) throw SchemaError(spec.id, "second head node");
      s.head_ = i;
    }
    if (i == s.root_ && spec.required) throw SchemaError(spec.id, "root cannot be marked required");
    std::set<std::string> keys;
    for (auto c : s.children_[i])
      if (!keys.insert(s.nodes_[c].key).second)
        throw SchemaError(s.nodes_[c].id, "duplicate key '" + s.nodes_[c].key + "' under '" + spec.id + "'");
  }

  // Acyclicity and reachability: walk every node up to the root.
  for (NodeIndex i = 0; i < n; ++i) {
    NodeIndex cur = i;
    std::size_t steps = 0;
    while (cur != s.root_) {
      cur = s.parents_[cur];
      if (++steps > n) throw SchemaError(s.nodes_[i].id, "cycle in parent relation");
    }
  }

  s.dfs_.reserve(n);
  std::function<void(NodeIndex)> visit = [&](NodeIndex v) {
    s.dfs_.push_back(v);
    for (auto c : s.children_[v]) visit(c);
  };
  visit(s.root_);
  return s;
}

const NodeSpec& GrammarSchema::node(std::string_view id) const { return nodes_[index_of(id)]; }

std::optional<NodeIndex> GrammarSchema::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

NodeIndex GrammarSchema::index_of(std::string_view id) const {
  auto found = find(id);
  if (!found) throw SchemaError(std::string(id), "unknown node");
  return *found;
}

std::optional<NodeIndex> GrammarSchema::child_by_key(NodeIndex parent, std::string_view key) const {
  for (auto c : children_.at(parent))
    if (nodes_[c].key == key) return c;
  return std::nullopt;
}

int GrammarSchema::label_index(NodeIndex index, std::string_view label) const {
  const auto& labels = nodes_.at(index).labels;
  auto it = std::find(labels.begin(), labels.end(), label);
  return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
}

bool GrammarSchema::is_ancestor(NodeIndex ancestor, NodeIndex index) const {
  for (NodeIndex cur = index; cur != kNoNode; cur = parents_[cur])
    if (cur == ancestor) return true;
  return false;
}

std::string GrammarSchema::canonical_text() const {
  std::ostringstream out;
  for (const auto& spec : nodes_) {
    out << to_string(spec.kind) << ' ' << spec.id << ' ' << (spec.parent.empty() ? "-" : spec.parent) << ' '
        << spec.key;
    if (spec.required) out << " required";
    if (spec.head) out << " head";
    if (!spec.labels.empty()) out << " labels=" << util::join(spec.labels, ",");
    out << '\n';
  }
  return out.str();
}

std::string GrammarSchema::digest() const { return util::hex_digest(canonical_text()); }

GrammarSchema parse_schema(std::string_view text) {
  std::vector<NodeSpec> nodes;
  std::size_t line_no = 0;
  for (const auto& raw : util::split(text, '\n')) {
    ++line_no;
    auto line = util::trim(raw);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = util::trim(line.substr(0, hash));
    if (line.empty()) continue;
    auto fields = util::split_whitespace(line);
    if (fields.size() < 4) throw SchemaParseError(line_no, "expected '<kind> <id> <parent> <key> ...'");
    NodeSpec spec;
    if (fields[0] == "internal") spec.kind = NodeKind::internal;
    else if (fields[0] == "categorical") spec.kind = NodeKind::categorical;
    else if (fields[0] == "span") spec.kind = NodeKind::span;
    else throw SchemaParseError(line_no, "unknown node kind '" + fields[0] + "'");
    spec.id = fields[1];
    spec.parent = fields[2] == "-" ? "" : fields[2];
    spec.key = fields[3];
    for (std::size_t i = 4; i < fields.size(); ++i) {
      const auto& f = fields[i];
      if (f == "required") spec.required = true;
      else if (f == "head") spec.head = true;
      else if (f.rfind("labels=", 0) == 0) {
        spec.labels = util::split(std::string_view(f).substr(7), ',');
        if (std::any_of(spec.labels.begin(), spec.labels.end(), [](auto& l) { return l.empty(); }))
          throw SchemaParseError(line_no, "empty label in '" + f + "'");
      } else {
        throw SchemaParseError(line_no, "unknown attribute '" + f + "'");
      }
    }
    nodes.push_back(std::move(spec));
  }
  return GrammarSchema::from_nodes(std::move(nodes));
}

GrammarSchema load_schema(const std::filesystem::path& path) { return parse_schema(util::read_file(path)); }

std::vector<std::string> dfs_order(const GrammarSchema& schema) {
  std::vector<std::string> out;
  out.reserve(schema.size());
  for (auto i : schema.dfs()) out.push_back(schema.node(i).id);
  return out;
}

}  // namespace actree::grammar
