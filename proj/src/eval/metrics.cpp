#include "actree/eval/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace actree::eval {

using grammar::NodeIndex;
using grammar::NodeKind;

double tree_accuracy(const std::vector<TreePair>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("tree accuracy of an empty corpus");
  std::size_t hits = 0;
  for (const auto& p : pairs) hits += grammar::tree_equal(p.predicted, p.gold);
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

double PrfCounts::precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp); }
double PrfCounts::recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn); }
double PrfCounts::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2 * p * r / (p + r);
}

PrfCounts& PrfCounts::operator+=(const PrfCounts& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  return *this;
}

namespace {

bool same_value(const grammar::ActionTree& a, const grammar::ActionTree& b, const std::string& id, NodeKind kind) {
  switch (kind) {
    case NodeKind::internal:
      return true;
    case NodeKind::categorical:
      return a.labels.at(id) == b.labels.at(id);
    case NodeKind::span:
      return a.spans.at(id) == b.spans.at(id);
  }
  return false;
}

}  // namespace

PrfReport per_node_prf(const std::vector<TreePair>& pairs, const grammar::GrammarSchema& schema) {
  PrfReport report{};
  for (const auto& p : pairs) {
    for (NodeIndex i = 0; i < schema.size(); ++i) {
      if (i == schema.root()) continue;
      const auto& id = schema.node(i).id;
      const auto kind = schema.kind(i);
      auto& c = report[static_cast<std::size_t>(kind)];
      const bool in_pred = p.predicted.is_active(id), in_gold = p.gold.is_active(id);
      if (in_pred && in_gold) {
        if (same_value(p.predicted, p.gold, id, kind)) {
          ++c.tp;
        } else {
          ++c.fp;
          ++c.fn;
        }
      } else if (in_pred) {
        ++c.fp;
      } else if (in_gold) {
        ++c.fn;
      }
    }
  }
  return report;
}

namespace {

void merge(OutcomeCounts& into, const OutcomeCounts& from) {
  for (const auto& [k, v] : from) into[k] += v;
}

}  // namespace

ConfusionTables& ConfusionTables::operator+=(const ConfusionTables& other) {
  for (const auto& [node, row] : other.internal) merge(internal[node], row);
  for (const auto& [node, rows] : other.categorical)
    for (const auto& [label, row] : rows) merge(categorical[node][label], row);
  for (const auto& [node, row] : other.span) merge(span[node], row);
  return *this;
}

void add_confusion(ConfusionTables& tables, const TreePair& pair, const grammar::GrammarSchema& schema) {
  const auto& pred = pair.predicted;
  const auto& gold = pair.gold;
  auto active = [&](const grammar::ActionTree& t, NodeIndex i) {
    return i == schema.root() || t.is_active(schema.node(i).id);
  };

  std::vector<std::string> unmatched;
  for (NodeIndex i = 0; i < schema.size(); ++i)
    if (i != schema.root() && schema.kind(i) == NodeKind::internal && active(pred, i) && !active(gold, i))
      unmatched.push_back(schema.node(i).id);

  for (NodeIndex i = 0; i < schema.size(); ++i) {
    if (i == schema.root() || !active(gold, i)) continue;
    const auto& id = schema.node(i).id;
    const bool parent_predicted = active(pred, schema.parent(i));
    switch (schema.kind(i)) {
      case NodeKind::internal: {
        auto& row = tables.internal[id];
        if (active(pred, i)) {
          row[id] += 1.0;
        } else if (unmatched.empty()) {
          row[std::string(kUnattributed)] += 1.0;
        } else {
          for (const auto& other : unmatched) row[other] += 1.0 / static_cast<double>(unmatched.size());
        }
        break;
      }
      case NodeKind::categorical: {
        auto& row = tables.categorical[id][gold.labels.at(id)];
        if (!parent_predicted)
          row[std::string(kNoParent)] += 1.0;
        else if (!active(pred, i))
          row[std::string(kAbsent)] += 1.0;
        else
          row[pred.labels.at(id)] += 1.0;
        break;
      }
      case NodeKind::span: {
        auto& row = tables.span[id];
        if (!parent_predicted)
          row[std::string(kNoParent)] += 1.0;
        else if (!active(pred, i))
          row[std::string(kAbsent)] += 1.0;
        else
          row[std::string(pred.spans.at(id) == gold.spans.at(id) ? kMatchSpan : kMisSpan)] += 1.0;
        break;
      }
    }
  }
}

ConfusionTables confusion_tables(const std::vector<TreePair>& pairs, const grammar::GrammarSchema& schema) {
  ConfusionTables tables;
  for (const auto& p : pairs) add_confusion(tables, p, schema);
  return tables;
}

ConfusionTables confusion_tables_parallel(const std::vector<TreePair>& pairs, const grammar::GrammarSchema& schema) {
  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (pairs.size() + kChunk - 1) / kChunk;
  std::vector<ConfusionTables> partial(chunks);
  const auto n = static_cast<long>(chunks);
#pragma omp parallel for schedule(dynamic)
  for (long c = 0; c < n; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
    const std::size_t end = std::min(pairs.size(), begin + kChunk);
    for (std::size_t i = begin; i < end; ++i) add_confusion(partial[c], pairs[i], schema);
  }
  ConfusionTables tables;
  for (const auto& t : partial) tables += t;
  return tables;
}

MetricsReport evaluate(const std::vector<TreePair>& pairs, const grammar::GrammarSchema& schema) {
  MetricsReport r;
  r.examples = pairs.size();
  r.tree_accuracy = tree_accuracy(pairs);
  r.prf = per_node_prf(pairs, schema);
  r.confusion = confusion_tables_parallel(pairs, schema);
  return r;
}

namespace {

constexpr std::array<const char*, 3> kKindNames{"internal", "categorical", "span"};

std::vector<std::pair<std::string, double>> sorted(const OutcomeCounts& row) {
  std::vector<std::pair<std::string, double>> out(row.begin(), row.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

void print_row(std::ostringstream& out, const std::string& name, const OutcomeCounts& row) {
  out << "  " << name << " ->";
  for (const auto& [outcome, count] : sorted(row)) out << " (" << outcome << ", " << number(count) << ")";
  out << "\n";
}

nlohmann::ordered_json row_json(const OutcomeCounts& row) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& [outcome, count] : sorted(row)) arr.push_back({outcome, count});
  return arr;
}

}  // namespace

std::string format_report(const MetricsReport& report) {
  std::ostringstream out;
  out << "examples " << report.examples << "\n";
  out << "tree accuracy " << number(report.tree_accuracy) << "\n\n";
  out << "kind         precision  recall  f1      tp  fp  fn\n";
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& c = report.prf[k];
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %-10.4f %-7.4f %-7.4f %zu %zu %zu\n", kKindNames[k], c.precision(),
                  c.recall(), c.f1(), c.tp, c.fp, c.fn);
    out << line;
  }
  out << "\ninternal node confusion\n";
  for (const auto& [node, row] : report.confusion.internal) print_row(out, node, row);
  out << "\ncategorical node confusion\n";
  for (const auto& [node, rows] : report.confusion.categorical)
    for (const auto& [label, row] : rows) print_row(out, node + " " + label, row);
  out << "\nspan node confusion\n";
  for (const auto& [node, row] : report.confusion.span) print_row(out, node, row);
  return out.str();
}

std::string report_json(const MetricsReport& report, int indent) {
  nlohmann::ordered_json j;
  j["examples"] = report.examples;
  j["tree_accuracy"] = report.tree_accuracy;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& c = report.prf[k];
    j["prf"][kKindNames[k]] = {{"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()},
                               {"tp", c.tp},                 {"fp", c.fp},           {"fn", c.fn}};
  }
  auto& conf = j["confusion"];
  conf["internal"] = nlohmann::ordered_json::object();
  for (const auto& [node, row] : report.confusion.internal) conf["internal"][node] = row_json(row);
  conf["categorical"] = nlohmann::ordered_json::object();
  for (const auto& [node, rows] : report.confusion.categorical)
    for (const auto& [label, row] : rows) conf["categorical"][node][label] = row_json(row);
  conf["span"] = nlohmann::ordered_json::object();
  for (const auto& [node, row] : report.confusion.span) conf["span"][node] = row_json(row);
  return j.dump(indent);
}

}  // namespace actree::eval
