#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "actree/grammar/schema.hpp"
#include "actree/grammar/tree.hpp"

namespace actree::eval {

struct TreePair {
  grammar::ActionTree predicted;
  grammar::ActionTree gold;
};

/// Fraction of pairs whose trees are equal. Throws on an empty list.
double tree_accuracy(const std::vector<TreePair>& pairs);

struct PrfCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  double precision() const;
  double recall() const;
  double f1() const;  // 0 when precision and recall are both 0
  PrfCounts& operator+=(const PrfCounts& other);
};

/// Indexed by grammar::NodeKind.
using PrfReport = std::array<PrfCounts, 3>;

/// Non-root nodes. A node active in both trees is a true positive unless its
/// label or span differs, in which case it is both a false positive and a
/// false negative.
PrfReport per_node_prf(const std::vector<TreePair>& pairs, const grammar::GrammarSchema& schema);

inline constexpr std::string_view kNoParent = "NO-PARENT";
inline constexpr std::string_view kAbsent = "ABSENT";
inline constexpr std::string_view kMatchSpan = "MATCH-SPAN";
inline constexpr std::string_view kMisSpan = "MIS-SPAN";
inline constexpr std::string_view kUnattributed = "UNATTRIBUTED";

/// outcome → (possibly fractional) count
using OutcomeCounts = std::map<std::string, double>;

struct ConfusionTables {
  /// gold internal node → outcome node ids (or UNATTRIBUTED)
  std::map<std::string, OutcomeCounts> internal;
  /// categorical node → gold label → predicted label, NO-PARENT or ABSENT
  std::map<std::string, std::map<std::string, OutcomeCounts>> categorical;
  /// span node → MATCH-SPAN, MIS-SPAN, NO-PARENT or ABSENT
  std::map<std::string, OutcomeCounts> span;

  ConfusionTables& operator+=(const ConfusionTables& other);
};

/// Per gold-active non-root node:
///  - internal: +1 to itself when predicted, else 1/n to each of the n
///    predicted internal nodes absent from gold, or +1 UNATTRIBUTED if n = 0;
///  - categorical: the predicted label, or NO-PARENT / ABSENT;
///  - span: MATCH-SPAN or MIS-SPAN, or NO-PARENT / ABSENT.
ConfusionTables confusion_tables(const std::vector<TreePair>& pairs, const grammar::GrammarSchema& schema);
void add_confusion(ConfusionTables& tables, const TreePair& pair, const grammar::GrammarSchema& schema);

/// Same result as confusion_tables, folded in fixed-size chunks in parallel.
/// Chunks merge in order, so the result does not depend on the thread count.
ConfusionTables confusion_tables_parallel(const std::vector<TreePair>& pairs, const grammar::GrammarSchema& schema);

struct MetricsReport {
  std::size_t examples = 0;
  double tree_accuracy = 0.0;
  PrfReport prf;
  ConfusionTables confusion;
};

MetricsReport evaluate(const std::vector<TreePair>& pairs, const grammar::GrammarSchema& schema);

/// Human-readable report: accuracy, the P/R/F table and each confusion row
/// as `node -> (outcome, count) ...` sorted by descending count.
std::string format_report(const MetricsReport& report);
/// Machine-readable JSON document of the same content.
std::string report_json(const MetricsReport& report, int indent = 2);

}  // namespace actree::eval
