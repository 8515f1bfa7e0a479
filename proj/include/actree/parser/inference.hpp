#pragma once

#include <cstddef>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "actree/grammar/tree.hpp"
#include "actree/nn/graph.hpp"
#include "actree/nn/layers.hpp"
#include "actree/parser/model.hpp"

namespace actree::parser {

using grammar::ActionTree;
using grammar::NodeIndex;

struct ForwardOptions {
  double dropout = 0.0;
  double word_dropout = 0.0;
  std::mt19937_64* rng = nullptr;  // null disables both dropouts
  /// SentenceRec only: the representation enters the recurrent input scaled by 0.
  bool zero_representation_input = false;
};

/// A sentence encoded on its own graph, with the per-node scoring functions
/// of the model. Every call appends to the graph, so results stay
/// differentiable until the session is destroyed.
class SentenceSession {
 public:
  SentenceSession(const ParserModel& model, const std::vector<std::string>& sentence,
                  const ForwardOptions& options = {});

  const ParserModel& model() const noexcept { return *model_; }
  nn::Graph& graph() noexcept { return graph_; }
  int length() const noexcept { return length_; }
  nn::Var memory() const noexcept { return keys_.memory; }
  nn::Var zero_state() const noexcept { return zero_; }

  /// r_n. `prev_state` is the state after the previous sibling (zero for a
  /// first child); ignored by the independent variant.
  nn::Var representation(NodeIndex n, nn::Var prev_state, nn::AttentionTrace* trace = nullptr);
  /// g after an active node; `label` selects the v' row for categoricals.
  /// Returns an invalid Var for the independent variant.
  nn::Var next_state(NodeIndex n, nn::Var prev_state, nn::Var parent_state, nn::Var repr, int label);

  nn::Var activation_logit(NodeIndex n, nn::Var repr);  // ⟨r_n, p_n⟩
  nn::Var label_logits(NodeIndex n, nn::Var repr);      // M^c_n r_n
  nn::Var start_logits(NodeIndex n, nn::Var repr);      // r_nᵀ M^s_n H
  nn::Var end_logits(NodeIndex n, nn::Var repr);        // r_nᵀ M^e_n H

 private:
  const ParserModel* model_;
  nn::Graph graph_;
  ForwardOptions options_;
  int length_ = 0;
  nn::AttentionKeys keys_;
  nn::GruVars decoder_;
  nn::Var zero_;
};

/// Values recorded for every node the traversal visits.
struct NodeTrace {
  nn::Vector representation;
  double p_active = 1.0;  // 1 for required nodes
};

/// L = Σ a_π(n) log p(a_n) + Σ a_n log p(c_n) + Σ a_n (log p(s_n) + log p(e_n)).
/// Throws std::invalid_argument when `gold` does not validate.
double tree_log_likelihood(const ParserModel& model, const std::vector<std::string>& sentence,
                           const ActionTree& gold, const ForwardOptions& options = {},
                           std::map<NodeIndex, NodeTrace>* trace = nullptr);

/// −L with label smoothing `smoothing` on the softmax terms, as a scalar on
/// the session graph.
nn::Var training_loss(SentenceSession& session, const ActionTree& gold, double smoothing);

struct ScoredTree {
  ActionTree tree;
  double log_prob = 0.0;
};

struct NodeDiagnostic {
  std::string node;
  double p_active = 1.0;
  std::string label;
  double label_prob = 0.0;
  grammar::Span span;
  double span_prob = 0.0;
};

/// Decides nodes in DFS order, skipping inactive subtrees. A node is active
/// iff log p(a) > log(1 − p(a)); spans take the best (s ≤ e) pair.
ScoredTree greedy_decode(const ParserModel& model, const std::vector<std::string>& sentence,
                         std::vector<NodeDiagnostic>* diagnostics = nullptr, const ForwardOptions& options = {});

/// Partial tree plus the traversal position in DFS order.
struct Hypothesis {
  struct Frame {
    NodeIndex parent = grammar::kNoNode;
    nn::Var parent_state;
    std::size_t next_child = 0;
    nn::Var prev_state;
  };
  ActionTree tree;
  double score = 0.0;
  std::vector<Frame> stack;
  NodeIndex pending = grammar::kNoNode;  // active node awaiting its label or span
  nn::Var pending_repr;

  bool finished() const noexcept { return stack.empty(); }
};

Hypothesis initial_hypothesis(SentenceSession& session);
/// Successors for the next single decision (activation, then label or span),
/// in a fixed order: inactive before active, labels in vocabulary order,
/// spans in lexicographic (s, e) order.
std::vector<Hypothesis> expand(SentenceSession& session, const Hypothesis& hyp);

/// Keeps `width` hypotheses after every decision. Slot k holds the best
/// successor of slots 1..k not already taken, which makes the beams nested
/// across widths: the best score never decreases as the width grows. Returns
/// finished trees sorted by descending log-probability.
std::vector<ScoredTree> beam_decode(const ParserModel& model, const std::vector<std::string>& sentence,
                                    std::size_t width, const ForwardOptions& options = {});

/// Best tree for each sentence; greedy when width is 1.
std::vector<ScoredTree> decode_serial(const ParserModel& model, const std::vector<std::vector<std::string>>& sentences,
                                      std::size_t width = 1);
std::vector<ScoredTree> decode_parallel(const ParserModel& model,
                                        const std::vector<std::vector<std::string>>& sentences,
                                        std::size_t width = 1);

}  // namespace actree::parser
