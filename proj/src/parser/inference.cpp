#include "actree/parser/inference.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <queue>
#include <stdexcept>

namespace actree::parser {

using grammar::NodeKind;
using nn::Var;

namespace {

nn::Vector log_softmax(const nn::Matrix& logits) {
  return (logits.array() - nn::log_sum_exp(logits)).matrix();
}

int first_argmax(const nn::Vector& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

/// argmax over s ≤ e of ls[s] + le[e]; first maximum in (s, e) order.
std::pair<grammar::Span, double> best_span(const nn::Vector& ls, const nn::Vector& le) {
  grammar::Span best{0, 0};
  double score = ls(0) + le(0);
  const int t = static_cast<int>(ls.size());
  for (int s = 0; s < t; ++s)
    for (int e = s; e < t; ++e)
      if (ls(s) + le(e) > score) {
        score = ls(s) + le(e);
        best = {s, e};
      }
  return {best, score};
}

}  // namespace

SentenceSession::SentenceSession(const ParserModel& model, const std::vector<std::string>& sentence,
                                 const ForwardOptions& options)
    : model_(&model), graph_(model.store()), options_(options), length_(static_cast<int>(sentence.size())) {
  if (sentence.empty()) throw std::invalid_argument("cannot parse an empty sentence");
  auto rows = model.embedding().lookup(sentence, options.word_dropout, options.rng, options.rng != nullptr);
  Var embedded = nn::embed_sentence(graph_, model.embedding(), rows);
  Var h = nn::encode_sentence(graph_, embedded, model.encoder(), options.dropout, options.rng);
  keys_ = nn::prepare_attention(graph_, h, model.attention());
  if (model.recurrent()) decoder_ = model.decoder().bind(graph_);
  zero_ = graph_.constant(nn::Matrix::Zero(model.config().d, 1));
}

Var SentenceSession::representation(NodeIndex n, Var prev_state, nn::AttentionTrace* trace) {
  Var query = graph_.param(model_->node(n).query);
  if (model_->recurrent()) query = graph_.add(query, prev_state);
  return nn::attend(graph_, query, keys_, trace);
}

Var SentenceSession::next_state(NodeIndex n, Var prev_state, Var parent_state, Var repr, int label) {
  if (!model_->recurrent()) return Var{};
  const int row = std::max(label, 0);
  Var input = graph_.gather_rows(model_->node(n).rec_input, std::span<const int>(&row, 1));
  if (model_->variant() == Variant::sentencerec)
    input = graph_.add(input, options_.zero_representation_input ? graph_.scale(repr, 0.0) : repr);
  return graph_.gru_cell(graph_.vconcat({input, parent_state}), prev_state, decoder_);
}

Var SentenceSession::activation_logit(NodeIndex n, Var repr) {
  return graph_.dot(repr, graph_.param(model_->node(n).activation));
}

Var SentenceSession::label_logits(NodeIndex n, Var repr) {
  return graph_.matmul(graph_.param(model_->node(n).label), repr);
}

Var SentenceSession::start_logits(NodeIndex n, Var repr) {
  return graph_.matmul_tn(keys_.memory, graph_.matmul_tn(graph_.param(model_->node(n).start), repr));
}

Var SentenceSession::end_logits(NodeIndex n, Var repr) {
  return graph_.matmul_tn(keys_.memory, graph_.matmul_tn(graph_.param(model_->node(n).end), repr));
}

namespace {

enum class Objective { log_likelihood, smoothed_loss };

struct GoldWalk {
  SentenceSession& session;
  const ActionTree& gold;
  Objective objective;
  double smoothing = 0.0;
  std::map<NodeIndex, NodeTrace>* trace = nullptr;
  std::vector<Var> terms;

  Var log_prob(Var logits, int target) {
    auto& g = session.graph();
    if (objective == Objective::log_likelihood) return g.log_softmax_at(logits, target);
    return g.smoothed_nll(logits, target, smoothing);
  }

  Var log_bernoulli(Var z, bool active) {
    auto& g = session.graph();
    Var lp = g.log_sigmoid(active ? z : g.scale(z, -1.0));
    return objective == Objective::log_likelihood ? lp : g.scale(lp, -1.0);
  }

  void children(NodeIndex parent, Var parent_state) {
    const auto& schema = session.model().schema();
    Var prev = session.zero_state();
    for (NodeIndex c : schema.children(parent)) {
      const auto& spec = schema.node(c);
      Var r = session.representation(c, prev);
      const bool active = gold.is_active(spec.id);
      NodeTrace* nt = nullptr;
      if (trace) {
        nt = &(*trace)[c];
        nt->representation = session.graph().value(r);
      }
      if (!spec.required) {
        Var z = session.activation_logit(c, r);
        terms.push_back(log_bernoulli(z, active));
        if (nt) nt->p_active = 1.0 / (1.0 + std::exp(-session.graph().scalar_value(z)));
      }
      if (!active) continue;
      int label = -1;
      if (spec.kind == NodeKind::categorical) {
        label = schema.label_index(c, gold.labels.at(spec.id));
        terms.push_back(log_prob(session.label_logits(c, r), label));
      } else if (spec.kind == NodeKind::span) {
        const auto& span = gold.spans.at(spec.id);
        terms.push_back(log_prob(session.start_logits(c, r), span.start));
        terms.push_back(log_prob(session.end_logits(c, r), span.end));
      }
      Var state = session.next_state(c, prev, parent_state, r, label);
      if (spec.kind == NodeKind::internal) children(c, state);
      prev = state;
    }
  }
};

void check_gold(const ParserModel& model, int length, const ActionTree& gold) {
  auto report = grammar::validate_tree(gold, model.schema());
  if (!report.ok)
    throw std::invalid_argument("gold tree is invalid: " + report.violations.front().node_id + " " +
                                report.violations.front().rule);
  if (gold.sentence_length != length) throw std::invalid_argument("gold tree length differs from sentence");
}

}  // namespace

double tree_log_likelihood(const ParserModel& model, const std::vector<std::string>& sentence,
                           const ActionTree& gold, const ForwardOptions& options,
                           std::map<NodeIndex, NodeTrace>* trace) {
  check_gold(model, static_cast<int>(sentence.size()), gold);
  SentenceSession session(model, sentence, options);
  GoldWalk walk{session, gold, Objective::log_likelihood, 0.0, trace, {}};
  walk.children(model.schema().root(), session.zero_state());
  if (walk.terms.empty()) return 0.0;
  return session.graph().scalar_value(session.graph().sum(walk.terms));
}

Var training_loss(SentenceSession& session, const ActionTree& gold, double smoothing) {
  check_gold(session.model(), session.length(), gold);
  GoldWalk walk{session, gold, Objective::smoothed_loss, smoothing, nullptr, {}};
  walk.children(session.model().schema().root(), session.zero_state());
  if (walk.terms.empty()) return session.graph().scalar(0.0);
  return session.graph().sum(walk.terms);
}

namespace {

struct GreedyWalk {
  SentenceSession& session;
  ActionTree tree;
  double score = 0.0;
  std::vector<NodeDiagnostic>* diagnostics = nullptr;

  void children(NodeIndex parent, Var parent_state) {
    const auto& schema = session.model().schema();
    auto& g = session.graph();
    Var prev = session.zero_state();
    for (NodeIndex c : schema.children(parent)) {
      const auto& spec = schema.node(c);
      Var r = session.representation(c, prev);
      NodeDiagnostic diag;
      diag.node = spec.id;
      bool active = true;
      if (!spec.required) {
        const double z = g.scalar_value(session.activation_logit(c, r));
        const double on = nn::log_sigmoid(z), off = nn::log_sigmoid(-z);
        active = on > off;
        score += active ? on : off;
        diag.p_active = std::exp(on);
      }
      if (!active) {
        if (diagnostics) diagnostics->push_back(diag);
        continue;
      }
      tree.active.insert(spec.id);
      int label = -1;
      if (spec.kind == NodeKind::categorical) {
        nn::Vector lp = log_softmax(g.value(session.label_logits(c, r)));
        label = first_argmax(lp);
        score += lp(label);
        tree.labels[spec.id] = spec.labels[label];
        diag.label = spec.labels[label];
        diag.label_prob = std::exp(lp(label));
      } else if (spec.kind == NodeKind::span) {
        auto [span, s] = best_span(log_softmax(g.value(session.start_logits(c, r))),
                                   log_softmax(g.value(session.end_logits(c, r))));
        score += s;
        tree.spans[spec.id] = span;
        diag.span = span;
        diag.span_prob = std::exp(s);
      }
      if (diagnostics) diagnostics->push_back(diag);
      Var state = session.next_state(c, prev, parent_state, r, label);
      if (spec.kind == NodeKind::internal) children(c, state);
      prev = state;
    }
  }
};

void settle(const grammar::GrammarSchema& schema, Hypothesis& h) {
  while (!h.stack.empty() && h.stack.back().next_child >= schema.children(h.stack.back().parent).size())
    h.stack.pop_back();
}

}  // namespace

ScoredTree greedy_decode(const ParserModel& model, const std::vector<std::string>& sentence,
                         std::vector<NodeDiagnostic>* diagnostics, const ForwardOptions& options) {
  SentenceSession session(model, sentence, options);
  GreedyWalk walk{session, grammar::make_tree(model.schema(), session.length()), 0.0, diagnostics};
  walk.children(model.schema().root(), session.zero_state());
  return {std::move(walk.tree), walk.score};
}

Hypothesis initial_hypothesis(SentenceSession& session) {
  Hypothesis h;
  const auto& schema = session.model().schema();
  h.tree = grammar::make_tree(schema, session.length());
  h.stack.push_back({schema.root(), session.zero_state(), 0, session.zero_state()});
  settle(schema, h);
  return h;
}

std::vector<Hypothesis> expand(SentenceSession& session, const Hypothesis& hyp) {
  if (hyp.finished()) throw std::logic_error("expanding a finished hypothesis");
  const auto& schema = session.model().schema();
  auto& g = session.graph();
  const auto& frame = hyp.stack.back();
  const NodeIndex c = schema.children(frame.parent)[frame.next_child];
  const auto& spec = schema.node(c);
  std::vector<Hypothesis> out;

  // Closes the decision for `c`: records its state and moves to the next node.
  auto finish_node = [&](Hypothesis& h, Var repr, int label) {
    auto& f = h.stack.back();
    Var state = session.next_state(c, f.prev_state, f.parent_state, repr, label);
    f.prev_state = state;
    ++f.next_child;
    h.pending = grammar::kNoNode;
    h.pending_repr = Var{};
    if (spec.kind == NodeKind::internal) h.stack.push_back({c, state, 0, session.zero_state()});
    settle(schema, h);
  };

  if (hyp.pending == grammar::kNoNode) {
    Var r = session.representation(c, frame.prev_state);
    auto activate = [&](double step) {
      Hypothesis h = hyp;
      h.score += step;
      h.tree.active.insert(spec.id);
      if (spec.kind == NodeKind::internal) {
        finish_node(h, r, -1);
      } else {
        h.pending = c;
        h.pending_repr = r;
      }
      out.push_back(std::move(h));
    };
    if (spec.required) {
      activate(0.0);
      return out;
    }
    const double z = g.scalar_value(session.activation_logit(c, r));
    Hypothesis off = hyp;
    off.score += nn::log_sigmoid(-z);
    ++off.stack.back().next_child;
    settle(schema, off);
    out.push_back(std::move(off));
    activate(nn::log_sigmoid(z));
    return out;
  }

  if (spec.kind == NodeKind::categorical) {
    nn::Vector lp = log_softmax(g.value(session.label_logits(c, hyp.pending_repr)));
    for (int k = 0; k < lp.size(); ++k) {
      Hypothesis h = hyp;
      h.score += lp(k);
      h.tree.labels[spec.id] = spec.labels[k];
      finish_node(h, hyp.pending_repr, k);
      out.push_back(std::move(h));
    }
  } else {
    nn::Vector ls = log_softmax(g.value(session.start_logits(c, hyp.pending_repr)));
    nn::Vector le = log_softmax(g.value(session.end_logits(c, hyp.pending_repr)));
    // The end state does not depend on the chosen range, so it is shared.
    Hypothesis base = hyp;
    finish_node(base, hyp.pending_repr, -1);
    for (int s = 0; s < ls.size(); ++s)
      for (int e = s; e < le.size(); ++e) {
        Hypothesis h = base;
        h.score += ls(s) + le(e);
        h.tree.spans[spec.id] = {s, e};
        out.push_back(std::move(h));
      }
  }
  return out;
}

std::vector<ScoredTree> beam_decode(const ParserModel& model, const std::vector<std::string>& sentence,
                                    std::size_t width, const ForwardOptions& options) {
  if (width < 1) throw std::invalid_argument("beam width must be at least 1");
  SentenceSession session(model, sentence, options);
  // Slot k takes the best unchosen successor of the hypotheses in slots
  // 1..k, so the first w slots never depend on later ones and a width-w
  // beam is a prefix of every wider beam.
  std::vector<Hypothesis> beam{initial_hypothesis(session)};
  struct Candidate {
    double score;
    std::size_t order;
    bool operator<(const Candidate& o) const { return score < o.score || (score == o.score && order > o.order); }
  };
  while (std::any_of(beam.begin(), beam.end(), [](const Hypothesis& h) { return !h.finished(); })) {
    std::vector<Hypothesis> pool;
    std::priority_queue<Candidate> available;
    std::vector<Hypothesis> next;
    std::size_t queued = 0;
    for (std::size_t k = 0; k < width; ++k) {
      if (k < beam.size()) {
        auto& h = beam[k];
        if (h.finished()) {
          pool.push_back(std::move(h));
        } else {
          for (auto& succ : expand(session, h)) pool.push_back(std::move(succ));
        }
        for (; queued < pool.size(); ++queued) available.push({pool[queued].score, queued});
      }
      if (available.empty()) break;
      next.push_back(std::move(pool[available.top().order]));
      available.pop();
    }
    beam = std::move(next);
  }
  std::stable_sort(beam.begin(), beam.end(), [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
  std::vector<ScoredTree> out;
  out.reserve(beam.size());
  for (auto& h : beam) out.push_back({std::move(h.tree), h.score});
  return out;
}

namespace {

ScoredTree decode_one(const ParserModel& model, const std::vector<std::string>& sentence, std::size_t width) {
  if (width <= 1) return greedy_decode(model, sentence);
  return beam_decode(model, sentence, width).front();
}

}  // namespace

std::vector<ScoredTree> decode_serial(const ParserModel& model, const std::vector<std::vector<std::string>>& sentences,
                                      std::size_t width) {
  std::vector<ScoredTree> out(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) out[i] = decode_one(model, sentences[i], width);
  return out;
}

std::vector<ScoredTree> decode_parallel(const ParserModel& model,
                                        const std::vector<std::vector<std::string>>& sentences, std::size_t width) {
  std::vector<ScoredTree> out(sentences.size());
  std::vector<std::exception_ptr> errors(sentences.size());
  const auto n = static_cast<long>(sentences.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < n; ++i) {
    try {
      out[i] = decode_one(model, sentences[i], width);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace actree::parser
