#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "actree/grammar/schema.hpp"
#include "actree/grammar/tree.hpp"
#include "actree/parser/model.hpp"

namespace actree::testing {

// Plain-Eigen evaluation of the tree log-likelihood, written against the
// model equations and parameter names rather than the graph code. Nodes are
// scored in schema index order; decoder states are computed on demand.
class ReferenceParser {
 public:
  using Matrix = Eigen::MatrixXd;
  using Vector = Eigen::VectorXd;

  ReferenceParser(const parser::ParserModel& model, const std::vector<std::string>& sentence)
      : model_(model), schema_(model.schema()), d_(model.config().d) {
    const auto& vocab = model.embedding().vocabulary();
    const Matrix& pre = param("embedding/pretrained");
    const Matrix& fre = param("embedding/free");
    const int t = static_cast<int>(sentence.size());
    Matrix x(pre.cols() + fre.cols(), t);
    for (int i = 0; i < t; ++i) {
      int row = 0;
      for (std::size_t v = 1; v < vocab.size(); ++v)
        if (vocab[v] == sentence[i]) row = static_cast<int>(v);
      x.col(i) << pre.row(row).transpose(), fre.row(row).transpose();
    }
    for (int l = 0; l < model.config().encoder_layers; ++l) {
      const std::string prefix = "encoder/layer" + std::to_string(l);
      Matrix next(2 * d_, t);
      Vector h = Vector::Zero(d_);
      for (int i = 0; i < t; ++i) {
        h = gru(prefix + "/forward", x.col(i), h);
        next.block(0, i, d_, 1) = h;
      }
      h = Vector::Zero(d_);
      for (int i = t - 1; i >= 0; --i) {
        h = gru(prefix + "/backward", x.col(i), h);
        next.block(d_, i, d_, 1) = h;
      }
      x = next;
    }
    memory_ = param("encoder/proj_w") * x;
    memory_.colwise() += param("encoder/proj_b").col(0);
  }

  const Matrix& memory() const { return memory_; }

  Vector attend(const Vector& query) const {
    Vector out = query;
    for (int k = 0; k < model_.config().heads; ++k) {
      Vector scores = (query.transpose() * param("attention/head" + std::to_string(k)) * memory_).transpose();
      scores /= std::sqrt(static_cast<double>(d_));
      Vector w = (scores.array() - scores.maxCoeff()).exp().matrix();
      w /= w.sum();
      out += memory_ * w;
    }
    return out;
  }

  double log_likelihood(const grammar::ActionTree& gold) {
    gold_ = &gold;
    after_.clear();
    double total = 0.0;
    for (grammar::NodeIndex n = 0; n < schema_.size(); ++n) {
      if (n == schema_.root()) continue;
      const auto& spec = schema_.node(n);
      if (!gold.is_active(schema_.node(schema_.parent(n)).id)) continue;
      const bool active = gold.is_active(spec.id);
      const Vector r = representation(n);
      if (!spec.required) {
        const double z = r.dot(param(prefix(n) + "/activation").col(0));
        total += log_sigmoid(active ? z : -z);
      }
      if (!active) continue;
      if (spec.kind == grammar::NodeKind::categorical) {
        const Vector logits = param(prefix(n) + "/label") * r;
        total += log_softmax(logits, schema_.label_index(n, gold.labels.at(spec.id)));
      } else if (spec.kind == grammar::NodeKind::span) {
        const auto& span = gold.spans.at(spec.id);
        const Vector ls = memory_.transpose() * (param(prefix(n) + "/start").transpose() * r);
        const Vector le = memory_.transpose() * (param(prefix(n) + "/end").transpose() * r);
        total += log_softmax(ls, span.start) + log_softmax(le, span.end);
      }
    }
    return total;
  }

  // r_n for the node under the current gold tree.
  Vector representation(grammar::NodeIndex n) {
    Vector q = param(prefix(n) + "/query").col(0);
    if (model_.recurrent()) q += prev_state(n);
    return attend(q);
  }

  static double log_sigmoid(double z) { return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

  static double log_softmax(const Vector& logits, int target) {
    const double m = logits.maxCoeff();
    return logits(target) - m - std::log((logits.array() - m).exp().sum());
  }

 private:
  const parser::ParserModel& model_;
  const grammar::GrammarSchema& schema_;
  int d_;
  Matrix memory_;
  const grammar::ActionTree* gold_ = nullptr;
  std::map<grammar::NodeIndex, Vector> after_;

  const Matrix& param(const std::string& name) const { return model_.store().value(model_.store().id(name)); }
  std::string prefix(grammar::NodeIndex n) const { return "node/" + schema_.node(n).id; }

  static double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

  Vector gru(const std::string& name, const Vector& x, const Vector& h) const {
    const Vector gi = param(name + "/w_input") * x + param(name + "/b_input").col(0);
    const Vector gh = param(name + "/w_hidden") * h + param(name + "/b_hidden").col(0);
    const auto hd = h.size();
    Vector out(hd);
    for (Eigen::Index i = 0; i < hd; ++i) {
      const double r = sigmoid(gi(i) + gh(i));
      const double z = sigmoid(gi(hd + i) + gh(hd + i));
      const double c = std::tanh(gi(2 * hd + i) + r * gh(2 * hd + i));
      out(i) = (1.0 - z) * c + z * h(i);
    }
    return out;
  }

  // State after the nearest earlier active sibling, zero for a first child.
  Vector prev_state(grammar::NodeIndex n) {
    const auto siblings = schema_.children(schema_.parent(n));
    Vector state = Vector::Zero(d_);
    for (auto s : siblings) {
      if (s == n) break;
      if (gold_->is_active(schema_.node(s).id)) state = state_after(s);
    }
    return state;
  }

  Vector state_after(grammar::NodeIndex n) {
    if (auto it = after_.find(n); it != after_.end()) return it->second;
    const auto& spec = schema_.node(n);
    const Matrix& v = param(prefix(n) + "/rec_input");
    int row = 0;
    if (spec.kind == grammar::NodeKind::categorical) row = schema_.label_index(n, gold_->labels.at(spec.id));
    Vector input = v.row(row).transpose();
    if (model_.variant() == parser::Variant::sentencerec) input += representation(n);
    const auto parent = schema_.parent(n);
    Vector parent_state = parent == schema_.root() ? Vector::Zero(d_) : state_after(parent);
    Vector x(2 * d_);
    x << input, parent_state;
    Vector out = gru("decoder", x, prev_state(n));
    after_[n] = out;
    return out;
  }
};

}  // namespace actree::testing
