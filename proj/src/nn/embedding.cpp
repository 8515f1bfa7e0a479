#include "actree/nn/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "actree/util/digest.hpp"

namespace actree::nn {

PretrainedVectors load_pretrained(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings " + path.string());
  PretrainedVectors out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    double v;
    while (fields >> v) values.push_back(v);
    if (!fields.eof())
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": bad number");
    if (out.dim == 0) out.dim = static_cast<int>(values.size());
    if (values.empty() || static_cast<int>(values.size()) != out.dim)
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(out.dim) + " values");
    out.vectors[token] = Eigen::Map<Vector>(values.data(), out.dim);
  }
  return out;
}

void EmbeddingTable::index() {
  rows_.clear();
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) rows_.emplace(vocabulary_[i], static_cast<int>(i));
}

EmbeddingTable EmbeddingTable::create(ParameterStore& store, std::vector<std::string> vocabulary,
                                      const PretrainedVectors* pretrained, int pretrained_dim, int free_dim) {
  if (vocabulary.empty() || !vocabulary.front().empty())
    throw std::invalid_argument("vocabulary must start with the empty unknown token");
  EmbeddingTable t;
  t.vocabulary_ = std::move(vocabulary);
  t.index();
  if (t.rows_.size() != t.vocabulary_.size()) throw std::invalid_argument("duplicate vocabulary entry");
  if (pretrained) pretrained_dim = pretrained->dim;
  t.pretrained_dim_ = pretrained_dim;
  t.free_dim_ = free_dim;
  const auto rows = static_cast<Eigen::Index>(t.vocabulary_.size());
  Matrix fixed = Matrix::Zero(rows, pretrained_dim);
  for (Eigen::Index i = 1; i < rows; ++i) {
    const auto& token = t.vocabulary_[i];
    if (pretrained) {
      auto it = pretrained->vectors.find(token);
      if (it != pretrained->vectors.end()) fixed.row(i) = it->second.transpose();
    } else {
      std::mt19937_64 rng(util::fnv1a(token));
      std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(std::max(pretrained_dim, 1)));
      for (int j = 0; j < pretrained_dim; ++j) fixed(i, j) = n(rng);
    }
  }
  t.pretrained_ = store.add("embedding/pretrained", std::move(fixed), false);
  t.free_ = store.add("embedding/free", Matrix::Zero(rows, free_dim));
  return t;
}

EmbeddingTable EmbeddingTable::find(const ParameterStore& store, std::vector<std::string> vocabulary) {
  EmbeddingTable t;
  t.vocabulary_ = std::move(vocabulary);
  t.index();
  t.pretrained_ = store.id("embedding/pretrained");
  t.free_ = store.id("embedding/free");
  t.pretrained_dim_ = static_cast<int>(store.value(t.pretrained_).cols());
  t.free_dim_ = static_cast<int>(store.value(t.free_).cols());
  if (store.value(t.pretrained_).rows() != static_cast<Eigen::Index>(t.vocabulary_.size()))
    throw std::runtime_error("vocabulary does not match embedding table");
  return t;
}

int EmbeddingTable::row(const std::string& token) const {
  auto it = rows_.find(token);
  return it == rows_.end() ? kUnknown : it->second;
}

std::vector<int> EmbeddingTable::lookup(const std::vector<std::string>& sentence, double word_dropout,
                                        std::mt19937_64* rng, bool training) const {
  if (word_dropout < 0.0 || word_dropout >= 1.0) throw std::invalid_argument("word dropout must be in [0,1)");
  std::vector<int> out;
  out.reserve(sentence.size());
  const bool drop = training && word_dropout > 0.0 && rng != nullptr;
  std::bernoulli_distribution replace(drop ? word_dropout : 0.0);
  for (const auto& token : sentence) {
    int r = row(token);
    if (drop && replace(*rng)) r = kUnknown;
    out.push_back(r);
  }
  return out;
}

Var embed_sentence(Graph& g, const EmbeddingTable& table, const std::vector<int>& rows) {
  if (table.free_dim() == 0) return g.gather_rows(table.pretrained_id(), rows);
  if (table.pretrained_dim() == 0) return g.gather_rows(table.free_id(), rows);
  return g.vconcat({g.gather_rows(table.pretrained_id(), rows), g.gather_rows(table.free_id(), rows)});
}

}  // namespace actree::nn
