#include "actree/corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "actree/grammar/document.hpp"
#include "actree/util/text.hpp"

namespace actree::corpus {

using grammar::ActionTree;
using grammar::GrammarSchema;

std::string_view to_string(Source source) {
  switch (source) {
    case Source::generated: return "generated";
    case Source::rephrase: return "rephrase";
    case Source::prompt: return "prompt";
    case Source::interactive: return "interactive";
  }
  return "?";
}

Source parse_source(std::string_view text) {
  if (text == "generated") return Source::generated;
  if (text == "rephrase") return Source::rephrase;
  if (text == "prompt") return Source::prompt;
  if (text == "interactive") return Source::interactive;
  throw std::invalid_argument("unknown example source '" + std::string(text) + "'");
}

CorpusError::CorpusError(std::size_t line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

std::vector<Example> parse_examples(std::string_view text, const GrammarSchema& schema, Source source) {
  std::vector<Example> out;
  std::size_t line_no = 0;
  for (const auto& raw : util::split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (util::trim(line).empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw CorpusError(line_no, "expected sentence<TAB>tree");
    Example e;
    e.source = source;
    e.sentence = grammar::tokenize(line.substr(0, tab));
    if (e.sentence.empty()) throw CorpusError(line_no, "empty sentence");
    try {
      e.tree = grammar::deserialize_tree(line.substr(tab + 1), schema, static_cast<int>(e.sentence.size()));
    } catch (const std::exception& ex) {
      throw CorpusError(line_no, ex.what());
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Example> read_examples(const std::filesystem::path& path, const GrammarSchema& schema, Source source) {
  try {
    return parse_examples(util::read_file(path), schema, source);
  } catch (const CorpusError& e) {
    throw CorpusError(e.line(), path.string() + ": " + e.what());
  }
}

std::string format_examples(const std::vector<Example>& examples, const GrammarSchema& schema,
                            const std::vector<std::string>& comments) {
  std::ostringstream out;
  for (const auto& c : comments) out << "# " << c << '\n';
  for (const auto& e : examples) out << util::join(e.sentence, " ") << '\t' << grammar::serialize_tree(e.tree, schema) << '\n';
  return out.str();
}

void write_examples(const std::filesystem::path& path, const std::vector<Example>& examples,
                    const GrammarSchema& schema, const std::vector<std::string>& comments) {
  util::write_file(path, format_examples(examples, schema, comments));
}

RephraseError::RephraseError(std::string node_id, const std::string& message)
    : std::runtime_error(node_id + ": " + message), node_id_(std::move(node_id)) {}

Example substitute_rephrase_spans(const Example& original, const std::vector<std::string>& rephrased,
                                  const SpanWordMap& map, const GrammarSchema& schema) {
  if (rephrased.empty()) throw RephraseError("", "empty rephrased sentence");
  for (const auto& [id, span] : original.tree.spans)
    if (!map.contains(id)) throw RephraseError(id, "span node has no highlighted words");
  const int t = static_cast<int>(rephrased.size());
  for (const auto& [id, span] : map) {
    if (!original.tree.spans.contains(id)) throw RephraseError(id, "not an active span node of the original tree");
    if (span.start < 0 || span.start > span.end || span.end >= t)
      throw RephraseError(id, "range [" + std::to_string(span.start) + "," + std::to_string(span.end) +
                                  "] outside the rephrased sentence");
  }
  Example out = original;
  out.sentence = rephrased;
  out.source = Source::rephrase;
  out.tree.sentence_length = t;
  for (const auto& [id, span] : map) out.tree.spans[id] = span;
  auto report = grammar::validate_tree(out.tree, schema);
  if (!report.ok) throw RephraseError(report.violations.front().node_id, report.violations.front().message);
  return out;
}

std::optional<ActionTree> agreement_filter(const std::array<ActionTree, 3>& trees) {
  if (grammar::tree_equal(trees[0], trees[1]) || grammar::tree_equal(trees[0], trees[2])) return trees[0];
  if (grammar::tree_equal(trees[1], trees[2])) return trees[1];
  return std::nullopt;
}

namespace {

std::optional<std::string> reference_object_id(const GrammarSchema& schema) {
  if (auto idx = schema.child_by_key(schema.root(), "action_reference_object")) return schema.node(*idx).id;
  return std::nullopt;
}

}  // namespace

std::string action_category(const ActionTree& tree, const GrammarSchema& schema) {
  auto label = grammar::head_label(tree, schema);
  if (label != "Build") return label;
  auto ref = reference_object_id(schema);
  return std::string(ref && tree.is_active(*ref) ? kBuildCopy : kBuildNew);
}

ActionHistogram action_frequency_stats(const std::vector<Example>& examples, const GrammarSchema& schema) {
  ActionHistogram h;
  if (auto head = schema.head()) {
    for (const auto& label : schema.node(*head).labels) {
      if (label == "Build") {
        h[std::string(kBuildNew)] = 0;
        h[std::string(kBuildCopy)] = 0;
      } else {
        h[label] = 0;
      }
    }
  }
  for (const auto& e : examples) ++h[action_category(e.tree, schema)];
  return h;
}

std::string format_histogram(const ActionHistogram& histogram) {
  std::size_t total = 0, width = 0;
  for (const auto& [k, v] : histogram) {
    total += v;
    width = std::max(width, k.size());
  }
  std::ostringstream out;
  for (const auto& [k, v] : histogram) {
    out << k << std::string(width - k.size() + 2, ' ') << v;
    if (total) out << "  (" << std::fixed << std::setprecision(4) << static_cast<double>(v) / total << ")";
    out << '\n';
  }
  out << "total" << std::string(width >= 5 ? width - 3 : 2, ' ') << total << '\n';
  return out.str();
}

ActionDistribution parse_distribution(std::string_view text, const GrammarSchema& schema) {
  auto head = schema.head();
  if (!head) throw SamplerConfigError("schema has no action type node");
  const auto& labels = schema.node(*head).labels;
  ActionDistribution out;
  double total = 0.0;
  std::size_t line_no = 0;
  for (const auto& raw : util::split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto fields = util::split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() != 2) throw CorpusError(line_no, "expected `ActionType probability`");
    if (std::find(labels.begin(), labels.end(), fields[0]) == labels.end())
      throw CorpusError(line_no, "unknown action type '" + fields[0] + "'");
    double p = 0.0;
    try {
      std::size_t used = 0;
      p = std::stod(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw CorpusError(line_no, "bad probability '" + fields[1] + "'");
    }
    if (!(p >= 0.0)) throw CorpusError(line_no, "negative probability");
    if (out.contains(fields[0])) throw CorpusError(line_no, "duplicate action type '" + fields[0] + "'");
    out[fields[0]] = p;
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw SamplerConfigError("action distribution sums to " + std::to_string(total) + ", not 1");
  return out;
}

ActionDistribution load_distribution(const std::filesystem::path& path, const GrammarSchema& schema) {
  return parse_distribution(util::read_file(path), schema);
}

MixedSampler::MixedSampler(std::vector<SamplerPool> pools, const ActionDistribution& target,
                           const GrammarSchema& schema, std::uint64_t seed)
    : rng_(seed) {
  if (pools.empty()) throw SamplerConfigError("sampler needs at least one pool");
  for (auto& p : pools) {
    Pool pool;
    pool.name = p.name;
    pool.examples = std::move(p.examples);
    if (pool.examples.empty()) throw SamplerConfigError("pool '" + pool.name + "' is empty");
    std::map<std::string, std::vector<std::size_t>> by_type;
    for (std::size_t i = 0; i < pool.examples.size(); ++i)
      by_type[grammar::head_label(pool.examples[i].tree, schema)].push_back(i);
    std::vector<std::pair<std::string, double>> weights;
    if (target.empty()) {
      for (const auto& [type, members] : by_type) weights.emplace_back(type, static_cast<double>(members.size()));
    } else {
      for (const auto& [type, p] : target) {
        if (p <= 0.0) continue;
        if (!by_type.contains(type))
          throw SamplerConfigError("pool '" + pool.name + "' has no examples of action type " + type);
        weights.emplace_back(type, p);
      }
    }
    if (weights.empty()) throw SamplerConfigError("target distribution has no positive entries");
    double total = 0.0;
    for (const auto& [type, w] : weights) total += w;
    double running = 0.0;
    for (const auto& [type, w] : weights) {
      running += w / total;
      pool.types.push_back(type);
      pool.cumulative.push_back(running);
      Subset subset;
      subset.order = by_type[type];
      std::shuffle(subset.order.begin(), subset.order.end(), rng_);
      pool.subsets.push_back(std::move(subset));
    }
    pool.cumulative.back() = 1.0;
    pools_.push_back(std::move(pool));
  }
}

const Example& MixedSampler::next() {
  last_pool_ = static_cast<std::size_t>(draws_ % pools_.size());
  ++draws_;
  auto& pool = pools_[last_pool_];
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
  const auto k = static_cast<std::size_t>(
      std::upper_bound(pool.cumulative.begin(), pool.cumulative.end(), u) - pool.cumulative.begin());
  auto& subset = pool.subsets[std::min(k, pool.subsets.size() - 1)];
  if (subset.cursor == subset.order.size()) {
    std::shuffle(subset.order.begin(), subset.order.end(), rng_);
    subset.cursor = 0;
  }
  return pool.examples[subset.order[subset.cursor++]];
}

void MixedSampler::skip(std::uint64_t count) {
  for (std::uint64_t i = 0; i < count; ++i) next();
}

}  // namespace actree::corpus
