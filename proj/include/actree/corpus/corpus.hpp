#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "actree/corpus/example.hpp"
#include "actree/grammar/schema.hpp"
#include "actree/grammar/tree.hpp"

namespace actree::corpus {

class CorpusError : public std::runtime_error {
 public:
  CorpusError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// One example per line: `sentence<TAB>tree-document`. Lines starting with
/// '#' are comments; blank lines are skipped. Sentences are tokenized on
/// read, and each tree must validate against its sentence length.
std::vector<Example> parse_examples(std::string_view text, const grammar::GrammarSchema& schema,
                                    Source source = Source::generated);
std::vector<Example> read_examples(const std::filesystem::path& path, const grammar::GrammarSchema& schema,
                                   Source source = Source::generated);

/// `comments` lines are written first, each prefixed with "# ".
std::string format_examples(const std::vector<Example>& examples, const grammar::GrammarSchema& schema,
                            const std::vector<std::string>& comments = {});
void write_examples(const std::filesystem::path& path, const std::vector<Example>& examples,
                    const grammar::GrammarSchema& schema, const std::vector<std::string>& comments = {});

/// Span node id → its token range in the rephrased sentence.
using SpanWordMap = std::map<std::string, grammar::Span>;

class RephraseError : public std::runtime_error {
 public:
  RephraseError(std::string node_id, const std::string& message);
  const std::string& node_id() const noexcept { return node_id_; }

 private:
  std::string node_id_;
};

/// Carries `original`'s tree over to `rephrased`, replacing every span by
/// its mapped range. The map must cover exactly the active span nodes.
Example substitute_rephrase_spans(const Example& original, const std::vector<std::string>& rephrased,
                                  const SpanWordMap& map, const grammar::GrammarSchema& schema);

/// The tree given by at least two of the three annotations, if any.
std::optional<grammar::ActionTree> agreement_filter(const std::array<grammar::ActionTree, 3>& trees);

/// Counts per action type; Build splits into Build-New and Build-Copy by
/// whether the action reference object is active.
using ActionHistogram = std::map<std::string, std::size_t>;

inline constexpr std::string_view kBuildNew = "Build-New";
inline constexpr std::string_view kBuildCopy = "Build-Copy";

/// Histogram key of one tree.
std::string action_category(const grammar::ActionTree& tree, const grammar::GrammarSchema& schema);
ActionHistogram action_frequency_stats(const std::vector<Example>& examples, const grammar::GrammarSchema& schema);
std::string format_histogram(const ActionHistogram& histogram);

/// Probability per action type (head label).
using ActionDistribution = std::map<std::string, double>;

/// Lines of `ActionType probability`; '#' starts a comment. Probabilities
/// must sum to 1 within 1e-6 and name labels of the head node.
ActionDistribution parse_distribution(std::string_view text, const grammar::GrammarSchema& schema);
ActionDistribution load_distribution(const std::filesystem::path& path, const grammar::GrammarSchema& schema);

class SamplerConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SamplerPool {
  std::string name;
  std::vector<Example> examples;
};

/// Alternates strictly between pools. Within a pool it draws an action type
/// from the target distribution, then the next unseen example of that
/// (pool, type) subset; an exhausted subset is reshuffled and restarted.
class MixedSampler {
 public:
  /// An empty `target` means each pool uses its own empirical type mix.
  MixedSampler(std::vector<SamplerPool> pools, const ActionDistribution& target,
               const grammar::GrammarSchema& schema, std::uint64_t seed);

  const Example& next();
  /// Name of the pool that produced the last example.
  const std::string& last_pool() const { return pools_.at(last_pool_).name; }
  std::uint64_t draws() const noexcept { return draws_; }
  void skip(std::uint64_t count);

 private:
  struct Subset {
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
  };
  struct Pool {
    std::string name;
    std::vector<Example> examples;
    std::vector<std::string> types;
    std::vector<double> cumulative;
    std::vector<Subset> subsets;
  };
  std::vector<Pool> pools_;
  std::mt19937_64 rng_;
  std::uint64_t draws_ = 0;
  std::size_t last_pool_ = 0;
};

}  // namespace actree::corpus
