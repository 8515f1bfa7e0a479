#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "actree/corpus/example.hpp"
#include "actree/grammar/schema.hpp"

namespace actree::templates {

class TemplateParseError : public std::runtime_error {
 public:
  TemplateParseError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Raised for a template or object that does not compose into valid trees;
/// `id()` names it.
class TemplateError : public std::runtime_error {
 public:
  TemplateError(std::string id, const std::string& message);
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

/// A run of literal tokens, or a placeholder filled from a value pool.
struct Piece {
  std::vector<std::string> tokens;
  std::string pool;  // empty for literal text
};

struct Assignment {
  enum class Kind { activate, label, span };
  std::string node;
  Kind kind = Kind::activate;
  std::string value;  // label, or the pool whose placeholder the span covers
};

struct Realization {
  std::vector<Piece> pieces;
  std::vector<Assignment> assignments;
};

struct TemplateObject {
  std::string id;
  bool linguistic_only = false;
  std::vector<Realization> realizations;
};

struct Template {
  std::string id;
  std::vector<std::string> slots;  // object ids, nested templates already expanded
  double weight = 1.0;
};

struct TemplateLibrary {
  grammar::GrammarSchema schema;
  std::map<std::string, std::vector<std::vector<std::string>>> pools;  // tokenized values
  std::map<std::string, TemplateObject> objects;
  std::vector<Template> templates;

  const Template& find(std::string_view id) const;
};

/// Library text format:
///
///   pool colour = red | dark grey | blue
///   object Move
///     go => action:action_type=Move
///     walk => action:action_type=Move
///   object Please linguistic
///     please
///   object Colour
///     {colour} => schematic:has_colour_={colour}
///   template move_plain = Please Move
///   template build_it weight=2 = Build @colour_part
///
/// Realization lines are indented. `node=Label` sets a categorical,
/// `node={pool}` makes the span of that placeholder's tokens, and a bare node
/// id activates it; ancestors are activated implicitly. `@id` inlines the
/// slots of another template.
TemplateLibrary parse_template_library(std::string_view text, const grammar::GrammarSchema& schema);
TemplateLibrary load_template_library(const std::filesystem::path& path, const grammar::GrammarSchema& schema);

/// Checks that every realization choice of `tmpl` composes into a valid tree:
/// exhaustively when there are at most `limit` choices, otherwise on `limit`
/// seeded samples. Throws TemplateError naming the template.
void verify_template(const Template& tmpl, const TemplateLibrary& library, std::size_t limit = 4096);

/// The pool value chosen for each span node, for span-fidelity checks.
using SpanWords = std::map<std::string, std::vector<std::string>>;

/// One (sentence, tree) pair; `origin` is the template id.
corpus::Example sample_pair(const Template& tmpl, const TemplateLibrary& library, std::mt19937_64& rng,
                            SpanWords* span_words = nullptr);

/// Non-empty tokenized lines of a plain-text dialogue corpus.
std::vector<std::vector<std::string>> load_noop_lines(const std::filesystem::path& path);
std::vector<std::vector<std::string>> parse_noop_lines(std::string_view text);

/// A uniformly drawn line paired with the bare Noop tree. Throws on an empty
/// corpus.
corpus::Example sample_noop(const std::vector<std::vector<std::string>>& lines, const grammar::GrammarSchema& schema,
                            std::mt19937_64& rng);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
};

struct GeneratedSplits {
  std::vector<corpus::Example> train;
  std::vector<corpus::Example> valid;
  std::vector<corpus::Example> test;
};

inline constexpr double kDefaultNoopFraction = 1.0 / 15.0;

/// Example `index` of a run: Noop with probability `noop_fraction`, otherwise
/// a template drawn by weight. Depends only on (seed, index).
corpus::Example generate_example(const TemplateLibrary& library, const std::vector<std::vector<std::string>>& noop,
                                 double noop_fraction, std::uint64_t seed, std::uint64_t index);

/// Examples first_index .. first_index + count - 1.
std::vector<corpus::Example> generate_serial(const TemplateLibrary& library,
                                             const std::vector<std::vector<std::string>>& noop, double noop_fraction,
                                             std::uint64_t seed, std::uint64_t first_index, std::size_t count);
std::vector<corpus::Example> generate_parallel(const TemplateLibrary& library,
                                               const std::vector<std::vector<std::string>>& noop, double noop_fraction,
                                               std::uint64_t seed, std::uint64_t first_index, std::size_t count);

/// Train, valid and test take consecutive example indices. Every count must
/// be positive.
GeneratedSplits generate_splits(const TemplateLibrary& library, const std::vector<std::vector<std::string>>& noop,
                                const SplitCounts& counts, double noop_fraction, std::uint64_t seed,
                                bool parallel = true);

}  // namespace actree::templates
