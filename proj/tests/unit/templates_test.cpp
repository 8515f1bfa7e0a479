#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "actree/corpus/corpus.hpp"
#include "actree/grammar/schema.hpp"
#include "actree/grammar/tree.hpp"
#include "actree/templates/library.hpp"

using namespace actree;
using namespace actree::templates;
using grammar::GrammarSchema;

namespace {

const GrammarSchema& reference() {
  static const GrammarSchema schema = grammar::load_schema(ACTREE_DATA_DIR "/reference.schema");
  return schema;
}

const TemplateLibrary& library() {
  static const TemplateLibrary lib = load_template_library(ACTREE_DATA_DIR "/reference.templates", reference());
  return lib;
}

const std::vector<std::vector<std::string>>& noop_lines() {
  static const auto lines = load_noop_lines(ACTREE_DATA_DIR "/noop_lines.txt");
  return lines;
}

constexpr const char* kMoveObjects = R"(
pool dir = left | right
object Move
  go => action:action_type=Move
  walk => action:action_type=Move
  move => action:action_type=Move
object ALittle linguistic
  a little
  a bit
object RelativeDirection
  to the left => action_location:relative_direction=LEFT
  to the right => action_location:relative_direction=RIGHT
)";

std::string action_type(const grammar::ActionTree& t) { return t.labels.at("action:action_type"); }

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

// Expects `id` to be named by the error raised while loading `text`.
void expect_error_naming(const std::string& text, const std::string& id) {
  try {
    parse_template_library(text, reference());
    FAIL() << "library loaded";
  } catch (const TemplateError& e) {
    EXPECT_EQ(e.id(), id) << e.what();
  }
}

}  // namespace

TEST(Library, ReferenceCoversEveryActionType) {
  const auto& lib = library();
  EXPECT_GE(lib.templates.size(), 150u);
  std::map<std::string, std::set<std::string>> templates_by_type;
  std::mt19937_64 rng(7);
  for (const auto& t : lib.templates)
    for (int n = 0; n < 20; ++n) templates_by_type[action_type(sample_pair(t, lib, rng).tree)].insert(t.id);
  const auto head = *reference().head();
  for (const auto& label : reference().node(head).labels) {
    EXPECT_GE(templates_by_type[label].size(), 10u) << label;
  }
  EXPECT_EQ(templates_by_type.size(), reference().node(head).labels.size());
}

TEST(Library, UnknownObjectNamesTheTemplate) {
  expect_error_naming(std::string(kMoveObjects) + "template broken = Move Foo\n", "broken");
}

TEST(Library, InvalidCompositionNamesTheTemplate) {
  // Two different action types conflict.
  expect_error_naming(std::string(kMoveObjects) +
                          "object Dig\n  dig => action:action_type=Dig\ntemplate clash = Move Dig\n",
                      "clash");
  // No action type at all leaves the required head unset.
  expect_error_naming(std::string(kMoveObjects) + "template headless = RelativeDirection\n", "headless");
}

TEST(Library, ObjectErrorsNameTheObject) {
  expect_error_naming("object Bad\n  go => action:nowhere=Move\n", "Bad");
  expect_error_naming("object Bad\n  go => action:action_type=Fly\n", "Bad");
  expect_error_naming("object Bad\n  go {missing} => action:action_type=Move\n", "Bad");
  expect_error_naming("pool p = a\nobject Bad\n  go => action_location:coordinates={p}\n", "Bad");
  expect_error_naming("object Bad linguistic\n  go => action:action_type=Move\n", "Bad");
  expect_error_naming("object Bad\n  go\n", "Bad");
}

TEST(Library, CyclesAreRejected) {
  expect_error_naming(std::string(kMoveObjects) + "template a = Move @b\ntemplate b = ALittle @a\n", "a");
}

TEST(Library, SyntaxErrorsCarryLineNumbers) {
  try {
    parse_template_library("pool a = x\n\n  stray realization\n", reference());
    FAIL();
  } catch (const TemplateParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_template_library("template t weight=0 = Move\n", reference()), TemplateParseError);
  EXPECT_THROW(parse_template_library("frobnicate\n", reference()), TemplateParseError);
}

TEST(Library, NestedTemplatesInlineTheirSlots) {
  auto lib = parse_template_library(std::string(kMoveObjects) +
                                        "template go = Move\n"
                                        "template go_little weight=3 = @go ALittle RelativeDirection\n",
                                    reference());
  const auto& t = lib.find("go_little");
  EXPECT_EQ(t.slots, (std::vector<std::string>{"Move", "ALittle", "RelativeDirection"}));
  EXPECT_DOUBLE_EQ(t.weight, 3.0);
}

TEST(Sample, SingleMoveTemplateGivesBareMoveTrees) {
  auto lib = parse_template_library("object Move\n  move => action:action_type=Move\ntemplate m = Move\n", reference());
  std::mt19937_64 rng(1);
  for (int n = 0; n < 20; ++n) {
    auto e = sample_pair(lib.templates[0], lib, rng);
    EXPECT_EQ(e.sentence, (std::vector<std::string>{"move"}));
    EXPECT_EQ(e.tree.active, (std::set<std::string>{"action", "action:action_type"}));
    EXPECT_EQ(action_type(e.tree), "Move");
    EXPECT_EQ(e.origin, "m");
  }
}

TEST(Sample, GoALittleToTheLeft) {
  auto lib = parse_template_library(std::string(kMoveObjects) + "template t = Move ALittle RelativeDirection\n",
                                    reference());
  std::mt19937_64 rng(3);
  bool seen = false;
  for (int n = 0; n < 500 && !seen; ++n) {
    auto e = sample_pair(lib.templates[0], lib, rng);
    if (join(e.sentence) != "go a little to the left") continue;
    seen = true;
    EXPECT_EQ(action_type(e.tree), "Move");
    EXPECT_EQ(e.tree.labels.at("action_location:relative_direction"), "LEFT");
    EXPECT_TRUE(grammar::validate_tree(e.tree, reference()).ok);
  }
  EXPECT_TRUE(seen);
}

TEST(Sample, FuzzedTreesValidateWithFaithfulSpans) {
  const auto& lib = library();
  std::size_t spans = 0;
  for (std::uint64_t i = 0; i < 100000; ++i) {
    std::mt19937_64 rng(i);
    const auto& t = lib.templates[i % lib.templates.size()];
    SpanWords words;
    auto e = sample_pair(t, lib, rng, &words);
    auto report = grammar::validate_tree(e.tree, reference());
    ASSERT_TRUE(report.ok) << t.id << ": " << join(e.sentence);
    ASSERT_EQ(e.tree.sentence_length, static_cast<int>(e.sentence.size()));
    ASSERT_EQ(words.size(), e.tree.spans.size());
    for (const auto& [node, span] : e.tree.spans) {
      std::vector<std::string> emitted(e.sentence.begin() + span.start, e.sentence.begin() + span.end + 1);
      ASSERT_EQ(emitted, words.at(node)) << t.id << " " << node;
      ++spans;
    }
  }
  EXPECT_GT(spans, 100000u);
}

TEST(Sample, ReferenceSentencesDetermineTheirTrees) {
  const auto& lib = library();
  std::map<std::vector<std::string>, std::pair<grammar::ActionTree, std::string>> seen;
  for (std::uint64_t i = 0; i < 100000; ++i) {
    std::mt19937_64 rng(i);
    const auto& t = lib.templates[i % lib.templates.size()];
    auto e = sample_pair(t, lib, rng);
    auto [it, fresh] = seen.emplace(e.sentence, std::make_pair(e.tree, t.id));
    if (!fresh)
      ASSERT_TRUE(grammar::tree_equal(it->second.first, e.tree))
          << join(e.sentence) << " from " << it->second.second << " and " << t.id;
  }
}

TEST(Noop, ForcedTree) {
  auto lines = parse_noop_lines("how are you today\n");
  std::mt19937_64 rng(5);
  auto e = sample_noop(lines, reference(), rng);
  EXPECT_EQ(join(e.sentence), "how are you today");
  EXPECT_EQ(e.tree.active, (std::set<std::string>{"action", "action:action_type"}));
  EXPECT_EQ(action_type(e.tree), "Noop");
  EXPECT_TRUE(grammar::validate_tree(e.tree, reference()).ok);
}

TEST(Noop, OneLineCorpusAlwaysGivesThatLine) {
  auto lines = parse_noop_lines("\n  \nwell hello\n\n");
  ASSERT_EQ(lines.size(), 1u);
  std::mt19937_64 rng(9);
  for (int n = 0; n < 100; ++n) EXPECT_EQ(join(sample_noop(lines, reference(), rng).sentence), "well hello");
}

TEST(Noop, EmptyCorpusThrows) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(sample_noop(parse_noop_lines("\n\n"), reference(), rng), std::invalid_argument);
}

TEST(Noop, LinesAreUniformWithinThreeSigma) {
  const auto& lines = noop_lines();
  const std::size_t draws = 10000;
  std::map<std::string, std::size_t> counts;
  std::mt19937_64 rng(11);
  for (std::size_t n = 0; n < draws; ++n) ++counts[join(sample_noop(lines, reference(), rng).sentence)];
  const double p = 1.0 / static_cast<double>(lines.size());
  const double mean = draws * p, sigma = std::sqrt(draws * p * (1 - p));
  EXPECT_EQ(counts.size(), lines.size());
  for (const auto& [line, c] : counts) EXPECT_LE(std::abs(static_cast<double>(c) - mean), 3 * sigma) << line;
}

TEST(Generate, CountsWithoutNoop) {
  auto s = generate_splits(library(), noop_lines(), {10, 1, 1}, 0.0, 42);
  EXPECT_EQ(s.train.size(), 10u);
  EXPECT_EQ(s.valid.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
  for (const auto* split : {&s.train, &s.valid, &s.test})
    for (const auto& e : *split) EXPECT_NE(e.origin, "noop");
}

TEST(Generate, RejectsBadArguments) {
  EXPECT_THROW(generate_splits(library(), noop_lines(), {10, 0, 1}, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(generate_splits(library(), noop_lines(), {1, 1, 1}, 1.5, 1), std::invalid_argument);
  EXPECT_THROW(generate_splits(library(), {}, {1, 1, 1}, 0.5, 1), std::invalid_argument);
}

TEST(Generate, SameSeedGivesIdenticalBytes) {
  auto bytes = [](bool parallel, std::uint64_t seed) {
    auto s = generate_splits(library(), noop_lines(), {2000, 100, 100}, kDefaultNoopFraction, seed, parallel);
    return corpus::format_examples(s.train, reference()) + corpus::format_examples(s.valid, reference()) +
           corpus::format_examples(s.test, reference());
  };
  const auto a = bytes(true, 17);
  EXPECT_EQ(a, bytes(true, 17));
  EXPECT_EQ(a, bytes(false, 17));
  EXPECT_NE(a, bytes(true, 18));
}

TEST(Generate, SplitsTakeConsecutiveIndices) {
  auto s = generate_splits(library(), noop_lines(), {5, 3, 4}, kDefaultNoopFraction, 8);
  auto all = generate_serial(library(), noop_lines(), kDefaultNoopFraction, 8, 0, 12);
  for (std::size_t i = 0; i < 12; ++i) {
    const auto& e = i < 5 ? s.train[i] : i < 8 ? s.valid[i - 5] : s.test[i - 8];
    EXPECT_EQ(e.sentence, all[i].sentence);
    EXPECT_EQ(e.tree, all[i].tree);
  }
}

TEST(Generate, NoopFractionIsRespected) {
  const std::size_t n = 20000;
  auto out = generate_parallel(library(), noop_lines(), kDefaultNoopFraction, 3, 0, n);
  std::size_t noop = 0;
  for (const auto& e : out) noop += e.origin == "noop";
  const double p = kDefaultNoopFraction, sigma = std::sqrt(n * p * (1 - p));
  EXPECT_LE(std::abs(static_cast<double>(noop) - n * p), 3 * sigma);
}

TEST(Generate, OutputRoundTripsThroughCorpusFormat) {
  auto out = generate_serial(library(), noop_lines(), kDefaultNoopFraction, 4, 0, 3000);
  auto back = corpus::parse_examples(corpus::format_examples(out, reference()), reference());
  ASSERT_EQ(back.size(), out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(back[i].sentence, out[i].sentence);
    EXPECT_TRUE(grammar::tree_equal(back[i].tree, out[i].tree)) << join(out[i].sentence);
  }
}
