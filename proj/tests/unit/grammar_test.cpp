#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "actree/grammar/document.hpp"
#include "actree/grammar/schema.hpp"
#include "actree/grammar/tree.hpp"
#include "support/random_tree.hpp"

using namespace actree::grammar;
using actree::testing::random_tree;

namespace {

const GrammarSchema& reference() {
  static const GrammarSchema schema = load_schema(ACTREE_DATA_DIR "/reference.schema");
  return schema;
}

constexpr const char* kHousesDocument =
    R"({"Build": {"schematic": {"has_block_type_": [2,3], "has_name_": [4,4], "repeat": {"repeat_key": "FOR", "repeat_count": [1,1]}}, "location": {"relative_direction": "LEFT", "location_type": "BlockObject", "location_reference_object": {"has_colour_": [10,11], "has_name_": [12,12]}}}})";

ActionTree houses_tree() {
  const auto& s = reference();
  auto t = make_tree(s, 14);
  auto set_label = [&](const std::string& id, const std::string& label) {
    activate_path(t, s, s.index_of(id));
    t.labels[id] = label;
  };
  auto set_span = [&](const std::string& id, int a, int b) {
    activate_path(t, s, s.index_of(id));
    t.spans[id] = Span{a, b};
  };
  set_label("action:action_type", "Build");
  set_span("schematic:has_block_type_", 2, 3);
  set_span("schematic:has_name_", 4, 4);
  set_label("s_repeat:repeat_key", "FOR");
  set_span("s_repeat:repeat_count", 1, 1);
  set_label("action_location:relative_direction", "LEFT");
  set_label("action_location:location_type", "BlockObject");
  set_span("al_ref_object:has_colour_", 10, 11);
  set_span("al_ref_object:has_name_", 12, 12);
  return t;
}

bool has_rule(const ValidationReport& r, const std::string& rule) {
  return std::any_of(r.violations.begin(), r.violations.end(), [&](auto& v) { return v.rule == rule; });
}

}  // namespace

TEST(Schema, ReferenceActionTypes) {
  const auto& s = reference();
  const auto& at = s.node("action:action_type");
  EXPECT_EQ(at.kind, NodeKind::categorical);
  for (const char* label : {"Build", "Move", "Dig", "Noop", "Tag", "Answer", "Fill", "Destroy", "Spawn", "Resume",
                            "Undo", "Stop", "FreeBuild", "OtherAction"})
    EXPECT_GE(s.label_index(s.index_of("action:action_type"), label), 0) << label;
  EXPECT_EQ(at.labels.size(), 14u);
  EXPECT_EQ(s.node(s.root()).id, "action");
}

TEST(Schema, MinimalSchema) {
  auto s = parse_schema("internal r - r\ncategorical r:c r c labels=A\n");
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(dfs_order(s), (std::vector<std::string>{"r", "r:c"}));
}

TEST(Schema, DanglingParentIsSchemaError) {
  try {
    parse_schema("internal r - r\nspan x:y x y\n");
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.node_id(), "x:y");
  }
}

TEST(Schema, DuplicateIdIsSchemaError) {
  try {
    parse_schema("internal r - r\nspan r:y r y\nspan r:y r z\n");
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.node_id(), "r:y");
  }
}

TEST(Schema, MalformedLineReportsLine) {
  try {
    parse_schema("internal r - r\n\nleaf r:y r y\n");
    FAIL() << "expected SchemaParseError";
  } catch (const SchemaParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_schema("internal r - r\ncategorical r:c r c\n"), SchemaError);  // empty vocab
  EXPECT_THROW(parse_schema("internal r - r\ncategorical r:c r c labels=A,A\n"), SchemaError);
  EXPECT_THROW(parse_schema("internal r - r\ninternal q - q\n"), SchemaError);  // two roots
  EXPECT_THROW(parse_schema("internal a b a\ninternal b a b\n"), SchemaError);  // no root / cycle
}

TEST(Schema, DfsOrderOfBuildSubtree) {
  auto order = dfs_order(reference());
  auto pos = [&](const std::string& id) { return std::find(order.begin(), order.end(), id) - order.begin(); };
  EXPECT_EQ(order.size(), reference().size());
  EXPECT_LT(pos("action:action_type"), pos("schematic"));
  EXPECT_LT(pos("schematic:has_block_type_"), pos("s_repeat"));
  EXPECT_LT(pos("schematic:has_name_"), pos("s_repeat"));
  EXPECT_LT(pos("s_repeat"), pos("action_location"));
  EXPECT_LT(pos("action_location:relative_direction"), pos("al_ref_object"));
}

TEST(Schema, DfsIsParentFirstPermutation) {
  const auto& s = reference();
  auto dfs = s.dfs();
  std::vector<NodeIndex> sorted(dfs.begin(), dfs.end());
  std::sort(sorted.begin(), sorted.end());
  for (NodeIndex i = 0; i < s.size(); ++i) EXPECT_EQ(sorted[i], i);
  std::vector<std::size_t> at(s.size());
  for (std::size_t k = 0; k < dfs.size(); ++k) at[dfs[k]] = k;
  for (NodeIndex i = 0; i < s.size(); ++i)
    if (i != s.root()) EXPECT_LT(at[s.parent(i)], at[i]);
}

TEST(Schema, PermutedChildOrderPermutesTraversal) {
  auto a = parse_schema("internal r - r\nspan r:x r x\ninternal q r q\nspan q:z q z\n");
  auto b = parse_schema("internal r - r\ninternal q r q\nspan q:z q z\nspan r:x r x\n");
  EXPECT_EQ(dfs_order(a), (std::vector<std::string>{"r", "r:x", "q", "q:z"}));
  EXPECT_EQ(dfs_order(b), (std::vector<std::string>{"r", "q", "q:z", "r:x"}));
}

TEST(Validate, HousesTreeIsValid) {
  auto report = validate_tree(houses_tree(), reference());
  EXPECT_TRUE(report.ok) << (report.violations.empty() ? "" : report.violations[0].rule);
}

TEST(Validate, InactiveParent) {
  auto t = houses_tree();
  t.active.erase("schematic");
  auto report = validate_tree(t, reference());
  EXPECT_FALSE(report.ok);
  EXPECT_TRUE(has_rule(report, "inactive_parent"));
}

TEST(Validate, SpanOrder) {
  auto t = houses_tree();
  t.spans["schematic:has_name_"] = Span{5, 3};
  auto report = validate_tree(t, reference());
  EXPECT_TRUE(has_rule(report, "span_order"));
}

TEST(Validate, RuleCatalogue) {
  const auto& s = reference();
  auto t = houses_tree();
  t.active.insert("nonsense");
  EXPECT_TRUE(has_rule(validate_tree(t, s), "unknown_node"));

  t = houses_tree();
  t.spans["schematic:has_name_"] = Span{4, 14};
  EXPECT_TRUE(has_rule(validate_tree(t, s), "span_bounds"));

  t = houses_tree();
  t.labels["action_location:relative_direction"] = "SIDEWAYS";
  EXPECT_TRUE(has_rule(validate_tree(t, s), "unknown_label"));

  t = houses_tree();
  t.labels.erase("action:action_type");
  t.active.erase("action:action_type");
  EXPECT_TRUE(has_rule(validate_tree(t, s), "missing_required"));

  t = houses_tree();
  t.spans["action:tag"] = Span{0, 0};
  EXPECT_TRUE(has_rule(validate_tree(t, s), "value_on_inactive"));

  t = houses_tree();
  t.active.erase("action");
  EXPECT_TRUE(has_rule(validate_tree(t, s), "root_inactive"));
}

TEST(Document, HousesExampleIsByteExact) {
  const auto& s = reference();
  auto doc = serialize_tree(houses_tree(), s);
  EXPECT_EQ(doc, kHousesDocument);
  auto back = deserialize_tree(doc, s, 14);
  EXPECT_EQ(back, houses_tree());
}

TEST(Document, NoopTree) {
  const auto& s = reference();
  auto t = make_tree(s, 4);
  t.active.insert("action:action_type");
  t.labels["action:action_type"] = "Noop";
  EXPECT_EQ(serialize_tree(t, s), R"({"Noop": {}})");
  EXPECT_EQ(deserialize_tree(R"({"Noop": {}})", s, 4), t);
}

TEST(Document, KeyOrderInInputIsIrrelevant) {
  const auto& s = reference();
  auto t = deserialize_tree(R"({"Build": {"location": {"location_type": "SpeakerLook"}, "schematic": {"has_name_": [1,1]}}})",
                            s, 3);
  EXPECT_EQ(serialize_tree(t, s),
            R"({"Build": {"schematic": {"has_name_": [1,1]}, "location": {"location_type": "SpeakerLook"}}})");
}

TEST(Document, ShapeErrorsNameTheKey) {
  const auto& s = reference();
  auto expect_key = [&](const char* text, const char* key) {
    try {
      deserialize_tree(text, s, 10);
      FAIL() << "expected DocumentError for " << text;
    } catch (const DocumentError& e) {
      EXPECT_EQ(e.key(), key) << e.what();
    }
  };
  expect_key(R"({"Build": {"schematic": {"has_wings_": [1,1]}}})", "has_wings_");
  expect_key(R"({"Build": {"schematic": {"has_name_": "house"}}})", "has_name_");
  expect_key(R"({"Build": {"schematic": [1,2]}})", "schematic");
  expect_key(R"({"Fly": {}})", "Fly");
  expect_key(R"({"Build": {"schematic": {"has_name_": [3,1]}}})", "has_name_");
  EXPECT_THROW(deserialize_tree("{not json", s, 1), DocumentError);
}

TEST(Document, RandomTreesRoundTrip) {
  const auto& s = reference();
  std::mt19937_64 rng(12345);
  for (int i = 0; i < 1000; ++i) {
    int T = 1 + static_cast<int>(rng() % 20);
    auto t = random_tree(s, T, rng);
    ASSERT_TRUE(validate_tree(t, s).ok);
    auto doc = serialize_tree(t, s);
    auto back = deserialize_tree(doc, s, T);
    ASSERT_EQ(back, t) << doc;
    ASSERT_EQ(serialize_tree(back, s), doc);
  }
}

TEST(TreeEqual, SpansComparedExactly) {
  auto a = houses_tree();
  auto b = houses_tree();
  EXPECT_TRUE(tree_equal(a, a));
  b.spans["schematic:has_name_"] = Span{4, 5};
  EXPECT_FALSE(tree_equal(a, b));
}

TEST(TreeEqual, AgreesWithSerializedBytes) {
  // A tiny schema makes collisions between independent random trees common.
  auto s = parse_schema(
      "internal r - r\ncategorical r:c r c labels=A,B\ninternal q r q\nspan q:x q x\ncategorical q:k q k labels=U,V\n");
  std::mt19937_64 rng(99);
  int equal_pairs = 0;
  for (int i = 0; i < 1000; ++i) {
    auto a = random_tree(s, 2, rng);
    auto b = random_tree(s, 2, rng);
    bool eq = tree_equal(a, b);
    equal_pairs += eq;
    ASSERT_EQ(eq, serialize_tree(a, s) == serialize_tree(b, s));
    // Equivalence relation: reflexive and symmetric.
    ASSERT_TRUE(tree_equal(a, a));
    ASSERT_EQ(tree_equal(a, b), tree_equal(b, a));
  }
  EXPECT_GT(equal_pairs, 10);
}

TEST(Tokenize, SeparatesTerminalPunctuation) {
  auto tokens = tokenize("Make three oak wood houses to the left of the dark grey church.");
  ASSERT_EQ(tokens.size(), 14u);
  EXPECT_EQ(tokens[0], "make");
  EXPECT_EQ(tokens[12], "church");
  EXPECT_EQ(tokens[13], ".");
  EXPECT_EQ(tokenize("hello, bot!"), (std::vector<std::string>{"hello", ",", "bot", "!"}));
  EXPECT_EQ(tokenize("don't  stop"), (std::vector<std::string>{"don't", "stop"}));
  EXPECT_TRUE(tokenize("   ").empty());
}
