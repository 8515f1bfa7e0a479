#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "actree/cli/cli.hpp"
#include "actree/corpus/corpus.hpp"
#include "actree/grammar/document.hpp"
#include "actree/parser/model.hpp"
#include "actree/util/text.hpp"

using namespace actree;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args, const std::string& input = "") {
  std::istringstream in(input);
  std::ostringstream out, err;
  const int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

const grammar::GrammarSchema& reference() {
  static const auto schema = grammar::load_schema(ACTREE_DATA_DIR "/reference.schema");
  return schema;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("actree_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void generate(const std::string& out, const std::string& train, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"generate", "--train", train, "--valid", "5", "--test", "5", "--out", path(out)};
    args.insert(args.end(), extra.begin(), extra.end());
    auto r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
  }

  fs::path dir_;
};

std::string slurp(const std::string& p) { return util::read_file(p); }

}  // namespace

TEST_F(CliTest, GenerateIsDeterministicAndRecordsProvenance) {
  generate("a", "50", {"--seed", "7"});
  generate("b", "50", {"--seed", "7"});
  generate("c", "50", {"--seed", "7", "--serial"});
  for (const char* f : {"train.tsv", "valid.tsv", "test.tsv"}) {
    EXPECT_EQ(slurp(path(std::string("a/") + f)), slurp(path(std::string("b/") + f))) << f;
    EXPECT_EQ(slurp(path(std::string("a/") + f)), slurp(path(std::string("c/") + f))) << f;
  }
  const auto train = slurp(path("a/train.tsv"));
  EXPECT_NE(train.find("# config "), std::string::npos);
  EXPECT_NE(train.find("# seed 7"), std::string::npos);
  EXPECT_EQ(corpus::read_examples(path("a/train.tsv"), reference()).size(), 50u);
  generate("d", "50", {"--seed", "8"});
  EXPECT_NE(train, slurp(path("d/train.tsv")));
}

TEST_F(CliTest, GeneratePrintsHistogram) {
  auto r = run({"generate", "--train", "200", "--valid", "1", "--test", "1", "--out", path("h")});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("total        200"), std::string::npos) << r.out;
}

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run({"generate", "--train", "0"}).code, 1);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"eval", "--data", "x"}).code, 1);
  auto r = run({"train", "--train", "x.tsv", "--variant", "bogus"});
  EXPECT_EQ(r.code, 1);
  for (const char* name : {"independent", "seq2tree", "sentencerec"}) EXPECT_NE(r.err.find(name), std::string::npos);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, DataErrorsExitTwo) {
  EXPECT_EQ(run({"train", "--train", path("missing.tsv")}).code, 2);
  EXPECT_EQ(run({"stats", path("missing.tsv")}).code, 2);
  EXPECT_EQ(run({"eval", "--checkpoint", path("missing.ckpt"), "--data", path("missing.tsv")}).code, 2);
  std::ofstream(path("bad.tsv")) << "go left\t{\"Move\": {\"nonsense\": 1}}\n";
  EXPECT_EQ(run({"stats", path("bad.tsv")}).code, 2);
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  std::ofstream(path("run.toml")) << "[generate]\ntrain = 30\nseed = 9\nnoop-fraction = 0\n";
  auto r = run({"--config", path("run.toml"), "generate", "--train", "20", "--valid", "2", "--test", "2", "--out",
                path("g")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto text = slurp(path("g/train.tsv"));
  EXPECT_NE(text.find("# seed 9"), std::string::npos);
  EXPECT_EQ(corpus::read_examples(path("g/train.tsv"), reference()).size(), 20u);
  for (const auto& e : corpus::read_examples(path("g/train.tsv"), reference())) EXPECT_NE(e.origin, "noop");
}

TEST_F(CliTest, TrainEvalParseRoundTrip) {
  generate("data", "12", {"--seed", "3", "--noop-fraction", "0"});
  auto t = run({"train", "--train", path("data/train.tsv"), "--valid", path("data/train.tsv"), "--d", "16", "--steps",
                "800", "--batch", "6", "--eval-every", "50", "--dropout", "0", "--word-dropout", "0", "--out",
                path("m.ckpt")});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_TRUE(fs::exists(path("m.ckpt.last")));
  EXPECT_NE(slurp(path("m.ckpt.curve.tsv")).find("# config "), std::string::npos);

  nlohmann::json extra;
  parser::ParserModel::load(path("m.ckpt"), reference(), &extra);
  EXPECT_TRUE(extra.contains("config_digest"));
  EXPECT_EQ(extra["seed"], 1);

  auto e = run({"eval", "--checkpoint", path("m.ckpt"), "--data", path("data/train.tsv"), "--json",
                path("report.json")});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("tree accuracy 1\n"), std::string::npos) << e.out;
  for (const char* heading : {"internal node confusion", "categorical node confusion", "span node confusion"})
    EXPECT_NE(e.out.find(heading), std::string::npos);
  auto report = nlohmann::json::parse(slurp(path("report.json")));
  EXPECT_DOUBLE_EQ(report["tree_accuracy"].get<double>(), 1.0);
  EXPECT_TRUE(report.contains("config_digest"));

  auto b = run({"eval", "--checkpoint", path("m.ckpt"), "--data", path("data/train.tsv"), "--beam", "4"});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_NE(b.out.find("best score >= greedy on 12 / 12"), std::string::npos) << b.out;

  auto examples = corpus::read_examples(path("data/train.tsv"), reference());
  std::string input;
  for (const auto& ex : examples) input += util::join(ex.sentence, " ") + "\n";
  auto p = run({"parse", "--checkpoint", path("m.ckpt"), "--probs", path("probs.jsonl")}, input + "\n");
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_NE(p.err.find("empty"), std::string::npos);
  auto lines = util::split(p.out, '\n');
  ASSERT_EQ(lines.size(), examples.size() + 1);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    auto tree = grammar::deserialize_tree(lines[i], reference(), static_cast<int>(examples[i].sentence.size()));
    EXPECT_TRUE(grammar::tree_equal(tree, examples[i].tree)) << lines[i];
  }
  auto probs = util::split(slurp(path("probs.jsonl")), '\n');
  EXPECT_EQ(probs.size(), examples.size() + 2);  // comment line and trailing newline
  EXPECT_TRUE(nlohmann::json::parse(probs[1]).contains("nodes"));

  auto s = run({"stats", path("data/train.tsv")});
  EXPECT_EQ(s.code, 0);
  EXPECT_NE(s.out.find("12 examples"), std::string::npos);
}

TEST_F(CliTest, ParseOfEmptyInputPrintsNothing) {
  generate("data", "5", {"--noop-fraction", "0"});
  ASSERT_EQ(run({"train", "--train", path("data/train.tsv"), "--d", "8", "--steps", "2", "--out", path("m.ckpt")}).code,
            0);
  auto p = run({"parse", "--checkpoint", path("m.ckpt")}, "");
  EXPECT_EQ(p.code, 0);
  EXPECT_TRUE(p.out.empty());
}

TEST_F(CliTest, ResumeReproducesTheStraightRun) {
  generate("data", "40", {"--seed", "5"});
  std::vector<std::string> common{"train", "--train", path("data/train.tsv"), "--d", "8", "--batch", "4",
                                  "--eval-every", "2"};
  auto with = [&](std::vector<std::string> extra) {
    auto args = common;
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  };
  ASSERT_EQ(with({"--seed", "11", "--steps", "10", "--out", path("straight.ckpt")}).code, 0);
  ASSERT_EQ(with({"--seed", "11", "--steps", "4", "--out", path("split.ckpt")}).code, 0);
  auto resumed = with({"--seed", "11", "--steps", "10", "--out", path("split.ckpt"), "--resume"});
  ASSERT_EQ(resumed.code, 0) << resumed.err;
  EXPECT_NE(resumed.err.find("resuming at step 4"), std::string::npos);
  auto a = parser::ParserModel::load(path("straight.ckpt.last"), reference());
  auto b = parser::ParserModel::load(path("split.ckpt.last"), reference());
  EXPECT_TRUE(a.store() == b.store());

  EXPECT_EQ(with({"--steps", "12", "--out", path("split.ckpt"), "--resume", "--seed", "12"}).code, 2);
}

TEST_F(CliTest, SchemaMismatchIsADataError) {
  generate("data", "5", {"--noop-fraction", "0"});
  ASSERT_EQ(run({"train", "--train", path("data/train.tsv"), "--d", "8", "--steps", "1", "--out", path("m.ckpt")}).code,
            0);
  std::ofstream(path("other.schema")) << "internal root - root\ncategorical root:type root type required head "
                                         "labels=Move,Noop\n";
  std::ofstream(path("other.tsv")) << "go\t{\"Move\": {}}\n";
  auto r = run({"eval", "--schema", path("other.schema"), "--checkpoint", path("m.ckpt"), "--data", path("other.tsv")});
  EXPECT_EQ(r.code, 2);
}
