#include "actree/cli/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "actree/corpus/corpus.hpp"
#include "actree/eval/metrics.hpp"
#include "actree/grammar/document.hpp"
#include "actree/nn/embedding.hpp"
#include "actree/parser/inference.hpp"
#include "actree/parser/train.hpp"
#include "actree/templates/library.hpp"
#include "actree/util/digest.hpp"
#include "actree/util/text.hpp"

namespace actree::cli {

namespace fs = std::filesystem;

namespace {

const std::string kDataDir = ACTREE_DATA_DIR;

struct Io {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

// Digest of the resolved options of a subcommand, defaults included. Where
// outputs go and how many threads compute them do not change their content.
std::string config_digest(const CLI::App& command) {
  static const std::set<std::string> ignored{"out", "json", "probs", "serial", "resume", "help"};
  std::string kept;
  for (const auto& line : util::split(command.config_to_str(true, false), '\n')) {
    const auto key = util::trim(line.substr(0, line.find('=')));
    if (!ignored.contains(std::string(key))) kept += line + "\n";
  }
  return util::hex_digest(kept);
}

std::vector<std::string> provenance(const CLI::App& command, std::uint64_t seed) {
  return {"actree " + command.get_name(), "config " + config_digest(command), "seed " + std::to_string(seed)};
}

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw std::runtime_error("no such file: " + path);
}

struct GenerateArgs {
  std::string schema = kDataDir + "/reference.schema";
  std::string templates = kDataDir + "/reference.templates";
  std::string noop = kDataDir + "/noop_lines.txt";
  std::size_t train = 20000, valid = 1000, test = 1000;
  double noop_fraction = templates::kDefaultNoopFraction;
  std::uint64_t seed = 1;
  std::string out = ".";
  bool serial = false;
};

int cmd_generate(const GenerateArgs& a, const CLI::App& command, Io io) {
  const auto schema = grammar::load_schema(a.schema);
  const auto library = templates::load_template_library(a.templates, schema);
  const auto noop = a.noop_fraction > 0 ? templates::load_noop_lines(a.noop) : std::vector<std::vector<std::string>>{};
  const auto splits = templates::generate_splits(library, noop, {a.train, a.valid, a.test}, a.noop_fraction, a.seed,
                                                 !a.serial);
  fs::create_directories(a.out);
  const auto comments = provenance(command, a.seed);
  corpus::write_examples(fs::path(a.out) / "train.tsv", splits.train, schema, comments);
  corpus::write_examples(fs::path(a.out) / "valid.tsv", splits.valid, schema, comments);
  corpus::write_examples(fs::path(a.out) / "test.tsv", splits.test, schema, comments);
  io.out << "wrote " << splits.train.size() << " / " << splits.valid.size() << " / " << splits.test.size()
         << " examples to " << a.out << " (" << library.templates.size() << " templates)\n";
  io.out << corpus::format_histogram(corpus::action_frequency_stats(splits.train, schema));
  return kExitOk;
}

struct TrainArgs {
  std::string schema = kDataDir + "/reference.schema";
  std::vector<std::string> train;
  std::string valid;
  std::string target;
  std::string pretrained;
  std::string out = "model.ckpt";
  std::string variant = "sentencerec";
  parser::ModelConfig model;
  parser::Hyperparameters hyper;
  int batch = 32;
  long steps = 5000;
  long eval_every = 250;
  std::size_t beam = 1;
  std::uint64_t seed = 1;
  bool resume = false;
  bool serial = false;
};

std::string last_path(const std::string& out) { return out + ".last"; }

int cmd_train(TrainArgs a, const CLI::App& command, Io io) {
  const auto schema = grammar::load_schema(a.schema);
  a.model.variant = parser::parse_variant(a.variant);
  std::vector<corpus::SamplerPool> pools;
  std::vector<std::vector<std::string>> sentences;
  for (const auto& path : a.train) {
    require_file(path);
    corpus::SamplerPool pool{fs::path(path).stem().string(), corpus::read_examples(path, schema)};
    if (pool.examples.empty()) throw std::runtime_error("empty training corpus: " + path);
    for (const auto& e : pool.examples) sentences.push_back(e.sentence);
    pools.push_back(std::move(pool));
  }
  std::vector<corpus::Example> valid;
  if (!a.valid.empty()) valid = corpus::read_examples(a.valid, schema);
  const auto target = a.target.empty() ? corpus::ActionDistribution{} : corpus::load_distribution(a.target, schema);
  corpus::MixedSampler sampler(std::move(pools), target, schema, a.seed);

  const auto digest = config_digest(command);
  parser::TrainOptions options;
  options.hyper = a.hyper;
  options.batch_size = a.batch;
  options.steps = a.steps;
  options.eval_every = a.eval_every;
  options.seed = a.seed;
  options.beam = a.beam;
  options.parallel = !a.serial;

  std::optional<parser::ParserModel> model;
  parser::ParserModel best_model;
  if (a.resume) {
    nlohmann::json extra;
    model = parser::ParserModel::load(last_path(a.out), schema, &extra);
    if (extra.value("seed", std::uint64_t{0}) != a.seed)
      throw std::runtime_error("resume seed differs from the checkpoint's seed " + extra["seed"].dump());
    if (extra.value("batch", 0) != a.batch) throw std::runtime_error("resume batch size differs from the checkpoint's");
    options.start_step = extra.at("step").get<long>();
    options.best_accuracy = extra.value("best_accuracy", -1.0);
    options.best_step = extra.value("best_step", -1L);
    if (options.best_step >= 0 && fs::exists(a.out)) {
      best_model = parser::ParserModel::load(a.out, schema);
      options.best_store = &best_model.store();
    }
    sampler.skip(static_cast<std::uint64_t>(options.start_step) * static_cast<std::uint64_t>(a.batch));
    io.err << "resuming at step " << options.start_step << "\n";
  } else {
    std::optional<nn::PretrainedVectors> pretrained;
    if (!a.pretrained.empty()) {
      pretrained = nn::load_pretrained(a.pretrained);
      a.model.pretrained_dim = pretrained->dim;
    }
    model = parser::ParserModel::create(schema, a.model, parser::build_vocabulary(sentences),
                                        pretrained ? &*pretrained : nullptr, a.seed);
  }

  const std::string curve_path = a.out + ".curve.tsv";
  std::ofstream curve(curve_path, a.resume ? std::ios::app : std::ios::trunc);
  if (!curve) throw std::runtime_error("cannot write " + curve_path);
  if (!a.resume) curve << "# config " << digest << "\n# seed " << a.seed << "\nstep\ttrain_loss\tvalid_accuracy\n";

  double best_accuracy = options.best_accuracy;
  long best_step = options.best_step;
  bool improved = false;
  options.on_eval = [&](const parser::CurvePoint& p) {
    curve << p.step << '\t' << p.train_loss << '\t' << p.valid_accuracy << '\n' << std::flush;
    io.err << "step " << p.step << " loss " << p.train_loss << " valid " << p.valid_accuracy << "\n";
    if (!valid.empty() && p.valid_accuracy > best_accuracy) {
      best_accuracy = p.valid_accuracy;
      best_step = p.step;
      improved = true;
    }
  };
  auto extra_at = [&](long step) {
    return nlohmann::json{{"config_digest", digest}, {"seed", a.seed},          {"batch", a.batch},
                          {"step", step},            {"best_step", best_step}, {"best_accuracy", best_accuracy}};
  };
  options.on_step = [&](long step, const parser::ParserModel& m) {
    if (improved) m.save(a.out, extra_at(step));
    improved = false;
    if (step == a.steps || (a.eval_every > 0 && step % a.eval_every == 0)) m.save(last_path(a.out), extra_at(step));
  };

  auto result = parser::train_parser(*model, [&]() -> const corpus::Example& { return sampler.next(); }, valid,
                                     options);
  if (valid.empty()) model->save(a.out, extra_at(result.steps_done));
  io.out << "trained " << result.steps_done << " steps; best valid accuracy " << result.best_accuracy << " at step "
         << result.best_step << "; checkpoint " << a.out << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string schema = kDataDir + "/reference.schema";
  std::string checkpoint;
  std::string data;
  std::size_t beam = 1;
  std::string json;
  bool serial = false;
};

std::vector<std::vector<std::string>> sentences_of(const std::vector<corpus::Example>& examples) {
  std::vector<std::vector<std::string>> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.sentence);
  return out;
}

int cmd_eval(const EvalArgs& a, const CLI::App& command, Io io) {
  const auto schema = grammar::load_schema(a.schema);
  require_file(a.checkpoint);
  const auto model = parser::ParserModel::load(a.checkpoint, schema);
  const auto examples = corpus::read_examples(a.data, schema);
  if (examples.empty()) throw std::runtime_error("no examples in " + a.data);
  const auto sentences = sentences_of(examples);
  auto decode = a.serial ? parser::decode_serial : parser::decode_parallel;
  const auto decoded = decode(model, sentences, a.beam);
  std::vector<eval::TreePair> pairs;
  for (std::size_t i = 0; i < examples.size(); ++i) pairs.push_back({decoded[i].tree, examples[i].tree});
  const auto report = eval::evaluate(pairs, schema);
  io.out << "config " << config_digest(command) << "\n" << eval::format_report(report);

  auto doc = nlohmann::ordered_json::parse(eval::report_json(report));
  doc["config_digest"] = config_digest(command);
  doc["beam"] = a.beam;
  if (a.beam > 1) {
    // The beam contains the greedy path, so its best score can only be higher.
    const auto greedy = decode(model, sentences, 1);
    std::size_t monotone = 0;
    for (std::size_t i = 0; i < decoded.size(); ++i) monotone += decoded[i].log_prob >= greedy[i].log_prob - 1e-9;
    io.out << "\nbeam " << a.beam << " best score >= greedy on " << monotone << " / " << decoded.size()
           << " sentences\n";
    doc["beam_not_below_greedy"] = monotone;
  }
  if (!a.json.empty()) {
    std::ofstream f(a.json);
    if (!f) throw std::runtime_error("cannot write " + a.json);
    f << doc.dump(2) << "\n";
  }
  return kExitOk;
}

struct ParseArgs {
  std::string schema = kDataDir + "/reference.schema";
  std::string checkpoint;
  std::size_t beam = 1;
  std::string probs;
};

int cmd_parse(const ParseArgs& a, const CLI::App& command, Io io) {
  const auto schema = grammar::load_schema(a.schema);
  require_file(a.checkpoint);
  const auto model = parser::ParserModel::load(a.checkpoint, schema);
  std::unique_ptr<std::ofstream> probs;
  if (!a.probs.empty()) {
    probs = std::make_unique<std::ofstream>(a.probs);
    if (!*probs) throw std::runtime_error("cannot write " + a.probs);
    *probs << "# config " << config_digest(command) << "\n";
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(io.in, line)) {
    ++line_no;
    const auto tokens = grammar::tokenize(line);
    if (tokens.empty()) {
      io.err << "warning: line " << line_no << " is empty, skipped\n";
      continue;
    }
    std::vector<parser::NodeDiagnostic> diagnostics;
    parser::ScoredTree best;
    if (a.beam > 1)
      best = parser::beam_decode(model, tokens, a.beam).front();
    else
      best = parser::greedy_decode(model, tokens, probs ? &diagnostics : nullptr);
    io.out << grammar::serialize_tree(best.tree, schema) << "\n";
    if (probs) {
      nlohmann::ordered_json j;
      j["sentence"] = line;
      j["log_prob"] = best.log_prob;
      auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
      for (const auto& d : diagnostics) {
        nlohmann::ordered_json n{{"node", d.node}, {"p_active", d.p_active}};
        if (!d.label.empty()) n["label"] = {d.label, d.label_prob};
        if (d.span_prob > 0) n["span"] = {d.span.start, d.span.end, d.span_prob};
        nodes.push_back(std::move(n));
      }
      *probs << j.dump() << "\n";
    }
  }
  return kExitOk;
}

struct StatsArgs {
  std::string schema = kDataDir + "/reference.schema";
  std::vector<std::string> data;
};

int cmd_stats(const StatsArgs& a, const CLI::App&, Io io) {
  const auto schema = grammar::load_schema(a.schema);
  std::vector<corpus::Example> all;
  for (const auto& path : a.data) {
    require_file(path);
    auto examples = corpus::read_examples(path, schema);
    std::size_t tokens = 0;
    for (const auto& e : examples) tokens += e.sentence.size();
    io.out << path << ": " << examples.size() << " examples, mean length "
           << (examples.empty() ? 0.0 : static_cast<double>(tokens) / static_cast<double>(examples.size())) << "\n";
    all.insert(all.end(), std::make_move_iterator(examples.begin()), std::make_move_iterator(examples.end()));
  }
  io.out << corpus::format_histogram(corpus::action_frequency_stats(all, schema));
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Action-tree semantic parsing: data generation, training and evaluation", "actree"};
  app.set_config("--config", "", "TOML/INI file of option defaults; flags override it");
  app.require_subcommand(1);
  Io io{in, out, err};

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate train/valid/test corpora from templates");
  generate->add_option("--schema", gen.schema)->capture_default_str();
  generate->add_option("--templates", gen.templates)->capture_default_str();
  generate->add_option("--noop", gen.noop, "Noop dialogue lines")->capture_default_str();
  generate->add_option("--train", gen.train)->check(CLI::PositiveNumber)->capture_default_str();
  generate->add_option("--valid", gen.valid)->check(CLI::PositiveNumber)->capture_default_str();
  generate->add_option("--test", gen.test)->check(CLI::PositiveNumber)->capture_default_str();
  generate->add_option("--noop-fraction", gen.noop_fraction)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  generate->add_option("--seed", gen.seed)->capture_default_str();
  generate->add_option("--out", gen.out, "Output directory")->capture_default_str();
  generate->add_flag("--serial", gen.serial, "Generate on one thread");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a parser");
  train->add_option("--schema", tr.schema)->capture_default_str();
  train->add_option("--train", tr.train, "Training corpora; each file is one sampler pool")->required();
  train->add_option("--valid", tr.valid);
  train->add_option("--target", tr.target, "Target action-type distribution");
  train->add_option("--pretrained", tr.pretrained, "Word vectors (text)");
  train->add_option("--out", tr.out, "Best checkpoint; the latest goes to <out>.last")->capture_default_str();
  train->add_option("--variant", tr.variant)
      ->check(CLI::IsMember({"independent", "seq2tree", "sentencerec"}))
      ->capture_default_str();
  train->add_option("--d", tr.model.d)->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--heads", tr.model.heads)->check(CLI::NonNegativeNumber)->capture_default_str();
  train->add_option("--layers", tr.model.encoder_layers)->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--pretrained-dim", tr.model.pretrained_dim)->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--free-dim", tr.model.free_dim)->check(CLI::NonNegativeNumber)->capture_default_str();
  train->add_option("--lr", tr.hyper.learning_rate)->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--dropout", tr.hyper.dropout)->check(CLI::Range(0.0, 0.99))->capture_default_str();
  train->add_option("--word-dropout", tr.hyper.word_dropout)->check(CLI::Range(0.0, 0.99))->capture_default_str();
  train->add_option("--smoothing", tr.hyper.label_smoothing)->check(CLI::Range(0.0, 0.99))->capture_default_str();
  train->add_option("--batch", tr.batch)->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--steps", tr.steps)->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--eval-every", tr.eval_every)->check(CLI::NonNegativeNumber)->capture_default_str();
  train->add_option("--beam", tr.beam, "Beam width for validation decoding")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--seed", tr.seed)->capture_default_str();
  train->add_flag("--resume", tr.resume, "Continue from <out>.last");
  train->add_flag("--serial", tr.serial, "Compute batch gradients on one thread");

  EvalArgs ev;
  auto* evaluate = app.add_subcommand("eval", "Decode a corpus and report accuracy, P/R/F and confusion tables");
  evaluate->add_option("--schema", ev.schema)->capture_default_str();
  evaluate->add_option("--checkpoint", ev.checkpoint)->required();
  evaluate->add_option("--data", ev.data)->required();
  evaluate->add_option("--beam", ev.beam)->check(CLI::PositiveNumber)->capture_default_str();
  evaluate->add_option("--json", ev.json, "Write the report document here");
  evaluate->add_flag("--serial", ev.serial);

  ParseArgs pa;
  auto* parse = app.add_subcommand("parse", "Parse sentences from standard input, one per line");
  parse->add_option("--schema", pa.schema)->capture_default_str();
  parse->add_option("--checkpoint", pa.checkpoint)->required();
  parse->add_option("--beam", pa.beam)->check(CLI::PositiveNumber)->capture_default_str();
  parse->add_option("--probs", pa.probs, "Write per-node probabilities here, one JSON line per sentence");

  StatsArgs st;
  auto* stats = app.add_subcommand("stats", "Action-type histogram of corpora");
  stats->add_option("--schema", st.schema)->capture_default_str();
  stats->add_option("data", st.data)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::Error& e) {
    err << "usage error: " << e.what() << "\n";
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) err << sub->help();
    return kExitUsage;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen, *generate, io);
    if (train->parsed()) return cmd_train(tr, *train, io);
    if (evaluate->parsed()) return cmd_eval(ev, *evaluate, io);
    if (parse->parsed()) return cmd_parse(pa, *parse, io);
    if (stats->parsed()) return cmd_stats(st, *stats, io);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace actree::cli
