#include <random>

#include <benchmark/benchmark.h>

#include "actree/eval/metrics.hpp"
#include "actree/parser/inference.hpp"
#include "actree/parser/train.hpp"
#include "actree/templates/library.hpp"

using namespace actree;

namespace {

struct Fixture {
  grammar::GrammarSchema schema = grammar::load_schema(ACTREE_DATA_DIR "/reference.schema");
  templates::TemplateLibrary library = templates::load_template_library(ACTREE_DATA_DIR "/reference.templates", schema);
  std::vector<std::vector<std::string>> noop = templates::load_noop_lines(ACTREE_DATA_DIR "/noop_lines.txt");
  std::vector<corpus::Example> examples =
      templates::generate_serial(library, noop, templates::kDefaultNoopFraction, 5, 0, 256);
  std::vector<std::vector<std::string>> sentences;
  parser::ParserModel model;

  Fixture() {
    for (const auto& e : examples) sentences.push_back(e.sentence);
    parser::ModelConfig config;
    config.d = 64;
    model = parser::ParserModel::create(schema, config, parser::build_vocabulary(sentences), nullptr, 3);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void batch_gradients(benchmark::State& state, bool parallel) {
  const auto& f = fixture();
  std::vector<const corpus::Example*> batch;
  for (int i = 0; i < 32; ++i) batch.push_back(&f.examples[i]);
  auto total = f.model.store().make_gradients();
  parser::BatchWorkspace work;
  parser::Hyperparameters hyper;
  std::uint64_t step = 0;
  for (auto _ : state) {
    auto loss = parallel ? parser::batch_gradients_parallel(f.model, batch, hyper, 1, 32 * step++, total, work)
                         : parser::batch_gradients_serial(f.model, batch, hyper, 1, 32 * step++, total, work);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations() * 32);
}

void decode(benchmark::State& state, bool parallel) {
  const auto& f = fixture();
  const auto width = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto out = parallel ? parser::decode_parallel(f.model, f.sentences, width)
                        : parser::decode_serial(f.model, f.sentences, width);
    benchmark::DoNotOptimize(out);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.sentences.size()));
}

void generate(benchmark::State& state, bool parallel) {
  const auto& f = fixture();
  for (auto _ : state) {
    auto out = parallel ? templates::generate_parallel(f.library, f.noop, templates::kDefaultNoopFraction, 9, 0, 4096)
                        : templates::generate_serial(f.library, f.noop, templates::kDefaultNoopFraction, 9, 0, 4096);
    benchmark::DoNotOptimize(out);
  }
  state.SetItemsProcessed(state.iterations() * 4096);
}

void confusion(benchmark::State& state, bool parallel) {
  const auto& f = fixture();
  auto more = templates::generate_serial(f.library, f.noop, templates::kDefaultNoopFraction, 10, 0, 8192);
  std::vector<eval::TreePair> pairs;
  for (std::size_t i = 0; i < more.size(); ++i) pairs.push_back({more[(i * 7) % more.size()].tree, more[i].tree});
  for (auto _ : state) {
    auto t = parallel ? eval::confusion_tables_parallel(pairs, f.schema) : eval::confusion_tables(pairs, f.schema);
    benchmark::DoNotOptimize(t);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(pairs.size()));
}

}  // namespace

BENCHMARK_CAPTURE(batch_gradients, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(batch_gradients, parallel, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(decode, serial, false)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(decode, parallel, true)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(generate, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(generate, parallel, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(confusion, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(confusion, parallel, true)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
