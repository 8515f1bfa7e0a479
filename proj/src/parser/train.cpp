#include "actree/parser/train.hpp"

#include <cmath>
#include <exception>
#include <random>
#include <string>

#include "actree/nn/optim.hpp"
#include "actree/parser/inference.hpp"
#include "actree/util/random.hpp"

namespace actree::parser {

double example_gradients(const ParserModel& model, const corpus::Example& example, const Hyperparameters& hyper,
                         std::uint64_t rng_seed, nn::Gradients& grads) {
  std::mt19937_64 rng(rng_seed);
  ForwardOptions options;
  options.dropout = hyper.dropout;
  options.word_dropout = hyper.word_dropout;
  options.rng = &rng;
  SentenceSession session(model, example.sentence, options);
  auto loss = training_loss(session, example.tree, hyper.label_smoothing);
  session.graph().backward(loss, grads);
  return session.graph().scalar_value(loss);
}

namespace {

constexpr std::uint64_t kDropoutSalt = 0x64726f70;

void prepare(const ParserModel& model, std::size_t n, BatchWorkspace& work) {
  if (work.per_example.size() < n) work.per_example.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (work.per_example[i].size() != model.store().size()) work.per_example[i] = model.store().make_gradients();
    work.per_example[i].clear();
  }
  work.losses.assign(n, 0.0);
}

double reduce(std::size_t n, BatchWorkspace& work, nn::Gradients& total) {
  total.clear();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total.accumulate(work.per_example[i]);
    loss += work.losses[i];
  }
  total.scale(1.0 / static_cast<double>(n));
  return loss / static_cast<double>(n);
}

}  // namespace

double batch_gradients_serial(const ParserModel& model, std::span<const corpus::Example* const> batch,
                              const Hyperparameters& hyper, std::uint64_t seed, std::uint64_t first_index,
                              nn::Gradients& total, BatchWorkspace& work) {
  prepare(model, batch.size(), work);
  for (std::size_t i = 0; i < batch.size(); ++i)
    work.losses[i] = example_gradients(model, *batch[i], hyper, util::stream_seed(seed, first_index + i, kDropoutSalt),
                                       work.per_example[i]);
  return reduce(batch.size(), work, total);
}

double batch_gradients_parallel(const ParserModel& model, std::span<const corpus::Example* const> batch,
                                const Hyperparameters& hyper, std::uint64_t seed, std::uint64_t first_index,
                                nn::Gradients& total, BatchWorkspace& work) {
  const auto n = static_cast<long>(batch.size());
  prepare(model, batch.size(), work);
  std::vector<std::exception_ptr> errors(batch.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < n; ++i) {
    try {
      work.losses[i] = example_gradients(model, *batch[i], hyper,
                                         util::stream_seed(seed, first_index + i, kDropoutSalt), work.per_example[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return reduce(batch.size(), work, total);
}

double decode_accuracy(const ParserModel& model, const std::vector<corpus::Example>& examples, std::size_t beam,
                       bool parallel) {
  if (examples.empty()) return 0.0;
  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(examples.size());
  for (const auto& e : examples) sentences.push_back(e.sentence);
  auto decoded = parallel ? decode_parallel(model, sentences, beam) : decode_serial(model, sentences, beam);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < examples.size(); ++i)
    if (grammar::tree_equal(decoded[i].tree, examples[i].tree)) ++correct;
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

TrainResult train_parser(ParserModel& model, const ExampleStream& next, const std::vector<corpus::Example>& valid,
                         const TrainOptions& options) {
  if (options.batch_size < 1) throw std::invalid_argument("batch size must be positive");
  TrainResult result;
  result.best_accuracy = options.best_accuracy;
  result.best_step = options.best_step;
  nn::ParameterStore best = options.best_store ? *options.best_store : nn::ParameterStore{};
  bool have_best = options.best_store != nullptr;

  auto& store = model.store();
  auto total = store.make_gradients();
  BatchWorkspace work;
  std::vector<const corpus::Example*> batch(options.batch_size);
  double loss_sum = 0.0;
  long loss_steps = 0;

  auto evaluate = [&](long step) {
    CurvePoint point;
    point.step = step;
    point.train_loss = loss_steps ? loss_sum / static_cast<double>(loss_steps) : 0.0;
    point.valid_accuracy = decode_accuracy(model, valid, options.beam, options.parallel);
    loss_sum = 0.0;
    loss_steps = 0;
    if (!valid.empty() && point.valid_accuracy > result.best_accuracy) {
      result.best_accuracy = point.valid_accuracy;
      result.best_step = step;
      best = store;
      have_best = true;
    }
    result.curve.push_back(point);
    if (options.on_eval) options.on_eval(point);
  };

  for (long step = options.start_step; step < options.steps; ++step) {
    for (auto& slot : batch) slot = &next();
    const auto first = static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(options.batch_size);
    const double loss =
        options.parallel
            ? batch_gradients_parallel(model, batch, options.hyper, options.seed, first, total, work)
            : batch_gradients_serial(model, batch, options.hyper, options.seed, first, total, work);
    if (!std::isfinite(loss)) {
      std::string origins;
      for (const auto* e : batch) origins += (origins.empty() ? "" : ", ") + e->origin;
      throw TrainingDiverged("non-finite loss at step " + std::to_string(step) + " (batch origins: " + origins + ")");
    }
    try {
      nn::adagrad_step(store, total, options.hyper.learning_rate);
    } catch (const nn::NonFiniteGradient& e) {
      throw TrainingDiverged("step " + std::to_string(step) + ": " + e.what());
    }
    loss_sum += loss;
    ++loss_steps;
    result.steps_done = step + 1;
    const bool last = step + 1 == options.steps;
    if (last || (options.eval_every > 0 && (step + 1) % options.eval_every == 0)) evaluate(step + 1);
    if (options.on_step) options.on_step(step + 1, model);
  }

  result.last = store;
  if (have_best && !valid.empty()) store = best;
  return result;
}

}  // namespace actree::parser
