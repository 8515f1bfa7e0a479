#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "actree/corpus/example.hpp"
#include "actree/nn/parameter_store.hpp"
#include "actree/parser/model.hpp"

namespace actree::parser {

struct Hyperparameters {
  double learning_rate = 0.05;
  double dropout = 0.2;
  double word_dropout = 0.1;
  double label_smoothing = 0.1;
};

/// Smoothed −L of one example under dropout drawn from `rng_seed`; its
/// gradients are added to `grads`.
double example_gradients(const ParserModel& model, const corpus::Example& example, const Hyperparameters& hyper,
                         std::uint64_t rng_seed, nn::Gradients& grads);

/// Reusable per-example buffers for batch gradients.
struct BatchWorkspace {
  std::vector<nn::Gradients> per_example;
  std::vector<double> losses;
};

/// Mean loss over the batch; `total` receives the mean gradient. Example i
/// draws its dropout masks from stream_seed(seed, first_index + i), and
/// per-example gradients are summed in batch order, so both versions agree
/// bit for bit.
double batch_gradients_serial(const ParserModel& model, std::span<const corpus::Example* const> batch,
                              const Hyperparameters& hyper, std::uint64_t seed, std::uint64_t first_index,
                              nn::Gradients& total, BatchWorkspace& work);
double batch_gradients_parallel(const ParserModel& model, std::span<const corpus::Example* const> batch,
                                const Hyperparameters& hyper, std::uint64_t seed, std::uint64_t first_index,
                                nn::Gradients& total, BatchWorkspace& work);

/// Exact-match accuracy of decoded trees; 0 on an empty set.
double decode_accuracy(const ParserModel& model, const std::vector<corpus::Example>& examples, std::size_t beam,
                       bool parallel);

struct CurvePoint {
  long step = 0;
  double train_loss = 0.0;  // mean over the steps since the previous point
  double valid_accuracy = 0.0;
};

struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using ExampleStream = std::function<const corpus::Example&()>;

struct TrainOptions {
  Hyperparameters hyper;
  int batch_size = 32;
  long steps = 0;  // total, including steps done before a resume
  long eval_every = 250;
  std::uint64_t seed = 1;
  std::size_t beam = 1;
  bool parallel = true;
  /// Resume point. The stream must already be positioned after
  /// start_step * batch_size draws.
  long start_step = 0;
  double best_accuracy = -1.0;
  long best_step = -1;
  const nn::ParameterStore* best_store = nullptr;
  std::function<void(const CurvePoint&)> on_eval;
  /// Called after every step; `model` holds the latest parameters.
  std::function<void(long step, const ParserModel& model)> on_step;
};

struct TrainResult {
  std::vector<CurvePoint> curve;
  long steps_done = 0;
  long best_step = -1;
  double best_accuracy = -1.0;
  nn::ParameterStore last;  // parameters after the final step
};

/// Minimises the smoothed −L with Adagrad, evaluating validation accuracy
/// every `eval_every` steps and at the end. On return the model holds the
/// parameters with the best validation accuracy (the last ones when `valid`
/// is empty).
TrainResult train_parser(ParserModel& model, const ExampleStream& next, const std::vector<corpus::Example>& valid,
                         const TrainOptions& options);

}  // namespace actree::parser
