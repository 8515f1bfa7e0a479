#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace actree::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

using ParamId = std::uint32_t;

/// Gradient buffers shaped like the parameters of one store. Buffers are
/// allocated on first touch so per-thread instances stay cheap.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::size_t count) : grads_(count), touched_(count, 0) {}

  std::size_t size() const noexcept { return grads_.size(); }
  bool touched(ParamId id) const { return touched_.at(id) != 0; }
  /// Buffer for `id`, zero-initialised with the given shape on first use.
  Matrix& at(ParamId id, Eigen::Index rows, Eigen::Index cols);
  const Matrix& get(ParamId id) const { return grads_.at(id); }

  /// this += other, parameter by parameter in index order.
  void accumulate(const Gradients& other);
  void scale(double factor);
  void clear();

 private:
  std::vector<Matrix> grads_;
  std::vector<char> touched_;
};

/// Named dense parameters with paired gradient buffers and Adagrad
/// accumulators. Frozen parameters are stored and checkpointed but never
/// updated.
class ParameterStore {
 public:
  ParamId add(std::string name, Matrix init, bool trainable = true);

  std::size_t size() const noexcept { return values_.size(); }
  std::optional<ParamId> find(std::string_view name) const;
  ParamId id(std::string_view name) const;
  const std::string& name(ParamId id) const { return names_.at(id); }
  bool trainable(ParamId id) const { return trainable_.at(id) != 0; }

  Matrix& value(ParamId id) { return values_.at(id); }
  const Matrix& value(ParamId id) const { return values_.at(id); }
  Matrix& accumulator(ParamId id) { return accumulators_.at(id); }
  const Matrix& accumulator(ParamId id) const { return accumulators_.at(id); }

  Gradients& gradients() noexcept { return grads_; }
  const Gradients& gradients() const noexcept { return grads_; }
  Gradients make_gradients() const { return Gradients(values_.size()); }

  std::size_t parameter_count(bool trainable_only = true) const;

  /// Binary container: magic, metadata string, then for each tensor its name,
  /// shape, trainable flag, value and accumulator as raw little-endian doubles.
  void save(const std::filesystem::path& path, std::string_view metadata) const;
  /// Replaces the store's contents; returns the metadata string.
  std::string load(const std::filesystem::path& path);

  bool operator==(const ParameterStore& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::vector<Matrix> accumulators_;
  std::vector<char> trainable_;
  std::unordered_map<std::string, ParamId> by_name_;
  Gradients grads_;
};

}  // namespace actree::nn
