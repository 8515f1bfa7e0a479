#include "actree/nn/parameter_store.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace actree::nn {

namespace {

constexpr char kMagic[8] = {'A', 'C', 'T', 'R', 'C', 'K', 'P', '1'};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint truncated");
  return v;
}

void put_string(std::ostream& out, std::string_view s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  auto n = get<std::uint64_t>(in);
  if (n > (1ULL << 32)) throw std::runtime_error("checkpoint string too large");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("checkpoint truncated");
  return s;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

void get_matrix(std::istream& in, Matrix& m) {
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint truncated");
}

}  // namespace

Matrix& Gradients::at(ParamId id, Eigen::Index rows, Eigen::Index cols) {
  auto& g = grads_.at(id);
  if (!touched_[id]) {
    if (g.rows() != rows || g.cols() != cols) g.resize(rows, cols);
    g.setZero();
    touched_[id] = 1;
  }
  return g;
}

void Gradients::accumulate(const Gradients& other) {
  if (other.size() != size()) throw std::invalid_argument("gradient buffers of different stores");
  for (ParamId i = 0; i < size(); ++i) {
    if (!other.touched_[i]) continue;
    const auto& o = other.grads_[i];
    at(i, o.rows(), o.cols()) += o;
  }
}

void Gradients::scale(double factor) {
  for (ParamId i = 0; i < size(); ++i)
    if (touched_[i]) grads_[i] *= factor;
}

void Gradients::clear() { std::fill(touched_.begin(), touched_.end(), 0); }

ParamId ParameterStore::add(std::string name, Matrix init, bool trainable) {
  if (by_name_.contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  const auto id = static_cast<ParamId>(values_.size());
  by_name_.emplace(name, id);
  names_.push_back(std::move(name));
  accumulators_.push_back(Matrix::Zero(init.rows(), init.cols()));
  values_.push_back(std::move(init));
  trainable_.push_back(trainable ? 1 : 0);
  grads_ = Gradients(values_.size());
  return id;
}

std::optional<ParamId> ParameterStore::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

ParamId ParameterStore::id(std::string_view name) const {
  auto found = find(name);
  if (!found) throw std::out_of_range("no parameter '" + std::string(name) + "'");
  return *found;
}

std::size_t ParameterStore::parameter_count(bool trainable_only) const {
  std::size_t n = 0;
  for (ParamId i = 0; i < size(); ++i)
    if (!trainable_only || trainable_[i]) n += static_cast<std::size_t>(values_[i].size());
  return n;
}

void ParameterStore::save(const std::filesystem::path& path, std::string_view metadata) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_string(out, metadata);
  put<std::uint64_t>(out, values_.size());
  for (ParamId i = 0; i < size(); ++i) {
    put_string(out, names_[i]);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(values_[i].rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(values_[i].cols()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(trainable_[i]));
    put_matrix(out, values_[i]);
    put_matrix(out, accumulators_[i]);
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string ParameterStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error(path.string() + " is not a checkpoint");
  auto metadata = get_string(in);
  ParameterStore loaded;
  auto count = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name = get_string(in);
    auto rows = get<std::uint64_t>(in);
    auto cols = get<std::uint64_t>(in);
    auto trainable = get<std::uint8_t>(in);
    Matrix value(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    get_matrix(in, value);
    auto id = loaded.add(std::move(name), std::move(value), trainable != 0);
    get_matrix(in, loaded.accumulators_[id]);
  }
  *this = std::move(loaded);
  return metadata;
}

bool ParameterStore::operator==(const ParameterStore& other) const {
  if (names_ != other.names_ || trainable_ != other.trainable_) return false;
  for (ParamId i = 0; i < size(); ++i) {
    const auto &a = values_[i], &b = other.values_[i];
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    if (std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) != 0) return false;
    const auto &x = accumulators_[i], &y = other.accumulators_[i];
    if (std::memcmp(x.data(), y.data(), sizeof(double) * x.size()) != 0) return false;
  }
  return true;
}

}  // namespace actree::nn
