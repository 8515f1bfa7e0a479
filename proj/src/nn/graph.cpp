#include "actree/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace actree::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("graph shape error: ") + what);
}

Matrix softmax_of(const Matrix& v) {
  Matrix e = (v.array() - v.maxCoeff()).exp().matrix();
  return e / e.sum();
}

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double log_sum_exp(const Matrix& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

double log_sigmoid(double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); }

Graph::Graph(const ParameterStore& store) : store_(&store), param_vars_(store.size()) { nodes_.reserve(256); }

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

std::vector<std::uint32_t> Graph::inputs_of(std::initializer_list<Var> vars) const {
  std::vector<std::uint32_t> in;
  in.reserve(vars.size());
  for (auto v : vars) {
    require(v.valid() && v.index < nodes_.size(), "invalid operand");
    in.push_back(v.index);
  }
  return in;
}

const Matrix& Graph::value(Var v) const {
  require(v.valid() && v.index < nodes_.size(), "invalid variable");
  return val(v.index);
}

Var Graph::constant(Matrix value) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::scalar(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Graph::param(ParamId id) {
  auto& cached = param_vars_.at(id);
  if (cached.valid()) return cached;
  Node n;
  n.op = Op::param;
  n.ref = &store_->value(id);
  n.param = id;
  n.needs_grad = store_->trainable(id);
  cached = push(std::move(n));
  return cached;
}

Var Graph::gather_rows(ParamId table, std::span<const int> rows) {
  const auto& t = store_->value(table);
  Node n;
  n.op = Op::gather_rows;
  n.param = table;
  n.needs_grad = store_->trainable(table);
  n.value.resize(t.cols(), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    require(rows[j] >= 0 && rows[j] < t.rows(), "gather row out of range");
    n.value.col(static_cast<Eigen::Index>(j)) = t.row(rows[j]).transpose();
  }
  n.ints.assign(rows.begin(), rows.end());
  return push(std::move(n));
}

#define ACTREE_BINARY_NODE(opname)           \
  Node n;                                    \
  n.op = Op::opname;                         \
  n.in = inputs_of({a, b});                  \
  n.needs_grad = needs(a.index) || needs(b.index)

Var Graph::matmul(Var a, Var b) {
  ACTREE_BINARY_NODE(matmul);
  require(val(a.index).cols() == val(b.index).rows(), "matmul inner dimensions");
  n.value.noalias() = val(a.index) * val(b.index);
  return push(std::move(n));
}

Var Graph::matmul_tn(Var a, Var b) {
  ACTREE_BINARY_NODE(matmul_tn);
  require(val(a.index).rows() == val(b.index).rows(), "matmul_tn inner dimensions");
  n.value.noalias() = val(a.index).transpose() * val(b.index);
  return push(std::move(n));
}

Var Graph::add(Var a, Var b) {
  ACTREE_BINARY_NODE(add);
  require(val(a.index).rows() == val(b.index).rows() && val(a.index).cols() == val(b.index).cols(), "add shapes");
  n.value = val(a.index) + val(b.index);
  return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
  ACTREE_BINARY_NODE(sub);
  require(val(a.index).rows() == val(b.index).rows() && val(a.index).cols() == val(b.index).cols(), "sub shapes");
  n.value = val(a.index) - val(b.index);
  return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
  ACTREE_BINARY_NODE(mul);
  require(val(a.index).rows() == val(b.index).rows() && val(a.index).cols() == val(b.index).cols(), "mul shapes");
  n.value = val(a.index).cwiseProduct(val(b.index));
  return push(std::move(n));
}

Var Graph::dot(Var a, Var b) {
  ACTREE_BINARY_NODE(dot);
  require(val(a.index).rows() == val(b.index).rows() && val(a.index).cols() == val(b.index).cols(), "dot shapes");
  n.value = Matrix::Constant(1, 1, val(a.index).cwiseProduct(val(b.index)).sum());
  return push(std::move(n));
}

Var Graph::add_column_bias(Var x, Var bias) {
  Node n;
  n.op = Op::add_column_bias;
  n.in = inputs_of({x, bias});
  n.needs_grad = needs(x.index) || needs(bias.index);
  const auto& b = val(bias.index);
  require(b.cols() == 1 && b.rows() == val(x.index).rows(), "bias shape");
  n.value = val(x.index).colwise() + b.col(0);
  return push(std::move(n));
}

#undef ACTREE_BINARY_NODE

Var Graph::scale(Var a, double factor) {
  Node n;
  n.op = Op::scale;
  n.in = inputs_of({a});
  n.needs_grad = needs(a.index);
  n.real = factor;
  n.value = val(a.index) * factor;
  return push(std::move(n));
}

Var Graph::sigmoid(Var a) {
  Node n;
  n.op = Op::sigmoid;
  n.in = inputs_of({a});
  n.needs_grad = needs(a.index);
  n.value = val(a.index).unaryExpr([](double x) { return sigm(x); });
  return push(std::move(n));
}

Var Graph::tanh(Var a) {
  Node n;
  n.op = Op::tanh;
  n.in = inputs_of({a});
  n.needs_grad = needs(a.index);
  n.value = val(a.index).array().tanh().matrix();
  return push(std::move(n));
}

Var Graph::vconcat(std::initializer_list<Var> parts) {
  Node n;
  n.op = Op::vconcat;
  n.in = inputs_of(parts);
  Eigen::Index rows = 0;
  const Eigen::Index cols = val(n.in.front()).cols();
  for (auto i : n.in) {
    require(val(i).cols() == cols, "vconcat column counts");
    rows += val(i).rows();
    n.needs_grad = n.needs_grad || needs(i);
  }
  n.value.resize(rows, cols);
  Eigen::Index at = 0;
  for (auto i : n.in) {
    n.value.middleRows(at, val(i).rows()) = val(i);
    at += val(i).rows();
  }
  return push(std::move(n));
}

Var Graph::column(Var a, int j) {
  Node n;
  n.op = Op::column;
  n.in = inputs_of({a});
  require(j >= 0 && j < val(a.index).cols(), "column index");
  n.needs_grad = needs(a.index);
  n.ints = {j};
  n.value = val(a.index).col(j);
  return push(std::move(n));
}

Var Graph::row(Var a, int i) {
  Node n;
  n.op = Op::row;
  n.in = inputs_of({a});
  require(i >= 0 && i < val(a.index).rows(), "row index");
  n.needs_grad = needs(a.index);
  n.ints = {i};
  n.value = val(a.index).row(i).transpose();
  return push(std::move(n));
}

Var Graph::softmax(Var a) {
  Node n;
  n.op = Op::softmax;
  n.in = inputs_of({a});
  require(val(a.index).cols() == 1, "softmax expects a column vector");
  n.needs_grad = needs(a.index);
  n.value = softmax_of(val(a.index));
  return push(std::move(n));
}

Var Graph::sum(std::span<const Var> scalars) {
  Node n;
  n.op = Op::sum;
  double total = 0.0;
  for (auto v : scalars) {
    require(v.valid() && val(v.index).size() == 1, "sum expects scalars");
    n.in.push_back(v.index);
    n.needs_grad = n.needs_grad || needs(v.index);
    total += val(v.index)(0, 0);
  }
  n.value = Matrix::Constant(1, 1, total);
  return push(std::move(n));
}

Var Graph::log_sigmoid(Var z) {
  Node n;
  n.op = Op::log_sigmoid;
  n.in = inputs_of({z});
  require(val(z.index).size() == 1, "log_sigmoid expects a scalar");
  n.needs_grad = needs(z.index);
  const double x = val(z.index)(0, 0);
  n.value = Matrix::Constant(1, 1, nn::log_sigmoid(x));
  return push(std::move(n));
}

Var Graph::log_softmax_at(Var logits, int target) {
  Node n;
  n.op = Op::log_softmax_at;
  n.in = inputs_of({logits});
  const auto& l = val(logits.index);
  require(l.cols() == 1 && target >= 0 && target < l.rows(), "log_softmax_at target");
  n.needs_grad = needs(logits.index);
  n.ints = {target};
  n.value = Matrix::Constant(1, 1, l(target, 0) - log_sum_exp(l));
  return push(std::move(n));
}

Var Graph::smoothed_nll(Var logits, int target, double smoothing) {
  Node n;
  n.op = Op::smoothed_nll;
  n.in = inputs_of({logits});
  const auto& l = val(logits.index);
  require(l.cols() == 1 && target >= 0 && target < l.rows(), "smoothed_nll target");
  n.needs_grad = needs(logits.index);
  n.ints = {target};
  n.real = smoothing;
  const double lse = log_sum_exp(l);
  const double nll_target = lse - l(target, 0);
  const double nll_uniform = lse - l.mean();
  n.value = Matrix::Constant(1, 1, (1.0 - smoothing) * nll_target + smoothing * nll_uniform);
  return push(std::move(n));
}

Var Graph::gru_cell(Var x, Var h, const GruVars& p) {
  Node n;
  n.op = Op::gru_cell;
  n.in = inputs_of({x, h, p.w_input, p.w_hidden, p.b_input, p.b_hidden});
  for (auto i : n.in) n.needs_grad = n.needs_grad || needs(i);
  const auto& wi = val(p.w_input.index);
  const auto& wh = val(p.w_hidden.index);
  const auto& hv = val(h.index);
  const Eigen::Index hd = hv.rows();
  require(wi.rows() == 3 * hd && wh.rows() == 3 * hd && wh.cols() == hd && wi.cols() == val(x.index).rows() &&
              hv.cols() == 1 && val(x.index).cols() == 1,
          "gru_cell shapes");
  Vector gi = wi * val(x.index).col(0) + val(p.b_input.index).col(0);
  Vector gh = wh * hv.col(0) + val(p.b_hidden.index).col(0);
  n.aux.resize(4 * hd, 1);
  auto r = n.aux.block(0, 0, hd, 1);
  auto z = n.aux.block(hd, 0, hd, 1);
  auto c = n.aux.block(2 * hd, 0, hd, 1);
  auto ghn = n.aux.block(3 * hd, 0, hd, 1);
  r = (gi.segment(0, hd) + gh.segment(0, hd)).unaryExpr([](double v) { return sigm(v); });
  z = (gi.segment(hd, hd) + gh.segment(hd, hd)).unaryExpr([](double v) { return sigm(v); });
  ghn = gh.segment(2 * hd, hd);
  c = (gi.segment(2 * hd, hd).array() + r.array() * ghn.array()).tanh().matrix();
  n.value = ((1.0 - z.array()) * c.array() + z.array() * hv.array()).matrix();
  return push(std::move(n));
}

Var Graph::gru_sequence(Var inputs, const GruVars& p, bool reverse) {
  Node n;
  n.op = Op::gru_sequence;
  n.in = inputs_of({inputs, p.w_input, p.w_hidden, p.b_input, p.b_hidden});
  for (auto i : n.in) n.needs_grad = n.needs_grad || needs(i);
  const auto& x = val(inputs.index);
  const auto& wi = val(p.w_input.index);
  const auto& wh = val(p.w_hidden.index);
  const Eigen::Index hd = wh.cols();
  const Eigen::Index steps = x.cols();
  require(wi.rows() == 3 * hd && wh.rows() == 3 * hd && wi.cols() == x.rows(), "gru_sequence shapes");
  Matrix gi = wi * x;
  gi.colwise() += val(p.b_input.index).col(0);
  n.value.resize(hd, steps);
  n.aux.resize(4 * hd, steps);
  const auto& bh = val(p.b_hidden.index);
  Vector h = Vector::Zero(hd);
  Vector gh(3 * hd);
  for (Eigen::Index k = 0; k < steps; ++k) {
    const Eigen::Index t = reverse ? steps - 1 - k : k;
    gh.noalias() = wh * h;
    gh += bh.col(0);
    auto a = n.aux.col(t);
    for (Eigen::Index j = 0; j < hd; ++j) {
      const double r = sigm(gi(j, t) + gh(j));
      const double z = sigm(gi(hd + j, t) + gh(hd + j));
      const double c = std::tanh(gi(2 * hd + j, t) + r * gh(2 * hd + j));
      a(j) = r;
      a(hd + j) = z;
      a(2 * hd + j) = c;
      a(3 * hd + j) = gh(2 * hd + j);
      h(j) = (1.0 - z) * c + z * h(j);
    }
    n.value.col(t) = h;
  }
  n.ints = {reverse ? 1 : 0};
  return push(std::move(n));
}

Matrix& Graph::grad_of(std::uint32_t i, std::vector<Matrix>& grads, std::vector<char>& have, Gradients& out) {
  auto& node = nodes_[i];
  if (node.op == Op::param) return out.at(node.param, node.ref->rows(), node.ref->cols());
  if (!have[i]) {
    grads[i].setZero(val(i).rows(), val(i).cols());
    have[i] = 1;
  }
  return grads[i];
}

void Graph::backward(Var loss, Gradients& out) {
  require(loss.valid() && val(loss.index).size() == 1, "backward expects a scalar loss");
  if (out.size() != store_->size()) throw std::invalid_argument("gradient buffer does not match the store");
  std::vector<Matrix> grads(nodes_.size());
  std::vector<char> have(nodes_.size(), 0);
  grads[loss.index] = Matrix::Ones(1, 1);
  have[loss.index] = 1;

  auto sink = [&](std::uint32_t i) -> Matrix& { return grad_of(i, grads, have, out); };

  for (std::int64_t idx = loss.index; idx >= 0; --idx) {
    const auto i = static_cast<std::uint32_t>(idx);
    if (!have[i]) continue;
    auto& node = nodes_[i];
    if (!node.needs_grad) continue;
    const Matrix& g = grads[i];
    const auto& in = node.in;
    switch (node.op) {
      case Op::constant:
      case Op::param: break;
      case Op::gather_rows: {
        const auto& t = store_->value(node.param);
        auto& dt = out.at(node.param, t.rows(), t.cols());
        for (std::size_t j = 0; j < node.ints.size(); ++j)
          dt.row(node.ints[j]) += g.col(static_cast<Eigen::Index>(j)).transpose();
        break;
      }
      case Op::matmul:
        if (needs(in[0])) sink(in[0]).noalias() += g * val(in[1]).transpose();
        if (needs(in[1])) sink(in[1]).noalias() += val(in[0]).transpose() * g;
        break;
      case Op::matmul_tn:
        if (needs(in[0])) sink(in[0]).noalias() += val(in[1]) * g.transpose();
        if (needs(in[1])) sink(in[1]).noalias() += val(in[0]) * g;
        break;
      case Op::add:
        if (needs(in[0])) sink(in[0]) += g;
        if (needs(in[1])) sink(in[1]) += g;
        break;
      case Op::sub:
        if (needs(in[0])) sink(in[0]) += g;
        if (needs(in[1])) sink(in[1]) -= g;
        break;
      case Op::mul:
        if (needs(in[0])) sink(in[0]) += g.cwiseProduct(val(in[1]));
        if (needs(in[1])) sink(in[1]) += g.cwiseProduct(val(in[0]));
        break;
      case Op::scale:
        if (needs(in[0])) sink(in[0]) += g * node.real;
        break;
      case Op::add_column_bias:
        if (needs(in[0])) sink(in[0]) += g;
        if (needs(in[1])) sink(in[1]) += g.rowwise().sum();
        break;
      case Op::sigmoid:
        if (needs(in[0]))
          sink(in[0]) += (g.array() * node.value.array() * (1.0 - node.value.array())).matrix();
        break;
      case Op::tanh:
        if (needs(in[0])) sink(in[0]) += (g.array() * (1.0 - node.value.array().square())).matrix();
        break;
      case Op::vconcat: {
        Eigen::Index at = 0;
        for (auto j : in) {
          const auto rows = val(j).rows();
          if (needs(j)) sink(j) += g.middleRows(at, rows);
          at += rows;
        }
        break;
      }
      case Op::column:
        if (needs(in[0])) sink(in[0]).col(node.ints[0]) += g;
        break;
      case Op::row:
        if (needs(in[0])) sink(in[0]).row(node.ints[0]) += g.transpose();
        break;
      case Op::dot: {
        const double d = g(0, 0);
        if (needs(in[0])) sink(in[0]) += d * val(in[1]);
        if (needs(in[1])) sink(in[1]) += d * val(in[0]);
        break;
      }
      case Op::softmax: {
        const auto& y = node.value;
        const double s = g.cwiseProduct(y).sum();
        if (needs(in[0])) sink(in[0]) += (y.array() * (g.array() - s)).matrix();
        break;
      }
      case Op::sum:
        for (auto j : in)
          if (needs(j)) sink(j) += g;
        break;
      case Op::log_sigmoid:
        if (needs(in[0])) sink(in[0])(0, 0) += g(0, 0) * sigm(-val(in[0])(0, 0));
        break;
      case Op::log_softmax_at: {
        if (!needs(in[0])) break;
        Matrix d = -softmax_of(val(in[0]));
        d(node.ints[0], 0) += 1.0;
        sink(in[0]) += g(0, 0) * d;
        break;
      }
      case Op::smoothed_nll: {
        if (!needs(in[0])) break;
        const auto& l = val(in[0]);
        Matrix d = softmax_of(l);
        d.array() -= node.real / static_cast<double>(l.rows());
        d(node.ints[0], 0) -= 1.0 - node.real;
        sink(in[0]) += g(0, 0) * d;
        break;
      }
      case Op::gru_cell: {
        const auto& x = val(in[0]);
        const auto& h = val(in[1]);
        const auto& wi = val(in[2]);
        const auto& wh = val(in[3]);
        const Eigen::Index hd = h.rows();
        const auto r = node.aux.block(0, 0, hd, 1).array();
        const auto z = node.aux.block(hd, 0, hd, 1).array();
        const auto c = node.aux.block(2 * hd, 0, hd, 1).array();
        const auto ghn = node.aux.block(3 * hd, 0, hd, 1).array();
        const auto gh_out = g.array();
        Vector dgi(3 * hd), dgh(3 * hd);
        const Eigen::ArrayXd dc_pre = gh_out * (1.0 - z) * (1.0 - c.square());
        const Eigen::ArrayXd dz_pre = gh_out * (h.array() - c) * z * (1.0 - z);
        const Eigen::ArrayXd dr_pre = dc_pre * ghn * r * (1.0 - r);
        dgi << dr_pre.matrix(), dz_pre.matrix(), dc_pre.matrix();
        dgh << dr_pre.matrix(), dz_pre.matrix(), (dc_pre * r).matrix();
        if (needs(in[0])) sink(in[0]).noalias() += wi.transpose() * dgi;
        if (needs(in[1])) {
          auto& dh = sink(in[1]);
          dh.noalias() += wh.transpose() * dgh;
          dh += (gh_out * z).matrix();
        }
        if (needs(in[2])) sink(in[2]).noalias() += dgi * x.transpose();
        if (needs(in[3])) sink(in[3]).noalias() += dgh * h.transpose();
        if (needs(in[4])) sink(in[4]) += dgi;
        if (needs(in[5])) sink(in[5]) += dgh;
        break;
      }
      case Op::gru_sequence: {
        const auto& x = val(in[0]);
        const auto& wi = val(in[1]);
        const auto& wh = val(in[2]);
        const Eigen::Index hd = wh.cols();
        const Eigen::Index steps = x.cols();
        const bool reverse = node.ints[0] != 0;
        const auto& hs = node.value;
        Matrix dgi(3 * hd, steps), dgh(3 * hd, steps), hprev(hd, steps);
        Vector carry = Vector::Zero(hd);
        for (Eigen::Index k = steps - 1; k >= 0; --k) {
          const Eigen::Index t = reverse ? steps - 1 - k : k;
          const Eigen::Index prev = reverse ? t + 1 : t - 1;
          const bool has_prev = k > 0;
          if (has_prev) hprev.col(t) = hs.col(prev);
          else hprev.col(t).setZero();
          const Vector dh = g.col(t) + carry;
          const auto a = node.aux.col(t);
          for (Eigen::Index j = 0; j < hd; ++j) {
            const double r = a(j), z = a(hd + j), c = a(2 * hd + j), ghn = a(3 * hd + j);
            const double dc_pre = dh(j) * (1.0 - z) * (1.0 - c * c);
            const double dz_pre = dh(j) * (hprev(j, t) - c) * z * (1.0 - z);
            const double dr_pre = dc_pre * ghn * r * (1.0 - r);
            dgi(j, t) = dr_pre;
            dgi(hd + j, t) = dz_pre;
            dgi(2 * hd + j, t) = dc_pre;
            dgh(j, t) = dr_pre;
            dgh(hd + j, t) = dz_pre;
            dgh(2 * hd + j, t) = dc_pre * r;
          }
          carry.noalias() = wh.transpose() * dgh.col(t);
          for (Eigen::Index j = 0; j < hd; ++j) carry(j) += dh(j) * a(hd + j);
        }
        if (needs(in[0])) sink(in[0]).noalias() += wi.transpose() * dgi;
        if (needs(in[1])) sink(in[1]).noalias() += dgi * x.transpose();
        if (needs(in[2])) sink(in[2]).noalias() += dgh * hprev.transpose();
        if (needs(in[3])) sink(in[3]) += dgi.rowwise().sum();
        if (needs(in[4])) sink(in[4]) += dgh.rowwise().sum();
        break;
      }
    }
  }
}

}  // namespace actree::nn
