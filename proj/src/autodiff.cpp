#include "dnsd/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "dnsd/kernels.hpp"

namespace dnsd::ad {

const Tensor& Var::value() const {
  if (!tape_) throw TapeError("var: use of an unbound Var");
  return tape_->value(*this);
}

void Tape::check_owner(const Var& v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw TapeError("tape: Var does not belong to this tape");
  }
}

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NonFiniteError("constant: non-finite input");
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  if (!p.value.all_finite()) throw NonFiniteError("parameter " + p.name + ": non-finite value");
  Node node;
  node.value = p.value;
  node.param = &p;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward,
                 const char* op_name) {
  if (!value.all_finite()) {
    throw NonFiniteError(std::string(op_name) + ": produced non-finite values");
  }
  Node node;
  node.value = std::move(value);
  for (const Var& in : inputs) {
    if (!in.valid()) continue;
    check_owner(in);
    if (nodes_[in.id()].requires_grad) node.requires_grad = true;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(const Var& v) const {
  check_owner(v);
  return nodes_[v.id()].value;
}

bool Tape::requires_grad(const Var& v) const {
  check_owner(v);
  return nodes_[v.id()].requires_grad;
}

Tensor& Tape::grad_buffer(const Var& v) {
  check_owner(v);
  Node& n = nodes_[v.id()];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

const Tensor& Tape::grad(const Var& v) const {
  check_owner(v);
  static const Tensor kEmpty;
  const Node& n = nodes_[v.id()];
  return n.has_grad ? n.grad : kEmpty;
}

void Tape::backward(const Var& loss) {
  check_owner(loss);
  if (consumed_) throw TapeError("backward: tape already consumed; run a new forward pass");
  if (nodes_[loss.id()].value.size() != 1) {
    throw TapeError("backward: loss must be a scalar, got " +
                    to_string(nodes_[loss.id()].value.shape()));
  }
  if (!nodes_[loss.id()].requires_grad) {
    throw TapeError("backward: loss is not connected to any parameter");
  }
  consumed_ = true;
  grad_buffer(loss)[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad, n.value);
    n.backward = nullptr;
  }
  for (auto& [param, id] : param_nodes_) {
    const Node& n = nodes_[id];
    param->grad = n.has_grad ? n.grad : Tensor(param->value.shape());
  }
}

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

bool is_single(const Tensor& t) { return t.size() == 1; }

// Resolves the output shape of a broadcasting binary op.
Shape binary_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return a.shape();
  if (is_single(b)) return a.shape();
  if (is_single(a)) return b.shape();
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " +
                   to_string(b.shape()));
}

// Accumulates `g` into `dst`, summing when dst is the broadcast scalar side.
void accumulate(Tensor& dst, const Tensor& g, double sign = 1.0) {
  if (dst.size() == g.size()) {
    kernels::axpy(g.size(), sign, g.data(), dst.data());
  } else {
    dst[0] += sign * kernels::sum(g.size(), g.data());
  }
}

template <class F>
Tensor map_binary(const Tensor& a, const Tensor& b, Shape shape, F f) {
  Tensor out(std::move(shape));
  const std::size_t n = out.size();
  const bool sa = a.size() != n;
  const bool sb = b.size() != n;
  for (std::size_t i = 0; i < n; ++i) out[i] = f(a[sa ? 0 : i], b[sb ? 0 : i]);
  return out;
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.rank() == 2 && bv.rank() == 2, "matmul: operands must be rank 2");
  require(av.dim(1) == bv.dim(0), "matmul: inner dimensions differ: " + to_string(av.shape()) +
                                      " x " + to_string(bv.shape()));
  const std::size_t m = av.dim(0), k = av.dim(1), p = bv.dim(1);
  Tensor out(Shape{m, p});
  kernels::gemm(false, false, m, p, k, av.data(), bv.data(), out.data(), false);
  return a.tape()->record(
      std::move(out), {a, b},
      [a, b, m, k, p](Tape& t, const Tensor& g, const Tensor&) {
        if (t.requires_grad(a)) {
          kernels::gemm(false, true, m, k, p, g.data(), t.value(b).data(),
                        t.grad_buffer(a).data(), true);
        }
        if (t.requires_grad(b)) {
          kernels::gemm(true, false, k, p, m, t.value(a).data(), g.data(),
                        t.grad_buffer(b).data(), true);
        }
      },
      "matmul");
}

Var transpose(const Var& a) {
  const Tensor& av = a.value();
  require(av.rank() == 2, "transpose: operand must be rank 2");
  const std::size_t r = av.dim(0), c = av.dim(1);
  Tensor out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = av.at(i, j);
  return a.tape()->record(
      std::move(out), {a},
      [a, r, c](Tape& t, const Tensor& g, const Tensor&) {
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) ga.at(i, j) += g.at(j, i);
      },
      "transpose");
}

Var add(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Shape shape = binary_shape(av, bv, "add");
  Tensor out;
  if (av.size() == bv.size()) {
    out = Tensor(shape);
    kernels::add(out.size(), av.data(), bv.data(), out.data());
  } else {
    out = map_binary(av, bv, shape, [](double x, double y) { return x + y; });
  }
  return a.tape()->record(
      std::move(out), {a, b},
      [a, b](Tape& t, const Tensor& g, const Tensor&) {
        if (t.requires_grad(a)) accumulate(t.grad_buffer(a), g);
        if (t.requires_grad(b)) accumulate(t.grad_buffer(b), g);
      },
      "add");
}

Var sub(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Shape shape = binary_shape(av, bv, "sub");
  Tensor out;
  if (av.size() == bv.size()) {
    out = Tensor(shape);
    kernels::sub(out.size(), av.data(), bv.data(), out.data());
  } else {
    out = map_binary(av, bv, shape, [](double x, double y) { return x - y; });
  }
  return a.tape()->record(
      std::move(out), {a, b},
      [a, b](Tape& t, const Tensor& g, const Tensor&) {
        if (t.requires_grad(a)) accumulate(t.grad_buffer(a), g);
        if (t.requires_grad(b)) accumulate(t.grad_buffer(b), g, -1.0);
      },
      "sub");
}

Var mul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Shape shape = binary_shape(av, bv, "mul");
  Tensor out;
  if (av.size() == bv.size()) {
    out = Tensor(shape);
    kernels::mul(out.size(), av.data(), bv.data(), out.data());
  } else {
    out = map_binary(av, bv, shape, [](double x, double y) { return x * y; });
  }
  return a.tape()->record(
      std::move(out), {a, b},
      [a, b](Tape& t, const Tensor& g, const Tensor&) {
        const Tensor& av = t.value(a);
        const Tensor& bv = t.value(b);
        if (t.requires_grad(a)) {
          Tensor local = map_binary(g, bv, g.shape(), [](double x, double y) { return x * y; });
          accumulate(t.grad_buffer(a), local);
        }
        if (t.requires_grad(b)) {
          Tensor local = map_binary(g, av, g.shape(), [](double x, double y) { return x * y; });
          accumulate(t.grad_buffer(b), local);
        }
      },
      "mul");
}

Var div(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Shape shape = binary_shape(av, bv, "div");
  Tensor out = map_binary(av, bv, shape, [](double x, double y) { return x / y; });
  return a.tape()->record(
      std::move(out), {a, b},
      [a, b](Tape& t, const Tensor& g, const Tensor&) {
        const Tensor& av = t.value(a);
        const Tensor& bv = t.value(b);
        if (t.requires_grad(a)) {
          Tensor local = map_binary(g, bv, g.shape(), [](double x, double y) { return x / y; });
          accumulate(t.grad_buffer(a), local);
        }
        if (t.requires_grad(b)) {
          // d(a/b)/db = -a/b^2
          Tensor local(g.shape());
          const bool sa = av.size() != g.size();
          const bool sb = bv.size() != g.size();
          for (std::size_t i = 0; i < g.size(); ++i) {
            const double y = bv[sb ? 0 : i];
            local[i] = -g[i] * av[sa ? 0 : i] / (y * y);
          }
          accumulate(t.grad_buffer(b), local);
        }
      },
      "div");
}

Var scale(const Var& a, double alpha) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  kernels::scale(av.size(), alpha, av.data(), out.data());
  return a.tape()->record(
      std::move(out), {a},
      [a, alpha](Tape& t, const Tensor& g, const Tensor&) {
        kernels::axpy(g.size(), alpha, g.data(), t.grad_buffer(a).data());
      },
      "scale");
}

Var add_constant(const Var& a, double c) {
  Tensor out = a.value();
  for (double& x : out.values()) x += c;
  return a.tape()->record(
      std::move(out), {a},
      [a](Tape& t, const Tensor& g, const Tensor&) { accumulate(t.grad_buffer(a), g); }, "add_constant");
}

Var tanh(const Var& a) {
  Tensor out = a.value();
  for (double& x : out.values()) x = std::tanh(x);
  return a.tape()->record(
      std::move(out), {a},
      [a](Tape& t, const Tensor& g, const Tensor& y) {
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
      },
      "tanh");
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (double& x : out.values()) x = x > 0.0 ? x : 0.0;
  return a.tape()->record(
      std::move(out), {a},
      [a](Tape& t, const Tensor& g, const Tensor&) {
        const Tensor& av = t.value(a);
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (av[i] > 0.0) ga[i] += g[i];
        }
      },
      "relu");
}

namespace {
double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Var sigmoid(const Var& a) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = stable_sigmoid(av[i]);
  return a.tape()->record(
      std::move(out), {a},
      [a](Tape& t, const Tensor& g, const Tensor& y) {
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
      },
      "sigmoid");
}

Var sum(const Var& a) {
  const Tensor& av = a.value();
  Tensor out = Tensor::scalar(kernels::sum(av.size(), av.data()));
  return a.tape()->record(
      std::move(out), {a},
      [a](Tape& t, const Tensor& g, const Tensor&) {
        Tensor& ga = t.grad_buffer(a);
        for (double& x : ga.values()) x += g[0];
      },
      "sum");
}

Var mean(const Var& a) {
  const Tensor& av = a.value();
  require(av.size() > 0, "mean: empty tensor");
  const double inv = 1.0 / static_cast<double>(av.size());
  Tensor out = Tensor::scalar(kernels::sum(av.size(), av.data()) * inv);
  return a.tape()->record(
      std::move(out), {a},
      [a, inv](Tape& t, const Tensor& g, const Tensor&) {
        Tensor& ga = t.grad_buffer(a);
        for (double& x : ga.values()) x += g[0] * inv;
      },
      "mean");
}

Var row_mean(const Var& a) {
  const Tensor& av = a.value();
  require(av.rank() == 2, "row_mean: operand must be rank 2");
  const std::size_t m = av.dim(0), k = av.dim(1);
  require(k > 0, "row_mean: empty axis");
  Tensor out(Shape{m, 1});
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += av.at(i, j);
    out[i] = s / static_cast<double>(k);
  }
  return a.tape()->record(
      std::move(out), {a},
      [a, m, k](Tape& t, const Tensor& g, const Tensor&) {
        Tensor& ga = t.grad_buffer(a);
        const double inv = 1.0 / static_cast<double>(k);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < k; ++j) ga.at(i, j) += g[i] * inv;
      },
      "row_mean");
}

Var row_std(const Var& a, double eps) {
  const Tensor& av = a.value();
  require(av.rank() == 2, "row_std: operand must be rank 2");
  const std::size_t m = av.dim(0), k = av.dim(1);
  require(k > 0, "row_std: empty axis");
  const double inv = 1.0 / static_cast<double>(k);
  Tensor out(Shape{m, 1});
  Tensor means(Shape{m});
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < k; ++j) mu += av.at(i, j);
    mu *= inv;
    double var = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double dx = av.at(i, j) - mu;
      var += dx * dx;
    }
    means[i] = mu;
    out[i] = std::sqrt(var * inv + eps);
  }
  return a.tape()->record(
      std::move(out), {a},
      [a, m, k, inv, means = std::move(means)](Tape& t, const Tensor& g, const Tensor& sv) {
        const Tensor& av = t.value(a);
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < m; ++i) {
          const double c = g[i] * inv / sv[i];
          for (std::size_t j = 0; j < k; ++j) ga.at(i, j) += c * (av.at(i, j) - means[i]);
        }
      },
      "row_std");
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape()->record(
      std::move(out), {a},
      [a](Tape& t, const Tensor& g, const Tensor&) {
        Tensor& ga = t.grad_buffer(a);
        kernels::axpy(g.size(), 1.0, g.data(), ga.data());
      },
      "reshape");
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require(av.rank() == 2, "slice_cols: operand must be rank 2");
  const std::size_t m = av.dim(0), k = av.dim(1);
  require(begin <= end && end <= k, "slice_cols: range out of bounds");
  const std::size_t w = end - begin;
  Tensor out(Shape{m, w});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out.at(i, j) = av.at(i, begin + j);
  return a.tape()->record(
      std::move(out), {a},
      [a, m, w, begin](Tape& t, const Tensor& g, const Tensor&) {
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < w; ++j) ga.at(i, begin + j) += g.at(i, j);
      },
      "slice_cols");
}

Var concat_cols(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.rank() == 2 && bv.rank() == 2 && av.dim(0) == bv.dim(0),
          "concat_cols: operands must be rank 2 with equal row count");
  const std::size_t m = av.dim(0), ka = av.dim(1), kb = bv.dim(1);
  Tensor out(Shape{m, ka + kb});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < ka; ++j) out.at(i, j) = av.at(i, j);
    for (std::size_t j = 0; j < kb; ++j) out.at(i, ka + j) = bv.at(i, j);
  }
  return a.tape()->record(
      std::move(out), {a, b},
      [a, b, m, ka, kb](Tape& t, const Tensor& g, const Tensor&) {
        if (t.requires_grad(a)) {
          Tensor& ga = t.grad_buffer(a);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < ka; ++j) ga.at(i, j) += g.at(i, j);
        }
        if (t.requires_grad(b)) {
          Tensor& gb = t.grad_buffer(b);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < kb; ++j) gb.at(i, j) += g.at(i, ka + j);
        }
      },
      "concat_cols");
}

Var tile_rows(const Var& a, std::size_t times) {
  const Tensor& av = a.value();
  require(av.rank() == 2, "tile_rows: operand must be rank 2");
  const std::size_t block = av.size();
  Tensor out(Shape{times * av.dim(0), av.dim(1)});
  for (std::size_t r = 0; r < times; ++r) {
    std::copy(av.data(), av.data() + block, out.data() + r * block);
  }
  return a.tape()->record(
      std::move(out), {a},
      [a, times, block](Tape& t, const Tensor& g, const Tensor&) {
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t r = 0; r < times; ++r) {
          kernels::axpy(block, 1.0, g.data() + r * block, ga.data());
        }
      },
      "tile_rows");
}

Var repeat_cols(const Var& a, std::size_t k) {
  const Tensor& av = a.value();
  require(av.rank() == 2 && av.dim(1) == 1, "repeat_cols: operand must be m×1");
  const std::size_t m = av.dim(0);
  Tensor out(Shape{m, k});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) out.at(i, j) = av[i];
  return a.tape()->record(
      std::move(out), {a},
      [a, m, k](Tape& t, const Tensor& g, const Tensor&) {
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < m; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < k; ++j) s += g.at(i, j);
          ga[i] += s;
        }
      },
      "repeat_cols");
}

Var gather_rows(const Var& a, const IndexList& idx) {
  const Tensor& av = a.value();
  require(av.rank() >= 1, "gather_rows: operand must have rank >= 1");
  const std::size_t n = av.dim(0);
  const std::size_t row = numel(Shape(av.shape().begin() + 1, av.shape().end()));
  Shape shape = av.shape();
  shape[0] = idx->size();
  Tensor out(shape);
  for (std::size_t i = 0; i < idx->size(); ++i) {
    const std::uint32_t src = (*idx)[i];
    if (src >= n) throw std::out_of_range("gather_rows: index " + std::to_string(src) +
                                          " out of range [0, " + std::to_string(n) + ")");
    std::copy(av.data() + src * row, av.data() + (src + 1) * row, out.data() + i * row);
  }
  return a.tape()->record(
      std::move(out), {a},
      [a, idx, row](Tape& t, const Tensor& g, const Tensor&) {
        Tensor& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < idx->size(); ++i) {
          double* dst = ga.data() + (*idx)[i] * row;
          const double* s = g.data() + i * row;
          for (std::size_t j = 0; j < row; ++j) dst[j] += s[j];
        }
      },
      "gather_rows");
}

Var segment_sum(const Var& messages, const IndexList& targets, std::size_t n) {
  const Tensor& mv = messages.value();
  require(mv.rank() >= 1 && mv.dim(0) == targets->size(),
          "segment_sum: one target per message row required");
  const std::size_t e = targets->size();
  const std::size_t row = numel(Shape(mv.shape().begin() + 1, mv.shape().end()));
  Shape shape = mv.shape();
  shape[0] = n;
  Tensor out(shape);
  for (std::size_t i = 0; i < e; ++i) {
    const std::uint32_t v = (*targets)[i];
    if (v >= n) throw std::out_of_range("segment_sum: target " + std::to_string(v) +
                                        " out of range [0, " + std::to_string(n) + ")");
    double* dst = out.data() + v * row;
    const double* s = mv.data() + i * row;
    for (std::size_t j = 0; j < row; ++j) dst[j] += s[j];
  }
  return messages.tape()->record(
      std::move(out), {messages},
      [messages, targets, row](Tape& t, const Tensor& g, const Tensor&) {
        Tensor& gm = t.grad_buffer(messages);
        for (std::size_t i = 0; i < targets->size(); ++i) {
          const double* s = g.data() + (*targets)[i] * row;
          double* dst = gm.data() + i * row;
          for (std::size_t j = 0; j < row; ++j) dst[j] += s[j];
        }
      },
      "segment_sum");
}

Var cross_entropy(const Var& logits, const std::vector<int>& labels,
                  const std::vector<std::uint8_t>& mask) {
  const Tensor& lv = logits.value();
  require(lv.rank() == 2, "cross_entropy: logits must be n×C");
  const std::size_t n = lv.dim(0), c = lv.dim(1);
  require(labels.size() == n && mask.size() == n, "cross_entropy: labels/mask length mismatch");
  std::size_t count = 0;
  for (std::uint8_t m : mask) count += m ? 1 : 0;
  if (count == 0) throw std::invalid_argument("cross_entropy: empty mask");

  // Softmax probabilities are kept for the backward pass.
  auto probs = std::make_shared<Tensor>(Shape{n, c});
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " out of range");
    }
    double mx = lv.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, lv.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(lv.at(i, j) - mx);
    const double lse = mx + std::log(z);
    total += lse - lv.at(i, static_cast<std::size_t>(y));
    for (std::size_t j = 0; j < c; ++j) probs->at(i, j) = std::exp(lv.at(i, j) - lse);
  }
  const double inv = 1.0 / static_cast<double>(count);
  return logits.tape()->record(
      Tensor::scalar(total * inv), {logits},
      [logits, labels, mask, probs, inv, n, c](Tape& t, const Tensor& g, const Tensor&) {
        Tensor& gl = t.grad_buffer(logits);
        const double s = g[0] * inv;
        for (std::size_t i = 0; i < n; ++i) {
          if (!mask[i]) continue;
          for (std::size_t j = 0; j < c; ++j) gl.at(i, j) += s * probs->at(i, j);
          gl.at(i, static_cast<std::size_t>(labels[i])) -= s;
        }
      },
      "cross_entropy");
}

}  // namespace dnsd::ad
