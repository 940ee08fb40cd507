#pragma once

// Define-by-run reverse-mode automatic differentiation.
//
// A Tape records every operation executed on Vars in execution order. Calling
// backward() on a scalar Var walks the record once in reverse and writes
// d(loss)/d(param) into every Parameter that was registered on the tape. A tape
// supports exactly one backward pass; build a fresh tape for every forward.

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "dnsd/tensor.hpp"

namespace dnsd::ad {

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value)
      : name(std::move(name)), value(std::move(value)), grad(this->value.shape()) {}

  std::string name;
  Tensor value;
  Tensor grad;
};

using IndexList = std::shared_ptr<const std::vector<std::uint32_t>>;

inline IndexList make_index(std::vector<std::uint32_t> idx) {
  return std::make_shared<const std::vector<std::uint32_t>>(std::move(idx));
}

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Propagates the gradient of the node's output into its inputs' buffers. Receives
  /// the output gradient and the output value.
  using BackwardFn =
      std::function<void(Tape&, const Tensor& out_grad, const Tensor& out_value)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Registers a trainable leaf. Registering the same Parameter twice returns the same Var.
  Var parameter(Parameter& p);

  /// Reverse pass from a scalar loss. Overwrites grad of every registered Parameter
  /// (parameters the loss does not reach receive zeros).
  void backward(const Var& loss);

  const Tensor& value(const Var& v) const;
  /// Gradient accumulated for `v` by backward(); zero-shaped tensor if none reached it.
  const Tensor& grad(const Var& v) const;
  bool requires_grad(const Var& v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  // --- op authoring -------------------------------------------------------
  /// Appends an op output. `backward` is dropped when no input requires grad.
  /// Throws NonFiniteError if `value` contains NaN or Inf.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward,
             const char* op_name);
  /// Gradient buffer of `v`, zero-initialised on first access.
  Tensor& grad_buffer(const Var& v);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
  };

  void check_owner(const Var& v) const;

  std::deque<Node> nodes_;
  std::unordered_map<Parameter*, std::size_t> param_nodes_;
  bool consumed_ = false;
};

// --- dense ops ---------------------------------------------------------------
// Elementwise binary ops accept equal shapes, or a single-element operand on
// either side which is broadcast. Nothing else broadcasts implicitly.

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double alpha);
Var add_constant(const Var& a, double c);
Var tanh(const Var& a);
/// relu'(0) is taken as 0.
Var relu(const Var& a);
Var sigmoid(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);
/// Mean over the last axis of a rank-2 tensor: m×k -> m×1.
Var row_mean(const Var& a);
/// sqrt(population variance + eps) over the last axis: m×k -> m×1.
Var row_std(const Var& a, double eps);

Var reshape(const Var& a, Shape shape);
/// Columns [begin, end) of a rank-2 tensor.
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
Var concat_cols(const Var& a, const Var& b);
/// Stacks `times` copies of a (r×k) vertically: (times·r)×k.
Var tile_rows(const Var& a, std::size_t times);
/// Repeats an m×1 column k times: m×k.
Var repeat_cols(const Var& a, std::size_t k);

/// out[i] = a[idx[i]] along the first axis.
Var gather_rows(const Var& a, const IndexList& idx);
/// out[v] = sum of rows i of `messages` with targets[i] == v; rows never targeted stay zero.
Var segment_sum(const Var& messages, const IndexList& targets, std::size_t n);

/// Mean over masked rows of -log softmax(logits)[label], log-sum-exp stabilised.
Var cross_entropy(const Var& logits, const std::vector<int>& labels,
                  const std::vector<std::uint8_t>& mask);

}  // namespace dnsd::ad
