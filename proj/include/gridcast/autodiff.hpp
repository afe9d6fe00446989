#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "gridcast/random.hpp"
#include "gridcast/tensor.hpp"

namespace gridcast {

class Tape;

// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Gradients of a scalar loss with respect to the parameter tensors bound to a
// tape, keyed by tensor identity.
class Gradients {
 public:
  const Tensor& of(const Tensor& parameter) const;
  bool contains(const Tensor& parameter) const { return grads_.contains(&parameter); }
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  std::unordered_map<const Tensor*, Tensor> grads_;
};

// Records primitive operations in execution order. Replaying the record in
// reverse gives reverse-mode derivatives. A tape is single-writer: build one
// per forward/backward pass and do not share it across threads.
class Tape {
 public:
  // Propagates adjoint `grad` of the node's output into its inputs.
  using BackwardFn = std::function<void(Tape&, const Tensor& grad)>;

  // With record_gradients=false no backward closures are kept, which is
  // what inference paths use.
  explicit Tape(bool record_gradients = true) : record_gradients_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that never receives a gradient.
  Var constant(Tensor value);
  // Leaf that receives a gradient but is not a bound parameter.
  Var variable(Tensor value);
  // Leaf bound to an external parameter tensor. Binding the same tensor twice
  // returns the same node, so reuse across time steps accumulates gradients.
  Var parameter(const Tensor& tensor);

  Var record(Tensor value, bool requires_grad, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool records_gradients() const { return record_gradients_; }
  std::size_t size() const { return nodes_.size(); }

  // Adjoint buffer for node `id`, zero-initialized on first access.
  Tensor& grad_buffer(std::size_t id);

  // Seeds d(loss)/d(loss) = 1 and visits nodes in reverse recording order.
  Gradients backward(Var loss);

  // Adjoint of any node after backward(); zeros if it was not reached.
  Tensor grad_of(Var v) const;

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    BackwardFn backward;
  };

  bool record_gradients_;
  std::deque<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<bool> has_grad_;
  std::unordered_map<const Tensor*, std::size_t> bound_;
  std::vector<std::pair<const Tensor*, std::size_t>> parameters_;
};

// ---- differentiable primitives ----
// Shapes are never broadcast except where stated.

// a[..., k] x b[k, n] -> [..., n]; leading axes of `a` are treated as rows.
Var matmul(Var a, Var b);
// a[B, m, k] x b[B, k, n] -> [B, m, n]; rank-2 operands are a batch of one.
Var batched_matmul(Var a, Var b);
// Swaps the last two axes.
Var transpose(Var x);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
// x[..., n] + bias[n], bias repeated over the leading axes.
Var add_bias(Var x, Var bias);

Var tanh(Var x);
Var sigmoid(Var x);
Var relu(Var x);

// Softmax along the last axis, computed with per-row max subtraction.
Var softmax_rows(Var x);
// Normalizes each last-axis slice: (x - mean) / sqrt(var + eps) * gain + bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
// Inverted dropout: survivors scaled by 1 / (1 - rate). Identity when not training.
Var dropout(Var x, double rate, Rng& rng, bool training);

Var reshape(Var x, Shape shape);
// Concatenates along the last axis; leading axes must agree.
Var concat_last(std::span<const Var> parts);
// x[B, T, d] -> [B, d] at step t; x[T, d] -> [d].
Var select_step(Var x, std::size_t t);
// Inverse of select_step over all steps: [B, d] x T -> [B, T, d]; [d] x T -> [T, d].
Var stack_steps(std::span<const Var> steps);

Var sum(Var x);
Var mean(Var x);
// Mean of squared differences over all elements.
Var mse(Var prediction, Var target);

// ---- tensor-level conveniences (no gradient) ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

}  // namespace gridcast
