#include "gridcast/lstm.hpp"

#include <string>

#include "gridcast/errors.hpp"
#include "gridcast/init.hpp"

namespace gridcast {

LstmCellParams init_lstm_cell(std::size_t input_dim, std::size_t hidden, Rng& rng) {
  LstmCellParams p;
  p.w_xi = glorot_uniform(input_dim, hidden, rng);
  p.w_hi = glorot_uniform(hidden, hidden, rng);
  p.w_ci = glorot_uniform(hidden, hidden, rng);
  p.b_i = Tensor::zeros({hidden});
  p.w_xf = glorot_uniform(input_dim, hidden, rng);
  p.w_hf = glorot_uniform(hidden, hidden, rng);
  p.w_cf = glorot_uniform(hidden, hidden, rng);
  p.b_f = Tensor(Shape{hidden}, 1.0);
  p.w_xc = glorot_uniform(input_dim, hidden, rng);
  p.w_hc = glorot_uniform(hidden, hidden, rng);
  p.b_c = Tensor::zeros({hidden});
  p.w_xo = glorot_uniform(input_dim, hidden, rng);
  p.w_ho = glorot_uniform(hidden, hidden, rng);
  p.w_co = glorot_uniform(hidden, hidden, rng);
  p.b_o = Tensor::zeros({hidden});
  return p;
}

StackParams init_lstm_stack(std::size_t input_dim, std::size_t hidden, std::size_t layers, Rng& rng) {
  StackParams stack;
  for (std::size_t k = 0; k < layers; ++k) stack.layers.push_back(init_lstm_cell(k == 0 ? input_dim : hidden, hidden, rng));
  return stack;
}

void validate_stack(const StackParams& stack, std::size_t input_dim) {
  if (stack.layers.empty()) throw ConfigError("LSTM stack needs at least one layer");
  std::size_t expected = input_dim;
  for (std::size_t k = 0; k < stack.layers.size(); ++k) {
    if (stack.layers[k].input_dim() != expected) {
      throw ConfigError("LSTM layer " + std::to_string(k) + " expects input width " +
                        std::to_string(stack.layers[k].input_dim()) + " but receives " + std::to_string(expected));
    }
    expected = stack.layers[k].hidden();
  }
}

RecurrentState zero_state(Tape& tape, std::size_t batch, std::size_t hidden) {
  const Shape shape = batch == 0 ? Shape{hidden} : Shape{batch, hidden};
  return {tape.constant(Tensor::zeros(shape)), tape.constant(Tensor::zeros(shape))};
}

namespace {

void check_step_shapes(const Var& x, const RecurrentState& prev, const LstmCellParams& p) {
  const Shape& xs = x.shape();
  const Shape& hs = prev.h.shape();
  const bool ok = !xs.empty() && xs.back() == p.input_dim() && hs == prev.c.shape() && !hs.empty() &&
                  hs.back() == p.hidden() && xs.size() == hs.size() && (xs.size() == 1 || xs[0] == hs[0]);
  if (!ok) {
    throw DimensionError("LSTM step: input " + shape_string(xs) + ", state " + shape_string(hs) + "/" +
                         shape_string(prev.c.shape()) + " incompatible with cell " + std::to_string(p.input_dim()) +
                         "->" + std::to_string(p.hidden()));
  }
}

}  // namespace

RecurrentState cell_step(Var x, RecurrentState prev, const LstmCellParams& p) {
  check_step_shapes(x, prev, p);
  Tape& tape = x.tape();
  auto w = [&tape](const Tensor& t) { return tape.parameter(t); };

  Var i = sigmoid(add_bias(
      add(add(matmul(x, w(p.w_xi)), matmul(prev.h, w(p.w_hi))), matmul(prev.c, w(p.w_ci))), w(p.b_i)));
  Var f = sigmoid(add_bias(
      add(add(matmul(x, w(p.w_xf)), matmul(prev.h, w(p.w_hf))), matmul(prev.c, w(p.w_cf))), w(p.b_f)));
  Var candidate = tanh(add_bias(add(matmul(x, w(p.w_xc)), matmul(prev.h, w(p.w_hc))), w(p.b_c)));
  Var c = add(mul(f, prev.c), mul(i, candidate));
  Var o = sigmoid(
      add_bias(add(add(matmul(x, w(p.w_xo)), matmul(prev.h, w(p.w_ho))), matmul(c, w(p.w_co))), w(p.b_o)));
  Var h = mul(o, tanh(c));
  return {h, c};
}

SequenceOutput sequence_forward(Var xs, RecurrentState init, const LstmCellParams& p) {
  const Shape& shape = xs.shape();
  if (shape.size() != 2 && shape.size() != 3) {
    throw DimensionError("LSTM sequence must be [T x in] or [B x T x in], got " + shape_string(shape));
  }
  const std::size_t steps = shape[shape.size() - 2];
  std::vector<Var> hs;
  hs.reserve(steps);
  RecurrentState state = init;
  for (std::size_t t = 0; t < steps; ++t) {
    state = cell_step(select_step(xs, t), state, p);
    hs.push_back(state.h);
  }
  return {stack_steps(hs), state};
}

Var stack_forward(Var xs, const StackParams& stack, double dropout_rate, Rng& rng, bool training) {
  validate_stack(stack, xs.shape().back());
  const Shape& shape = xs.shape();
  const std::size_t batch = shape.size() == 3 ? shape[0] : 0;
  Var current = xs;
  for (std::size_t k = 0; k < stack.layers.size(); ++k) {
    if (k > 0) current = dropout(current, dropout_rate, rng, training);
    const LstmCellParams& cell = stack.layers[k];
    current = sequence_forward(current, zero_state(xs.tape(), batch, cell.hidden()), cell).hs;
  }
  return current;
}

LstmState cell_step(const Tensor& x, const LstmState& prev, const LstmCellParams& p) {
  Tape tape(false);
  RecurrentState next = cell_step(tape.constant(x), {tape.constant(prev.h), tape.constant(prev.c)}, p);
  return {next.h.value(), next.c.value()};
}

SequenceResult sequence_forward(const Tensor& xs, const LstmState& init, const LstmCellParams& p) {
  Tape tape(false);
  SequenceOutput out = sequence_forward(tape.constant(xs), {tape.constant(init.h), tape.constant(init.c)}, p);
  return {out.hs.value(), {out.final.h.value(), out.final.c.value()}};
}

SequenceResult sequence_forward(std::span<const Tensor> steps, const LstmState& init, const LstmCellParams& p) {
  if (steps.empty()) throw DimensionError("LSTM sequence is empty");
  Tape tape(false);
  std::vector<Var> rows;
  for (const Tensor& s : steps) rows.push_back(tape.constant(s));
  SequenceOutput out = sequence_forward(stack_steps(rows), {tape.constant(init.h), tape.constant(init.c)}, p);
  return {out.hs.value(), {out.final.h.value(), out.final.c.value()}};
}

Tensor stack_forward(const Tensor& xs, const StackParams& stack, double dropout_rate, Rng& rng, bool training) {
  Tape tape(false);
  return stack_forward(tape.constant(xs), stack, dropout_rate, rng, training).value();
}

}  // namespace gridcast
