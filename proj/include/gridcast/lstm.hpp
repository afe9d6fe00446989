#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gridcast/autodiff.hpp"
#include "gridcast/random.hpp"
#include "gridcast/tensor.hpp"

namespace gridcast {

// Peephole LSTM cell. x-weights are [input_dim x hidden], h- and c-weights
// [hidden x hidden], biases [hidden]. The candidate path has no c-weight.
// Peephole weights are full matrices rather than diagonal vectors.
struct LstmCellParams {
  Tensor w_xi, w_hi, w_ci, b_i;  // input gate
  Tensor w_xf, w_hf, w_cf, b_f;  // forget gate
  Tensor w_xc, w_hc, b_c;        // candidate
  Tensor w_xo, w_ho, w_co, b_o;  // output gate

  std::size_t input_dim() const { return w_xi.dim(0); }
  std::size_t hidden() const { return w_xi.dim(1); }
};

// Layer 0 reads the feed width; layer k > 0 reads the hidden width of layer k - 1.
struct StackParams {
  std::vector<LstmCellParams> layers;
};

// State values: h and c are [hidden] or batched [B x hidden].
struct LstmState {
  Tensor h;
  Tensor c;
};

// State as tape nodes.
struct RecurrentState {
  Var h;
  Var c;
};

struct SequenceOutput {
  Var hs;  // [T x hidden] or [B x T x hidden]
  RecurrentState final;
};

// Glorot weights, zero biases except the forget-gate bias which starts at 1.
LstmCellParams init_lstm_cell(std::size_t input_dim, std::size_t hidden, Rng& rng);
StackParams init_lstm_stack(std::size_t input_dim, std::size_t hidden, std::size_t layers, Rng& rng);

// Throws ConfigError when layer widths do not chain.
void validate_stack(const StackParams& stack, std::size_t input_dim);

// Zero initial state; batch == 0 gives unbatched [hidden] tensors.
RecurrentState zero_state(Tape& tape, std::size_t batch, std::size_t hidden);

// One step:
//   i = sigmoid(x W_xi + h W_hi + c_prev W_ci + b_i)
//   f = sigmoid(x W_xf + h W_hf + c_prev W_cf + b_f)
//   g = tanh(x W_xc + h W_hc + b_c)
//   c = f * c_prev + i * g
//   o = sigmoid(x W_xo + h W_ho + c W_co + b_o)   (reads the updated c)
//   h = o * tanh(c)
RecurrentState cell_step(Var x, RecurrentState prev, const LstmCellParams& p);

// Folds cell_step over the time axis of xs ([T x in] or [B x T x in]).
SequenceOutput sequence_forward(Var xs, RecurrentState init, const LstmCellParams& p);

// Runs the layers in order with dropout between layers (training only).
Var stack_forward(Var xs, const StackParams& stack, double dropout_rate, Rng& rng, bool training);

LstmState cell_step(const Tensor& x, const LstmState& prev, const LstmCellParams& p);

struct SequenceResult {
  Tensor hs;
  LstmState final;
};
SequenceResult sequence_forward(const Tensor& xs, const LstmState& init, const LstmCellParams& p);
// Step list form; throws DimensionError on an empty sequence.
SequenceResult sequence_forward(std::span<const Tensor> steps, const LstmState& init, const LstmCellParams& p);

Tensor stack_forward(const Tensor& xs, const StackParams& stack, double dropout_rate, Rng& rng, bool training);

}  // namespace gridcast
