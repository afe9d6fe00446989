#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gridcast/autodiff.hpp"
#include "gridcast/lstm.hpp"
#include "gridcast/random.hpp"
#include "gridcast/transformer.hpp"

namespace gridcast {

// Architecture hyperparameters. Defaults follow the reference setup: three
// encoder layers of 12 heads, two LSTM layers of 128 units, a 256-unit ReLU
// layer and dropout 0.5.
struct ModelConfig {
  std::size_t input_features = 1;
  std::size_t window_len = 24;
  std::size_t horizon = 1;
  std::size_t d_model = 96;
  std::size_t n_encoder_layers = 3;
  std::size_t n_heads = 12;
  std::size_t d_ff = 0;  // 0 selects 4 * d_model
  std::size_t lstm_layers = 2;
  std::size_t lstm_hidden = 128;
  std::size_t fc_units = 256;
  double dropout = 0.5;
  double norm_eps = 1e-5;
  std::uint64_t seed = 42;

  std::size_t ffn_width() const { return d_ff == 0 ? 4 * d_model : d_ff; }

  // Throws ConfigError naming the first violated field.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ModelParams {
  Tensor input_w;  // [input_features x d_model]
  Tensor input_b;  // [d_model]
  PositionalEncodingTable pe;
  std::vector<EncoderLayerParams> encoder;
  StackParams lstm;
  Tensor fc_w;    // [lstm_hidden x fc_units]
  Tensor fc_b;    // [fc_units]
  Tensor head_w;  // [fc_units x horizon]
  Tensor head_b;  // [horizon]
};

// Learnable tensors in a fixed order with stable dotted names. The
// positional table is derived from the config and is not listed.
std::vector<std::pair<std::string, Tensor*>> named_tensors(ModelParams& params);
std::vector<std::pair<std::string, const Tensor*>> named_tensors(const ModelParams& params);

std::size_t parameter_count(const ModelParams& params);

// Glorot-uniform weights from a generator seeded with cfg.seed; zero biases,
// unit norm gains, LSTM forget bias 1.
ModelParams init_params(const ModelConfig& cfg);

// batch_x: [B x L x input_features] -> [B x horizon].
// Project to d_model, add positional rows, dropout, encoder, LSTM stack,
// last hidden state, ReLU dense layer, linear head.
Var forward(Tape& tape, const Tensor& batch_x, const ModelParams& params, const ModelConfig& cfg, Rng& rng,
            bool training);

// Inference-mode forward pass.
Tensor predict(const ModelParams& params, const ModelConfig& cfg, const Tensor& batch_x);

}  // namespace gridcast
