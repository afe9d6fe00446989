#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gridcast/autodiff.hpp"
#include "gridcast/random.hpp"
#include "gridcast/tensor.hpp"

namespace gridcast {

struct AttentionHeadParams {
  Tensor w_q;  // [d_model x d_k]
  Tensor w_k;  // [d_model x d_k]
  Tensor w_v;  // [d_model x d_v]
};

struct MultiHeadParams {
  std::vector<AttentionHeadParams> heads;
  Tensor w_o;  // [(h * d_v) x d_model]
};

struct FeedForwardParams {
  Tensor w1;  // [d_model x d_ff]
  Tensor b1;  // [d_ff]
  Tensor w2;  // [d_ff x d_model]
  Tensor b2;  // [d_model]
};

struct EncoderLayerParams {
  MultiHeadParams attention;
  FeedForwardParams ffn;
  Tensor norm1_gain, norm1_bias;
  Tensor norm2_gain, norm2_bias;
};

// Sinusoidal table, row `pos` holds the encoding of position `pos`.
struct PositionalEncodingTable {
  Tensor table;  // [max_len x d_model]

  std::size_t max_len() const { return table.dim(0); }
  std::size_t d_model() const { return table.dim(1); }
};

// Glorot weights, zero biases, unit norm gains. Throws ConfigError when
// d_model is not a multiple of n_heads.
MultiHeadParams init_multi_head(std::size_t d_model, std::size_t n_heads, Rng& rng);
FeedForwardParams init_feed_forward(std::size_t d_model, std::size_t d_ff, Rng& rng);
EncoderLayerParams init_encoder_layer(std::size_t d_model, std::size_t n_heads, std::size_t d_ff, Rng& rng);

// softmax(q k^T / sqrt(d_k)). Operands are [L x d] or batched [B x L x d].
Var attention_weights(Var q, Var k);
// attention_weights(q, k) v
Var scaled_dot_attention(Var q, Var k, Var v);

// Self-attention: every head projects the same input x.
Var multi_head_attention(Var x, const MultiHeadParams& p);

// max(0, x W1 + b1) W2 + b2, row-wise.
Var position_wise_ffn(Var x, const FeedForwardParams& p);

// layer_norm(x + sub) with post-norm ordering.
Var residual_norm(Var x, Var sub, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Throws ConfigError for odd d_model or max_len == 0.
PositionalEncodingTable positional_encoding(std::size_t max_len, std::size_t d_model);

// One encoder layer; dropout hits each sublayer output before the residual add.
Var encoder_layer_forward(Var x, const EncoderLayerParams& layer, double dropout_rate, Rng& rng, bool training,
                          double eps = 1e-5);

// Chains encoder_layer_forward over `layers`. Throws ConfigError if empty.
Var encoder_forward(Var x, std::span<const EncoderLayerParams> layers, double dropout_rate, Rng& rng, bool training,
                    double eps = 1e-5);

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);
Tensor attention_weights(const Tensor& q, const Tensor& k);
Tensor multi_head_attention(const Tensor& x, const MultiHeadParams& p);
Tensor position_wise_ffn(const Tensor& x, const FeedForwardParams& p);
Tensor residual_norm(const Tensor& x, const Tensor& sub, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor encoder_forward(const Tensor& x, std::span<const EncoderLayerParams> layers, double dropout_rate, Rng& rng,
                       bool training, double eps = 1e-5);

}  // namespace gridcast
