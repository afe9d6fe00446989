#include "gridcast/transformer.hpp"

#include <cmath>
#include <string>

#include "gridcast/errors.hpp"
#include "gridcast/init.hpp"

namespace gridcast {

MultiHeadParams init_multi_head(std::size_t d_model, std::size_t n_heads, Rng& rng) {
  if (n_heads == 0 || d_model == 0 || d_model % n_heads != 0) {
    throw ConfigError("d_model (" + std::to_string(d_model) + ") must be a positive multiple of n_heads (" +
                      std::to_string(n_heads) + ")");
  }
  const std::size_t d_head = d_model / n_heads;
  MultiHeadParams p;
  p.heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    AttentionHeadParams head;
    head.w_q = glorot_uniform(d_model, d_head, rng);
    head.w_k = glorot_uniform(d_model, d_head, rng);
    head.w_v = glorot_uniform(d_model, d_head, rng);
    p.heads.push_back(std::move(head));
  }
  p.w_o = glorot_uniform(n_heads * d_head, d_model, rng);
  return p;
}

FeedForwardParams init_feed_forward(std::size_t d_model, std::size_t d_ff, Rng& rng) {
  FeedForwardParams p;
  p.w1 = glorot_uniform(d_model, d_ff, rng);
  p.b1 = Tensor::zeros({d_ff});
  p.w2 = glorot_uniform(d_ff, d_model, rng);
  p.b2 = Tensor::zeros({d_model});
  return p;
}

EncoderLayerParams init_encoder_layer(std::size_t d_model, std::size_t n_heads, std::size_t d_ff, Rng& rng) {
  EncoderLayerParams layer;
  layer.attention = init_multi_head(d_model, n_heads, rng);
  layer.ffn = init_feed_forward(d_model, d_ff, rng);
  layer.norm1_gain = Tensor(Shape{d_model}, 1.0);
  layer.norm1_bias = Tensor::zeros({d_model});
  layer.norm2_gain = Tensor(Shape{d_model}, 1.0);
  layer.norm2_bias = Tensor::zeros({d_model});
  return layer;
}

Var attention_weights(Var q, Var k) {
  const Shape& qs = q.shape();
  const Shape& ks = k.shape();
  if (qs.size() != ks.size() || qs.size() < 2 || qs.size() > 3 || qs.back() != ks.back() ||
      (qs.size() == 3 && qs[0] != ks[0])) {
    throw DimensionError("attention: query " + shape_string(qs) + " and key " + shape_string(ks) +
                         " must share batch and d_k");
  }
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(qs.back()));
  return softmax_rows(scale(batched_matmul(q, transpose(k)), inv_sqrt_dk));
}

Var scaled_dot_attention(Var q, Var k, Var v) {
  const Shape& ks = k.shape();
  const Shape& vs = v.shape();
  if (ks.size() != vs.size() || ks.size() < 2 || ks[ks.size() - 2] != vs[vs.size() - 2] ||
      (ks.size() == 3 && ks[0] != vs[0])) {
    throw DimensionError("attention: key " + shape_string(ks) + " and value " + shape_string(vs) +
                         " must share sequence length");
  }
  return batched_matmul(attention_weights(q, k), v);
}

Var multi_head_attention(Var x, const MultiHeadParams& p) {
  Tape& tape = x.tape();
  if (p.heads.empty()) throw ConfigError("multi-head attention needs at least one head");
  const std::size_t d_model = x.shape().back();
  std::vector<Var> outputs;
  outputs.reserve(p.heads.size());
  std::size_t concat_width = 0;
  for (const AttentionHeadParams& head : p.heads) {
    if (head.w_q.dim(0) != d_model || head.w_k.dim(0) != d_model || head.w_v.dim(0) != d_model) {
      throw DimensionError("multi-head attention: input " + shape_string(x.shape()) +
                           " does not match head projection " + shape_string(head.w_q.shape()));
    }
    Var q = matmul(x, tape.parameter(head.w_q));
    Var k = matmul(x, tape.parameter(head.w_k));
    Var v = matmul(x, tape.parameter(head.w_v));
    outputs.push_back(scaled_dot_attention(q, k, v));
    concat_width += head.w_v.dim(1);
  }
  if (p.w_o.rank() != 2 || p.w_o.dim(0) != concat_width) {
    throw DimensionError("multi-head attention: output projection " + shape_string(p.w_o.shape()) +
                         " does not match concatenated width " + std::to_string(concat_width));
  }
  Var joined = outputs.size() == 1 ? outputs.front() : concat_last(outputs);
  return matmul(joined, tape.parameter(p.w_o));
}

Var position_wise_ffn(Var x, const FeedForwardParams& p) {
  Tape& tape = x.tape();
  Var hidden = relu(add_bias(matmul(x, tape.parameter(p.w1)), tape.parameter(p.b1)));
  return add_bias(matmul(hidden, tape.parameter(p.w2)), tape.parameter(p.b2));
}

Var residual_norm(Var x, Var sub, const Tensor& gain, const Tensor& bias, double eps) {
  Tape& tape = x.tape();
  return layer_norm(add(x, sub), tape.parameter(gain), tape.parameter(bias), eps);
}

PositionalEncodingTable positional_encoding(std::size_t max_len, std::size_t d_model) {
  if (max_len == 0) throw ConfigError("positional encoding needs max_len >= 1");
  if (d_model == 0 || d_model % 2 != 0) {
    throw ConfigError("positional encoding needs an even d_model, got " + std::to_string(d_model));
  }
  Tensor table(Shape{max_len, d_model});
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; 2 * i < d_model; ++i) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
      table.at(pos, 2 * i) = std::sin(angle);
      table.at(pos, 2 * i + 1) = std::cos(angle);
    }
  }
  return PositionalEncodingTable{std::move(table)};
}

Var encoder_layer_forward(Var x, const EncoderLayerParams& layer, double dropout_rate, Rng& rng, bool training,
                          double eps) {
  Var attended = dropout(multi_head_attention(x, layer.attention), dropout_rate, rng, training);
  Var a = residual_norm(x, attended, layer.norm1_gain, layer.norm1_bias, eps);
  Var fed = dropout(position_wise_ffn(a, layer.ffn), dropout_rate, rng, training);
  return residual_norm(a, fed, layer.norm2_gain, layer.norm2_bias, eps);
}

Var encoder_forward(Var x, std::span<const EncoderLayerParams> layers, double dropout_rate, Rng& rng, bool training,
                    double eps) {
  if (layers.empty()) throw ConfigError("encoder needs at least one layer");
  for (const EncoderLayerParams& layer : layers) x = encoder_layer_forward(x, layer, dropout_rate, rng, training, eps);
  return x;
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  Tape tape(false);
  return scaled_dot_attention(tape.constant(q), tape.constant(k), tape.constant(v)).value();
}

Tensor attention_weights(const Tensor& q, const Tensor& k) {
  Tape tape(false);
  return attention_weights(tape.constant(q), tape.constant(k)).value();
}

Tensor multi_head_attention(const Tensor& x, const MultiHeadParams& p) {
  Tape tape(false);
  return multi_head_attention(tape.constant(x), p).value();
}

Tensor position_wise_ffn(const Tensor& x, const FeedForwardParams& p) {
  Tape tape(false);
  return position_wise_ffn(tape.constant(x), p).value();
}

Tensor residual_norm(const Tensor& x, const Tensor& sub, const Tensor& gain, const Tensor& bias, double eps) {
  Tape tape(false);
  return residual_norm(tape.constant(x), tape.constant(sub), gain, bias, eps).value();
}

Tensor encoder_forward(const Tensor& x, std::span<const EncoderLayerParams> layers, double dropout_rate, Rng& rng,
                       bool training, double eps) {
  Tape tape(false);
  return encoder_forward(tape.constant(x), layers, dropout_rate, rng, training, eps).value();
}

}  // namespace gridcast
