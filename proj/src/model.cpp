#include "gridcast/model.hpp"

#include <string>

#include "gridcast/errors.hpp"
#include "gridcast/init.hpp"

namespace gridcast {

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("model.") + name + " must be >= 1");
  };
  positive(input_features, "input_features");
  positive(window_len, "window_len");
  positive(horizon, "horizon");
  positive(d_model, "d_model");
  positive(n_encoder_layers, "n_encoder_layers");
  positive(n_heads, "n_heads");
  positive(lstm_layers, "lstm_layers");
  positive(lstm_hidden, "lstm_hidden");
  positive(fc_units, "fc_units");
  if (d_model % n_heads != 0) {
    throw ConfigError("model.d_model (" + std::to_string(d_model) + ") must be divisible by model.n_heads (" +
                      std::to_string(n_heads) + ")");
  }
  if (d_model % 2 != 0) throw ConfigError("model.d_model must be even for the positional encoding");
  if (!(dropout >= 0.0) || dropout >= 1.0) throw ConfigError("model.dropout must be in [0, 1)");
  if (!(norm_eps > 0.0)) throw ConfigError("model.norm_eps must be positive");
}

namespace {

template <typename Params, typename Out>
void collect(Params& p, Out& out) {
  out.emplace_back("input.w", &p.input_w);
  out.emplace_back("input.b", &p.input_b);
  for (std::size_t l = 0; l < p.encoder.size(); ++l) {
    auto& layer = p.encoder[l];
    const std::string prefix = "encoder." + std::to_string(l) + ".";
    for (std::size_t h = 0; h < layer.attention.heads.size(); ++h) {
      auto& head = layer.attention.heads[h];
      const std::string hp = prefix + "attn.head." + std::to_string(h) + ".";
      out.emplace_back(hp + "w_q", &head.w_q);
      out.emplace_back(hp + "w_k", &head.w_k);
      out.emplace_back(hp + "w_v", &head.w_v);
    }
    out.emplace_back(prefix + "attn.w_o", &layer.attention.w_o);
    out.emplace_back(prefix + "ffn.w1", &layer.ffn.w1);
    out.emplace_back(prefix + "ffn.b1", &layer.ffn.b1);
    out.emplace_back(prefix + "ffn.w2", &layer.ffn.w2);
    out.emplace_back(prefix + "ffn.b2", &layer.ffn.b2);
    out.emplace_back(prefix + "norm1.gain", &layer.norm1_gain);
    out.emplace_back(prefix + "norm1.bias", &layer.norm1_bias);
    out.emplace_back(prefix + "norm2.gain", &layer.norm2_gain);
    out.emplace_back(prefix + "norm2.bias", &layer.norm2_bias);
  }
  for (std::size_t k = 0; k < p.lstm.layers.size(); ++k) {
    auto& c = p.lstm.layers[k];
    const std::string prefix = "lstm." + std::to_string(k) + ".";
    out.emplace_back(prefix + "w_xi", &c.w_xi);
    out.emplace_back(prefix + "w_hi", &c.w_hi);
    out.emplace_back(prefix + "w_ci", &c.w_ci);
    out.emplace_back(prefix + "b_i", &c.b_i);
    out.emplace_back(prefix + "w_xf", &c.w_xf);
    out.emplace_back(prefix + "w_hf", &c.w_hf);
    out.emplace_back(prefix + "w_cf", &c.w_cf);
    out.emplace_back(prefix + "b_f", &c.b_f);
    out.emplace_back(prefix + "w_xc", &c.w_xc);
    out.emplace_back(prefix + "w_hc", &c.w_hc);
    out.emplace_back(prefix + "b_c", &c.b_c);
    out.emplace_back(prefix + "w_xo", &c.w_xo);
    out.emplace_back(prefix + "w_ho", &c.w_ho);
    out.emplace_back(prefix + "w_co", &c.w_co);
    out.emplace_back(prefix + "b_o", &c.b_o);
  }
  out.emplace_back("fc.w", &p.fc_w);
  out.emplace_back("fc.b", &p.fc_b);
  out.emplace_back("head.w", &p.head_w);
  out.emplace_back("head.b", &p.head_b);
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> named_tensors(ModelParams& params) {
  std::vector<std::pair<std::string, Tensor*>> out;
  collect(params, out);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> named_tensors(const ModelParams& params) {
  std::vector<std::pair<std::string, const Tensor*>> out;
  collect(params, out);
  return out;
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t total = 0;
  for (const auto& [name, t] : named_tensors(params)) total += t->size();
  return total;
}

ModelParams init_params(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  ModelParams p;
  p.input_w = glorot_uniform(cfg.input_features, cfg.d_model, rng);
  p.input_b = Tensor::zeros({cfg.d_model});
  p.pe = positional_encoding(cfg.window_len, cfg.d_model);
  for (std::size_t l = 0; l < cfg.n_encoder_layers; ++l) {
    p.encoder.push_back(init_encoder_layer(cfg.d_model, cfg.n_heads, cfg.ffn_width(), rng));
  }
  p.lstm = init_lstm_stack(cfg.d_model, cfg.lstm_hidden, cfg.lstm_layers, rng);
  p.fc_w = glorot_uniform(cfg.lstm_hidden, cfg.fc_units, rng);
  p.fc_b = Tensor::zeros({cfg.fc_units});
  p.head_w = glorot_uniform(cfg.fc_units, cfg.horizon, rng);
  p.head_b = Tensor::zeros({cfg.horizon});
  return p;
}

Var forward(Tape& tape, const Tensor& batch_x, const ModelParams& params, const ModelConfig& cfg, Rng& rng,
            bool training) {
  if (batch_x.rank() != 3 || batch_x.dim(1) != cfg.window_len || batch_x.dim(2) != cfg.input_features) {
    throw DimensionError("model input must be [B x " + std::to_string(cfg.window_len) + " x " +
                         std::to_string(cfg.input_features) + "], got " + shape_string(batch_x.shape()));
  }
  if (params.pe.max_len() < cfg.window_len) {
    throw DimensionError("positional table shorter than the window length");
  }
  const std::size_t batch = batch_x.dim(0);
  const std::size_t steps = cfg.window_len;
  const std::size_t d = cfg.d_model;

  Var x = tape.constant(batch_x);
  Var embedded = add_bias(matmul(x, tape.parameter(params.input_w)), tape.parameter(params.input_b));

  Tensor positions(Shape{batch, steps, d});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(params.pe.table.data().begin(), steps * d, positions.data().begin() + static_cast<std::ptrdiff_t>(b * steps * d));
  }
  Var encoded_in = dropout(add(embedded, tape.constant(std::move(positions))), cfg.dropout, rng, training);
  Var encoded = encoder_forward(encoded_in, params.encoder, cfg.dropout, rng, training, cfg.norm_eps);
  Var hs = stack_forward(encoded, params.lstm, cfg.dropout, rng, training);
  Var last = select_step(hs, steps - 1);
  Var dense = relu(add_bias(matmul(last, tape.parameter(params.fc_w)), tape.parameter(params.fc_b)));
  return add_bias(matmul(dense, tape.parameter(params.head_w)), tape.parameter(params.head_b));
}

Tensor predict(const ModelParams& params, const ModelConfig& cfg, const Tensor& batch_x) {
  Tape tape(false);
  Rng unused(0);
  return forward(tape, batch_x, params, cfg, unused, false).value();
}

}  // namespace gridcast
