#include "gridcast/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "gridcast/errors.hpp"

namespace gridcast {

const Tensor& Var::value() const { return tape_->value(id_); }

const Tensor& Gradients::of(const Tensor& parameter) const {
  auto it = grads_.find(&parameter);
  if (it == grads_.end()) throw ContractError("no gradient recorded for this parameter");
  return it->second;
}

Var Tape::constant(Tensor value) { return record(std::move(value), false, nullptr); }

Var Tape::variable(Tensor value) { return record(std::move(value), true, nullptr); }

Var Tape::parameter(const Tensor& tensor) {
  if (auto it = bound_.find(&tensor); it != bound_.end()) return Var(this, it->second);
  Var v = record(tensor, true, nullptr);
  bound_.emplace(&tensor, v.id_);
  parameters_.emplace_back(&tensor, v.id_);
  return v;
}

Var Tape::record(Tensor value, bool requires_grad, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = record_gradients_ && requires_grad;
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  if (!has_grad_[id]) {
    grads_[id] = Tensor::zeros(nodes_[id].value.shape());
    has_grad_[id] = true;
  }
  return grads_[id];
}

Gradients Tape::backward(Var loss) {
  if (loss.tape_ != this) throw ContractError("backward: loss belongs to a different tape");
  if (nodes_[loss.id_].value.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_string(nodes_[loss.id_].value.shape()));
  }
  grads_.assign(nodes_.size(), Tensor());
  has_grad_.assign(nodes_.size(), false);
  grad_buffer(loss.id_)[0] = 1.0;

  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    if (!has_grad_[id]) continue;
    const Node& node = nodes_[id];
    if (node.requires_grad && node.backward) node.backward(*this, grads_[id]);
  }

  Gradients out;
  for (const auto& [tensor, id] : parameters_) {
    out.grads_.emplace(tensor, has_grad_[id] ? grads_[id] : Tensor::zeros(nodes_[id].value.shape()));
  }
  return out;
}

Tensor Tape::grad_of(Var v) const {
  if (v.id_ < has_grad_.size() && has_grad_[v.id_]) return grads_[v.id_];
  return Tensor::zeros(nodes_[v.id_].value.shape());
}

namespace {

Tape& same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
  return a.tape();
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += s * bp[j];
    }
  }
}

// GA[m x k] += G[m x n] * B[k x n]^T
void gemm_nt(const double* g, const double* b, double* ga, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    double* gai = ga + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
      gai[p] += acc;
    }
  }
}

// GB[k x n] += A[m x k]^T * G[m x n]
void gemm_tn(const double* a, const double* g, double* gb, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ai[p];
      double* gbp = gb + p * n;
      for (std::size_t j = 0; j < n; ++j) gbp[j] += s * gi[j];
    }
  }
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Elementwise unary op whose derivative is expressed through input and output.
template <typename F, typename D>
Var unary(Var x, F f, D dfdx) {
  Tape& tape = x.tape();
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  const std::size_t ix = x.id();
  return tape.record(std::move(out), tape.requires_grad(ix), [ix, dfdx](Tape& t, const Tensor& g) {
    const Tensor& in_v = t.value(ix);
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdx(in_v[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (bv.rank() != 2 || av.rank() < 1 || av.shape().back() != bv.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_string(av.shape()) + " by " +
                         shape_string(bv.shape()));
  }
  const std::size_t k = bv.dim(0);
  const std::size_t n = bv.dim(1);
  const std::size_t m = av.size() / k;
  Shape out_shape = av.shape();
  out_shape.back() = n;
  Tensor out(out_shape);
  gemm_nn(av.data().data(), bv.data().data(), out.data().data(), m, k, n);

  const std::size_t ia = a.id(), ib = b.id();
  const bool needs = tape.requires_grad(ia) || tape.requires_grad(ib);
  return tape.record(std::move(out), needs, [ia, ib, m, k, n](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) {
      gemm_nt(g.data().data(), t.value(ib).data().data(), t.grad_buffer(ia).data().data(), m, k, n);
    }
    if (t.requires_grad(ib)) {
      gemm_tn(t.value(ia).data().data(), g.data().data(), t.grad_buffer(ib).data().data(), m, k, n);
    }
  });
}

Var batched_matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool ok_rank = (av.rank() == 3 && bv.rank() == 3 && av.dim(0) == bv.dim(0)) ||
                       (av.rank() == 2 && bv.rank() == 2);
  if (!ok_rank || av.shape().back() != bv.shape()[bv.rank() - 2]) {
    throw DimensionError("batched_matmul: cannot multiply " + shape_string(av.shape()) + " by " +
                         shape_string(bv.shape()));
  }
  const std::size_t batch = av.rank() == 3 ? av.dim(0) : 1;
  const std::size_t m = av.shape()[av.rank() - 2];
  const std::size_t k = av.shape().back();
  const std::size_t n = bv.shape().back();
  Shape out_shape = av.rank() == 3 ? Shape{batch, m, n} : Shape{m, n};
  Tensor out(out_shape);
  for (std::size_t s = 0; s < batch; ++s) {
    gemm_nn(av.data().data() + s * m * k, bv.data().data() + s * k * n, out.data().data() + s * m * n, m, k, n);
  }
  const std::size_t ia = a.id(), ib = b.id();
  const bool needs = tape.requires_grad(ia) || tape.requires_grad(ib);
  return tape.record(std::move(out), needs, [ia, ib, batch, m, k, n](Tape& t, const Tensor& g) {
    const double* gd = g.data().data();
    if (t.requires_grad(ia)) {
      const double* bd = t.value(ib).data().data();
      double* gad = t.grad_buffer(ia).data().data();
      for (std::size_t s = 0; s < batch; ++s) gemm_nt(gd + s * m * n, bd + s * k * n, gad + s * m * k, m, k, n);
    }
    if (t.requires_grad(ib)) {
      const double* ad = t.value(ia).data().data();
      double* gbd = t.grad_buffer(ib).data().data();
      for (std::size_t s = 0; s < batch; ++s) gemm_tn(ad + s * m * k, gd + s * m * n, gbd + s * k * n, m, k, n);
    }
  });
}

Var transpose(Var x) {
  Tape& tape = x.tape();
  const Tensor& in = x.value();
  if (in.rank() < 2) throw DimensionError("transpose: need rank >= 2, got " + shape_string(in.shape()));
  const std::size_t r = in.rank();
  const std::size_t rows = in.dim(r - 2), cols = in.dim(r - 1);
  const std::size_t batch = in.size() / (rows * cols);
  Shape out_shape = in.shape();
  std::swap(out_shape[r - 2], out_shape[r - 1]);
  Tensor out(out_shape);
  for (std::size_t s = 0; s < batch; ++s) {
    const std::size_t off = s * rows * cols;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out[off + j * rows + i] = in[off + i * cols + j];
  }
  const std::size_t ix = x.id();
  return tape.record(std::move(out), tape.requires_grad(ix), [ix, batch, rows, cols](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t s = 0; s < batch; ++s) {
      const std::size_t off = s * rows * cols;
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) gx[off + i * cols + j] += g[off + j * rows + i];
    }
  });
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  check_same_shape("add", a.value(), b.value());
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), tape.requires_grad(ia) || tape.requires_grad(ib),
                     [ia, ib](Tape& t, const Tensor& g) {
                       for (std::size_t id : {ia, ib}) {
                         if (!t.requires_grad(id)) continue;
                         Tensor& gx = t.grad_buffer(id);
                         for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                       }
                     });
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  check_same_shape("sub", a.value(), b.value());
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), tape.requires_grad(ia) || tape.requires_grad(ib),
                     [ia, ib](Tape& t, const Tensor& g) {
                       if (t.requires_grad(ia)) {
                         Tensor& ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                       }
                       if (t.requires_grad(ib)) {
                         Tensor& gb = t.grad_buffer(ib);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                       }
                     });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  check_same_shape("mul", a.value(), b.value());
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), tape.requires_grad(ia) || tape.requires_grad(ib),
                     [ia, ib](Tape& t, const Tensor& g) {
                       const Tensor& a_v = t.value(ia);
                       const Tensor& b_v = t.value(ib);
                       if (t.requires_grad(ia)) {
                         Tensor& ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b_v[i];
                       }
                       if (t.requires_grad(ib)) {
                         Tensor& gb = t.grad_buffer(ib);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a_v[i];
                       }
                     });
}

Var scale(Var x, double factor) {
  return unary(x, [factor](double v) { return factor * v; }, [factor](double) { return factor; });
}

Var add_bias(Var x, Var bias) {
  Tape& tape = same_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.rank() != 1 || xv.rank() < 1 || xv.shape().back() != bv.dim(0)) {
    throw DimensionError("add_bias: cannot add bias " + shape_string(bv.shape()) + " to " +
                         shape_string(xv.shape()));
  }
  const std::size_t n = bv.dim(0);
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % n];
  const std::size_t ix = x.id(), ib = bias.id();
  return tape.record(std::move(out), tape.requires_grad(ix) || tape.requires_grad(ib),
                     [ix, ib, n](Tape& t, const Tensor& g) {
                       if (t.requires_grad(ix)) {
                         Tensor& gx = t.grad_buffer(ix);
                         for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                       }
                       if (t.requires_grad(ib)) {
                         Tensor& gb = t.grad_buffer(ib);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
                       }
                     });
}

Var tanh(Var x) {
  Tape& tape = x.tape();
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
  const std::size_t ix = x.id();
  const std::size_t self = tape.size();
  return tape.record(std::move(out), tape.requires_grad(ix), [ix, self](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var sigmoid(Var x) {
  return unary(
      x, [](double v) { return sigmoid_scalar(v); },
      [](double v) {
        const double s = sigmoid_scalar(v);
        return s * (1.0 - s);
      });
}

Var relu(Var x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var softmax_rows(Var x) {
  Tape& tape = x.tape();
  const Tensor& in = x.value();
  if (in.rank() < 1) throw DimensionError("softmax_rows: need rank >= 1");
  const std::size_t n = in.shape().back();
  const std::size_t rows = in.size() / n;
  Tensor out(in.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xi = in.data().data() + r * n;
    double* yi = out.data().data() + r * n;
    const double mx = *std::max_element(xi, xi + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      yi[j] = std::exp(xi[j] - mx);
      total += yi[j];
    }
    for (std::size_t j = 0; j < n; ++j) yi[j] /= total;
  }
  const std::size_t ix = x.id();
  const std::size_t self = tape.size();
  return tape.record(std::move(out), tape.requires_grad(ix), [ix, self, rows, n](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& tape = same_tape(x, gain);
  same_tape(x, bias);
  const Tensor& in = x.value();
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  if (in.rank() < 1) throw DimensionError("layer_norm: need rank >= 1");
  const std::size_t d = in.shape().back();
  if (gv.shape() != Shape{d} || bv.shape() != Shape{d}) {
    throw DimensionError("layer_norm: gain/bias " + shape_string(gv.shape()) + "/" + shape_string(bv.shape()) +
                         " do not match last axis of " + shape_string(in.shape()));
  }
  if (!(eps > 0.0)) throw ParameterError("layer_norm: eps must be positive");
  const std::size_t rows = in.size() / d;
  std::vector<double> xhat(in.size());
  std::vector<double> inv_std(rows);
  Tensor out(in.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xi = in.data().data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xi[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xi[j] - mu) * inv;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  const bool needs = tape.requires_grad(ix) || tape.requires_grad(ig) || tape.requires_grad(ib);
  return tape.record(
      std::move(out), needs,
      [ix, ig, ib, rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
        const Tensor& gain_v = t.value(ig);
        if (t.requires_grad(ig)) {
          Tensor& gg = t.grad_buffer(ig);
          for (std::size_t i = 0; i < g.size(); ++i) gg[i % d] += g[i] * xhat[i];
        }
        if (t.requires_grad(ib)) {
          Tensor& gb = t.grad_buffer(ib);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
        }
        if (t.requires_grad(ix)) {
          Tensor& gx = t.grad_buffer(ix);
          const double dn = static_cast<double>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double sum_dh = 0.0, sum_dh_h = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = g[r * d + j] * gain_v[j];
              sum_dh += dh;
              sum_dh_h += dh * xhat[r * d + j];
            }
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = g[r * d + j] * gain_v[j];
              gx[r * d + j] += inv_std[r] / dn * (dn * dh - sum_dh - xhat[r * d + j] * sum_dh_h);
            }
          }
        }
      });
}

Var dropout(Var x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0) || rate >= 1.0) throw ParameterError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  Tape& tape = x.tape();
  const Tensor& in = x.value();
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(in.size());
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out[i] = in[i] * mask[i];
  }
  const std::size_t ix = x.id();
  return tape.record(std::move(out), tape.requires_grad(ix), [ix, mask = std::move(mask)](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
  });
}

Var reshape(Var x, Shape shape) {
  Tape& tape = x.tape();
  Tensor out = x.value().reshaped(std::move(shape));
  const std::size_t ix = x.id();
  return tape.record(std::move(out), tape.requires_grad(ix), [ix](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var concat_last(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_last: no operands");
  Tape& tape = parts[0].tape();
  const Shape& first = parts[0].shape();
  Shape lead(first.begin(), first.end() - 1);
  std::vector<std::size_t> widths, ids;
  std::size_t total = 0;
  bool needs = false;
  for (const Var& p : parts) {
    same_tape(parts[0], p);
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(lead.begin(), lead.end(), s.begin())) {
      throw DimensionError("concat_last: shape " + shape_string(s) + " incompatible with " + shape_string(first));
    }
    widths.push_back(s.back());
    ids.push_back(p.id());
    total += s.back();
    needs = needs || tape.requires_grad(p.id());
  }
  const std::size_t rows = shape_size(lead);
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.data().data() + r * widths[p], widths[p], out.data().data() + r * total + offset);
    offset += widths[p];
  }
  return tape.record(std::move(out), needs, [ids, widths, rows, total](Tape& t, const Tensor& g) {
    std::size_t off = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (t.requires_grad(ids[p])) {
        Tensor& gp = t.grad_buffer(ids[p]);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < widths[p]; ++j) gp[r * widths[p] + j] += g[r * total + off + j];
      }
      off += widths[p];
    }
  });
}

Var select_step(Var x, std::size_t t) {
  Tape& tape = x.tape();
  const Tensor& in = x.value();
  if (in.rank() != 2 && in.rank() != 3) throw DimensionError("select_step: need rank 2 or 3, got " + shape_string(in.shape()));
  const bool batched = in.rank() == 3;
  const std::size_t batch = batched ? in.dim(0) : 1;
  const std::size_t steps = in.dim(batched ? 1 : 0);
  const std::size_t d = in.shape().back();
  if (t >= steps) throw DimensionError("select_step: step " + std::to_string(t) + " out of range " + shape_string(in.shape()));
  Tensor out(batched ? Shape{batch, d} : Shape{d});
  for (std::size_t b = 0; b < batch; ++b)
    std::copy_n(in.data().data() + (b * steps + t) * d, d, out.data().data() + b * d);
  const std::size_t ix = x.id();
  return tape.record(std::move(out), tape.requires_grad(ix), [ix, batch, steps, d, t](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad_buffer(ix);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < d; ++j) gx[(b * steps + t) * d + j] += g[b * d + j];
  });
}

Var stack_steps(std::span<const Var> steps) {
  if (steps.empty()) throw DimensionError("stack_steps: no operands");
  Tape& tape = steps[0].tape();
  const Shape& s0 = steps[0].shape();
  if (s0.size() != 1 && s0.size() != 2) throw DimensionError("stack_steps: need rank 1 or 2, got " + shape_string(s0));
  const bool batched = s0.size() == 2;
  const std::size_t batch = batched ? s0[0] : 1;
  const std::size_t d = s0.back();
  const std::size_t count = steps.size();
  std::vector<std::size_t> ids;
  bool needs = false;
  for (const Var& v : steps) {
    same_tape(steps[0], v);
    if (v.shape() != s0) throw DimensionError("stack_steps: shape " + shape_string(v.shape()) + " vs " + shape_string(s0));
    ids.push_back(v.id());
    needs = needs || tape.requires_grad(v.id());
  }
  Tensor out(batched ? Shape{batch, count, d} : Shape{count, d});
  for (std::size_t t = 0; t < count; ++t) {
    const Tensor& v = steps[t].value();
    for (std::size_t b = 0; b < batch; ++b)
      std::copy_n(v.data().data() + b * d, d, out.data().data() + (b * count + t) * d);
  }
  return tape.record(std::move(out), needs, [ids, batch, count, d](Tape& tp, const Tensor& g) {
    for (std::size_t t = 0; t < count; ++t) {
      if (!tp.requires_grad(ids[t])) continue;
      Tensor& gs = tp.grad_buffer(ids[t]);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < d; ++j) gs[b * d + j] += g[(b * count + t) * d + j];
    }
  });
}

Var sum(Var x) {
  Tape& tape = x.tape();
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  const std::size_t ix = x.id();
  return tape.record(Tensor::scalar(total), tape.requires_grad(ix), [ix](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var mse(Var prediction, Var target) {
  Tape& tape = same_tape(prediction, target);
  check_same_shape("mse", prediction.value(), target.value());
  const Tensor& p = prediction.value();
  const Tensor& y = target.value();
  const double n = static_cast<double>(p.size());
  std::vector<double> diff(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    diff[i] = p[i] - y[i];
    total += diff[i] * diff[i];
  }
  const std::size_t ip = prediction.id(), iy = target.id();
  const bool needs = tape.requires_grad(ip) || tape.requires_grad(iy);
  return tape.record(Tensor::scalar(total / n), needs, [ip, iy, n, diff = std::move(diff)](Tape& t, const Tensor& g) {
    const double c = 2.0 * g[0] / n;
    if (t.requires_grad(ip)) {
      Tensor& gp = t.grad_buffer(ip);
      for (std::size_t i = 0; i < diff.size(); ++i) gp[i] += c * diff[i];
    }
    if (t.requires_grad(iy)) {
      Tensor& gy = t.grad_buffer(iy);
      for (std::size_t i = 0; i < diff.size(); ++i) gy[i] -= c * diff[i];
    }
  });
}

// ---- tensor-level conveniences ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape tape(false);
  return matmul(tape.constant(a), tape.constant(b)).value();
}

Tensor softmax_rows(const Tensor& x) {
  Tape tape(false);
  return softmax_rows(tape.constant(x)).value();
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  Tape tape(false);
  return layer_norm(tape.constant(x), tape.constant(gain), tape.constant(bias), eps).value();
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training) {
  Tape tape(false);
  return dropout(tape.constant(x), rate, rng, training).value();
}

Tensor tanh(const Tensor& x) {
  Tape tape(false);
  return tanh(tape.constant(x)).value();
}

Tensor sigmoid(const Tensor& x) {
  Tape tape(false);
  return sigmoid(tape.constant(x)).value();
}

Tensor relu(const Tensor& x) {
  Tape tape(false);
  return relu(tape.constant(x)).value();
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tape tape(false);
  return add(tape.constant(a), tape.constant(b)).value();
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tape tape(false);
  return mul(tape.constant(a), tape.constant(b)).value();
}

Tensor scale(const Tensor& x, double factor) {
  Tape tape(false);
  return scale(tape.constant(x), factor).value();
}

}  // namespace gridcast
