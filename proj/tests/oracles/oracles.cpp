#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

Mat attention(const Mat& q, const Mat& k, const Mat& v) {
  const std::size_t n = q.size(), m = k.size(), dk = q[0].size(), dv = v[0].size();
  Mat out(n, Vec(dv, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    Vec e(m);
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t a = 0; a < dk; ++a) dot += q[i][a] * k[j][a];
      e[j] = std::exp(dot / std::sqrt(static_cast<double>(dk)));
      total += e[j];
    }
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t b = 0; b < dv; ++b) out[i][b] += e[j] / total * v[j][b];
    }
  }
  return out;
}

namespace {

double sigma(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Returns vec * mat, vec of length rows(mat).
Vec times(const Vec& vec, const Mat& mat) {
  Vec out(mat[0].size(), 0.0);
  for (std::size_t r = 0; r < mat.size(); ++r) {
    for (std::size_t c = 0; c < mat[r].size(); ++c) out[c] += vec[r] * mat[r][c];
  }
  return out;
}

}  // namespace

LstmStep lstm_step(const Vec& x, const Vec& h_prev, const Vec& c_prev, const LstmWeights& w) {
  const std::size_t n = h_prev.size();
  const Vec xi = times(x, w.w_xi), hi = times(h_prev, w.w_hi), ci = times(c_prev, w.w_ci);
  const Vec xf = times(x, w.w_xf), hf = times(h_prev, w.w_hf), cf = times(c_prev, w.w_cf);
  const Vec xc = times(x, w.w_xc), hc = times(h_prev, w.w_hc);
  Vec i(n), f(n), g(n), c(n);
  for (std::size_t j = 0; j < n; ++j) {
    i[j] = sigma(xi[j] + hi[j] + ci[j] + w.b_i[j]);
    f[j] = sigma(xf[j] + hf[j] + cf[j] + w.b_f[j]);
    g[j] = std::tanh(xc[j] + hc[j] + w.b_c[j]);
    c[j] = f[j] * c_prev[j] + i[j] * g[j];
  }
  const Vec xo = times(x, w.w_xo), ho = times(h_prev, w.w_ho), co = times(c, w.w_co);
  Vec h(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double o = sigma(xo[j] + ho[j] + co[j] + w.b_o[j]);
    h[j] = o * std::tanh(c[j]);
  }
  return {h, c};
}

Metrics metrics(const Vec& y, const Vec& yhat) {
  const double n = static_cast<double>(y.size());
  double se = 0.0, ae = 0.0, sp = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    se += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ae += std::fabs(y[i] - yhat[i]);
    const double denom = std::fabs(y[i]) + std::fabs(yhat[i]);
    if (denom != 0.0) sp += 2.0 * std::fabs(y[i] - yhat[i]) / denom;
    mean += y[i];
  }
  mean /= n;
  double ss_tot = 0.0;
  for (double v : y) ss_tot += (v - mean) * (v - mean);
  return {std::sqrt(se / n), ae / n, 100.0 / n * sp, 1.0 - se / ss_tot};
}

double quantile(Vec values, double p) {
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace oracle
