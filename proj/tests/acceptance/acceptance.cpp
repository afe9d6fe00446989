// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "gridcast/checkpoint.hpp"
#include "gridcast/data.hpp"
#include "gridcast/errors.hpp"
#include "gridcast/lstm.hpp"
#include "gridcast/metrics.hpp"
#include "gridcast/model.hpp"
#include "gridcast/pso.hpp"
#include "gridcast/serialization.hpp"
#include "gridcast/train.hpp"
#include "gridcast/transformer.hpp"
#include "gridcast/tuner.hpp"
#include "oracles.hpp"
#include "support/gradcheck.hpp"
#include "support/synthetic.hpp"

using namespace gridcast;
using testing_support::hourly_series;
using testing_support::sine_series;
using testing_support::tiny_config;

namespace {

// Tolerances and budgets.
constexpr double kGradTol = 1e-4;
constexpr double kGradEps = 1e-5;
constexpr double kGradSeconds = 120.0;
constexpr std::size_t kFidelityCases = 200;
constexpr double kFidelityTol = 1e-9;
constexpr double kSphereTarget = 1e-3;
constexpr double kRastriginTarget = 1.0;
constexpr double kPsoSeconds = 30.0;
constexpr double kSkillR2 = 0.90;
constexpr double kSkillSeconds = 600.0;
constexpr double kOverfitRmse = 0.05;
constexpr double kExactTol = 1e-9;
constexpr std::size_t kMetricSets = 10000;
constexpr double kOracleTol = 1e-12;

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

oracle::Mat to_mat(const Tensor& t) {
  oracle::Mat m(t.dim(0), oracle::Vec(t.dim(1)));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m[i][j] = t.at(i, j);
  return m;
}

oracle::Vec to_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Accumulates failed checks with a short reason each.
struct Checker {
  bool ok = true;
  std::vector<std::string> failures;
  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (failures.size() < 5) failures.push_back(what);
    }
  }
  std::string reasons() const {
    std::string out;
    for (const auto& f : failures) out += (out.empty() ? "" : "; ") + f;
    return out;
  }
};

std::vector<Tensor*> cell_tensors(LstmCellParams& p) {
  return {&p.w_xi, &p.w_hi, &p.w_ci, &p.b_i, &p.w_xf, &p.w_hf, &p.w_cf, &p.b_f,
          &p.w_xc, &p.w_hc, &p.b_c, &p.w_xo, &p.w_ho, &p.w_co, &p.b_o};
}

PreparedDataset synthetic_task(std::uint64_t noise_seed, std::size_t n = 1000) {
  PipelineConfig p;
  p.window_len = 24;
  p.horizon = 1;
  return prepare_dataset(hourly_series(sine_series(n, 0.1, noise_seed)), p);
}

// ---- 1 ----
Outcome gradient_integrity() {
  const auto start = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  auto record = [&](const std::string& prefix, const std::vector<testing_support::GroupError>& errors) {
    for (const auto& e : errors) {
      if (!(e.relative <= worst)) {
        worst = e.relative;
        worst_name = prefix + e.name;
      }
    }
  };
  Rng rng(101);
  Rng unused(0);

  {
    EncoderLayerParams layer = init_encoder_layer(8, 2, 32, rng);
    for (double& v : layer.ffn.b1.data()) v = rng.uniform(-0.5, 0.5);
    for (double& v : layer.norm1_gain.data()) v = rng.uniform(0.5, 1.5);
    const Tensor x = random_tensor({5, 8}, rng, -2, 2), target = random_tensor({5, 8}, rng);
    std::vector<std::pair<std::string, Tensor*>> params;
    for (std::size_t h = 0; h < 2; ++h) {
      params.emplace_back("w_q" + std::to_string(h), &layer.attention.heads[h].w_q);
      params.emplace_back("w_k" + std::to_string(h), &layer.attention.heads[h].w_k);
      params.emplace_back("w_v" + std::to_string(h), &layer.attention.heads[h].w_v);
    }
    params.emplace_back("w_o", &layer.attention.w_o);
    params.emplace_back("w1", &layer.ffn.w1);
    params.emplace_back("b1", &layer.ffn.b1);
    params.emplace_back("w2", &layer.ffn.w2);
    params.emplace_back("b2", &layer.ffn.b2);
    params.emplace_back("norm1_gain", &layer.norm1_gain);
    params.emplace_back("norm1_bias", &layer.norm1_bias);
    params.emplace_back("norm2_gain", &layer.norm2_gain);
    params.emplace_back("norm2_bias", &layer.norm2_bias);
    record("encoder.", testing_support::gradient_check(
                           [&](Tape& t) {
                             return mse(encoder_layer_forward(t.constant(x), layer, 0.0, unused, false),
                                        t.constant(target));
                           },
                           params, kGradEps));
  }
  {
    LstmCellParams cell = init_lstm_cell(3, 4, rng);
    for (Tensor* t : cell_tensors(cell))
      for (double& v : t->data()) v = rng.uniform(-0.8, 0.8);
    const char* names[] = {"w_xi", "w_hi", "w_ci", "b_i", "w_xf", "w_hf", "w_cf", "b_f",
                           "w_xc", "w_hc", "b_c",  "w_xo", "w_ho", "w_co", "b_o"};
    std::vector<std::pair<std::string, Tensor*>> params;
    const auto tensors = cell_tensors(cell);
    for (std::size_t i = 0; i < tensors.size(); ++i) params.emplace_back(names[i], tensors[i]);
    const Tensor xs = random_tensor({5, 3}, rng), target = random_tensor({5, 4}, rng, -0.5, 0.5);
    record("lstm.", testing_support::gradient_check(
                        [&](Tape& t) {
                          RecurrentState init{t.constant(Tensor(Shape{4}, 0.3)), t.constant(Tensor(Shape{4}, -0.4))};
                          return mse(sequence_forward(t.constant(xs), init, cell).hs, t.constant(target));
                        },
                        params, kGradEps));
  }
  {
    ModelConfig cfg;
    cfg.input_features = 1;
    cfg.window_len = 4;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.n_encoder_layers = 1;
    cfg.d_ff = 16;
    cfg.lstm_layers = 1;
    cfg.lstm_hidden = 4;
    cfg.fc_units = 4;
    cfg.dropout = 0.0;
    ModelParams p = init_params(cfg);
    for (auto& [name, t] : named_tensors(p))
      if (t->rank() == 1) for (double& v : t->data()) v += rng.uniform(-0.3, 0.3);
    const Tensor batch = random_tensor({3, 4, 1}, rng, -1.5, 1.5), target = random_tensor({3, 1}, rng);
    record("model.", testing_support::gradient_check(
                         [&](Tape& t) { return mse(forward(t, batch, p, cfg, unused, false), t.constant(target)); },
                         named_tensors(p), kGradEps));
  }
  const double elapsed = seconds_since(start);
  return {worst < kGradTol && elapsed < kGradSeconds,
          fmt::format("worst relative error {:.3g} ({}), {:.1f}s", worst, worst_name, elapsed)};
}

// ---- 2 ----
Outcome equation_fidelity() {
  Rng rng(202);
  double att = 0.0, cell = 0.0, chain = 0.0, swarm = 0.0, met = 0.0;
  for (std::size_t c = 0; c < kFidelityCases; ++c) {
    const std::size_t n = 1 + rng.index(6), m = 1 + rng.index(6), dk = 1 + rng.index(8), dv = 1 + rng.index(8);
    const Tensor q = random_tensor({n, dk}, rng, -2, 2), k = random_tensor({m, dk}, rng, -2, 2),
                 v = random_tensor({m, dv}, rng, -2, 2);
    const Tensor got = scaled_dot_attention(q, k, v);
    const oracle::Mat want = oracle::attention(to_mat(q), to_mat(k), to_mat(v));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < dv; ++j) att = std::max(att, std::abs(got.at(i, j) - want[i][j]));
  }
  for (std::size_t c = 0; c < kFidelityCases; ++c) {
    const std::size_t in = 1 + rng.index(5), hidden = 1 + rng.index(6);
    LstmCellParams p = init_lstm_cell(in, hidden, rng);
    for (Tensor* t : cell_tensors(p))
      for (double& x : t->data()) x = rng.uniform(-1.5, 1.5);
    const oracle::LstmWeights w{to_mat(p.w_xi), to_mat(p.w_hi), to_mat(p.w_ci), to_vec(p.b_i),
                                to_mat(p.w_xf), to_mat(p.w_hf), to_mat(p.w_cf), to_vec(p.b_f),
                                to_mat(p.w_xc), to_mat(p.w_hc), to_vec(p.b_c),  to_mat(p.w_xo),
                                to_mat(p.w_ho), to_mat(p.w_co), to_vec(p.b_o)};
    const Tensor x = random_tensor({in}, rng, -2, 2);
    const LstmState prev{random_tensor({hidden}, rng), random_tensor({hidden}, rng, -2, 2)};
    const LstmState s = cell_step(x, prev, p);
    const oracle::LstmStep o = oracle::lstm_step(to_vec(x), to_vec(prev.h), to_vec(prev.c), w);
    for (std::size_t j = 0; j < hidden; ++j)
      cell = std::max({cell, std::abs(s.h[j] - o.h[j]), std::abs(s.c[j] - o.c[j])});

    const Tensor xs = random_tensor({3, in}, rng, -2, 2);
    const SequenceResult seq = sequence_forward(xs, LstmState{Tensor::zeros({hidden}), Tensor::zeros({hidden})}, p);
    oracle::LstmStep st{oracle::Vec(hidden, 0.0), oracle::Vec(hidden, 0.0)};
    for (std::size_t t = 0; t < 3; ++t) {
      oracle::Vec row(in);
      for (std::size_t j = 0; j < in; ++j) row[j] = xs.at(t, j);
      st = oracle::lstm_step(row, st.h, st.c, w);
      for (std::size_t j = 0; j < hidden; ++j) chain = std::max(chain, std::abs(seq.hs.at(t, j) - st.h[j]));
    }
  }
  for (std::size_t c = 0; c < kFidelityCases; ++c) {
    PsoConfig cfg;
    cfg.n_particles = 5;
    cfg.t_max = 10;
    cfg.seed = 1000 + c;
    const std::size_t dims = 1 + rng.index(4);
    std::vector<double> centre(dims), weight(dims);
    for (std::size_t d = 0; d < dims; ++d) {
      centre[d] = rng.uniform();
      weight[d] = rng.uniform(0.1, 5.0);
    }
    auto f = [&](std::span<const double> x) {
      double s = 0.0;
      for (std::size_t d = 0; d < dims; ++d) s += weight[d] * (x[d] - centre[d]) * (x[d] - centre[d]);
      return s;
    };
    std::vector<SearchDim> box;
    for (std::size_t d = 0; d < dims; ++d) box.push_back({"x" + std::to_string(d), 0.0, 1.0});
    oracle::Mat x0, v0;
    std::vector<oracle::Mat> r1(cfg.t_max), r2(cfg.t_max);
    std::vector<oracle::Mat> positions;
    PsoCallbacks cb;
    cb.on_iteration = [&](const SwarmState& s) {
      oracle::Mat xs;
      for (const auto& p : s.particles) xs.push_back(p.x);
      if (s.t == 0) {
        x0 = xs;
        for (const auto& p : s.particles) v0.push_back(p.v);
      }
      positions.push_back(xs);
    };
    cb.on_draws = [&](std::size_t it, const auto& a, const auto& b) {
      r1[it - 1] = a;
      r2[it - 1] = b;
    };
    const PsoResult r = optimize([&](const Candidate& cand) { return f(cand.position); }, SearchSpace(box), cfg, cb);
    const oracle::PsoTrace trace =
        oracle::pso_trace(x0, v0, r1, r2, oracle::PsoSettings{cfg.c1, cfg.c2, cfg.w_max, cfg.w_min, cfg.v_max, cfg.t_max},
                          [&](const oracle::Vec& x) { return f(x); });
    for (std::size_t t = 0; t <= cfg.t_max; ++t) {
      swarm = std::max(swarm, std::abs(trace.gbest_f[t] - r.gbest_trace[t]));
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t d = 0; d < dims; ++d) swarm = std::max(swarm, std::abs(trace.x[t][i][d] - positions[t][i][d]));
    }
  }
  for (std::size_t c = 0; c < kFidelityCases; ++c) {
    const std::size_t n = 2 + rng.index(40);
    std::vector<double> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.uniform(-100, 100);
      p[i] = y[i] + rng.normal() * 10;
    }
    const MetricsReport r = report({y, p});
    const oracle::Metrics o = oracle::metrics(y, p);
    met = std::max({met, std::abs(r.rmse - o.rmse), std::abs(r.mae - o.mae), std::abs(r.smape - o.smape),
                    std::abs(r.r2 - o.r2)});
  }
  const double worst = std::max({att, cell, chain, swarm, met});
  return {worst < kFidelityTol,
          fmt::format("{} cases each; max abs diff attention {:.2g}, cell {:.2g}, T=3 chain {:.2g}, swarm {:.2g}, "
                      "metrics {:.2g}",
                      kFidelityCases, att, cell, chain, swarm, met)};
}

// ---- 3 ----
Outcome pso_convergence() {
  const auto start = Clock::now();
  auto sphere = [](const Candidate& c) {
    double s = 0.0;
    for (double v : c.position) s += v * v;
    return s;
  };
  auto rastrigin = [](const Candidate& c) {
    double s = 10.0 * static_cast<double>(c.position.size());
    for (double v : c.position) s += v * v - 10.0 * std::cos(2.0 * std::numbers::pi * v);
    return s;
  };
  std::vector<SearchDim> sphere_box, rastrigin_box;
  for (int d = 0; d < 5; ++d) sphere_box.push_back({"x" + std::to_string(d), -5.0, 5.0});
  for (int d = 0; d < 2; ++d) rastrigin_box.push_back({"x" + std::to_string(d), -5.12, 5.12});
  std::vector<double> s, r;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    PsoConfig cfg;  // 30 particles, 200 rounds, c1 = c2 = 2, w 0.9 -> 0.4
    cfg.seed = seed;
    s.push_back(optimize(sphere, SearchSpace(sphere_box), cfg).best_fitness);
    r.push_back(optimize(rastrigin, SearchSpace(rastrigin_box), cfg).best_fitness);
  }
  const double elapsed = seconds_since(start);
  return {median(s) < kSphereTarget && median(r) < kRastriginTarget && elapsed < kPsoSeconds,
          fmt::format("median sphere {:.3g}, median Rastrigin {:.3g}, {:.1f}s", median(s), median(r), elapsed)};
}

// ---- 4 ----
Outcome forecast_skill() {
  const auto start = Clock::now();
  std::vector<double> r2s, rmses, persistence;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const PreparedDataset d = synthetic_task(seed);
    ModelConfig cfg = tiny_config();
    cfg.seed = seed;
    TrainConfig tc;
    tc.seed = seed;
    tc.max_epochs = 200;
    const FitResult fitted = fit(init_params(cfg), cfg, d.windows, d.split, tc);
    const EvaluationResult e = evaluate(fitted.params, cfg, d.windows, d.split.test, d.norm);
    // Persistence: the last observed value of each test window.
    const Tensor inputs = d.windows.gather_inputs(d.split.test);
    std::vector<double> naive;
    for (std::size_t i = 0; i < d.split.test.size(); ++i)
      naive.push_back(zscore_invert(inputs.at(i, cfg.window_len - 1, 0), d.norm, d.norm.target_index));
    r2s.push_back(e.metrics.r2);
    rmses.push_back(e.metrics.rmse);
    persistence.push_back(rmse({e.actual, naive}));
  }
  const double elapsed = seconds_since(start);
  const double r2 = median(r2s), model_rmse = median(rmses), naive_rmse = median(persistence);
  return {r2 >= kSkillR2 && model_rmse < naive_rmse && elapsed < kSkillSeconds,
          fmt::format("median test R2 {:.4f}, RMSE {:.4f} vs persistence {:.4f}, {:.0f}s", r2, model_rmse,
                      naive_rmse, elapsed)};
}

// ---- 5 ----
Outcome overfit_capacity() {
  const PreparedDataset d = synthetic_task(11);
  ModelConfig cfg = tiny_config();
  cfg.dropout = 0.0;
  SplitIndices subset;
  subset.train.assign(d.split.train.begin(), d.split.train.begin() + 32);
  subset.validation = subset.train;
  TrainConfig tc;
  tc.max_epochs = 300;
  tc.patience = 300;
  tc.batch_size = 32;
  const FitResult r = fit(init_params(cfg), cfg, d.windows, subset, tc);
  const double train_rmse = std::sqrt(validation_loss(r.params, cfg, d.windows, subset.train));
  return {train_rmse < kOverfitRmse,
          fmt::format("normalized train RMSE {:.4f} after {} epochs", train_rmse, r.report.epochs_run())};
}

// ---- 6 ----
Outcome tuner_efficacy() {
  const SearchSpace space({{"learning_rate", 1e-4, 1e-2, Scale::logarithmic}, {"dropout", 0.0, 0.6}});
  std::vector<double> best, initial, reference;
  bool monotone = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const PreparedDataset data = synthetic_task(100 + seed);
    const auto shared = std::make_shared<const PreparedDataset>(data);
    TuneSettings s;
    s.space = space;
    s.pso.n_particles = 3;
    s.pso.t_max = 2;
    s.pso.seed = seed;
    s.budget_epochs = 20;
    s.base_model = tiny_config();
    const TuneResult r = tune_hyperparameters([&](std::size_t) { return shared; }, s);
    double init_best = kInf;
    for (const auto& e : r.pso.evaluations)
      if (e.iteration == 0) init_best = std::min(init_best, e.fitness);
    for (std::size_t t = 1; t < r.pso.gbest_trace.size(); ++t)
      monotone = monotone && r.pso.gbest_trace[t] <= r.pso.gbest_trace[t - 1];
    monotone = monotone && r.best_fitness <= init_best;

    // Reference setup at the same budget: learning rate 0.001, dropout 0.5.
    ModelConfig m = tiny_config();
    m.dropout = 0.5;
    m.seed = derive_seed(seed, {0, 0, 0});
    TrainConfig t;
    t.seed = derive_seed(seed, {0, 0, 1});
    best.push_back(r.best_fitness);
    initial.push_back(init_best);
    reference.push_back(candidate_fitness(data, m, t, s.budget_epochs));
  }
  const double b = median(best), ref = median(reference);
  return {monotone && b <= median(initial) && b <= ref,
          fmt::format("median best val RMSE {:.4f}, initial population {:.4f}, reference config {:.4f}{}", b,
                      median(initial), ref, monotone ? "" : ", gbest not monotone")};
}

// ---- 7 ----
Outcome preprocessing_exactness() {
  Checker c;
  Rng rng(707);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 20 + rng.index(200);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform(-500, 5000);
      b[i] = rng.normal() * 3 + 7;
    }
    const RawSeries s = hourly_series({a, b}, {"a", "b"});
    const auto ranges = split_ranges(n);
    const NormalizationParams p = zscore_fit(s, ranges[0]);
    const RawSeries z = zscore_apply(s, p);
    for (std::size_t col = 0; col < 2; ++col) {
      double mean = 0.0, var = 0.0;
      const RowRange tr = ranges[0];
      for (std::size_t i = tr.begin; i < tr.end; ++i) mean += z.columns[col][i];
      mean /= static_cast<double>(tr.size());
      for (std::size_t i = tr.begin; i < tr.end; ++i) var += (z.columns[col][i] - mean) * (z.columns[col][i] - mean);
      const double sd = std::sqrt(var / static_cast<double>(tr.size()));
      c.expect(std::abs(mean) < kExactTol, "train mean");
      c.expect(std::abs(sd - 1.0) < kExactTol, "train std");
      const auto back = zscore_invert(z.columns[col], p, col);
      for (std::size_t i = 0; i < n; ++i)
        c.expect(std::abs(back[i] - s.columns[col][i]) < kExactTol * std::max(1.0, std::abs(s.columns[col][i])),
                 "invert round trip");
    }
    const SplitIndices split = chronological_split(n);
    // Exact rational floor; 0.7 * n in binary floating point can land just below an integer.
    c.expect(split.train.size() == n * 7 / 10, fmt::format("train split size for n={}", n));
    c.expect(split.validation.size() == n * 2 / 10, fmt::format("validation split size for n={}", n));
    c.expect(split.train.size() + split.validation.size() + split.test.size() == n, "split covers all");

    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal() * (rng.uniform() < 0.1 ? 25 : 1);
    const RawSeries raw = hourly_series(v);
    const ClipResult once = iqr_clip(raw, ranges[0]);
    const ClipResult twice = iqr_clip(once.series, ranges[0]);
    c.expect(once.series.columns[0] == twice.series.columns[0], "IQR clip idempotent");
    std::vector<double> fit(v.begin() + static_cast<std::ptrdiff_t>(ranges[0].begin),
                            v.begin() + static_cast<std::ptrdiff_t>(ranges[0].end));
    const double q1 = oracle::quantile(fit, 0.25), q3 = oracle::quantile(fit, 0.75);
    for (double x : once.series.columns[0])
      c.expect(x >= q1 - 1.5 * (q3 - q1) - 1e-12 && x <= q3 + 1.5 * (q3 - q1) + 1e-12, "IQR fences");

    const std::size_t k = 2 + rng.index(std::min<std::size_t>(n, 12) - 1);
    std::vector<int> hits(n, 0);
    for (const auto& f : kfold(n, k)) {
      for (std::size_t i : f.validation) ++hits[i];
      c.expect(f.train.size() + f.validation.size() == n, "fold sizes");
    }
    c.expect(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }), "k-fold partition");
  }
  const SplitIndices ten = chronological_split(10);
  c.expect(ten.train.size() == 7 && ten.validation.size() == 2 && ten.test.size() == 1, "n=10 -> 7/2/1");
  const SplitIndices hundred = chronological_split(100);
  c.expect(hundred.train.size() == 70 && hundred.validation.size() == 20 && hundred.test.size() == 10,
           "n=100 -> 70/20/10");
  return {c.ok, c.ok ? "z-score, round trip, split sizes, IQR fences and idempotence, k-fold partitions"
                     : c.reasons()};
}

// ---- 8 ----
Outcome determinism_and_persistence() {
  Checker c;
  const PreparedDataset d = synthetic_task(808, 400);
  const ModelConfig cfg = tiny_config();
  TrainConfig tc;
  tc.max_epochs = 3;
  tc.patience = 3;
  const FitResult a = fit(init_params(cfg), cfg, d.windows, d.split, tc);
  const FitResult b = fit(init_params(cfg), cfg, d.windows, d.split, tc);
  const std::string ca = checkpoint_to_string(a.params, cfg, d.norm);
  c.expect(ca == checkpoint_to_string(b.params, cfg, d.norm), "checkpoints differ");
  c.expect(to_json(a.report).dump() == to_json(b.report).dump(), "reports differ");

  const Checkpoint back = checkpoint_from_string(ca);
  const Tensor x = d.windows.gather_inputs(d.split.test);
  c.expect(predict(back.params, back.config, x) == predict(a.params, cfg, x), "reloaded predictions differ");

  TuneSettings s;
  s.space = SearchSpace({{"learning_rate", 1e-4, 1e-2, Scale::logarithmic}, {"dropout", 0.0, 0.6}});
  s.pso.n_particles = 3;
  s.pso.t_max = 2;
  s.budget_epochs = 1;
  s.base_model = tiny_config();
  const auto shared = std::make_shared<const PreparedDataset>(synthetic_task(809, 300));
  const DatasetSource source = [&](std::size_t) { return shared; };
  const std::string one = trace_csv(s.space, tune_hyperparameters(source, s).pso);
  s.threads = 4;
  const std::string four = trace_csv(s.space, tune_hyperparameters(source, s).pso);
  c.expect(one == four, "tuning trace depends on thread count");
  return {c.ok, c.ok ? "byte-identical checkpoint and report, bit-identical reload, trace equal for 1 and 4 threads"
                     : c.reasons()};
}

// ---- 9 ----
Outcome metric_sanity() {
  Checker c;
  Rng rng(909);
  double worst = 0.0;
  for (std::size_t trial = 0; trial < kMetricSets; ++trial) {
    const std::size_t n = 1 + rng.index(60);
    std::vector<double> y(n), p(n);
    const bool perfect = trial % 10 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.uniform(-1000, 1000);
      p[i] = perfect ? y[i] : rng.uniform(-1000, 1000);
    }
    if (n == 1) y.push_back(y[0] + 1.0), p.push_back(perfect ? y[1] : p[0]);
    const PredictionSet ps(y, p);
    const MetricsReport r = report(ps);
    c.expect(r.rmse >= r.mae, "rmse < mae");
    c.expect(r.smape >= 0.0 && r.smape <= 200.0, "smape out of range");
    c.expect((r.r2 == 1.0) == (y == p), "R2 == 1 iff perfect");
    const oracle::Metrics o = oracle::metrics(y, p);
    worst = std::max({worst, std::abs(r.rmse - o.rmse), std::abs(r.mae - o.mae), std::abs(r.smape - o.smape),
                      std::abs(r.r2 - o.r2)});
  }
  c.expect(worst < kOracleTol, fmt::format("oracle diff {:.3g}", worst));
  return {c.ok, c.ok ? fmt::format("{} sets, max oracle diff {:.2g}", kMetricSets, worst) : c.reasons()};
}

// ---- 10 ----
Outcome early_stopping_contract() {
  Checker c;
  Rng rng(1010);
  for (std::size_t patience = 1; patience <= 10; ++patience) {
    for (std::size_t first_best = 1; first_best <= 20; ++first_best) {
      // Improves by 0.01 per epoch until first_best, then never beats it by min_delta.
      std::vector<double> losses;
      for (std::size_t e = 1; e <= first_best; ++e) losses.push_back(1.0 - 0.01 * static_cast<double>(e));
      const double best = losses.back();
      for (std::size_t e = 0; e < patience + 5; ++e) losses.push_back(best + rng.uniform(0.0, 0.2));
      EarlyStopper s(patience, 1e-4);
      std::size_t stopped = 0;
      for (std::size_t e = 0; e < losses.size() && !stopped; ++e)
        if (s.observe(losses[e])) stopped = e + 1;
      c.expect(stopped == first_best + patience, fmt::format("p={} b={} stopped at {}", patience, first_best, stopped));
      c.expect(s.best_epoch() == first_best, "best epoch");
    }
  }
  const PreparedDataset d = synthetic_task(1011, 300);
  const ModelConfig cfg = tiny_config();
  TrainConfig tc;
  tc.max_epochs = 40;
  tc.patience = 3;
  tc.learning_rate = 5e-3;
  const FitResult r = fit(init_params(cfg), cfg, d.windows, d.split, tc);
  const double restored = validation_loss(r.params, cfg, d.windows, d.split.validation);
  c.expect(restored == r.report.best_val_loss, "restored weights do not reproduce the best validation loss");
  c.expect(r.report.stop_reason == StopReason::max_epochs
               ? r.report.epochs_run() == tc.max_epochs
               : r.report.epochs_run() == r.report.best_epoch + tc.patience,
           "stop epoch");
  return {c.ok, c.ok ? fmt::format("200 constructed traces; fit restored epoch {} of {} with identical loss",
                                   r.report.best_epoch, r.report.epochs_run())
                     : c.reasons()};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"gradient integrity", gradient_integrity},
      {"equation fidelity", equation_fidelity},
      {"PSO convergence", pso_convergence},
      {"forecast skill on synthetic data", forecast_skill},
      {"overfit capacity", overfit_capacity},
      {"tuner efficacy", tuner_efficacy},
      {"preprocessing exactness", preprocessing_exactness},
      {"determinism and persistence", determinism_and_persistence},
      {"metric sanity", metric_sanity},
      {"early stopping contract", early_stopping_contract},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
