#include "gridcast/train.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "gridcast/checkpoint.hpp"
#include "gridcast/errors.hpp"

namespace gridcast {

namespace {

constexpr std::size_t kInferenceBatch = 256;

std::string describe_epoch(std::size_t epoch, std::size_t batch) {
  return "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train.learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (max_epochs == 0) throw ConfigError("train.max_epochs must be >= 1");
  if (patience == 0) throw ConfigError("train.patience must be >= 1");
  if (patience > max_epochs) throw ConfigError("train.patience must not exceed train.max_epochs");
  if (!(min_delta >= 0.0)) throw ConfigError("train.min_delta must be non-negative");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) throw ConfigError("train.adam_beta1 must be in (0, 1)");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) throw ConfigError("train.adam_beta2 must be in (0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be positive");
}

AdamState make_adam_state(const NamedParams& params) {
  AdamState state;
  for (const auto& [name, tensor] : params) {
    state.m.push_back(Tensor::zeros(tensor->shape()));
    state.v.push_back(Tensor::zeros(tensor->shape()));
  }
  return state;
}

void adam_step(const NamedParams& params, const Gradients& grads, AdamState& state, const TrainConfig& tc) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam state does not match the parameter list");
  }
  for (const auto& [name, tensor] : params) {
    if (grads.contains(*tensor) && !grads.of(*tensor).all_finite()) {
      throw NumericalError("non-finite gradient for parameter '" + name + "'; step aborted");
    }
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(tc.adam_beta1, t);
  const double correction2 = 1.0 - std::pow(tc.adam_beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i].second;
    if (!grads.contains(p)) continue;
    const Tensor& g = grads.of(p);
    if (g.shape() != p.shape() || state.m[i].shape() != p.shape()) {
      throw DimensionError("adam: shape mismatch for parameter '" + params[i].first + "'");
    }
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    auto w = p.data();
    auto gd = g.data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = tc.adam_beta1 * m[j] + (1.0 - tc.adam_beta1) * gd[j];
      v[j] = tc.adam_beta2 * v[j] + (1.0 - tc.adam_beta2) * gd[j] * gd[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      w[j] -= tc.learning_rate * m_hat / (std::sqrt(v_hat) + tc.adam_eps);
    }
  }
}

Var mse_loss(Var prediction, Var target) {
  if (prediction.shape() != target.shape()) {
    throw DimensionError("mse_loss: prediction " + shape_string(prediction.shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  return mse(prediction, target);
}

double mse_loss(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) {
    throw DimensionError("mse_loss: prediction " + shape_string(prediction.shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double d = prediction[i] - target[i];
    total += d * d;
  }
  return total / static_cast<double>(prediction.size());
}

bool EarlyStopper::observe(double loss) {
  ++epoch_;
  last_was_best_ = false;
  const bool finite = std::isfinite(loss);
  if (finite && best_ - loss >= min_delta_) {
    wait_ = 0;
  } else {
    ++wait_;
  }
  if (finite && loss < best_) {
    best_ = loss;
    best_epoch_ = epoch_;
    last_was_best_ = true;
  }
  return wait_ >= patience_;
}

Tensor predict_windows(const ModelParams& params, const ModelConfig& cfg, const WindowedDataset& data,
                       std::span<const std::size_t> indices) {
  const std::size_t h = cfg.horizon;
  if (indices.empty()) throw DataError("no windows to predict");
  Tensor out(Shape{indices.size(), h});
  for (std::size_t start = 0; start < indices.size(); start += kInferenceBatch) {
    const std::size_t count = std::min(kInferenceBatch, indices.size() - start);
    const Tensor pred = predict(params, cfg, data.gather_inputs(indices.subspan(start, count)));
    std::copy(pred.data().begin(), pred.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(start * h));
  }
  return out;
}

double validation_loss(const ModelParams& params, const ModelConfig& cfg, const WindowedDataset& data,
                       std::span<const std::size_t> indices) {
  const Tensor pred = predict_windows(params, cfg, data, indices);
  return mse_loss(pred, data.gather_targets(indices));
}

void check_compatible(const ModelConfig& cfg, const WindowedDataset& data) {
  if (cfg.input_features != data.features || cfg.window_len != data.window_len || cfg.horizon != data.horizon) {
    throw IncompatibleCheckpointError(
        "model expects input_features=" + std::to_string(cfg.input_features) +
        ", window_len=" + std::to_string(cfg.window_len) + ", horizon=" + std::to_string(cfg.horizon) +
        "; data has input_features=" + std::to_string(data.features) + ", window_len=" +
        std::to_string(data.window_len) + ", horizon=" + std::to_string(data.horizon));
  }
}

FitResult fit(ModelParams initial, const ModelConfig& cfg, const WindowedDataset& data, const SplitIndices& split,
              const TrainConfig& tc) {
  cfg.validate();
  tc.validate();
  check_compatible(cfg, data);
  if (split.train.empty()) throw DataError("training split is empty");
  if (split.validation.empty()) throw DataError("validation split is empty");

  const auto started = std::chrono::steady_clock::now();
  ModelParams params = std::move(initial);
  const NamedParams named = named_tensors(params);
  AdamState adam = make_adam_state(named);
  Rng shuffle_rng(derive_seed(tc.seed, {1}));
  Rng dropout_rng(derive_seed(tc.seed, {2}));
  EarlyStopper stopper(tc.patience, tc.min_delta);

  FitResult result;
  result.params = params;
  TrainReport& report = result.report;
  std::vector<std::size_t> order = split.train;

  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double weighted_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size, ++batch_index) {
      const std::size_t count = std::min(tc.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, count);
      Tape tape;
      Var pred = forward(tape, data.gather_inputs(batch), params, cfg, dropout_rng, true);
      Var loss = mse_loss(pred, tape.constant(data.gather_targets(batch)));
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite training loss at " + describe_epoch(epoch, batch_index + 1));
      }
      const Gradients grads = tape.backward(loss);
      try {
        adam_step(named, grads, adam, tc);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at " + describe_epoch(epoch, batch_index + 1));
      }
      ++report.optimizer_steps;
      weighted_loss += value * static_cast<double>(count);
    }
    const double train_loss = weighted_loss / static_cast<double>(order.size());
    const double val_loss = validation_loss(params, cfg, data, split.validation);
    report.train_loss.push_back(train_loss);
    report.val_loss.push_back(val_loss);
    const bool stop = stopper.observe(val_loss);
    if (stopper.last_was_best()) result.params = params;
    spdlog::debug("epoch {}: train {:.6g} val {:.6g}", epoch, train_loss, val_loss);
    if (stop) {
      report.stop_reason = StopReason::early_stop;
      break;
    }
  }
  if (stopper.best_epoch() == 0) throw NumericalError("validation loss was never finite");
  report.best_epoch = stopper.best_epoch();
  report.best_val_loss = stopper.best_loss();
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

EvaluationResult evaluate(const ModelParams& params, const ModelConfig& cfg, const WindowedDataset& data,
                          std::span<const std::size_t> indices, const NormalizationParams& norm) {
  check_compatible(cfg, data);
  const Tensor pred = predict_windows(params, cfg, data, indices);
  const Tensor target = data.gather_targets(indices);
  EvaluationResult out;
  out.actual = zscore_invert(target.data(), norm, norm.target_index);
  out.predicted = zscore_invert(pred.data(), norm, norm.target_index);
  for (std::size_t i : indices) out.timestamps.push_back(data.target_timestamps.at(i));
  out.metrics = report(PredictionSet(out.actual, out.predicted));
  return out;
}

FitResult fine_tune(const Checkpoint& checkpoint, const WindowedDataset& data, const SplitIndices& split,
                    const TrainConfig& tc) {
  check_compatible(checkpoint.config, data);
  return fit(checkpoint.params, checkpoint.config, data, split, tc);
}

CrossValidationReport cross_validate(const WindowedDataset& data, std::size_t k, const ModelConfig& cfg,
                                     const TrainConfig& tc, const NormalizationParams& norm) {
  const std::vector<Fold> folds = kfold(data.size(), k);
  CrossValidationReport out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const Fold& fold = folds[f];
    const std::size_t held = std::max<std::size_t>(1, fold.train.size() / 10);
    if (fold.train.size() <= held) throw InsufficientDataError("fold " + std::to_string(f) + " is too small", 2 * k);
    SplitIndices split;
    split.train.assign(fold.train.begin(), fold.train.end() - static_cast<std::ptrdiff_t>(held));
    split.validation.assign(fold.train.end() - static_cast<std::ptrdiff_t>(held), fold.train.end());

    ModelConfig fold_cfg = cfg;
    fold_cfg.seed = derive_seed(cfg.seed, {f});
    TrainConfig fold_tc = tc;
    fold_tc.seed = derive_seed(tc.seed, {f});
    FitResult fitted = fit(init_params(fold_cfg), fold_cfg, data, split, fold_tc);
    out.folds.push_back(evaluate(fitted.params, fold_cfg, data, fold.validation, norm).metrics);
    spdlog::info("fold {}/{}: rmse {:.6g}", f + 1, folds.size(), out.folds.back().rmse);
  }

  const double n = static_cast<double>(out.folds.size());
  auto aggregate = [&](auto member) {
    double mean = 0.0;
    for (const MetricsReport& r : out.folds) mean += r.*member;
    mean /= n;
    double var = 0.0;
    for (const MetricsReport& r : out.folds) var += (r.*member - mean) * (r.*member - mean);
    out.mean.*member = mean;
    out.stddev.*member = std::sqrt(var / n);
  };
  aggregate(&MetricsReport::rmse);
  aggregate(&MetricsReport::mae);
  aggregate(&MetricsReport::smape);
  aggregate(&MetricsReport::r2);
  out.mean.n = out.folds.size();
  out.stddev.n = out.folds.size();
  return out;
}

}  // namespace gridcast
