#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gridcast/autodiff.hpp"
#include "gridcast/data.hpp"
#include "gridcast/metrics.hpp"
#include "gridcast/model.hpp"

namespace gridcast {

struct Checkpoint;

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 500;
  std::size_t patience = 10;
  double min_delta = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 42;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

using NamedParams = std::vector<std::pair<std::string, Tensor*>>;

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t t = 0;
};

AdamState make_adam_state(const NamedParams& params);

// Bias-corrected Adam. Every gradient is checked before any parameter moves;
// a non-finite one raises NumericalError naming the parameter. Parameters
// without a gradient are treated as having a zero gradient.
void adam_step(const NamedParams& params, const Gradients& grads, AdamState& state, const TrainConfig& tc);

// Mean squared error over all B*H elements. Shapes must match exactly.
Var mse_loss(Var prediction, Var target);
double mse_loss(const Tensor& prediction, const Tensor& target);

// Patience counter. The counter resets only on an epoch that beats the best
// loss so far by at least min_delta; the best epoch itself tracks the plain
// minimum. A non-finite loss never improves.
class EarlyStopper {
 public:
  EarlyStopper(std::size_t patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}

  // Records the next epoch's validation loss; true means stop now.
  bool observe(double loss);
  // True when the last observed loss is the new minimum.
  bool last_was_best() const { return last_was_best_; }
  std::size_t epoch() const { return epoch_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_; }
  std::size_t wait() const { return wait_; }

 private:
  std::size_t patience_;
  double min_delta_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t wait_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
  bool last_was_best_ = false;
};

enum class StopReason { max_epochs, early_stop };

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;  // 1-based
  double best_val_loss = std::numeric_limits<double>::infinity();
  StopReason stop_reason = StopReason::max_epochs;
  std::size_t optimizer_steps = 0;
  double wall_seconds = 0.0;
  std::optional<MetricsReport> test_metrics;

  std::size_t epochs_run() const { return val_loss.size(); }
};

struct FitResult {
  ModelParams params;  // from the best validation epoch
  TrainReport report;
};

// Shuffled mini-batch Adam on normalized targets with early stopping on the
// validation windows. Shuffle order and dropout masks come from tc.seed.
FitResult fit(ModelParams initial, const ModelConfig& cfg, const WindowedDataset& data, const SplitIndices& split,
              const TrainConfig& tc);

// Inference-mode predictions for the given windows, normalized, [N x H].
Tensor predict_windows(const ModelParams& params, const ModelConfig& cfg, const WindowedDataset& data,
                       std::span<const std::size_t> indices);

// Normalized-scale MSE of inference-mode predictions; what fit reports.
double validation_loss(const ModelParams& params, const ModelConfig& cfg, const WindowedDataset& data,
                       std::span<const std::size_t> indices);

struct EvaluationResult {
  MetricsReport metrics;
  // Denormalized, window-major: window w, step h at w * H + h.
  std::vector<double> actual;
  std::vector<double> predicted;
  std::vector<std::string> timestamps;  // first target timestamp per window
};

EvaluationResult evaluate(const ModelParams& params, const ModelConfig& cfg, const WindowedDataset& data,
                          std::span<const std::size_t> indices, const NormalizationParams& norm);

// Throws IncompatibleCheckpointError unless the checkpoint's feature count,
// window length and horizon match the data.
void check_compatible(const ModelConfig& cfg, const WindowedDataset& data);

// Continues training from the checkpoint's weights with a fresh optimizer.
FitResult fine_tune(const Checkpoint& checkpoint, const WindowedDataset& data, const SplitIndices& split,
                    const TrainConfig& tc);

struct CrossValidationReport {
  std::vector<MetricsReport> folds;
  MetricsReport mean;    // n = number of folds
  MetricsReport stddev;  // population standard deviation, n = number of folds
};

// Blocked K-fold over the windows. Each fold trains a freshly seeded model;
// the last tenth (at least one window) of the fold's training part is held
// out for early stopping.
CrossValidationReport cross_validate(const WindowedDataset& data, std::size_t k, const ModelConfig& cfg,
                                     const TrainConfig& tc, const NormalizationParams& norm);

}  // namespace gridcast
