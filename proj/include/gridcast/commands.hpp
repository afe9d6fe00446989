#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridcast/checkpoint.hpp"
#include "gridcast/run_config.hpp"

namespace gridcast {

// Output file names under the output directory.
namespace artifacts {
inline constexpr const char* kDataset = "dataset.json";
inline constexpr const char* kPreprocessSummary = "preprocess_summary.json";
inline constexpr const char* kCheckpoint = "checkpoint.json";
inline constexpr const char* kTrainReport = "train_report.json";
inline constexpr const char* kTiming = "timing.json";
inline constexpr const char* kPredictions = "predictions.csv";
inline constexpr const char* kPlot = "predictions.svg";
inline constexpr const char* kBestConfig = "best_config.json";
inline constexpr const char* kTuneSummary = "tune_summary.json";
inline constexpr const char* kTuneTrace = "tune_trace.csv";
inline constexpr const char* kMetrics = "metrics.json";
inline constexpr const char* kForecast = "forecast.csv";
inline constexpr const char* kCrossval = "crossval_report.json";
}  // namespace artifacts

// Loads the cache when data.cache names an existing file, otherwise runs the
// pipeline on data.csv. With fixed_norm the stored statistics are reused.
PreparedDataset load_dataset(const RunConfig& cfg, const NormalizationParams* fixed_norm = nullptr);
PreparedDataset prepare_from_csv(const RunConfig& cfg, const NormalizationParams* fixed_norm = nullptr);

// Rolling forecast from the last window_len rows of `context` (normalized,
// [rows x features]). steps > horizon feeds predictions back as inputs,
// which needs a single input feature. Returns normalized predictions.
std::vector<double> rolling_forecast(const ModelParams& params, const ModelConfig& cfg,
                                     const std::vector<std::vector<double>>& context, std::size_t steps);

std::string predictions_csv(const std::vector<std::string>& timestamps, std::span<const double> actual,
                            std::span<const double> predicted, std::size_t horizon);
std::string line_chart_svg(std::span<const double> actual, std::span<const double> predicted);

struct TrainOptions {
  std::optional<std::filesystem::path> init_checkpoint;  // fine-tune from here
  bool plot = false;
};

void cmd_preprocess(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg, const TrainOptions& options = {});
void cmd_tune(const RunConfig& cfg, std::size_t threads);
// Evaluates on the test split; the data section supplies the CSV unless csv is set.
void cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                  const std::optional<std::filesystem::path>& csv, bool plot = false);
void cmd_predict(const std::filesystem::path& checkpoint, const std::filesystem::path& csv, std::size_t steps,
                 const std::filesystem::path& out_dir, const MissingPolicy& missing = {});
void cmd_crossval(const RunConfig& cfg, std::size_t k);

}  // namespace gridcast
