#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridcast/tensor.hpp"

namespace gridcast {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return v != v; }

// Multivariate series as read from CSV. columns[c][row]; kMissing marks a
// missing observation. Timestamps strictly increase.
struct RawSeries {
  std::vector<std::int64_t> timestamps;  // seconds since the Unix epoch
  std::vector<std::string> timestamp_text;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  std::string target;

  std::size_t rows() const { return timestamps.size(); }
  std::size_t column_index(const std::string& name) const;
  std::size_t target_index() const { return column_index(target); }
};

// Accepts YYYY-MM-DD with optional [T| ]HH:MM[:SS[.fff]] and optional Z or +-HH:MM.
std::optional<std::int64_t> parse_timestamp(std::string_view text);
std::string format_timestamp(std::int64_t seconds);

// First column is the timestamp, the rest numeric. Empty fields and NaN are
// missing. An empty target selects the first data column.
RawSeries load_csv(const std::filesystem::path& path, const std::string& target = "");
RawSeries parse_csv(std::istream& in, const std::string& target = "", const std::string& source = "<stream>");

struct MissingPolicy {
  double max_fraction = 0.03;
  bool allow_excess = false;
};

struct CleanedSeries {
  RawSeries series;
  std::size_t rows_dropped = 0;
  std::size_t values_interpolated = 0;
};

// Drops leading/trailing rows with any missing value and linearly interpolates
// interior gaps. Refuses with MissingDataError when a column's missing
// fraction exceeds policy.max_fraction unless allow_excess is set.
CleanedSeries handle_missing(const RawSeries& series, const MissingPolicy& policy = {});

struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(std::size_t row) const { return row >= begin && row < end; }
};

// Linear interpolation between order statistics (type 7).
double quantile(std::vector<double> values, double p);

struct ClipResult {
  RawSeries series;
  std::vector<std::size_t> clipped_per_column;
  std::size_t total_clipped = 0;
};

// Fences [Q1 - k IQR, Q3 + k IQR] fit on fit_rows, applied to every row.
// Columns with IQR == 0 are left untouched with a warning.
ClipResult iqr_clip(const RawSeries& series, RowRange fit_rows, double k = 1.5);

struct NormalizationParams {
  std::vector<std::string> names;
  std::vector<double> mean;
  std::vector<double> std;  // population standard deviation
  std::size_t target_index = 0;

  std::size_t columns() const { return names.size(); }
};

NormalizationParams zscore_fit(const RawSeries& series, RowRange fit_rows);
RawSeries zscore_apply(const RawSeries& series, const NormalizationParams& params);
std::vector<double> zscore_invert(std::span<const double> values, const NormalizationParams& params, std::size_t column);
double zscore_invert(double value, const NormalizationParams& params, std::size_t column);

// Supervised pairs. inputs holds N windows of [L x F], targets N rows of H.
struct WindowedDataset {
  std::size_t window_len = 0;
  std::size_t horizon = 0;
  std::size_t features = 0;
  std::vector<double> inputs;
  std::vector<double> targets;
  std::vector<std::size_t> target_rows;  // source row of each window's first target
  std::vector<std::string> target_timestamps;

  std::size_t size() const { return target_rows.size(); }
  Tensor gather_inputs(std::span<const std::size_t> indices) const;   // [B x L x F]
  Tensor gather_targets(std::span<const std::size_t> indices) const;  // [B x H]
  void append(const WindowedDataset& other);
};

// Window i covers rows [b + i*stride, b + i*stride + L) of the range and its
// target the next H rows of the target column.
WindowedDataset make_windows(const RawSeries& series, std::size_t window_len, std::size_t horizon,
                             std::size_t stride = 1, std::optional<RowRange> rows = std::nullopt);

struct SplitFractions {
  double train = 0.7;
  double validation = 0.2;
  double test = 0.1;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// train = floor(f_train n), validation = floor(f_val n), test = the rest.
std::array<RowRange, 3> split_ranges(std::size_t n, const SplitFractions& fractions = {});
SplitIndices chronological_split(std::size_t n, const SplitFractions& fractions = {});

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Contiguous blocked folds; the first n % k folds are one larger.
std::vector<Fold> kfold(std::size_t n, std::size_t k);

struct PipelineConfig {
  std::size_t window_len = 24;
  std::size_t horizon = 1;
  std::size_t stride = 1;
  SplitFractions split;
  MissingPolicy missing;
  double iqr_k = 1.5;
};

struct PreprocessSummary {
  std::size_t rows_in = 0;
  std::size_t rows_dropped = 0;
  std::size_t values_interpolated = 0;
  std::size_t values_clipped = 0;
  std::array<std::size_t, 3> split_rows{};
  std::array<std::size_t, 3> split_windows{};
};

struct PreparedDataset {
  WindowedDataset windows;
  SplitIndices split;
  NormalizationParams norm;
  PreprocessSummary summary;
};

// missing values -> chronological row split -> IQR clip (fit on train rows)
// -> z-score (fit on train rows) -> windows per split segment, so no window
// or target straddles a boundary. With fixed_norm the z-score fit is skipped.
PreparedDataset prepare_dataset(const RawSeries& raw, const PipelineConfig& config,
                                const NormalizationParams* fixed_norm = nullptr);

}  // namespace gridcast
