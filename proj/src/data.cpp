#include "gridcast/data.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gridcast/errors.hpp"

namespace gridcast {

std::size_t RawSeries::column_index(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("unknown column '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

// ---- timestamps ----

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

bool read_digits(std::string_view s, std::size_t pos, std::size_t count, int& out) {
  if (pos + count > s.size()) return false;
  out = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    out = out * 10 + (s[i] - '0');
  }
  return true;
}

unsigned days_in_month(int y, int m) {
  static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  return m == 2 && leap ? 29 : kDays[m - 1];
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace

std::optional<std::int64_t> parse_timestamp(std::string_view s) {
  s = trim(s);
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!read_digits(s, 0, 4, year) || s.size() < 10 || s[4] != '-' || !read_digits(s, 5, 2, month) || s[7] != '-' ||
      !read_digits(s, 8, 2, day)) {
    return std::nullopt;
  }
  if (month < 1 || month > 12 || day < 1 || static_cast<unsigned>(day) > days_in_month(year, month)) return std::nullopt;
  std::size_t pos = 10;
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
    if (!read_digits(s, pos + 1, 2, hour) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
        !read_digits(s, pos + 4, 2, minute)) {
      return std::nullopt;
    }
    pos += 6;
    if (pos < s.size() && s[pos] == ':') {
      if (!read_digits(s, pos + 1, 2, second)) return std::nullopt;
      pos += 3;
      if (pos < s.size() && s[pos] == '.') {
        ++pos;
        const std::size_t digits_start = pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        if (pos == digits_start) return std::nullopt;
      }
    }
    if (hour > 23 || minute > 59 || second > 60) return std::nullopt;
  }
  std::int64_t offset = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
      ++pos;
    } else if ((s[pos] == '+' || s[pos] == '-') && pos + 6 == s.size() && s[pos + 3] == ':') {
      int oh = 0, om = 0;
      if (!read_digits(s, pos + 1, 2, oh) || !read_digits(s, pos + 4, 2, om)) return std::nullopt;
      offset = (s[pos] == '+' ? 1 : -1) * (oh * 3600 + om * 60);
      pos = s.size();
    } else {
      return std::nullopt;
    }
  }
  const std::int64_t days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  return days * 86400 + hour * 3600 + minute * 60 + second - offset;
}

std::string format_timestamp(std::int64_t seconds) {
  std::int64_t days = seconds / 86400;
  std::int64_t rem = seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  std::int64_t y = 0;
  unsigned m = 0, d = 0;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lld", static_cast<long long>(y), m, d,
                static_cast<long long>(rem / 3600), static_cast<long long>(rem % 3600 / 60),
                static_cast<long long>(rem % 60));
  return buf;
}

// ---- CSV ----

RawSeries parse_csv(std::istream& in, const std::string& target, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source + ": missing header row", 0, 0);
  const auto header = split_fields(line);
  if (header.size() < 2) throw ParseError(source + ": header needs a timestamp column and at least one data column", 0, 0);

  RawSeries series;
  for (std::size_t c = 1; c < header.size(); ++c) series.names.emplace_back(header[c]);
  series.columns.resize(series.names.size());
  series.target = target.empty() ? series.names.front() : target;
  series.column_index(series.target);

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError(source + ": row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                           " fields, header has " + std::to_string(header.size()),
                       row, fields.size());
    }
    const auto ts = parse_timestamp(fields[0]);
    if (!ts) {
      throw ParseError(source + ": row " + std::to_string(row) + " column 1: unparseable timestamp '" +
                           std::string(fields[0]) + "'",
                       row, 0);
    }
    if (!series.timestamps.empty()) {
      if (*ts == series.timestamps.back()) {
        throw OrderError(source + ": row " + std::to_string(row) + ": duplicate timestamp '" + std::string(fields[0]) + "'",
                         row);
      }
      if (*ts < series.timestamps.back()) {
        throw OrderError(source + ": row " + std::to_string(row) + ": timestamp '" + std::string(fields[0]) +
                             "' is earlier than the previous row (timestamps must increase)",
                         row);
      }
    }
    series.timestamps.push_back(*ts);
    series.timestamp_text.emplace_back(fields[0]);
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const std::string_view f = fields[c];
      if (f.empty() || f == "NaN" || f == "nan" || f == "NAN") {
        series.columns[c - 1].push_back(kMissing);
        continue;
      }
      double v = 0.0;
      const char* begin = f.data();
      const char* end = f.data() + f.size();
      if (*begin == '+') ++begin;
      auto [ptr, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw ParseError(source + ": row " + std::to_string(row) + " column " + std::to_string(c + 1) + " ('" +
                             series.names[c - 1] + "'): unparseable number '" + std::string(f) + "'",
                         row, c);
      }
      series.columns[c - 1].push_back(v);
    }
  }
  return series;
}

RawSeries load_csv(const std::filesystem::path& path, const std::string& target) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open data file: " + path.string());
  return parse_csv(in, target, path.string());
}

// ---- missing values ----

CleanedSeries handle_missing(const RawSeries& series, const MissingPolicy& policy) {
  const std::size_t n = series.rows();
  if (n == 0) throw InsufficientDataError("series has no rows", 1);

  std::vector<double> fractions(series.columns.size());
  bool excess = false;
  for (std::size_t c = 0; c < series.columns.size(); ++c) {
    const auto missing = std::count_if(series.columns[c].begin(), series.columns[c].end(), is_missing);
    fractions[c] = static_cast<double>(missing) / static_cast<double>(n);
    excess = excess || fractions[c] > policy.max_fraction;
  }
  if (excess && !policy.allow_excess) {
    std::ostringstream msg;
    msg << "missing-value fraction exceeds " << policy.max_fraction << ":";
    for (std::size_t c = 0; c < fractions.size(); ++c) msg << ' ' << series.names[c] << '=' << fractions[c];
    throw MissingDataError(msg.str(), fractions);
  }

  auto row_complete = [&](std::size_t r) {
    return std::none_of(series.columns.begin(), series.columns.end(),
                        [r](const std::vector<double>& col) { return is_missing(col[r]); });
  };
  std::size_t first = 0;
  while (first < n && !row_complete(first)) ++first;
  std::size_t last = n;
  while (last > first && !row_complete(last - 1)) --last;
  if (first >= last) throw InsufficientDataError("no complete rows remain after dropping missing boundary rows", 1);

  CleanedSeries out;
  out.rows_dropped = n - (last - first);
  RawSeries& s = out.series;
  s.names = series.names;
  s.target = series.target;
  s.timestamps.assign(series.timestamps.begin() + first, series.timestamps.begin() + last);
  s.timestamp_text.assign(series.timestamp_text.begin() + first, series.timestamp_text.begin() + last);
  for (const auto& col : series.columns) {
    std::vector<double> values(col.begin() + first, col.begin() + last);
    std::size_t prev = 0;  // values[0] is observed
    for (std::size_t r = 1; r < values.size(); ++r) {
      if (is_missing(values[r])) continue;
      if (r - prev > 1) {
        const double a = values[prev], b = values[r];
        const double span = static_cast<double>(r - prev);
        for (std::size_t g = prev + 1; g < r; ++g) {
          values[g] = a + (b - a) * static_cast<double>(g - prev) / span;
          ++out.values_interpolated;
        }
      }
      prev = r;
    }
    s.columns.push_back(std::move(values));
  }
  return out;
}

// ---- outliers ----

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw InsufficientDataError("quantile of an empty sample", 1);
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ClipResult iqr_clip(const RawSeries& series, RowRange fit_rows, double k) {
  if (fit_rows.size() == 0 || fit_rows.end > series.rows()) {
    throw InsufficientDataError("IQR fit range is empty or out of bounds", 1);
  }
  if (!(k >= 0.0)) throw ParameterError("IQR multiplier must be non-negative");
  ClipResult out;
  out.series = series;
  out.clipped_per_column.assign(series.columns.size(), 0);
  for (std::size_t c = 0; c < series.columns.size(); ++c) {
    std::vector<double> fit;
    for (std::size_t r = fit_rows.begin; r < fit_rows.end; ++r) {
      if (!is_missing(series.columns[c][r])) fit.push_back(series.columns[c][r]);
    }
    if (fit.empty()) continue;
    const double q1 = quantile(fit, 0.25);
    const double q3 = quantile(fit, 0.75);
    const double iqr = q3 - q1;
    if (iqr == 0.0) {
      spdlog::warn("column '{}' has zero interquartile range; outlier clipping skipped", series.names[c]);
      continue;
    }
    const double lower = q1 - k * iqr;
    const double upper = q3 + k * iqr;
    for (double& v : out.series.columns[c]) {
      if (is_missing(v)) continue;
      if (v < lower || v > upper) {
        v = std::clamp(v, lower, upper);
        ++out.clipped_per_column[c];
      }
    }
    out.total_clipped += out.clipped_per_column[c];
  }
  return out;
}

// ---- normalization ----

NormalizationParams zscore_fit(const RawSeries& series, RowRange fit_rows) {
  if (fit_rows.size() == 0 || fit_rows.end > series.rows()) {
    throw InsufficientDataError("normalization fit range is empty or out of bounds", 1);
  }
  NormalizationParams p;
  p.names = series.names;
  p.target_index = series.target_index();
  for (std::size_t c = 0; c < series.columns.size(); ++c) {
    const auto& col = series.columns[c];
    const double n = static_cast<double>(fit_rows.size());
    double mu = 0.0;
    for (std::size_t r = fit_rows.begin; r < fit_rows.end; ++r) mu += col[r];
    mu /= n;
    double var = 0.0;
    for (std::size_t r = fit_rows.begin; r < fit_rows.end; ++r) var += (col[r] - mu) * (col[r] - mu);
    const double sd = std::sqrt(var / n);
    if (!(sd > 0.0) || !std::isfinite(sd)) {
      throw DataError("cannot normalize constant column '" + series.names[c] + "'");
    }
    p.mean.push_back(mu);
    p.std.push_back(sd);
  }
  return p;
}

RawSeries zscore_apply(const RawSeries& series, const NormalizationParams& params) {
  if (params.names != series.names) throw DataError("normalization columns do not match the series columns");
  RawSeries out = series;
  for (std::size_t c = 0; c < out.columns.size(); ++c) {
    for (double& v : out.columns[c]) v = (v - params.mean[c]) / params.std[c];
  }
  return out;
}

double zscore_invert(double value, const NormalizationParams& params, std::size_t column) {
  return value * params.std.at(column) + params.mean.at(column);
}

std::vector<double> zscore_invert(std::span<const double> values, const NormalizationParams& params,
                                  std::size_t column) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(zscore_invert(v, params, column));
  return out;
}

// ---- windows ----

Tensor WindowedDataset::gather_inputs(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw DimensionError("gather_inputs: empty index list");
  const std::size_t stride = window_len * features;
  Tensor out(Shape{indices.size(), window_len, features});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    std::copy_n(inputs.begin() + static_cast<std::ptrdiff_t>(indices[b] * stride), stride,
                out.data().begin() + static_cast<std::ptrdiff_t>(b * stride));
  }
  return out;
}

Tensor WindowedDataset::gather_targets(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw DimensionError("gather_targets: empty index list");
  Tensor out(Shape{indices.size(), horizon});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    std::copy_n(targets.begin() + static_cast<std::ptrdiff_t>(indices[b] * horizon), horizon,
                out.data().begin() + static_cast<std::ptrdiff_t>(b * horizon));
  }
  return out;
}

void WindowedDataset::append(const WindowedDataset& other) {
  if (size() == 0 && inputs.empty()) {
    window_len = other.window_len;
    horizon = other.horizon;
    features = other.features;
  } else if (other.window_len != window_len || other.horizon != horizon || other.features != features) {
    throw DimensionError("cannot append windows of a different geometry");
  }
  inputs.insert(inputs.end(), other.inputs.begin(), other.inputs.end());
  targets.insert(targets.end(), other.targets.begin(), other.targets.end());
  target_rows.insert(target_rows.end(), other.target_rows.begin(), other.target_rows.end());
  target_timestamps.insert(target_timestamps.end(), other.target_timestamps.begin(), other.target_timestamps.end());
}

WindowedDataset make_windows(const RawSeries& series, std::size_t window_len, std::size_t horizon, std::size_t stride,
                             std::optional<RowRange> rows) {
  if (window_len == 0 || horizon == 0 || stride == 0) {
    throw ParameterError("window length, horizon and stride must be positive");
  }
  const RowRange range = rows.value_or(RowRange{0, series.rows()});
  if (range.end > series.rows() || range.begin > range.end) throw ParameterError("window row range out of bounds");
  const std::size_t needed = window_len + horizon;
  if (range.size() < needed) {
    throw InsufficientDataError("need at least " + std::to_string(needed) + " rows for window " +
                                    std::to_string(window_len) + " + horizon " + std::to_string(horizon) + ", have " +
                                    std::to_string(range.size()),
                                needed);
  }
  const std::size_t features = series.columns.size();
  const std::size_t target = series.target_index();
  const std::size_t count = (range.size() - needed) / stride + 1;

  WindowedDataset out;
  out.window_len = window_len;
  out.horizon = horizon;
  out.features = features;
  out.inputs.reserve(count * window_len * features);
  out.targets.reserve(count * horizon);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t start = range.begin + i * stride;
    for (std::size_t r = start; r < start + window_len; ++r) {
      for (std::size_t c = 0; c < features; ++c) {
        const double v = series.columns[c][r];
        if (is_missing(v)) throw DataError("missing value at row " + std::to_string(r) + " while windowing");
        out.inputs.push_back(v);
      }
    }
    for (std::size_t r = start + window_len; r < start + needed; ++r) {
      const double v = series.columns[target][r];
      if (is_missing(v)) throw DataError("missing value at row " + std::to_string(r) + " while windowing");
      out.targets.push_back(v);
    }
    out.target_rows.push_back(start + window_len);
    out.target_timestamps.push_back(series.timestamp_text.empty() ? std::string() : series.timestamp_text[start + window_len]);
  }
  return out;
}

// ---- splitting ----

std::array<RowRange, 3> split_ranges(std::size_t n, const SplitFractions& f) {
  if (!(f.train > 0.0) || !(f.validation > 0.0) || !(f.test > 0.0) ||
      std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
    throw ParameterError("split fractions must be positive and sum to 1");
  }
  if (n < 3) throw InsufficientDataError("need at least 3 items to split, have " + std::to_string(n), 3);
  const auto n_train = static_cast<std::size_t>(std::floor(f.train * static_cast<double>(n) + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(f.validation * static_cast<double>(n) + 1e-9));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw InsufficientDataError("split of " + std::to_string(n) + " items leaves an empty part (" +
                                    std::to_string(n_train) + "/" + std::to_string(n_val) + "/" +
                                    std::to_string(n - std::min(n, n_train + n_val)) + ")",
                                3);
  }
  return {RowRange{0, n_train}, RowRange{n_train, n_train + n_val}, RowRange{n_train + n_val, n}};
}

SplitIndices chronological_split(std::size_t n, const SplitFractions& fractions) {
  const auto ranges = split_ranges(n, fractions);
  SplitIndices out;
  std::vector<std::size_t>* parts[3] = {&out.train, &out.validation, &out.test};
  for (std::size_t p = 0; p < 3; ++p) {
    for (std::size_t i = ranges[p].begin; i < ranges[p].end; ++i) parts[p]->push_back(i);
  }
  return out;
}

std::vector<Fold> kfold(std::size_t n, std::size_t k) {
  if (k < 2 || k > n) {
    throw ParameterError("K must satisfy 2 <= K <= n (K=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  }
  std::vector<Fold> folds;
  const std::size_t base = n / k, extra = n % k;
  std::size_t start = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t len = base + (j < extra ? 1 : 0);
    Fold fold;
    for (std::size_t i = 0; i < n; ++i) {
      (i >= start && i < start + len ? fold.validation : fold.train).push_back(i);
    }
    folds.push_back(std::move(fold));
    start += len;
  }
  return folds;
}

// ---- pipeline ----

PreparedDataset prepare_dataset(const RawSeries& raw, const PipelineConfig& config,
                                const NormalizationParams* fixed_norm) {
  PreparedDataset out;
  out.summary.rows_in = raw.rows();

  CleanedSeries cleaned = handle_missing(raw, config.missing);
  out.summary.rows_dropped = cleaned.rows_dropped;
  out.summary.values_interpolated = cleaned.values_interpolated;

  const auto ranges = split_ranges(cleaned.series.rows(), config.split);
  for (std::size_t p = 0; p < 3; ++p) out.summary.split_rows[p] = ranges[p].size();

  ClipResult clipped = iqr_clip(cleaned.series, ranges[0], config.iqr_k);
  out.summary.values_clipped = clipped.total_clipped;

  out.norm = fixed_norm ? *fixed_norm : zscore_fit(clipped.series, ranges[0]);
  const RawSeries normalized = zscore_apply(clipped.series, out.norm);

  std::vector<std::size_t>* parts[3] = {&out.split.train, &out.split.validation, &out.split.test};
  static constexpr const char* kNames[3] = {"training", "validation", "test"};
  for (std::size_t p = 0; p < 3; ++p) {
    WindowedDataset segment;
    try {
      segment = make_windows(normalized, config.window_len, config.horizon, config.stride, ranges[p]);
    } catch (const InsufficientDataError& e) {
      throw InsufficientDataError(std::string("the ") + kNames[p] + " split is too short: " + e.what(), e.required());
    }
    const std::size_t offset = out.windows.size();
    for (std::size_t i = 0; i < segment.size(); ++i) parts[p]->push_back(offset + i);
    out.windows.append(segment);
    out.summary.split_windows[p] = segment.size();
  }
  return out;
}

}  // namespace gridcast
