#include "gridcast/metrics.hpp"

#include <cmath>
#include <string>

#include "gridcast/errors.hpp"

namespace gridcast {

PredictionSet::PredictionSet(std::vector<double> actual, std::vector<double> predicted)
    : actual_(std::move(actual)), predicted_(std::move(predicted)) {
  if (actual_.size() != predicted_.size()) {
    throw DimensionError("prediction set: " + std::to_string(actual_.size()) + " actual vs " +
                         std::to_string(predicted_.size()) + " predicted values");
  }
  if (actual_.empty()) throw DataError("prediction set is empty");
  for (std::size_t i = 0; i < actual_.size(); ++i) {
    if (!std::isfinite(actual_[i]) || !std::isfinite(predicted_[i])) {
      throw DataError("prediction set has a non-finite value at index " + std::to_string(i));
    }
  }
}

double mae(const PredictionSet& ps) {
  const auto y = ps.actual();
  const auto p = ps.predicted();
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) total += std::abs(y[i] - p[i]);
  return total / static_cast<double>(y.size());
}

double rmse(const PredictionSet& ps) {
  const auto y = ps.actual();
  const auto p = ps.predicted();
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) total += (y[i] - p[i]) * (y[i] - p[i]);
  return std::sqrt(total / static_cast<double>(y.size()));
}

double smape(const PredictionSet& ps) {
  const auto y = ps.actual();
  const auto p = ps.predicted();
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double denom = std::abs(y[i]) + std::abs(p[i]);
    if (denom > 0.0) total += 2.0 * std::abs(y[i] - p[i]) / denom;
  }
  return 100.0 * total / static_cast<double>(y.size());
}

double r_squared(const PredictionSet& ps) {
  const auto y = ps.actual();
  const auto p = ps.predicted();
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sse += (y[i] - p[i]) * (y[i] - p[i]);
    sst += (y[i] - mean) * (y[i] - mean);
  }
  if (!(sst > 0.0)) throw UndefinedMetricError("R^2 is undefined for constant actual values");
  return 1.0 - sse / sst;
}

MetricsReport report(const PredictionSet& ps) {
  return MetricsReport{rmse(ps), mae(ps), smape(ps), r_squared(ps), ps.size()};
}

}  // namespace gridcast
