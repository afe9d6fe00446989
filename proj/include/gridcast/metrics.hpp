#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gridcast {

// Paired actual/predicted values, equal length n >= 1, all finite.
class PredictionSet {
 public:
  PredictionSet(std::vector<double> actual, std::vector<double> predicted);

  std::span<const double> actual() const { return actual_; }
  std::span<const double> predicted() const { return predicted_; }
  std::size_t size() const { return actual_.size(); }

 private:
  std::vector<double> actual_;
  std::vector<double> predicted_;
};

struct MetricsReport {
  double rmse = 0.0;
  double mae = 0.0;
  double smape = 0.0;  // percent, in [0, 200]
  double r2 = 0.0;
  std::size_t n = 0;
};

double mae(const PredictionSet& ps);
double rmse(const PredictionSet& ps);
// 100/n * sum 2|y - yhat| / (|y| + |yhat|); a term with zero denominator is 0.
double smape(const PredictionSet& ps);
// 1 - SSE/SST. Throws UndefinedMetricError for constant actuals.
double r_squared(const PredictionSet& ps);

MetricsReport report(const PredictionSet& ps);

}  // namespace gridcast
