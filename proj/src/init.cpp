#include "gridcast/init.hpp"

#include <cmath>

namespace gridcast {

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = glorot_bound(fan_in, fan_out);
  Tensor w(Shape{fan_in, fan_out});
  for (double& v : w.data()) v = rng.uniform(-bound, bound);
  return w;
}

}  // namespace gridcast
