#pragma once

#include <cstddef>

#include "gridcast/random.hpp"
#include "gridcast/tensor.hpp"

namespace gridcast {

// Bound of the Glorot-uniform distribution: sqrt(6 / (fan_in + fan_out)).
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

// [fan_in x fan_out] matrix drawn uniformly from +-glorot_bound.
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace gridcast
