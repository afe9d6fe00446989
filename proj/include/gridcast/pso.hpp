#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gridcast/random.hpp"

namespace gridcast {

enum class Scale { linear, logarithmic };
enum class DimKind { continuous, integer };

struct SearchDim {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  Scale scale = Scale::linear;
  DimKind kind = DimKind::continuous;
};

// Box of named dimensions. The swarm moves in [0,1]^D; decode maps a unit
// coordinate to user units by linear or log interpolation, rounding integer
// dimensions to the nearest value inside the bounds.
class SearchSpace {
 public:
  SearchSpace() = default;
  // Throws ConfigError if lower >= upper or a log dimension is not positive.
  explicit SearchSpace(std::vector<SearchDim> dims);

  const std::vector<SearchDim>& dims() const { return dims_; }
  std::size_t size() const { return dims_.size(); }
  bool empty() const { return dims_.empty(); }

  double decode(std::size_t dim, double unit) const;
  std::vector<double> decode(std::span<const double> unit) const;
  // Inverse of decode for continuous dimensions; used to seed known points.
  double encode(std::size_t dim, double value) const;

 private:
  std::vector<SearchDim> dims_;
};

struct PsoConfig {
  std::size_t n_particles = 30;
  std::size_t t_max = 200;
  double c1 = 2.0;
  double c2 = 2.0;
  double w_max = 0.9;
  double w_min = 0.4;
  double v_max = 0.2;  // per-dimension clamp in unit coordinates
  std::uint64_t seed = 42;

  void validate() const;
};

// Position, velocity and personal best, all in unit coordinates.
struct Particle {
  std::vector<double> x;
  std::vector<double> v;
  std::vector<double> pbest_x;
  double pbest_f = std::numeric_limits<double>::infinity();
};

struct SwarmState {
  std::vector<Particle> particles;
  std::vector<double> gbest_x;
  double gbest_f = std::numeric_limits<double>::infinity();
  std::size_t t = 0;  // completed update rounds
};

// w = w_max - (w_max - w_min) / t_max * t, for 0 <= t <= t_max.
double inertia(std::size_t t, const PsoConfig& cfg);

// v' = w v + c1 r1 (pbest - x) + c2 r2 (gbest - x), component-wise, clamped to +-v_max.
std::vector<double> update_velocity(const Particle& p, std::span<const double> gbest_x, double w, const PsoConfig& cfg,
                                    std::span<const double> r1, std::span<const double> r2);
// Draws r1 then r2 as fresh uniform vectors.
std::vector<double> update_velocity(const Particle& p, std::span<const double> gbest_x, double w, const PsoConfig& cfg,
                                    Rng& rng);

// x' = x + v'. Components leaving [0,1] are reflected back inside and the
// matching velocity component is negated.
void update_position(Particle& p, std::span<const double> velocity);

// Applies the strict-improvement rules to every particle given the fitness
// of its current position, then to the global best. NaN counts as +inf.
void update_bests(SwarmState& swarm, std::span<const double> fitness);

// Uniform positions in [0,1]^D, velocities uniform in +-min(v_max, 1).
SwarmState init_swarm(std::size_t dims, const PsoConfig& cfg, Rng& rng);

struct Candidate {
  std::span<const double> position;  // user units
  std::size_t particle = 0;
  std::size_t iteration = 0;  // 0 is the initial population
};

using Objective = std::function<double(const Candidate&)>;

struct Evaluation {
  std::size_t iteration = 0;
  std::size_t particle = 0;
  double fitness = 0.0;
  std::vector<double> position;  // user units
  double gbest_f = 0.0;          // global best after this iteration's update
};

struct PsoCallbacks {
  // After the best-update of every iteration, including the initial one.
  std::function<void(const SwarmState&)> on_iteration;
  // Random factors drawn for update round `iteration` (1-based), per particle.
  std::function<void(std::size_t iteration, const std::vector<std::vector<double>>& r1,
                     const std::vector<std::vector<double>>& r2)>
      on_draws;
};

struct PsoResult {
  std::vector<double> best_position;  // user units
  std::vector<double> best_unit;
  double best_fitness = std::numeric_limits<double>::infinity();
  std::vector<double> gbest_trace;  // t_max + 1 entries
  std::vector<Evaluation> evaluations;
};

// Synchronous swarm: all fitnesses of an iteration are evaluated (optionally
// on `threads` workers) before any best is updated, so results do not depend
// on the thread count. Total evaluations: n_particles * (t_max + 1).
PsoResult optimize(const Objective& objective, const SearchSpace& space, const PsoConfig& cfg,
                   const PsoCallbacks& callbacks = {}, std::size_t threads = 1);

}  // namespace gridcast
