#include "gridcast/pso.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "gridcast/errors.hpp"

namespace gridcast {

SearchSpace::SearchSpace(std::vector<SearchDim> dims) : dims_(std::move(dims)) {
  for (const SearchDim& d : dims_) {
    if (!(d.lower < d.upper)) throw ConfigError("search dimension '" + d.name + "' needs lower < upper");
    if (d.scale == Scale::logarithmic && !(d.lower > 0.0)) {
      throw ConfigError("log-scale search dimension '" + d.name + "' needs positive bounds");
    }
  }
}

double SearchSpace::decode(std::size_t dim, double unit) const {
  const SearchDim& d = dims_.at(dim);
  const double u = std::clamp(unit, 0.0, 1.0);
  double value = d.scale == Scale::logarithmic
                     ? std::exp(std::log(d.lower) + u * (std::log(d.upper) - std::log(d.lower)))
                     : d.lower + u * (d.upper - d.lower);
  if (d.kind == DimKind::integer) {
    value = std::round(value);
    value = std::clamp(value, std::ceil(d.lower), std::floor(d.upper));
  } else {
    value = std::clamp(value, d.lower, d.upper);
  }
  return value;
}

std::vector<double> SearchSpace::decode(std::span<const double> unit) const {
  if (unit.size() != dims_.size()) throw DimensionError("position has wrong dimension for the search space");
  std::vector<double> out(unit.size());
  for (std::size_t i = 0; i < unit.size(); ++i) out[i] = decode(i, unit[i]);
  return out;
}

double SearchSpace::encode(std::size_t dim, double value) const {
  const SearchDim& d = dims_.at(dim);
  const double v = std::clamp(value, d.lower, d.upper);
  if (d.scale == Scale::logarithmic) return (std::log(v) - std::log(d.lower)) / (std::log(d.upper) - std::log(d.lower));
  return (v - d.lower) / (d.upper - d.lower);
}

void PsoConfig::validate() const {
  if (n_particles == 0) throw ConfigError("pso.n_particles must be >= 1");
  if (t_max == 0) throw ConfigError("pso.t_max must be >= 1");
  if (!(c1 >= 0.0) || !(c2 >= 0.0)) throw ConfigError("pso.c1 and pso.c2 must be non-negative");
  if (!(w_min <= w_max)) throw ConfigError("pso.w_min must not exceed pso.w_max");
  if (!(v_max > 0.0)) throw ConfigError("pso.v_max must be positive");
}

double inertia(std::size_t t, const PsoConfig& cfg) {
  if (t > cfg.t_max) {
    throw ParameterError("inertia: iteration " + std::to_string(t) + " outside [0, " + std::to_string(cfg.t_max) + "]");
  }
  if (t == cfg.t_max) return cfg.w_min;
  return cfg.w_max - ((cfg.w_max - cfg.w_min) / static_cast<double>(cfg.t_max)) * static_cast<double>(t);
}

std::vector<double> update_velocity(const Particle& p, std::span<const double> gbest_x, double w, const PsoConfig& cfg,
                                    std::span<const double> r1, std::span<const double> r2) {
  const std::size_t n = p.x.size();
  if (p.v.size() != n || p.pbest_x.size() != n || gbest_x.size() != n || r1.size() != n || r2.size() != n) {
    throw DimensionError("update_velocity: dimension mismatch");
  }
  std::vector<double> v(n);
  for (std::size_t d = 0; d < n; ++d) {
    const double raw = w * p.v[d] + cfg.c1 * r1[d] * (p.pbest_x[d] - p.x[d]) + cfg.c2 * r2[d] * (gbest_x[d] - p.x[d]);
    v[d] = std::clamp(raw, -cfg.v_max, cfg.v_max);
  }
  return v;
}

std::vector<double> update_velocity(const Particle& p, std::span<const double> gbest_x, double w, const PsoConfig& cfg,
                                    Rng& rng) {
  std::vector<double> r1(p.x.size()), r2(p.x.size());
  for (double& r : r1) r = rng.uniform();
  for (double& r : r2) r = rng.uniform();
  return update_velocity(p, gbest_x, w, cfg, r1, r2);
}

void update_position(Particle& p, std::span<const double> velocity) {
  if (velocity.size() != p.x.size()) throw DimensionError("update_position: dimension mismatch");
  p.v.assign(velocity.begin(), velocity.end());
  for (std::size_t d = 0; d < p.x.size(); ++d) {
    double x = p.x[d] + p.v[d];
    while (x < 0.0 || x > 1.0) {
      x = x > 1.0 ? 2.0 - x : -x;
      p.v[d] = -p.v[d];
    }
    p.x[d] = x;
  }
}

void update_bests(SwarmState& swarm, std::span<const double> fitness) {
  if (fitness.size() != swarm.particles.size()) throw DimensionError("update_bests: one fitness per particle required");
  for (std::size_t i = 0; i < fitness.size(); ++i) {
    double f = fitness[i];
    if (std::isnan(f)) {
      spdlog::warn("particle {} returned NaN fitness; treated as +inf", i);
      f = std::numeric_limits<double>::infinity();
    }
    Particle& p = swarm.particles[i];
    if (f < p.pbest_f) {
      p.pbest_f = f;
      p.pbest_x = p.x;
    }
    if (f < swarm.gbest_f) {
      swarm.gbest_f = f;
      swarm.gbest_x = p.x;
    }
  }
}

SwarmState init_swarm(std::size_t dims, const PsoConfig& cfg, Rng& rng) {
  const double v0 = std::min(cfg.v_max, 1.0);
  SwarmState swarm;
  for (std::size_t i = 0; i < cfg.n_particles; ++i) {
    Particle p;
    p.x.resize(dims);
    p.v.resize(dims);
    for (double& x : p.x) x = rng.uniform();
    for (double& v : p.v) v = rng.uniform(-v0, v0);
    p.pbest_x = p.x;
    swarm.particles.push_back(std::move(p));
  }
  swarm.gbest_x = swarm.particles.front().x;
  return swarm;
}

namespace {

std::vector<double> evaluate_all(const Objective& objective, const std::vector<std::vector<double>>& positions,
                                 std::size_t iteration, std::size_t threads) {
  const std::size_t n = positions.size();
  std::vector<double> fitness(n);
  auto run = [&](std::size_t i) { fitness[i] = objective(Candidate{positions[i], i, iteration}); };
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
    return fitness;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < std::min(threads, n); ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          run(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
  return fitness;
}

}  // namespace

PsoResult optimize(const Objective& objective, const SearchSpace& space, const PsoConfig& cfg,
                   const PsoCallbacks& callbacks, std::size_t threads) {
  if (space.empty()) throw ConfigError("PSO search space is empty");
  cfg.validate();
  Rng rng(cfg.seed);
  SwarmState swarm = init_swarm(space.size(), cfg, rng);
  PsoResult result;

  auto evaluate_and_update = [&](std::size_t iteration) {
    std::vector<std::vector<double>> positions;
    for (const Particle& p : swarm.particles) positions.push_back(space.decode(p.x));
    const std::vector<double> fitness = evaluate_all(objective, positions, iteration, threads);
    update_bests(swarm, fitness);
    for (std::size_t i = 0; i < fitness.size(); ++i) {
      result.evaluations.push_back(Evaluation{iteration, i, fitness[i], positions[i], swarm.gbest_f});
    }
    result.gbest_trace.push_back(swarm.gbest_f);
    if (callbacks.on_iteration) callbacks.on_iteration(swarm);
  };

  evaluate_and_update(0);
  const std::size_t dims = space.size();
  for (std::size_t t = 0; t < cfg.t_max; ++t) {
    const double w = inertia(t, cfg);
    std::vector<std::vector<double>> r1(swarm.particles.size(), std::vector<double>(dims));
    std::vector<std::vector<double>> r2 = r1;
    for (std::size_t i = 0; i < swarm.particles.size(); ++i) {
      for (double& r : r1[i]) r = rng.uniform();
      for (double& r : r2[i]) r = rng.uniform();
    }
    if (callbacks.on_draws) callbacks.on_draws(t + 1, r1, r2);
    // Every particle moves toward the same gbest from the previous round.
    const std::vector<double> gbest = swarm.gbest_x;
    for (std::size_t i = 0; i < swarm.particles.size(); ++i) {
      Particle& p = swarm.particles[i];
      update_position(p, update_velocity(p, gbest, w, cfg, r1[i], r2[i]));
    }
    swarm.t = t + 1;
    evaluate_and_update(t + 1);
  }

  result.best_unit = swarm.gbest_x;
  result.best_position = space.decode(swarm.gbest_x);
  result.best_fitness = swarm.gbest_f;
  return result;
}

}  // namespace gridcast
