#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gridcast/errors.hpp"
#include "gridcast/pso.hpp"
#include "oracles.hpp"

using namespace gridcast;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sphere(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double rastrigin(std::span<const double> x) {
  double s = 10.0 * static_cast<double>(x.size());
  for (double v : x) s += v * v - 10.0 * std::cos(2.0 * std::numbers::pi * v);
  return s;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SearchSpace box(std::size_t dims, double lo, double hi) {
  std::vector<SearchDim> d;
  for (std::size_t i = 0; i < dims; ++i) d.push_back({"x" + std::to_string(i), lo, hi});
  return SearchSpace(d);
}

}  // namespace

TEST_CASE("inertia schedule") {
  PsoConfig cfg;
  CHECK(inertia(0, cfg) == 0.9);
  CHECK(inertia(cfg.t_max, cfg) == 0.4);
  CHECK(std::abs(inertia(100, cfg) - 0.65) < 1e-15);
  CHECK_THROWS_AS(inertia(cfg.t_max + 1, cfg), ParameterError);
  // Affine: equal steps.
  const double step = inertia(1, cfg) - inertia(0, cfg);
  for (std::size_t t = 1; t <= cfg.t_max; ++t) CHECK(std::abs(inertia(t, cfg) - inertia(t - 1, cfg) - step) < 1e-14);
  cfg.t_max = 7;
  CHECK(inertia(7, cfg) == 0.4);
}

TEST_CASE("velocity update") {
  PsoConfig cfg;
  Particle p{{0.5}, {0.1}, {0.7}, 1.0};
  const std::vector<double> g{0.9}, r1{0.5}, r2{0.25};
  CHECK(update_velocity(p, g, 0.5, cfg, r1, r2)[0] == 0.2);
  cfg.v_max = 1.0;
  CHECK(std::abs(update_velocity(p, g, 0.5, cfg, r1, r2)[0] - 0.45) < 1e-15);

  PsoConfig pure = cfg;
  pure.c1 = pure.c2 = 0.0;
  pure.v_max = 0.2;
  Particle q{{0.3, 0.4}, {0.1, -0.5}, {0.9, 0.0}, 1.0};
  Rng rng(1);
  const auto v = update_velocity(q, std::vector<double>{0.0, 1.0}, 1.0, pure, rng);
  CHECK(v[0] == 0.1);
  CHECK(v[1] == -0.2);

  Particle still{{0.3}, {0.1}, {0.3}, 1.0};
  CHECK(std::abs(update_velocity(still, std::vector<double>{0.3}, 0.7, PsoConfig{}, rng)[0] - 0.07) < 1e-15);
}

TEST_CASE("position update and reflection") {
  Particle p{{0.9, 0.4, 0.05}, {0, 0, 0}, {0, 0, 0}, kInf};
  update_position(p, std::vector<double>{0.0, 0.0, 0.0});
  CHECK(p.x == std::vector<double>{0.9, 0.4, 0.05});
  update_position(p, std::vector<double>{0.2, 0.1, -0.15});
  CHECK(std::abs(p.x[0] - 0.9) < 1e-15);
  CHECK(p.v[0] == -0.2);
  CHECK(std::abs(p.x[1] - 0.5) < 1e-15);
  CHECK(p.v[1] == 0.1);
  CHECK(std::abs(p.x[2] - 0.1) < 1e-15);
  CHECK(p.v[2] == 0.15);
}

TEST_CASE("best updates use strict improvement") {
  Rng rng(2);
  PsoConfig cfg;
  cfg.n_particles = 3;
  SwarmState s = init_swarm(2, cfg, rng);
  const auto initial = s.particles;
  update_bests(s, std::vector<double>{3.0, 1.0, 2.0});
  CHECK(s.gbest_f == 1.0);
  CHECK(s.gbest_x == initial[1].x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(s.particles[i].pbest_x == initial[i].x);

  s.particles[0].x = {0.11, 0.22};
  s.particles[1].x = {0.33, 0.44};
  s.particles[2].x = {0.55, 0.66};
  update_bests(s, std::vector<double>{3.0, std::nan(""), 1.0});
  CHECK(s.particles[0].pbest_x == initial[0].x);  // tie keeps the old best
  CHECK(s.particles[1].pbest_f == 1.0);
  CHECK(s.particles[2].pbest_f == 1.0);
  CHECK(s.particles[2].pbest_x == std::vector<double>{0.55, 0.66});
  CHECK(s.gbest_x == initial[1].x);  // tie with gbest does not move it
  update_bests(s, std::vector<double>{0.5, kInf, kInf});
  CHECK(s.gbest_f == 0.5);
  CHECK(s.gbest_x == std::vector<double>{0.11, 0.22});
}

TEST_CASE("search space decoding") {
  const SearchSpace space({{"lr", 1e-4, 1e-2, Scale::logarithmic},
                           {"units", 16, 256, Scale::logarithmic, DimKind::integer},
                           {"window", 12, 96, Scale::linear, DimKind::integer},
                           {"dropout", 0.0, 0.6}});
  CHECK(std::abs(space.decode(0, 0.5) - 1e-3) < 1e-15);
  CHECK(space.decode(1, 0.5) == 64.0);
  CHECK(space.decode(2, 0.0) == 12.0);
  CHECK(space.decode(2, 1.0) == 96.0);
  CHECK(space.decode(3, 0.5) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(std::abs(space.decode(0, space.encode(0, 3e-3)) - 3e-3) < 1e-15);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> u{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    const auto x = space.decode(u);
    for (std::size_t d = 0; d < 4; ++d) {
      CHECK(x[d] >= space.dims()[d].lower);
      CHECK(x[d] <= space.dims()[d].upper);
    }
    CHECK(x[1] == std::round(x[1]));
    CHECK(x[2] == std::round(x[2]));
  }
  CHECK_THROWS_AS(SearchSpace({{"a", 1.0, 1.0}}), ConfigError);
  CHECK_THROWS_AS(SearchSpace({{"a", 0.0, 1.0, Scale::logarithmic}}), ConfigError);
}

TEST_CASE("optimizer edge cases") {
  PsoConfig cfg;
  cfg.n_particles = 4;
  cfg.t_max = 5;
  CHECK_THROWS_AS(optimize([](const Candidate&) { return 0.0; }, SearchSpace{}, cfg), ConfigError);

  const PsoResult r = optimize([](const Candidate&) { return 2.5; }, box(3, -1, 1), cfg);
  CHECK(r.best_fitness == 2.5);
  CHECK(r.gbest_trace.size() == 6);
  for (double g : r.gbest_trace) CHECK(g == 2.5);
  CHECK(r.evaluations.size() == 4 * 6);

  const PsoResult nan = optimize([](const Candidate&) { return std::nan(""); }, box(1, 0, 1), cfg);
  CHECK(nan.best_fitness == kInf);

  PsoConfig bad = cfg;
  bad.w_min = 1.0;
  CHECK_THROWS_AS(optimize([](const Candidate&) { return 0.0; }, box(1, 0, 1), bad), ConfigError);
}

TEST_CASE("swarm run matches the trace oracle") {
  PsoConfig cfg;
  cfg.n_particles = 5;
  cfg.t_max = 12;
  cfg.seed = 77;
  const SearchSpace space = box(3, 0.0, 1.0);
  auto f = [](std::span<const double> x) { return rastrigin(x) + 0.5 * x[0]; };

  oracle::Mat x0, v0;
  std::vector<oracle::Mat> r1(cfg.t_max), r2(cfg.t_max);
  std::vector<std::vector<std::vector<double>>> positions;
  PsoCallbacks cb;
  cb.on_iteration = [&](const SwarmState& s) {
    std::vector<std::vector<double>> xs;
    for (const auto& p : s.particles) xs.push_back(p.x);
    if (s.t == 0) {
      for (const auto& p : s.particles) v0.push_back(p.v);
      x0 = xs;
    }
    positions.push_back(xs);
  };
  cb.on_draws = [&](std::size_t it, const auto& a, const auto& b) {
    r1[it - 1] = a;
    r2[it - 1] = b;
  };
  const PsoResult r = optimize([&](const Candidate& c) { return f(c.position); }, space, cfg, cb);

  oracle::PsoSettings s{cfg.c1, cfg.c2, cfg.w_max, cfg.w_min, cfg.v_max, cfg.t_max};
  const oracle::PsoTrace trace = oracle::pso_trace(x0, v0, r1, r2, s, [&](const oracle::Vec& x) { return f(x); });
  REQUIRE(trace.gbest_f.size() == r.gbest_trace.size());
  for (std::size_t t = 0; t < trace.gbest_f.size(); ++t) {
    CHECK(trace.gbest_f[t] == r.gbest_trace[t]);
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t d = 0; d < 3; ++d) CHECK(trace.x[t][i][d] == positions[t][i][d]);
      CHECK(trace.fitness[t][i] == r.evaluations[t * 5 + i].fitness);
    }
  }
  CHECK(trace.gbest_x == r.best_unit);

  // gbest is the running minimum of every evaluated fitness.
  double running = kInf;
  for (const auto& e : r.evaluations) {
    running = std::min(running, e.fitness);
    if (e.particle == 4) CHECK(e.gbest_f == running);
  }
  for (std::size_t t = 1; t < r.gbest_trace.size(); ++t) CHECK(r.gbest_trace[t] <= r.gbest_trace[t - 1]);
}

TEST_CASE("personal bests never worsen") {
  PsoConfig cfg;
  cfg.n_particles = 6;
  cfg.t_max = 30;
  std::vector<double> prev(6, kInf);
  PsoCallbacks cb;
  cb.on_iteration = [&](const SwarmState& s) {
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(s.particles[i].pbest_f <= prev[i]);
      prev[i] = s.particles[i].pbest_f;
      for (double x : s.particles[i].x) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
      }
    }
  };
  optimize([](const Candidate& c) { return sphere(c.position); }, box(4, -5, 5), cfg, cb);
}

TEST_CASE("results do not depend on the thread count") {
  PsoConfig cfg;
  cfg.n_particles = 8;
  cfg.t_max = 10;
  auto obj = [](const Candidate& c) { return rastrigin(c.position); };
  const PsoResult a = optimize(obj, box(3, -5.12, 5.12), cfg, {}, 1);
  const PsoResult b = optimize(obj, box(3, -5.12, 5.12), cfg, {}, 4);
  CHECK(a.gbest_trace == b.gbest_trace);
  CHECK(a.best_position == b.best_position);
  REQUIRE(a.evaluations.size() == b.evaluations.size());
  for (std::size_t i = 0; i < a.evaluations.size(); ++i) CHECK(a.evaluations[i].fitness == b.evaluations[i].fitness);

  CHECK_THROWS_AS(optimize([](const Candidate& c) -> double {
                    if (c.particle == 3) throw std::runtime_error("boom");
                    return 0.0;
                  },
                           box(1, 0, 1), cfg, {}, 3),
                  std::runtime_error);
}

TEST_CASE("ballistic motion with reflection") {
  // Straight lines folded into [0,1]: the triangle wave of x0 + t v0.
  auto fold = [](double y) {
    double m = std::fmod(y, 2.0);
    if (m < 0) m += 2.0;
    return m <= 1.0 ? m : 2.0 - m;
  };
  PsoConfig cfg;
  cfg.c1 = cfg.c2 = 0.0;
  cfg.w_max = cfg.w_min = 1.0;
  cfg.v_max = kInf;
  Rng rng(5);
  for (double v0 : {0.13, -0.37, 0.9, 2.3}) {
    Particle p{{0.42}, {v0}, {0.42}, 0.0};
    for (int t = 1; t <= 50; ++t) {
      update_position(p, update_velocity(p, p.pbest_x, inertia(0, cfg), cfg, rng));
      CHECK(std::abs(p.x[0] - fold(0.42 + t * v0)) < 1e-9);
      CHECK(std::abs(p.v[0]) == doctest::Approx(std::abs(v0)));
    }
  }
}

TEST_CASE("convergence on sphere and Rastrigin") {
  std::vector<double> sph, ras;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    PsoConfig cfg;
    cfg.seed = seed;
    sph.push_back(optimize([](const Candidate& c) { return sphere(c.position); }, box(5, -5, 5), cfg).best_fitness);
    ras.push_back(
        optimize([](const Candidate& c) { return rastrigin(c.position); }, box(2, -5.12, 5.12), cfg).best_fitness);
  }
  MESSAGE("sphere median " << median(sph) << ", rastrigin median " << median(ras));
  CHECK(median(sph) < 1e-3);
  CHECK(median(ras) < 1.0);
}
