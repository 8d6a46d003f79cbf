#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "mars/evolve.hpp"

using namespace mars;

namespace {

EvoConfig quadratic_box(std::uint64_t seed) {
  EvoConfig c;
  c.steepness_bounds = {0, 10};
  c.delta_bounds = {0, 1};
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("quadratic objective") {
  CHECK(quadratic_test_objective({3, 0.1}) == 0.0);
  CHECK(quadratic_test_objective({4, 0.1}) == -1.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = evolve(quadratic_test_objective, quadratic_box(seed));
    CHECK(std::hypot(r.best_params.steepness - 3, r.best_params.delta - 0.1) < 0.1);
  }
}

TEST_CASE("evaluation budget and bounds") {
  auto c = quadratic_box(1);
  c.population = 6;
  c.generations = 7;
  const auto r = evolve(quadratic_test_objective, c);
  CHECK(r.evaluations == 6 * 8);
  CHECK(r.evaluated.size() == 6 * 8);
  CHECK(r.history.size() == 8);
  for (const auto& p : r.evaluated) {
    CHECK(p.steepness >= 0);
    CHECK(p.steepness <= 10);
    CHECK(p.delta >= 0);
    CHECK(p.delta <= 1);
  }
  for (std::size_t g = 1; g < r.history.size(); ++g) CHECK(r.history[g] >= r.history[g - 1]);
}

TEST_CASE("constant objective") {
  const auto r = evolve([](const EvoParams&) { return 0.42; }, quadratic_box(2));
  CHECK(r.best_fitness == 0.42);
  for (double h : r.history) CHECK(h == 0.42);
}

TEST_CASE("deterministic per seed") {
  const auto a = evolve(quadratic_test_objective, quadratic_box(3));
  const auto b = evolve(quadratic_test_objective, quadratic_box(3));
  CHECK(a.best_params == b.best_params);
  CHECK(a.history == b.history);
}

TEST_CASE("non-finite fitness is discarded") {
  const auto objective = [](const EvoParams& p) {
    return p.delta > 0.5 ? std::numeric_limits<double>::quiet_NaN() : quadratic_test_objective(p);
  };
  auto c = quadratic_box(4);
  c.generations = 10;
  const auto r = evolve(objective, c);
  CHECK(r.discarded > 0);
  CHECK(std::isfinite(r.best_fitness));
  CHECK(r.best_params.delta <= 0.5);
}

TEST_CASE("trace has one line per generation") {
  auto c = quadratic_box(5);
  c.generations = 4;
  std::ostringstream trace;
  evolve(quadratic_test_objective, c, &trace);
  std::istringstream in(trace.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 5);
}

TEST_CASE("config validation") {
  auto c = quadratic_box(0);
  c.population = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = quadratic_box(0);
  c.delta_bounds = {1, 0};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = quadratic_box(0);
  c.generations = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
