#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace mars {

/// Candidate (RESCALE steepness s, time step delta).
struct EvoParams {
  double steepness = 0;
  double delta = 0;

  friend bool operator==(const EvoParams&, const EvoParams&) = default;
};

struct EvoBounds {
  double lower = 0;
  double upper = 1;
};

struct EvoConfig {
  std::size_t population = 8;
  std::size_t generations = 50;
  EvoBounds steepness_bounds{0.5, 20.0};
  EvoBounds delta_bounds{0.01, 1.0};
  /// Mutation standard deviation as a fraction of each parameter's range.
  double mutation_fraction = 0.2;
  std::size_t elitism = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EvoGeneration {
  std::size_t generation = 0;  // 0 is the initial population
  double best_fitness = 0;
  double mean_fitness = 0;
  EvoParams best_params{};
};

struct EvoResult {
  EvoParams best_params{};
  double best_fitness = 0;
  std::vector<double> history;            // best fitness after each generation (incl. initial)
  std::vector<EvoGeneration> generations;
  std::size_t evaluations = 0;
  std::size_t discarded = 0;  // candidates with non-finite fitness
  std::vector<EvoParams> evaluated;  // every candidate handed to the objective, in order
};

/// Fitness to maximize. Called concurrently for the candidates of one generation.
using EvoObjective = std::function<double(const EvoParams&)>;

/// Seeded (mu + lambda) evolution strategy: the population is ranked, the best
/// `elitism` candidates survive unchanged, the rest of the next population are
/// Gaussian mutations (clipped to the box) of parents drawn from the better half.
/// Evaluations total population * (generations + 1).
EvoResult evolve(const EvoObjective& objective, const EvoConfig& config,
                 std::ostream* trace = nullptr);

/// Sanity objective -((s - 3)^2 + (delta - 0.1)^2), maximized at (3, 0.1).
double quadratic_test_objective(const EvoParams& p);

}  // namespace mars
