#include "mars/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "mars/errors.hpp"
#include "mars/rng.hpp"

namespace mars {
namespace {

struct Scored {
  EvoParams params;
  double fitness;
};

double clip(double v, const EvoBounds& b) { return std::clamp(v, b.lower, b.upper); }

void rank(std::vector<Scored>& pop) {
  std::stable_sort(pop.begin(), pop.end(),
                   [](const Scored& x, const Scored& y) { return x.fitness > y.fitness; });
}

}  // namespace

void EvoConfig::validate() const {
  if (population < 2) throw ConfigError("evolve: population must be >= 2");
  if (generations < 1) throw ConfigError("evolve: generations must be >= 1");
  if (elitism >= population) throw ConfigError("evolve: elitism must be below the population size");
  for (const auto& b : {steepness_bounds, delta_bounds}) {
    if (!std::isfinite(b.lower) || !std::isfinite(b.upper) || !(b.lower < b.upper)) {
      throw ConfigError("evolve: bounds must be finite with lower < upper");
    }
  }
  if (!(mutation_fraction > 0)) throw ConfigError("evolve: mutation fraction must be positive");
}

EvoResult evolve(const EvoObjective& objective, const EvoConfig& config, std::ostream* trace) {
  config.validate();
  auto rng = CounterRng::substream(config.seed, CounterRng::kEvolution);
  EvoResult result;

  const auto evaluate = [&](std::vector<EvoParams> candidates) {
    std::vector<double> fitness(candidates.size());
    const auto n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) fitness[i] = objective(candidates[i]);
    std::vector<Scored> scored;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      result.evaluated.push_back(candidates[i]);
      ++result.evaluations;
      double f = fitness[i];
      if (!std::isfinite(f)) {
        std::cerr << "warning: evolve discarded candidate (s=" << candidates[i].steepness
                  << ", delta=" << candidates[i].delta << ") with non-finite fitness\n";
        ++result.discarded;
        f = -std::numeric_limits<double>::infinity();
      }
      scored.push_back({candidates[i], f});
    }
    return scored;
  };

  const auto record = [&](std::size_t generation, const std::vector<Scored>& pop) {
    double sum = 0;
    std::size_t finite = 0;
    for (const auto& s : pop) {
      if (std::isfinite(s.fitness)) {
        sum += s.fitness;
        ++finite;
      }
    }
    EvoGeneration g;
    g.generation = generation;
    g.best_fitness = pop.front().fitness;
    g.mean_fitness = finite ? sum / static_cast<double>(finite) : std::nan("");
    g.best_params = pop.front().params;
    result.generations.push_back(g);
    result.history.push_back(g.best_fitness);
    if (trace) {
      *trace << g.generation << ' ' << g.best_fitness << ' ' << g.mean_fitness << ' '
             << g.best_params.steepness << ' ' << g.best_params.delta << '\n';
    }
  };

  std::vector<EvoParams> initial(config.population);
  for (auto& p : initial) {
    p.steepness = rng.uniform(config.steepness_bounds.lower, config.steepness_bounds.upper);
    p.delta = rng.uniform(config.delta_bounds.lower, config.delta_bounds.upper);
  }
  std::vector<Scored> population = evaluate(initial);
  rank(population);
  record(0, population);

  const double s_range = config.steepness_bounds.upper - config.steepness_bounds.lower;
  const double d_range = config.delta_bounds.upper - config.delta_bounds.lower;
  // Step multiplier adapted with the 1/5 success rule.
  double step = 1.0;
  const std::size_t parents = std::max<std::size_t>(1, config.population / 2);

  for (std::size_t gen = 1; gen <= config.generations; ++gen) {
    std::vector<EvoParams> offspring(config.population);
    std::vector<double> parent_fitness(config.population);
    for (std::size_t i = 0; i < config.population; ++i) {
      const auto& parent = population[static_cast<std::size_t>(rng.uniform() * parents) % parents];
      parent_fitness[i] = parent.fitness;
      offspring[i].steepness =
          clip(parent.params.steepness + step * config.mutation_fraction * s_range * rng.normal(),
               config.steepness_bounds);
      offspring[i].delta =
          clip(parent.params.delta + step * config.mutation_fraction * d_range * rng.normal(),
               config.delta_bounds);
    }
    std::vector<Scored> children = evaluate(offspring);
    std::size_t successes = 0;
    for (std::size_t i = 0; i < children.size(); ++i) successes += children[i].fitness > parent_fitness[i];
    step *= 5 * successes > children.size() ? 1.22 : 0.82;
    step = std::clamp(step, 1e-4, 2.0);

    rank(children);
    std::vector<Scored> next(population.begin(), population.begin() + config.elitism);
    for (std::size_t i = 0; next.size() < config.population; ++i) next.push_back(children[i]);
    rank(next);
    population = std::move(next);
    record(gen, population);
  }

  result.best_params = population.front().params;
  result.best_fitness = population.front().fitness;
  return result;
}

double quadratic_test_objective(const EvoParams& p) {
  const double ds = p.steepness - 3.0;
  const double dd = p.delta - 0.1;
  return -(ds * ds + dd * dd);
}

}  // namespace mars
