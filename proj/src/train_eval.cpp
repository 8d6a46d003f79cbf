#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mars/config_io.hpp"
#include "mars/experiments.hpp"
#include "mars/rng.hpp"

namespace mars {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Features {
  MatrixXdRM values;
  std::size_t clamped = 0;
};

Features extract(const MarsModel& model, const TimeSeriesBatch& batch, Precision precision,
                 std::size_t batch_rows) {
  ForwardOptions fo;
  fo.batch_rows = batch_rows;
  if (precision == Precision::F32) {
    auto r = mars_forward<float>(model, batch, fo);
    return {r.features.cast<double>(), r.clamped_coefficients};
  }
  auto r = mars_forward<double>(model, batch, fo);
  return {std::move(r.features), r.clamped_coefficients};
}

void check_compatible(const MarsConfig& config, const TimeSeriesBatch& train,
                      const TimeSeriesBatch& test, std::size_t num_classes) {
  if (config.input_dim != train.channels() || config.input_dim != test.channels()) {
    throw ConfigError("model config input_dim " + std::to_string(config.input_dim) +
                      " does not match the dataset's " + std::to_string(train.channels()) +
                      " channels");
  }
  if (!train.labeled() || !test.labeled()) throw ConfigError("train-eval needs labeled splits");
  if (num_classes < 2) throw ConfigError("train-eval needs at least two classes");
  if (config.tc_enabled && config.tc_kernel > std::min(train.max_time(), test.max_time())) {
    throw ConfigError("temporal convolution kernel longer than the sequences");
  }
  config.validate();
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double validation_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto rng = CounterRng::substream(seed, CounterRng::kSplit);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(idx[i - 1], idx[rng.next_u64() % i]);
  }
  auto n_val = static_cast<std::size_t>(std::round(validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::vector<std::size_t> fit(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> val(idx.end() - static_cast<std::ptrdiff_t>(n_val), idx.end());
  return {fit, val};
}

}  // namespace

double validation_fitness(const TimeSeriesBatch& train, std::size_t num_classes,
                          const TrainEvalOptions& options, const EvoParams& params) {
  if (train.size() < 2) throw ConfigError("evolution needs at least two training sequences");
  const std::uint64_t seed = options.seeds.empty() ? 0 : options.seeds.front();
  const auto [fit_idx, val_idx] = split_indices(train.size(), options.validation_fraction, seed);
  const TimeSeriesBatch fit = train.select(fit_idx);
  const TimeSeriesBatch val = train.select(val_idx);

  MarsConfig config = options.config;
  config.steepness = params.steepness;
  config.delta = params.delta;
  config.seed = seed;
  const MarsModel model = init_mars(config);
  const auto stats = fit_normalization(fit, options.normalization);
  const Features f_fit = extract(model, normalize(fit, stats), options.precision, options.batch_rows);
  const Features f_val = extract(model, normalize(val, stats), options.precision, options.batch_rows);
  const RidgeReadout readout = fit_ridge(f_fit.values, fit.labels, num_classes, options.ridge);
  return accuracy(predict(readout, f_val.values), val.labels);
}

EvoResult run_evolution(const TimeSeriesBatch& train, std::size_t num_classes,
                        const TrainEvalOptions& options, std::ostream* trace) {
  const auto objective = [&](const EvoParams& p) {
    try {
      return validation_fitness(train, num_classes, options, p);
    } catch (const NumericalError&) {
      return std::nan("");
    }
  };
  return evolve(objective, options.evo, trace);
}

ExperimentReport run_train_eval(const Dataset& data, const TrainEvalOptions& options,
                                std::ostream* progress) {
  const std::size_t num_classes = data.manifest.num_classes;
  check_manifest(data.manifest, data.train, data.test);
  check_compatible(options.config, data.train, data.test, num_classes);
  if (options.seeds.empty()) throw ConfigError("train-eval needs at least one seed");

  ExperimentReport report;
  report.dataset = data.manifest.name;
  report.manifest = data.manifest;
  report.manifest.normalization = to_string(options.normalization);

  const auto t_total = Clock::now();
  MarsConfig config = options.config;
  if (options.evolve) {
    report.evolution = run_evolution(data.train, num_classes, options);
    config.steepness = report.evolution->best_params.steepness;
    config.delta = report.evolution->best_params.delta;
    if (progress) {
      *progress << "evolved steepness " << config.steepness << ", delta " << config.delta
                << " (validation accuracy " << report.evolution->best_fitness << ")\n";
    }
  }

  const auto stats = fit_normalization(data.train, options.normalization);
  const TimeSeriesBatch train = normalize(data.train, stats);
  const TimeSeriesBatch test = normalize(data.test, stats);

  for (const std::uint64_t seed : options.seeds) {
    SeedOutcome outcome;
    outcome.seed = seed;
    config.seed = seed;

    const auto t_train = Clock::now();
    const MarsModel model = init_mars(config);
    const Features f_train = extract(model, train, options.precision, options.batch_rows);
    const RidgeReadout readout = fit_ridge(f_train.values, train.labels, num_classes, options.ridge);
    outcome.train_seconds = seconds_since(t_train);

    const auto t_eval = Clock::now();
    const Features f_test = extract(model, test, options.precision, options.batch_rows);
    outcome.test_accuracy = accuracy(predict(readout, f_test.values), test.labels);
    outcome.eval_seconds = seconds_since(t_eval);
    outcome.train_accuracy = accuracy(predict(readout, f_train.values), train.labels);
    outcome.clamped_coefficients = f_train.clamped + f_test.clamped;
    report.trainable_parameters = readout.trainable_parameters();
    report.seeds.push_back(outcome);
    if (progress) {
      *progress << report.dataset << " seed " << seed << ": test accuracy " << outcome.test_accuracy
                << " (train " << outcome.train_seconds << " s)\n";
    }
  }
  report.total_seconds = seconds_since(t_total);

  double sum = 0;
  for (const auto& s : report.seeds) sum += s.test_accuracy;
  report.mean_accuracy = sum / static_cast<double>(report.seeds.size());
  double sq = 0;
  for (const auto& s : report.seeds) sq += (s.test_accuracy - report.mean_accuracy) * (s.test_accuracy - report.mean_accuracy);
  report.std_accuracy = report.seeds.size() > 1
                            ? std::sqrt(sq / static_cast<double>(report.seeds.size() - 1))
                            : 0.0;

  report.config = {{"model", to_json(config)},
                   {"seeds", options.seeds},
                   {"ridge_lambda", options.ridge.lambda},
                   {"ridge_bias", options.ridge.bias},
                   {"ridge_standardize", options.ridge.standardize},
                   {"normalization", to_string(options.normalization)},
                   {"precision", to_string(options.precision)},
                   {"evolve", options.evolve}};
  return report;
}

ModelArtifact train_artifact(const Dataset& data, const TrainEvalOptions& options) {
  check_compatible(options.config, data.train, data.test, data.manifest.num_classes);
  ModelArtifact artifact;
  artifact.config = options.config;
  artifact.config.seed = options.seeds.empty() ? 0 : options.seeds.front();
  artifact.class_labels = data.manifest.class_labels;
  artifact.normalization = fit_normalization(data.train, options.normalization);
  const MarsModel model = init_mars(artifact.config);
  const Features f = extract(model, normalize(data.train, artifact.normalization),
                             options.precision, options.batch_rows);
  artifact.readout = fit_ridge(f.values, data.train.labels, data.manifest.num_classes, options.ridge);
  return artifact;
}

nlohmann::json to_json(const ExperimentReport& r) {
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& s : r.seeds) {
    seeds.push_back({{"seed", s.seed},
                     {"test_accuracy", s.test_accuracy},
                     {"train_accuracy", s.train_accuracy},
                     {"train_seconds", s.train_seconds},
                     {"eval_seconds", s.eval_seconds},
                     {"clamped_coefficients", s.clamped_coefficients}});
  }
  nlohmann::json j = {{"report", "train-eval"},
                      {"dataset", r.dataset},
                      {"manifest",
                       {{"train_size", r.manifest.train_size},
                        {"test_size", r.manifest.test_size},
                        {"max_length", r.manifest.max_length},
                        {"num_classes", r.manifest.num_classes},
                        {"input_dim", r.manifest.input_dim},
                        {"normalization", r.manifest.normalization}}},
                      {"per_seed", seeds},
                      {"mean_accuracy", r.mean_accuracy},
                      {"std_accuracy", r.std_accuracy},
                      {"total_seconds", r.total_seconds},
                      {"trainable_parameters", r.trainable_parameters},
                      {"readout_solves_per_seed", r.readout_solves_per_seed},
                      {"config", r.config},
                      {"hardware", hardware_note()}};
  if (r.evolution) {
    nlohmann::json gens = nlohmann::json::array();
    for (const auto& g : r.evolution->generations) {
      gens.push_back({{"generation", g.generation},
                      {"best", g.best_fitness},
                      {"mean", g.mean_fitness},
                      {"steepness", g.best_params.steepness},
                      {"delta", g.best_params.delta}});
    }
    j["evolution"] = {{"best_steepness", r.evolution->best_params.steepness},
                      {"best_delta", r.evolution->best_params.delta},
                      {"best_fitness", r.evolution->best_fitness},
                      {"evaluations", r.evolution->evaluations},
                      {"discarded", r.evolution->discarded},
                      {"generations", gens}};
  }
  return j;
}

std::string summary(const ExperimentReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << r.dataset << ": test accuracy " << r.mean_accuracy << " +- " << r.std_accuracy << " over "
      << r.seeds.size() << " seed(s)\n";
  std::size_t clamped = 0;
  double train = 0;
  for (const auto& s : r.seeds) {
    clamped += s.clamped_coefficients;
    train += s.train_seconds;
  }
  out << "  trainable parameters: " << r.trainable_parameters
      << ", readout solves per seed: " << r.readout_solves_per_seed << '\n';
  out << "  training time: " << train / static_cast<double>(r.seeds.size())
      << " s per seed, total wall clock " << r.total_seconds << " s\n";
  out << "  clamped scan coefficients: " << clamped << '\n';
  return out.str();
}

}  // namespace mars
