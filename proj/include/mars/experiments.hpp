#pragma once

// Experiment drivers behind the command-line tool: forward-pass runtime sweeps,
// single-pass train/evaluate runs on labeled datasets, the subtractive-skip
// filtering demo and the invariant checks run by `verify`.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mars/config_io.hpp"
#include "mars/dataset.hpp"
#include "mars/evolve.hpp"
#include "mars/models.hpp"
#include "mars/readout.hpp"

namespace mars {

enum class Precision { F32, F64 };
Precision parse_precision(const std::string& name);
std::string to_string(Precision p);

/// Sequence lengths used by the forward runtime comparison, capped at `max_length`.
std::vector<std::size_t> default_runtime_grid(std::size_t max_length = 100000);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

std::string hardware_note();

// ---------------------------------------------------------------------------
// Runtime sweep

struct RuntimeSweepOptions {
  std::string model = "mars";  // mars | esn | mf-esn
  std::vector<std::size_t> lengths = default_runtime_grid();
  std::size_t repetitions = 100;
  std::size_t batch = 10;
  std::size_t hidden = 128;
  std::size_t layers = 3;  // MARS only
  std::size_t input_dim = 1;
  std::uint64_t seed = 0;
  Precision precision = Precision::F64;
  ScanOptions scan{};
};

struct RuntimeReport {
  std::string model;
  std::vector<std::size_t> lengths;
  std::vector<double> seconds;        // total over repetitions; NaN where the run failed
  std::vector<std::string> failures;  // empty string where the run succeeded
  std::size_t repetitions = 0;
  std::size_t batch = 0;
  std::size_t hidden = 0;
  std::string precision;
  std::string hardware;
  nlohmann::json config;
};

RuntimeReport run_runtime_sweep(const RuntimeSweepOptions& options, std::ostream* progress = nullptr);

nlohmann::json to_json(const RuntimeReport& report);
/// Writes `<stem>.json` and `<stem>.csv` (length,seconds) into `dir`.
void write_runtime_report(const std::filesystem::path& dir, const std::string& stem,
                          const RuntimeReport& report);

// ---------------------------------------------------------------------------
// Train / evaluate

struct TrainEvalOptions {
  MarsConfig config;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  RidgeOptions ridge{};
  NormalizationMode normalization = NormalizationMode::None;
  Precision precision = Precision::F64;
  std::size_t batch_rows = 256;
  /// Tune (steepness, delta) on a validation split of the training data first.
  bool evolve = false;
  EvoConfig evo{};
  double validation_fraction = 0.2;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  double test_accuracy = 0;
  double train_accuracy = 0;
  double train_seconds = 0;  // model init + training forward + ridge solve
  double eval_seconds = 0;
  std::size_t clamped_coefficients = 0;
};

struct ExperimentReport {
  std::string dataset;
  DatasetManifest manifest;
  std::vector<SeedOutcome> seeds;
  double mean_accuracy = 0;
  double std_accuracy = 0;
  double total_seconds = 0;
  std::size_t trainable_parameters = 0;
  std::size_t readout_solves_per_seed = 1;
  nlohmann::json config;
  std::optional<EvoResult> evolution;
};

/// Fails with ConfigError before any compute when config and data disagree.
ExperimentReport run_train_eval(const Dataset& data, const TrainEvalOptions& options,
                                std::ostream* progress = nullptr);

/// Validation accuracy of (steepness, delta) on a seeded split of `train`.
double validation_fitness(const TimeSeriesBatch& train, std::size_t num_classes,
                          const TrainEvalOptions& options, const EvoParams& params);

EvoResult run_evolution(const TimeSeriesBatch& train, std::size_t num_classes,
                        const TrainEvalOptions& options, std::ostream* trace = nullptr);

/// Trains on all of `train` with the first seed and returns the deployable artifact.
ModelArtifact train_artifact(const Dataset& data, const TrainEvalOptions& options);

nlohmann::json to_json(const ExperimentReport& report);
std::string summary(const ExperimentReport& report);

// ---------------------------------------------------------------------------
// Filtering demo: raw signal fed straight into the memristive dynamics, block
// output subtracted from the carried signal, repeated per layer.

struct FilterDemoOptions {
  double frequency = 0.005;  // cycles per sample
  double amplitude = 1.0;
  double noise = 0.005;
  std::size_t length = 1000;
  std::size_t layers = 3;
  double gamma = 1.0;
  double delta = 0.1;
  std::uint64_t seed = 0;
};

struct FilterDemoResult {
  std::vector<std::vector<double>> carried;    // layers + 1 signals; [0] is the input
  std::vector<std::vector<double>> memristive; // per layer block output h
  std::vector<std::vector<double>> spectra;    // |DFT| of each carried signal, bins 0..N/2
  std::vector<std::optional<double>> centroids; // mean-removed spectral centroid, cycles/sample
  bool centroid_increasing = false;
};

FilterDemoResult run_filter_demo(const FilterDemoOptions& options);

/// Magnitudes of the discrete Fourier transform, bins 0..N/2.
std::vector<double> dft_magnitude(const std::vector<double>& signal);

/// Magnitude-weighted mean frequency (cycles/sample) of the mean-removed signal;
/// empty when the signal has no non-DC energy.
std::optional<double> spectral_centroid(const std::vector<double>& signal);

void write_filter_demo(const std::filesystem::path& dir, const FilterDemoResult& result);

// ---------------------------------------------------------------------------
// Invariant suite

struct PropertyResult {
  std::string name;
  double tolerance = 0;
  double observed = 0;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  Precision precision = Precision::F64;
  std::uint64_t seed = 0;
  bool inject_sign_flip = false;
};

struct VerifyReport {
  std::vector<PropertyResult> properties;
  bool all_passed() const;
};

/// Tolerances used by `verify` for the given precision.
struct VerifyTolerances {
  double scan_relative;
  double model_relative;
  double fixed_point;
  double ridge_residual;
};
VerifyTolerances verify_tolerances(Precision p);

VerifyReport run_verify(const VerifyOptions& options);

/// max_i |x_i - ref_i| / |ref_i| over entries with ref_i != 0.
double max_relative_error(std::span<const double> x, std::span<const double> ref);

}  // namespace mars
