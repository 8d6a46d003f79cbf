// mars: command-line driver for runtime sweeps, train/eval runs, hyperparameter
// evolution, the filtering demo and the invariant suite.
//
// Exit status: 0 success, 1 property or experiment failure, 2 usage error.

#include <omp.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "mars/config_io.hpp"
#include "mars/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string precision = "f64";
  int threads = 0;
};

struct DataFlags {
  std::string ts;
  std::string train_csv;
  std::string test_csv;
  bool csv_header = false;
  std::string name;
};

std::filesystem::path out_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("MARS_OUT_DIR"); env && *env) return env;
  return "results";
}

// Reports never overwrite an earlier run: a numeric suffix is added instead.
std::string fresh_stem(const std::filesystem::path& dir, const std::string& stem) {
  std::string candidate = stem;
  const auto taken = [&](const std::string& c) {
    return std::filesystem::exists(dir / (c + ".json")) || std::filesystem::exists(dir / c);
  };
  for (int i = 1; taken(candidate); ++i) {
    candidate = stem + "_" + std::to_string(i);
  }
  return candidate;
}

mars::MarsConfig load_mars_config(const Common& c) {
  if (c.config.empty()) return {};
  auto j = mars::read_json_file(c.config);
  if (j.contains("model")) j = j.at("model");
  return mars::mars_config_from_json(j);
}

mars::Dataset load_dataset(const DataFlags& d) {
  if (!d.ts.empty() && (!d.train_csv.empty() || !d.test_csv.empty())) {
    throw mars::ConfigError("give either --data or --train-csv/--test-csv, not both");
  }
  if (!d.ts.empty()) {
    auto data = mars::load_ts(d.ts);
    if (!d.name.empty()) data.manifest.name = d.name;
    return data;
  }
  if (d.train_csv.empty() || d.test_csv.empty()) {
    throw mars::ConfigError("a dataset is required: --data <ts path> or --train-csv and --test-csv");
  }
  mars::CsvSchema schema;
  schema.has_header = d.csv_header;
  auto train = mars::load_csv(d.train_csv, schema);
  auto test = mars::load_csv(d.test_csv, schema);
  // test labels are re-indexed against the training label order
  for (int& y : test.batch.labels) {
    const std::string& name = test.class_labels.at(static_cast<std::size_t>(y));
    const auto it = std::find(train.class_labels.begin(), train.class_labels.end(), name);
    if (it == train.class_labels.end()) {
      throw mars::ConfigError("test label '" + name + "' does not occur in the training split");
    }
    y = static_cast<int>(it - train.class_labels.begin());
  }
  mars::Dataset data;
  data.train = std::move(train.batch);
  data.test = std::move(test.batch);
  const std::string name =
      d.name.empty() ? std::filesystem::path(d.train_csv).stem().string() : d.name;
  data.manifest = mars::make_manifest(name, data.train, data.test, train.class_labels);
  return data;
}

void add_data_flags(CLI::App* cmd, DataFlags& d) {
  cmd->add_option("--data", d.ts, "UCR/UEA .ts dataset (directory, split file or prefix)");
  cmd->add_option("--train-csv", d.train_csv, "training split as CSV, label first");
  cmd->add_option("--test-csv", d.test_csv, "test split as CSV, label first");
  cmd->add_flag("--csv-header", d.csv_header, "CSV files start with a header row");
  cmd->add_option("--name", d.name, "dataset name used in reports");
}

void print_evolution(std::ostream& os, const mars::EvoResult& r) {
  os << "best s = " << r.best_params.steepness << ", delta = " << r.best_params.delta
     << ", fitness = " << r.best_fitness << " (" << r.evaluations << " evaluations, "
     << r.discarded << " discarded)\n";
}

nlohmann::json evolution_json(const mars::EvoResult& r, const mars::EvoConfig& c) {
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& g : r.generations) {
    gens.push_back({{"generation", g.generation},
                    {"best", g.best_fitness},
                    {"mean", g.mean_fitness},
                    {"steepness", g.best_params.steepness},
                    {"delta", g.best_params.delta}});
  }
  return {{"best_steepness", r.best_params.steepness},
          {"best_delta", r.best_params.delta},
          {"best_fitness", r.best_fitness},
          {"evaluations", r.evaluations},
          {"discarded", r.discarded},
          {"population", c.population},
          {"generations_run", c.generations},
          {"seed", c.seed},
          {"steepness_bounds", {c.steepness_bounds.lower, c.steepness_bounds.upper}},
          {"delta_bounds", {c.delta_bounds.lower, c.delta_bounds.upper}},
          {"generations", gens}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memristive reservoir models: runtime sweeps, classification and checks"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--config", common.config, "model config (JSON)");
  app.add_option("--seed", common.seed, "base seed");
  app.add_option("--out", common.out, "output directory (default $MARS_OUT_DIR or ./results)");
  app.add_option("--precision", common.precision, "floating point precision")
      ->check(CLI::IsMember({"f32", "f64"}));
  app.add_option("--threads", common.threads, "OpenMP threads (0 keeps the runtime default)")
      ->check(CLI::NonNegativeNumber);

  // bench-runtime
  auto* bench = app.add_subcommand("bench-runtime", "time forward passes over a length grid");
  std::string bench_model = "mars";
  std::vector<std::size_t> bench_lengths;
  std::size_t max_length = 100000;
  mars::RuntimeSweepOptions sweep;
  bench->add_option("--model", bench_model, "model to time")
      ->check(CLI::IsMember({"mars", "esn", "mf-esn"}));
  bench->add_option("--lengths", bench_lengths, "sequence lengths (default grid)")->delimiter(',');
  bench->add_option("--max-length", max_length, "cap on the default grid (500000 opts into the full grid)");
  bench->add_option("--repetitions", sweep.repetitions, "timed forward passes per length");
  bench->add_option("--batch", sweep.batch, "batch size");
  bench->add_option("--hidden", sweep.hidden, "hidden size");
  bench->add_option("--layers", sweep.layers, "MARS blocks");
  bench->add_option("--chunk-length", sweep.scan.chunk_length, "scan chunk length");

  // train-eval
  auto* train = app.add_subcommand("train-eval", "single-pass training and test evaluation");
  DataFlags train_data;
  add_data_flags(train, train_data);
  mars::TrainEvalOptions te;
  std::vector<std::uint64_t> seeds;
  std::string normalization = "none";
  bool no_bias = false;
  std::string save_model;
  std::optional<std::size_t> hidden_override;
  train->add_option("--seeds", seeds, "model seeds (default five from --seed)")->delimiter(',');
  train->add_flag("--evolve", te.evolve, "tune steepness and delta on a validation split first");
  train->add_option("--generations", te.evo.generations, "evolution generations");
  train->add_option("--population", te.evo.population, "evolution population");
  train->add_option("--lambda", te.ridge.lambda, "ridge regularization");
  train->add_flag("--standardize", te.ridge.standardize, "z-score features before the ridge solve");
  train->add_flag("--no-bias", no_bias, "drop the readout bias column");
  train->add_option("--normalize", normalization, "input normalization")
      ->check(CLI::IsMember({"none", "zscore", "minmax"}));
  train->add_option("--batch-rows", te.batch_rows, "rows forwarded together");
  train->add_option("--hidden", hidden_override, "override the config hidden size");
  train->add_option("--save-model", save_model, "write the trained model artifact (first seed)");

  // evolve
  auto* evo = app.add_subcommand("evolve", "evolve RESCALE steepness and delta");
  DataFlags evo_data;
  add_data_flags(evo, evo_data);
  std::string objective = "dataset";
  mars::EvoConfig evo_cfg;
  evo->add_option("--objective", objective, "fitness: validation accuracy or the quadratic check")
      ->check(CLI::IsMember({"dataset", "quadratic"}));
  evo->add_option("--generations", evo_cfg.generations, "generations");
  evo->add_option("--population", evo_cfg.population, "population size");
  evo->add_option("--mutation", evo_cfg.mutation_fraction, "initial mutation step, fraction of range");

  // filter-demo
  auto* filter = app.add_subcommand("filter-demo", "subtractive skip connections on a noisy sinusoid");
  mars::FilterDemoOptions fd;
  filter->add_option("--frequency", fd.frequency, "cycles per sample");
  filter->add_option("--amplitude", fd.amplitude, "sinusoid amplitude");
  filter->add_option("--noise", fd.noise, "Gaussian noise standard deviation");
  filter->add_option("--length", fd.length, "samples");
  filter->add_option("--layers", fd.layers, "blocks");
  filter->add_option("--gamma", fd.gamma, "gamma");
  filter->add_option("--delta", fd.delta, "delta");

  // verify
  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  bool sign_flip = false;
  verify->add_flag("--inject-sign-flip", sign_flip, "mutation check: flip the sign of the decay coefficient");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (common.threads > 0) omp_set_num_threads(common.threads);
    const mars::Precision precision = mars::parse_precision(common.precision);
    const std::uint64_t seed = common.seed.value_or(0);
    const std::filesystem::path dir = out_dir(common);
    if (!common.config.empty()) mars::read_json_file(common.config);

    if (*bench) {
      sweep.model = bench_model;
      sweep.lengths = bench_lengths.empty() ? mars::default_runtime_grid(max_length) : bench_lengths;
      sweep.seed = seed;
      sweep.precision = precision;
      if (!common.config.empty()) {
        const auto c = load_mars_config(common);
        sweep.input_dim = c.input_dim;
      }
      const auto report = mars::run_runtime_sweep(sweep, &std::cout);
      const std::string stem = fresh_stem(dir, "runtime_" + bench_model + "_" + common.precision);
      mars::write_runtime_report(dir, stem, report);
      std::vector<double> x, y;
      for (std::size_t i = 0; i < report.lengths.size(); ++i) {
        if (report.failures[i].empty() && report.seconds[i] > 0) {
          x.push_back(static_cast<double>(report.lengths[i]));
          y.push_back(report.seconds[i]);
        }
      }
      if (x.size() >= 2) std::cout << "log-log slope: " << mars::loglog_slope(x, y) << '\n';
      std::cout << "hardware: " << report.hardware << "\nwrote " << (dir / (stem + ".json")).string()
                << " and .csv\n";
      return x.empty() ? kExitFailure : kExitOk;
    }

    if (*train) {
      te.config = load_mars_config(common);
      if (hidden_override) te.config.hidden_dim = *hidden_override;
      te.seeds = seeds;
      if (te.seeds.empty()) {
        for (std::uint64_t i = 0; i < 5; ++i) te.seeds.push_back(seed + i);
      }
      te.normalization = mars::parse_normalization(normalization);
      te.ridge.bias = !no_bias;
      te.precision = precision;
      te.evo.seed = seed;
      const mars::Dataset data = load_dataset(train_data);
      const auto report = mars::run_train_eval(data, te, &std::cout);
      std::cout << mars::summary(report);
      std::filesystem::create_directories(dir);
      const std::string stem = fresh_stem(dir, "train_eval_" + report.dataset);
      mars::write_json_file(dir / (stem + ".json"), mars::to_json(report));
      std::ofstream(dir / (stem + ".txt")) << mars::summary(report);
      std::cout << "wrote " << (dir / (stem + ".json")).string() << '\n';
      if (!save_model.empty()) {
        mars::TrainEvalOptions artifact_opts = te;
        artifact_opts.config.steepness = report.config["model"]["steepness"];
        artifact_opts.config.delta = report.config["model"]["delta"];
        mars::save_artifact(save_model, mars::train_artifact(data, artifact_opts));
        std::cout << "saved model to " << save_model << '\n';
      }
      return kExitOk;
    }

    if (*evo) {
      evo_cfg.seed = seed;
      mars::EvoResult result;
      std::ostringstream trace;
      std::string label = "quadratic";
      if (objective == "quadratic") {
        result = mars::evolve(mars::quadratic_test_objective, evo_cfg, &trace);
      } else {
        const mars::Dataset data = load_dataset(evo_data);
        label = data.manifest.name;
        mars::TrainEvalOptions opts;
        opts.config = load_mars_config(common);
        opts.seeds = {seed};
        opts.precision = precision;
        opts.evo = evo_cfg;
        if (opts.config.input_dim != data.train.channels()) {
          throw mars::ConfigError("model config input_dim does not match the dataset");
        }
        result = mars::run_evolution(data.train, data.manifest.num_classes, opts, &trace);
      }
      print_evolution(std::cout, result);
      std::filesystem::create_directories(dir);
      const std::string stem = fresh_stem(dir, "evolve_" + label);
      auto j = evolution_json(result, evo_cfg);
      j["report"] = "evolve";
      j["objective"] = objective;
      j["dataset"] = label;
      mars::write_json_file(dir / (stem + ".json"), j);
      std::ofstream(dir / (stem + ".trace")) << "generation best mean steepness delta\n" << trace.str();
      std::cout << "wrote " << (dir / (stem + ".json")).string() << '\n';
      return kExitOk;
    }

    if (*filter) {
      fd.seed = seed;
      const auto r = mars::run_filter_demo(fd);
      const std::string stem = fresh_stem(dir, "filter_demo");
      mars::write_filter_demo(dir / stem, r);
      std::cout << "spectral centroid (cycles/sample) per carried signal:\n";
      for (std::size_t l = 0; l < r.centroids.size(); ++l) {
        std::cout << "  u" << l << ": ";
        if (r.centroids[l]) {
          std::cout << std::setprecision(6) << *r.centroids[l] << '\n';
        } else {
          std::cout << "undefined (no energy outside DC)\n";
        }
      }
      std::cout << "wrote " << (dir / stem).string() << '\n';
      if (!r.centroids.front()) {
        std::cout << "input has no spectrum; monotonicity not assessed\n";
        return kExitOk;
      }
      std::cout << "centroid strictly increasing: " << (r.centroid_increasing ? "yes" : "NO") << '\n';
      return r.centroid_increasing ? kExitOk : kExitFailure;
    }

    if (*verify) {
      mars::VerifyOptions vo;
      vo.precision = precision;
      vo.seed = seed;
      vo.inject_sign_flip = sign_flip;
      const auto report = mars::run_verify(vo);
      std::cout << "verify (" << common.precision << ")\n";
      for (const auto& p : report.properties) {
        std::cout << (p.passed ? "  PASS " : "  FAIL ") << std::left << std::setw(32) << p.name
                  << " observed " << std::scientific << std::setprecision(3) << p.observed
                  << "  tolerance " << p.tolerance << std::defaultfloat << "  " << p.detail << '\n';
      }
      const bool ok = report.all_passed();
      std::cout << (ok ? "all properties passed\n" : "PROPERTY FAILURE\n");
      return ok ? kExitOk : kExitFailure;
    }
  } catch (const mars::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const mars::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
