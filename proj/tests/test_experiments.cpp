#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "mars/experiments.hpp"
#include "mars/rng.hpp"

using namespace mars;

namespace {

// two classes told apart by frequency
Dataset two_tone(std::size_t train, std::size_t test, std::size_t length, std::uint64_t seed) {
  auto rng = CounterRng::substream(seed, CounterRng::kSynthetic, 3);
  const auto make = [&](std::size_t n) {
    TimeSeriesBatch b;
    b.values = Tensor3<double>(n, length, 1);
    b.lengths.assign(n, length);
    for (std::size_t i = 0; i < n; ++i) {
      const int label = static_cast<int>(i % 2);
      const double f = label ? 0.12 : 0.03;
      const double phase = rng.uniform(0, 2 * std::numbers::pi);
      for (std::size_t t = 0; t < length; ++t) {
        b.values(i, t, 0) = std::sin(2 * std::numbers::pi * f * static_cast<double>(t) + phase) + 0.1 * rng.normal();
      }
      b.labels.push_back(label);
    }
    return b;
  };
  Dataset d;
  d.train = make(train);
  d.test = make(test);
  d.manifest = make_manifest("TwoTone", d.train, d.test, {"low", "high"});
  return d;
}

}  // namespace

TEST_CASE("spectral centroid") {
  std::vector<double> tone(64);
  for (std::size_t t = 0; t < 64; ++t) tone[t] = 3.0 + std::cos(2 * std::numbers::pi * 8.0 * static_cast<double>(t) / 64.0);
  CHECK(*spectral_centroid(tone) == doctest::Approx(8.0 / 64.0));
  const auto mag = dft_magnitude(tone);
  CHECK(mag.size() == 33);
  CHECK(mag[0] == doctest::Approx(192.0));
  CHECK(mag[8] == doctest::Approx(32.0));
  CHECK_FALSE(spectral_centroid(std::vector<double>(50, 1.5)).has_value());
}

TEST_CASE("filter demo, single layer") {
  FilterDemoOptions o;
  o.layers = 1;
  o.length = 200;
  const auto r = run_filter_demo(o);
  REQUIRE(r.carried.size() == 2);
  for (std::size_t t = 0; t < o.length; ++t) {
    CHECK(r.carried[1][t] == doctest::Approx(r.carried[0][t] - r.memristive[0][t]));
  }
}

TEST_CASE("filter demo, default settings rise across layers") {
  const auto r = run_filter_demo({});
  CHECK(r.centroids.size() == 4);
  CHECK(r.centroid_increasing);
}

TEST_CASE("filter demo, zero amplitude") {
  FilterDemoOptions o;
  o.amplitude = 0;
  o.noise = 0;
  const auto r = run_filter_demo(o);
  CHECK_FALSE(r.centroids[0].has_value());
  CHECK_FALSE(r.centroid_increasing);
  for (const auto& h : r.memristive) {
    for (double v : h) CHECK(std::isfinite(v));
  }
}

TEST_CASE("filter demo writes its files") {
  const auto dir = std::filesystem::temp_directory_path() / "mars_filter_test";
  std::filesystem::remove_all(dir);
  FilterDemoOptions o;
  o.length = 64;
  write_filter_demo(dir, run_filter_demo(o));
  CHECK(std::filesystem::exists(dir / "filter_signals.csv"));
  CHECK(std::filesystem::exists(dir / "filter_spectra.csv"));
  CHECK(read_json_file(dir / "filter_summary.json")["layers"] == 3);
  std::filesystem::remove_all(dir);
}

TEST_CASE("filter demo rejects bad options") {
  FilterDemoOptions o;
  o.length = 1;
  CHECK_THROWS_AS(run_filter_demo(o), ConfigError);
  o = {};
  o.frequency = 0.7;
  CHECK_THROWS_AS(run_filter_demo(o), ConfigError);
}

TEST_CASE("train-eval on an easy synthetic task") {
  const auto data = two_tone(40, 40, 80, 1);
  TrainEvalOptions o;
  o.config.hidden_dim = 32;
  o.config.num_layers = 2;
  o.seeds = {0, 1};
  const auto r = run_train_eval(data, o);
  CHECK(r.seeds.size() == 2);
  CHECK(r.mean_accuracy >= 0.9);
  CHECK(r.readout_solves_per_seed == 1);
  CHECK(r.trainable_parameters == 2 * 33);
  const auto j = to_json(r);
  CHECK(j["per_seed"].size() == 2);
  CHECK(summary(r).find("TwoTone") != std::string::npos);
}

TEST_CASE("train-eval rejects mismatched configs before computing") {
  const auto data = two_tone(10, 10, 20, 2);
  TrainEvalOptions o;
  o.config.input_dim = 3;
  CHECK_THROWS_AS(run_train_eval(data, o), ConfigError);
  o.config.input_dim = 1;
  o.config.tc_enabled = true;
  o.config.tc_kernel = 25;
  CHECK_THROWS_AS(run_train_eval(data, o), ConfigError);
  auto unlabeled = data;
  unlabeled.train.labels.clear();
  o.config.tc_enabled = false;
  CHECK_THROWS(run_train_eval(unlabeled, o));
}

TEST_CASE("train-eval with evolution and an artifact") {
  const auto data = two_tone(30, 20, 60, 3);
  TrainEvalOptions o;
  o.config.hidden_dim = 16;
  o.config.num_layers = 1;
  o.seeds = {0};
  o.evolve = true;
  o.evo.generations = 2;
  o.evo.population = 4;
  const auto r = run_train_eval(data, o);
  REQUIRE(r.evolution.has_value());
  CHECK(r.evolution->evaluations == 12);

  const auto art = train_artifact(data, o);
  CHECK(art.class_labels == std::vector<std::string>{"low", "high"});
  CHECK(art.readout.num_classes == 2);
}

TEST_CASE("runtime sweep") {
  RuntimeSweepOptions o;
  o.lengths = {20, 40};
  o.repetitions = 1;
  o.batch = 2;
  o.hidden = 8;
  for (const char* model : {"mars", "esn", "mf-esn"}) {
    o.model = model;
    const auto r = run_runtime_sweep(o);
    CHECK(r.seconds.size() == 2);
    CHECK(r.failures == std::vector<std::string>{"", ""});
    for (double s : r.seconds) CHECK(s >= 0);
  }
  CHECK(default_runtime_grid() == std::vector<std::size_t>{50, 100, 1000, 10000, 100000});
  CHECK(default_runtime_grid(500000).back() == 500000);
  CHECK(loglog_slope({1, 10, 100}, {2, 20, 200}) == doctest::Approx(1.0));
  CHECK(loglog_slope({1, 10, 100}, {5, 5, 5}) == doctest::Approx(0.0));
}

TEST_CASE("invariant suite passes and catches a sign flip") {
  VerifyOptions o;
  CHECK(run_verify(o).all_passed());
  o.precision = Precision::F32;
  CHECK(run_verify(o).all_passed());
  o.precision = Precision::F64;
  o.inject_sign_flip = true;
  CHECK_FALSE(run_verify(o).all_passed());
}

TEST_CASE("relative error helper") {
  const std::vector<double> ref{1, 0, 4};
  CHECK(max_relative_error(std::vector<double>{1.1, 0.01, 4}, ref) == doctest::Approx(0.1));
  CHECK(std::isinf(max_relative_error(std::vector<double>{std::nan(""), 0, 4}, ref)));
  CHECK(to_string(parse_precision("f32")) == "f32");
  CHECK_THROWS(parse_precision("f16"));
}
