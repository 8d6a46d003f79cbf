#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "mars/dataset.hpp"

using namespace mars;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mars_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::size_t parse_error_line(const fs::path& path) {
  try {
    read_ts_file(path);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

const char* kToy =
    "# comment\n"
    "@problemName Toy\n"
    "@timeStamps false\n"
    "@univariate true\n"
    "@classLabel true a b\n"
    "@data\n"
    "1.0,2.0,3.0:a\n"
    "4.0,5.0:b\n";

}  // namespace

TEST_CASE("univariate .ts toy") {
  const auto dir = scratch_dir("ts_toy");
  const auto split = read_ts_file(write_file(dir / "Toy_TRAIN.ts", kToy));
  CHECK(split.problem_name == "Toy");
  CHECK(split.class_labels == std::vector<std::string>{"a", "b"});
  const auto& b = split.batch;
  CHECK(b.size() == 2);
  CHECK(b.channels() == 1);
  CHECK(b.max_time() == 3);
  CHECK(b.labels == std::vector<int>{0, 1});
  CHECK(b.lengths == std::vector<std::size_t>{3, 2});
  CHECK(b.values(1, 1, 0) == 5.0);
  CHECK(b.values(1, 2, 0) == 0.0);
}

TEST_CASE("labels follow the header order, not appearance order") {
  const auto dir = scratch_dir("ts_order");
  const auto split = read_ts_file(write_file(dir / "x.ts",
      "@univariate true\n@classLabel true up down\n@data\n1,2:down\n3,4:up\n"));
  CHECK(split.batch.labels == std::vector<int>{1, 0});
}

TEST_CASE("multivariate .ts with ragged dimensions") {
  const auto dir = scratch_dir("ts_multi");
  const auto split = read_ts_file(write_file(dir / "m.ts",
      "@problemName M\n@univariate false\n@dimensions 2\n@classLabel true 1 2 3\n@data\n"
      "1,2,3:4,5,6:2\n"
      "7,8:9:3\n"));
  const auto& b = split.batch;
  CHECK(b.channels() == 2);
  CHECK(b.lengths == std::vector<std::size_t>{3, 2});
  CHECK(b.values(0, 2, 1) == 6.0);
  CHECK(b.values(1, 1, 0) == 8.0);
  CHECK(b.values(1, 1, 1) == 0.0);
  CHECK(b.labels == std::vector<int>{1, 2});
}

TEST_CASE(".ts errors carry line numbers") {
  const auto dir = scratch_dir("ts_errors");
  const std::string head = "@univariate true\n@classLabel true a b\n@data\n";
  CHECK(parse_error_line(write_file(dir / "1.ts", head + "1,2:a\n1,2:c\n")) == 5);
  CHECK(parse_error_line(write_file(dir / "2.ts", head + "1,?,3:a\n")) == 4);
  CHECK(parse_error_line(write_file(dir / "3.ts", head + "1,x:a\n")) == 4);
  CHECK(parse_error_line(write_file(dir / "4.ts", head + "1,2:3,4:a\n")) == 4);
  CHECK(parse_error_line(write_file(dir / "5.ts", "@bogus yes\n@data\n1:a\n")) == 1);
  CHECK(parse_error_line(write_file(dir / "6.ts", "@univariate true\n@classLabel true a\n1,2:a\n")) == 3);
  CHECK(parse_error_line(write_file(dir / "7.ts", "@univariate true\n@classLabel true a a\n@data\n1:a\n")) == 2);
  CHECK(parse_error_line(write_file(dir / "8.ts", "@univariate true\n@classLabel true a\n")) > 0);
  CHECK_THROWS_AS(read_ts_file(dir / "missing.ts"), ParseError);
}

TEST_CASE("load_ts resolves the split files") {
  const auto dir = scratch_dir("ts_pair") / "Toy";
  fs::create_directories(dir);
  write_file(dir / "Toy_TRAIN.ts", kToy);
  write_file(dir / "Toy_TEST.ts", kToy);
  for (const auto& p : {dir, dir / "Toy_TRAIN.ts", dir / "Toy_TEST.ts", dir / "Toy"}) {
    const auto ds = load_ts(p);
    CHECK(ds.manifest.name == "Toy");
    CHECK(ds.manifest.train_size == 2);
    CHECK(ds.manifest.test_size == 2);
    CHECK(ds.manifest.max_length == 3);
    CHECK(ds.manifest.num_classes == 2);
    CHECK(ds.manifest.input_dim == 1);
  }
  write_file(dir / "Toy_TEST.ts", "@univariate true\n@classLabel true a c\n@data\n1:a\n");
  CHECK_THROWS_AS(load_ts(dir), ParseError);
}

TEST_CASE("csv load, label stability and round trip") {
  const auto dir = scratch_dir("csv");
  const auto path = write_file(dir / "x.csv", "cat,1,2,3,4\ndog,5,6,7,8\ncat,9,10,11,12\n");
  const auto a = load_csv(path);
  CHECK(a.batch.size() == 3);
  CHECK(a.batch.max_time() == 4);
  CHECK(a.batch.channels() == 1);
  CHECK(a.batch.labels == std::vector<int>{0, 1, 0});
  CHECK(a.class_labels == std::vector<std::string>{"cat", "dog"});
  CHECK(load_csv(path).batch.labels == a.batch.labels);

  write_csv(dir / "y.csv", a.batch, a.class_labels);
  const auto b = load_csv(dir / "y.csv");
  CHECK(b.batch.values == a.batch.values);
  CHECK(b.batch.labels == a.batch.labels);
  CHECK(b.class_labels == a.class_labels);

  CsvSchema s;
  s.has_header = true;
  s.delimiter = ';';
  const auto c = load_csv(write_file(dir / "z.csv", "label;t0;t1;t2\nx;1;2;3\ny;4;5;\n"), s);
  CHECK(c.batch.lengths == std::vector<std::size_t>{3, 2});

  try {
    load_csv(write_file(dir / "bad.csv", "a,1,2\nb,3,oops\n"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("uniform synthetic inputs") {
  const auto a = synth_random_uniform(10, 100, 3, 7);
  CHECK(a.values == synth_random_uniform(10, 100, 3, 7).values);
  CHECK(a.values != synth_random_uniform(10, 100, 3, 8).values);
  for (double v : a.values.flat()) {
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
  const auto big = synth_random_uniform(1000, 1000, 1, 1);
  double sum = 0;
  for (double v : big.values.flat()) sum += v;
  const double n = 1e6;
  // sd of the mean of U[0,1) draws is sqrt(1/12 / n)
  CHECK(std::abs(sum / n - 0.5) < 3 * std::sqrt(1.0 / 12.0 / n));
  CHECK_THROWS_AS(synth_random_uniform(0, 5, 1, 0), StructuralError);
}

TEST_CASE("normalization") {
  TimeSeriesBatch train;
  train.values = Tensor3<double>(2, 3, 2);
  train.lengths = {3, 2};
  const double ch0[2][3] = {{1, 2, 3}, {4, 5, 0}};
  for (int b = 0; b < 2; ++b) {
    for (int t = 0; t < 3; ++t) {
      train.values(b, t, 0) = ch0[b][t];
      if (t < static_cast<int>(train.lengths[b])) train.values(b, t, 1) = 7.0;
    }
  }
  const auto z = normalize(train, fit_normalization(train, NormalizationMode::ZScore));
  for (int b = 0; b < 2; ++b) {
    for (int t = 0; t < 3; ++t) CHECK(z.values(b, t, 1) == 0.0);
  }
  CHECK(z.values(1, 2, 0) == 0.0);
  double mean = 0;
  for (double v : {z.values(0, 0, 0), z.values(0, 1, 0), z.values(0, 2, 0), z.values(1, 0, 0), z.values(1, 1, 0)}) mean += v;
  CHECK(std::abs(mean) < 1e-12);

  const auto mm_stats = fit_normalization(train, NormalizationMode::MinMax);
  const auto mm = normalize(train, mm_stats);
  CHECK(mm.values(0, 0, 0) == 0.0);
  CHECK(mm.values(1, 1, 0) == 1.0);

  TimeSeriesBatch shifted = train;
  for (auto& v : shifted.values.flat()) v += 10;
  shifted.values(1, 2, 0) = shifted.values(1, 2, 1) = 0;
  const auto on_test = normalize(shifted, mm_stats);
  CHECK(on_test.values(0, 0, 0) == doctest::Approx(2.5));

  CHECK(to_string(parse_normalization("zscore")) == "zscore");
  CHECK_THROWS_AS(parse_normalization("robust"), ConfigError);
}

TEST_CASE("manifest") {
  const auto train = synth_random_uniform(4, 10, 2, 1);
  auto test = synth_random_uniform(3, 12, 2, 2);
  auto m = make_manifest("Demo", train, test, {"x", "y"});
  CHECK(m.train_size == 4);
  CHECK(m.test_size == 3);
  CHECK(m.max_length == 12);
  CHECK(m.input_dim == 2);
  CHECK(m.num_classes == 2);
  CHECK_NOTHROW(check_manifest(m, train, test));
  m.test_size = 5;
  CHECK_THROWS_AS(check_manifest(m, train, test), ConfigError);
  m.test_size = 3;
  const auto path = scratch_dir("manifest") / "m.json";
  write_manifest(path, m);
  CHECK(read_manifest(path) == m);
}

TEST_CASE("batch invariants") {
  auto b = synth_random_uniform(3, 5, 1, 3);
  b.lengths[1] = 2;
  CHECK_THROWS_AS(b.validate(), StructuralError);
  b.poison_padding();
  CHECK(std::isnan(b.values(1, 4, 0)));
  CHECK_NOTHROW(b.validate(true));
  b.lengths[2] = 0;
  CHECK_THROWS_AS(b.validate(true), StructuralError);
  const auto picked = synth_random_uniform(3, 5, 1, 3).select(std::vector<std::size_t>{2});
  CHECK(picked.size() == 1);
}

TEST_CASE("archive datasets, when available") {
  const char* root = std::getenv("MARS_UCR_DIR");
  if (!root) return;
  const fs::path dir(root);
  if (fs::exists(dir / "JapaneseVowels")) {
    const auto ds = load_ts(dir / "JapaneseVowels");
    CHECK(ds.manifest.train_size == 270);
    CHECK(ds.manifest.test_size == 370);
    CHECK(ds.manifest.max_length == 29);
    CHECK(ds.manifest.num_classes == 9);
    CHECK(ds.manifest.input_dim == 12);
  }
  if (fs::exists(dir / "Wafer")) {
    const auto ds = load_ts(dir / "Wafer");
    CHECK(ds.manifest.train_size == 1000);
    CHECK(ds.manifest.test_size == 6164);
    CHECK(ds.manifest.max_length == 152);
    CHECK(ds.manifest.num_classes == 2);
    CHECK(ds.manifest.input_dim == 1);
  }
  if (fs::exists(dir / "GunPoint")) {
    const auto ds = load_ts(dir / "GunPoint");
    CHECK(ds.manifest.train_size == 50);
    CHECK(ds.manifest.test_size == 150);
    CHECK(ds.manifest.max_length == 150);
  }
}
