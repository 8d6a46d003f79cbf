#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mars/rng.hpp"
#include "mars/scan.hpp"

using namespace mars;

namespace {

ScanCoefficients<double> series(const std::vector<double>& a, const std::vector<double>& b) {
  ScanCoefficients<double> c{Tensor3<double>(1, a.size(), 1), Tensor3<double>(1, b.size(), 1)};
  for (std::size_t t = 0; t < a.size(); ++t) {
    c.a(0, t, 0) = a[t];
    c.b(0, t, 0) = b[t];
  }
  return c;
}

ScanCoefficients<double> random_coeffs(std::size_t batch, std::size_t time, std::size_t width,
                                       std::uint64_t seed) {
  auto rng = CounterRng::substream(seed, CounterRng::kSynthetic, 7);
  ScanCoefficients<double> c{Tensor3<double>(batch, time, width), Tensor3<double>(batch, time, width)};
  for (auto& v : c.a.flat()) v = 1.0 - rng.uniform();
  for (auto& v : c.b.flat()) v = 10.0 * (1.0 - rng.uniform());
  return c;
}

double max_rel(std::span<const double> x, std::span<const double> ref) {
  double worst = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = std::abs(x[i] - ref[i]);
    worst = std::max(worst, ref[i] != 0 ? d / std::abs(ref[i]) : d);
  }
  return worst;
}

}  // namespace

TEST_CASE("sequential scan small cases") {
  auto cumsum = sequential_scan(series({1, 1, 1}, {1, 2, 3}));
  CHECK(cumsum.h(0, 0, 0) == 1);
  CHECK(cumsum.h(0, 1, 0) == 3);
  CHECK(cumsum.h(0, 2, 0) == 6);

  auto geo = sequential_scan(series({0.5, 0.5, 0.5}, {0.25, 0.25, 0.25}));
  CHECK(geo.h(0, 0, 0) == doctest::Approx(0.25));
  CHECK(geo.h(0, 1, 0) == doctest::Approx(0.375));
  CHECK(geo.h(0, 2, 0) == doctest::Approx(0.4375));

  MatrixRM<double> h0(1, 1);
  h0(0, 0) = 1;
  auto decay = sequential_scan(series({0.5, 0.5, 0.5, 0.5}, {0, 0, 0, 0}), h0);
  for (std::size_t t = 0; t < 4; ++t) CHECK(decay.h(0, t, 0) == std::pow(0.5, t + 1.0));
}

TEST_CASE("log scan matches the small cases") {
  const auto check = [](const ScanCoefficients<double>& c) {
    const auto ref = sequential_scan(c);
    const auto got = parallel_scan_log(c);
    CHECK(max_rel(got.h.flat(), ref.h.flat()) < 1e-9);
  };
  check(series({1, 1, 1}, {1, 2, 3}));
  check(series({0.5, 0.5, 0.5}, {0.25, 0.25, 0.25}));

  // b = 0 is outside the log domain, so pure decay goes through h0 with a tiny forcing
  MatrixRM<double> h0(1, 1);
  h0(0, 0) = 1;
  const auto c = series({0.5, 0.5, 0.5, 0.5}, {1e-300, 1e-300, 1e-300, 1e-300});
  const auto got = parallel_scan_log(c, h0);
  for (std::size_t t = 0; t < 4; ++t) CHECK(got.h(0, t, 0) == doctest::Approx(std::pow(0.5, t + 1.0)));
}

TEST_CASE("first step multiplies h0 exactly once") {
  MatrixRM<double> h0(1, 1);
  h0(0, 0) = 2;
  const auto c = series({0.3, 0.7}, {0.1, 0.2});
  const auto seq = sequential_scan(c, h0);
  const auto par = parallel_scan_log(c, h0);
  CHECK(seq.h(0, 0, 0) == doctest::Approx(0.3 * 2 + 0.1));
  CHECK(par.h(0, 0, 0) == doctest::Approx(0.7));
  CHECK(par.h(0, 1, 0) == doctest::Approx(0.7 * 0.7 + 0.2));
}

TEST_CASE("randomized equivalence, T = 1000, hidden 64") {
  const auto c = random_coeffs(2, 1000, 64, 3);
  CHECK(max_rel(parallel_scan_log(c).h.flat(), sequential_scan(c).h.flat()) < 1e-6);
}

TEST_CASE("float log scan against double oracle") {
  const auto c = random_coeffs(2, 777, 16, 4);
  ScanCoefficients<float> cf{c.a.cast<float>(), c.b.cast<float>()};
  const auto got = parallel_scan_log(cf);
  ScanCoefficients<double> rounded{cf.a.cast<double>(), cf.b.cast<double>()};
  const auto ref = sequential_scan(rounded);
  const auto gd = got.h.cast<double>();
  CHECK(max_rel(gd.flat(), ref.h.flat()) < 1e-3);
}

TEST_CASE("extreme coefficient range stays accurate") {
  auto rng = CounterRng::substream(9, CounterRng::kSynthetic);
  ScanCoefficients<double> c{Tensor3<double>(1, 4096, 4), Tensor3<double>(1, 4096, 4)};
  for (auto& v : c.a.flat()) v = std::pow(10.0, rng.uniform(-6, 0));
  for (auto& v : c.b.flat()) v = std::pow(10.0, rng.uniform(-6, 2));
  CHECK(max_rel(parallel_scan_log(c).h.flat(), sequential_scan(c).h.flat()) < 1e-6);
}

TEST_CASE("result does not depend on chunking") {
  const auto c = random_coeffs(3, 500, 5, 11);
  MatrixRM<double> h0 = MatrixRM<double>::Constant(3, 5, 0.5);
  const auto ref = sequential_scan(c, h0);
  for (std::size_t chunk : {1, 2, 13, 100, 500, 10000}) {
    for (std::size_t blocks : {1, 2, 7, 64}) {
      ScanOptions o;
      o.chunk_length = chunk;
      o.time_blocks = blocks;
      CHECK(max_rel(parallel_scan_log(c, h0, {}, o).h.flat(), ref.h.flat()) < 1e-9);
    }
  }
}

TEST_CASE("ragged rows stop at their length") {
  const auto c = random_coeffs(3, 50, 4, 12);
  const std::vector<std::size_t> lengths{50, 1, 23};
  const auto seq = sequential_scan(c, {}, lengths);
  const auto par = parallel_scan_log(c, {}, lengths);
  CHECK(max_rel(par.h.flat(), seq.h.flat()) < 1e-9);
  for (std::size_t t = 1; t < 50; ++t) CHECK(par.h(1, t, 2) == 0);
  for (std::size_t t = 23; t < 50; ++t) CHECK(seq.h(2, t, 0) == 0);
  CHECK(seq.h(1, 0, 3) == doctest::Approx(c.b(1, 0, 3)));
}

TEST_CASE("non-positive coefficients name the first offending index") {
  auto c = random_coeffs(2, 10, 3, 13);
  c.a(1, 4, 2) = 0;
  c.b(1, 6, 0) = -1;
  try {
    parallel_scan_log(c);
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("batch 1, t 4, unit 2") != std::string::npos);
  }
  c = random_coeffs(1, 5, 2, 14);
  c.b(0, 3, 1) = std::nan("");
  CHECK_THROWS_AS(parallel_scan_log(c), DomainError);
}

TEST_CASE("negative h0 is rejected") {
  const auto c = random_coeffs(1, 5, 2, 15);
  MatrixRM<double> h0(1, 2);
  h0 << 0.1, -0.1;
  CHECK_THROWS_AS(parallel_scan_log(c, h0), DomainError);
}

TEST_CASE("shape errors") {
  ScanCoefficients<double> c{Tensor3<double>(1, 4, 2, 0.5), Tensor3<double>(1, 3, 2, 0.5)};
  CHECK_THROWS_AS(sequential_scan(c), StructuralError);
  CHECK_THROWS_AS(parallel_scan_log(c), StructuralError);
  const auto ok = random_coeffs(2, 4, 2, 16);
  const MatrixRM<double> short_h0 = MatrixRM<double>::Zero(1, 2);
  CHECK_THROWS_AS(parallel_scan_log(ok, short_h0), StructuralError);
  const std::vector<std::size_t> bad{4, 5};
  CHECK_THROWS_AS(sequential_scan(ok, {}, bad), StructuralError);
}

TEST_CASE("decay without forcing never grows") {
  MatrixRM<double> h0 = MatrixRM<double>::Constant(1, 3, 1.0);
  auto c = random_coeffs(1, 200, 3, 17);
  for (auto& v : c.b.flat()) v = 0;
  const auto seq = sequential_scan(c, h0);
  for (std::size_t t = 1; t < 200; ++t) {
    double now = 0, before = 0;
    for (std::size_t w = 0; w < 3; ++w) {
      now += seq.h(0, t, w) * seq.h(0, t, w);
      before += seq.h(0, t - 1, w) * seq.h(0, t - 1, w);
    }
    CHECK(now <= before);
  }
}

TEST_CASE("last_state") {
  const auto c = random_coeffs(3, 6, 2, 18);
  const auto seq = sequential_scan(c);
  const auto full = last_state(seq);
  CHECK(full(1, 1) == seq.h(1, 5, 1));
  const std::vector<std::size_t> lengths{1, 6, 3};
  const auto mixed = last_state(seq.h, lengths);
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t w = 0; w < 2; ++w) CHECK(mixed(b, w) == seq.h(b, lengths[b] - 1, w));
  }
  const std::vector<std::size_t> zero{1, 0, 3};
  CHECK_THROWS_AS(last_state(seq.h, zero), StructuralError);
  const std::vector<std::size_t> over{1, 7, 3};
  CHECK_THROWS_AS(last_state(seq.h, over), StructuralError);
}

TEST_CASE("log-space affine composition and tree scan") {
  // segments h -> A h + B as (log A, log(B / A))
  const auto seg = [](double a, double b) { return LogAffine<double>{std::log(a), std::log(b / a)}; };
  const auto both = combine(seg(0.5, 1.0), seg(2.0, 3.0));
  // 2 * (0.5 h + 1) + 3 = h + 5
  CHECK(std::exp(both.apply(std::log(4.0))) == doctest::Approx(9.0));
  CHECK(std::exp(LogAffine<double>::identity().apply(std::log(4.0))) == doctest::Approx(4.0));

  std::vector<int> v{3, 1, 4, 1, 5, 9, 2};
  const auto levels = blelloch_exclusive_scan(v, 0, [](int x, int y) { return x + y; });
  CHECK(v == std::vector<int>{0, 3, 4, 8, 9, 14, 23});
  CHECK(levels == 6);

  std::vector<LogAffine<double>> segs{seg(0.9, 0.1), seg(0.8, 0.3), seg(0.7, 0.2)};
  blelloch_exclusive_scan(segs, LogAffine<double>::identity(),
                          [](const auto& x, const auto& y) { return combine(x, y); });
  // entry state of the third segment from h0 = 1: 0.8 * (0.9 + 0.1) + 0.3
  CHECK(std::exp(segs[2].apply(0.0)) == doctest::Approx(1.1));
}

TEST_CASE("trace CSV") {
  const auto path = std::filesystem::temp_directory_path() / "mars_scan_trace_test.csv";
  ScanOptions o;
  o.trace_csv = path.string();
  parallel_scan_log(series({0.5, 0.5}, {0.25, 0.25}), {}, {}, o);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "t,unit,alpha,beta,h");
  CHECK(row.rfind("1,0,", 0) == 0);
  std::filesystem::remove(path);
}
