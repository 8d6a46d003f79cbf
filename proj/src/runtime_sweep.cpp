#include <omp.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <new>
#include <thread>

#include "mars/config_io.hpp"
#include "mars/experiments.hpp"

namespace mars {
namespace {

using Clock = std::chrono::steady_clock;

template <typename Scalar>
double time_forward(const RuntimeSweepOptions& o, std::size_t length) {
  const TimeSeriesBatch batch = synth_random_uniform(o.batch, length, o.input_dim, o.seed);

  std::function<void()> forward;
  MarsModel mars;
  EsnModel esn;
  MfEsnParams mf;
  ForwardOptions fo;
  fo.scan = o.scan;
  if (o.model == "mars") {
    MarsConfig c;
    c.input_dim = o.input_dim;
    c.hidden_dim = o.hidden;
    c.num_layers = o.layers;
    c.seed = o.seed;
    mars = init_mars(c);
    forward = [&] { (void)mars_forward<Scalar>(mars, batch, fo); };
  } else if (o.model == "esn") {
    EsnConfig c;
    c.input_dim = o.input_dim;
    c.hidden_dim = o.hidden;
    c.seed = o.seed;
    esn = init_esn(c);
    forward = [&] { (void)esn_forward<Scalar>(esn, batch); };
  } else if (o.model == "mf-esn") {
    MfEsnConfig c;
    c.input_dim = o.input_dim;
    c.hidden_dim = o.hidden;
    c.seed = o.seed;
    mf = init_mf_esn(c);
    forward = [&] { (void)mf_esn_forward<Scalar>(mf, batch); };
  } else {
    throw ConfigError("unknown model '" + o.model + "' (mars, esn, mf-esn)");
  }

  forward();  // warm-up, not timed
  double total = 0;
  for (std::size_t r = 0; r < o.repetitions; ++r) {
    const auto t0 = Clock::now();
    forward();
    total += std::chrono::duration<double>(Clock::now() - t0).count();
  }
  return total;
}

}  // namespace

Precision parse_precision(const std::string& name) {
  if (name == "f32") return Precision::F32;
  if (name == "f64") return Precision::F64;
  throw ConfigError("unknown precision '" + name + "' (f32, f64)");
}

std::string to_string(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

std::vector<std::size_t> default_runtime_grid(std::size_t max_length) {
  std::vector<std::size_t> grid;
  for (std::size_t len : {50, 100, 1000, 10000, 100000, 500000}) {
    if (len <= max_length) grid.push_back(len);
  }
  return grid;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw StructuralError("loglog_slope: need at least two matching points");
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw DomainError("loglog_slope: values must be positive");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

std::string hardware_note() {
  return std::to_string(std::thread::hardware_concurrency()) + " hardware threads, " +
         std::to_string(omp_get_max_threads()) + " OpenMP threads";
}

RuntimeReport run_runtime_sweep(const RuntimeSweepOptions& o, std::ostream* progress) {
  if (o.repetitions == 0 || o.batch == 0 || o.hidden == 0) {
    throw ConfigError("bench-runtime: repetitions, batch and hidden must be positive");
  }
  for (std::size_t i = 1; i < o.lengths.size(); ++i) {
    if (o.lengths[i] <= o.lengths[i - 1]) throw ConfigError("bench-runtime: lengths must increase");
  }
  RuntimeReport report;
  report.model = o.model;
  report.repetitions = o.repetitions;
  report.batch = o.batch;
  report.hidden = o.hidden;
  report.precision = to_string(o.precision);
  report.hardware = hardware_note();
  report.config = {{"model", o.model},         {"repetitions", o.repetitions},
                   {"batch", o.batch},         {"hidden", o.hidden},
                   {"layers", o.layers},       {"input_dim", o.input_dim},
                   {"seed", o.seed},           {"precision", to_string(o.precision)},
                   {"chunk_length", o.scan.chunk_length}, {"time_blocks", o.scan.time_blocks},
                   {"lengths", o.lengths}};

  for (std::size_t length : o.lengths) {
    report.lengths.push_back(length);
    try {
      const double s = o.precision == Precision::F32 ? time_forward<float>(o, length)
                                                     : time_forward<double>(o, length);
      report.seconds.push_back(s);
      report.failures.emplace_back();
      if (progress) *progress << o.model << " length " << length << ": " << s << " s\n";
    } catch (const std::bad_alloc&) {
      report.seconds.push_back(std::numeric_limits<double>::quiet_NaN());
      report.failures.emplace_back("out of memory");
      if (progress) *progress << o.model << " length " << length << ": out of memory\n";
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      report.seconds.push_back(std::numeric_limits<double>::quiet_NaN());
      report.failures.emplace_back(e.what());
      if (progress) *progress << o.model << " length " << length << ": failed: " << e.what() << '\n';
    }
  }
  return report;
}

nlohmann::json to_json(const RuntimeReport& r) {
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t i = 0; i < r.lengths.size(); ++i) {
    nlohmann::json p = {{"length", r.lengths[i]}};
    if (r.failures[i].empty()) {
      p["seconds"] = r.seconds[i];
    } else {
      p["seconds"] = nullptr;
      p["failure"] = r.failures[i];
    }
    points.push_back(p);
  }
  return {{"report", "runtime"},  {"model", r.model},       {"repetitions", r.repetitions},
          {"batch", r.batch},     {"hidden", r.hidden},     {"precision", r.precision},
          {"hardware", r.hardware}, {"config", r.config},  {"points", points}};
}

void write_runtime_report(const std::filesystem::path& dir, const std::string& stem,
                          const RuntimeReport& r) {
  std::filesystem::create_directories(dir);
  write_json_file(dir / (stem + ".json"), to_json(r));
  std::ofstream csv(dir / (stem + ".csv"));
  if (!csv) throw std::runtime_error("cannot write " + (dir / (stem + ".csv")).string());
  csv << "length,seconds\n";
  csv.precision(9);
  for (std::size_t i = 0; i < r.lengths.size(); ++i) {
    csv << r.lengths[i] << ',';
    if (r.failures[i].empty()) csv << r.seconds[i];
    csv << '\n';
  }
}

}  // namespace mars
