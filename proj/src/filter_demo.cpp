#include <cmath>
#include <fstream>
#include <numbers>

#include "mars/config_io.hpp"
#include "mars/experiments.hpp"
#include "mars/rng.hpp"

namespace mars {

std::vector<double> dft_magnitude(const std::vector<double>& signal) {
  const std::size_t n = signal.size();
  std::vector<double> mag(n / 2 + 1, 0.0);
  for (std::size_t k = 0; k < mag.size(); ++k) {
    double re = 0, im = 0;
    for (std::size_t t = 0; t < n; ++t) {
      // reduce the phase index first so large k*t stays exact
      const double phase = 2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      re += signal[t] * std::cos(phase);
      im -= signal[t] * std::sin(phase);
    }
    mag[k] = std::hypot(re, im);
  }
  return mag;
}

std::optional<double> spectral_centroid(const std::vector<double>& signal) {
  if (signal.size() < 2) return std::nullopt;
  double mean = 0;
  for (double v : signal) mean += v;
  mean /= static_cast<double>(signal.size());
  std::vector<double> centered(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i) centered[i] = signal[i] - mean;

  const auto mag = dft_magnitude(centered);
  const double n = static_cast<double>(signal.size());
  double weight = 0, moment = 0;
  for (std::size_t k = 1; k < mag.size(); ++k) {
    weight += mag[k];
    moment += mag[k] * static_cast<double>(k) / n;
  }
  // relative to the signal scale, anything this small is rounding noise
  double scale = 0;
  for (double v : signal) scale = std::max(scale, std::abs(v));
  if (!(weight > 1e-12 * std::max(scale, 1e-300) * n)) return std::nullopt;
  return moment / weight;
}

FilterDemoResult run_filter_demo(const FilterDemoOptions& o) {
  if (o.length < 2) throw ConfigError("filter-demo: length must be at least 2");
  if (o.layers == 0) throw ConfigError("filter-demo: layers must be positive");
  if (!(o.frequency >= 0 && o.frequency <= 0.5)) {
    throw ConfigError("filter-demo: frequency must lie in [0, 0.5] cycles per sample");
  }
  if (!(o.noise >= 0) || !std::isfinite(o.amplitude)) {
    throw ConfigError("filter-demo: noise must be non-negative and amplitude finite");
  }
  const DynamicsScalars dyn{o.gamma, o.delta};
  dyn.validate();
  const MemristiveConstants mc{};

  FilterDemoResult r;
  std::vector<double> u(o.length);
  auto rng = CounterRng::substream(o.seed, CounterRng::kSynthetic);
  for (std::size_t t = 0; t < o.length; ++t) {
    u[t] = o.amplitude * std::sin(2.0 * std::numbers::pi * o.frequency * static_cast<double>(t)) +
           o.noise * rng.normal();
  }
  r.carried.push_back(u);

  for (std::size_t l = 0; l < o.layers; ++l) {
    ScanCoefficients<double> coeffs{Tensor3<double>(1, o.length, 1), Tensor3<double>(1, o.length, 1)};
    mars_coefficients<double>(u, mc, dyn, coeffs.a.flat(), coeffs.b.flat());
    const auto seq = sequential_scan(coeffs);
    std::vector<double> h(seq.h.flat().begin(), seq.h.flat().end());
    for (std::size_t t = 0; t < o.length; ++t) u[t] -= h[t];
    r.memristive.push_back(std::move(h));
    r.carried.push_back(u);
  }

  r.centroid_increasing = true;
  for (const auto& signal : r.carried) {
    r.spectra.push_back(dft_magnitude(signal));
    r.centroids.push_back(spectral_centroid(signal));
  }
  for (std::size_t i = 0; i < r.centroids.size(); ++i) {
    if (!r.centroids[i] || (i > 0 && r.centroids[i - 1] && !(*r.centroids[i] > *r.centroids[i - 1]))) {
      r.centroid_increasing = false;
    }
  }
  return r;
}

void write_filter_demo(const std::filesystem::path& dir, const FilterDemoResult& r) {
  std::filesystem::create_directories(dir);
  const std::size_t layers = r.memristive.size();
  const std::size_t n = r.carried.front().size();

  std::ofstream sig(dir / "filter_signals.csv");
  if (!sig) throw std::runtime_error("cannot write " + (dir / "filter_signals.csv").string());
  sig.precision(12);
  sig << "t,u0";
  for (std::size_t l = 1; l <= layers; ++l) sig << ",h" << l << ",u" << l;
  sig << '\n';
  for (std::size_t t = 0; t < n; ++t) {
    sig << t << ',' << r.carried[0][t];
    for (std::size_t l = 1; l <= layers; ++l) sig << ',' << r.memristive[l - 1][t] << ',' << r.carried[l][t];
    sig << '\n';
  }

  std::ofstream spec(dir / "filter_spectra.csv");
  if (!spec) throw std::runtime_error("cannot write " + (dir / "filter_spectra.csv").string());
  spec.precision(12);
  spec << "bin,frequency";
  for (std::size_t l = 0; l <= layers; ++l) spec << ",mag_u" << l;
  spec << '\n';
  for (std::size_t k = 0; k < r.spectra.front().size(); ++k) {
    spec << k << ',' << static_cast<double>(k) / static_cast<double>(n);
    for (const auto& s : r.spectra) spec << ',' << s[k];
    spec << '\n';
  }

  nlohmann::json centroids = nlohmann::json::array();
  for (const auto& c : r.centroids) centroids.push_back(c ? nlohmann::json(*c) : nlohmann::json(nullptr));
  write_json_file(dir / "filter_summary.json",
                  {{"report", "filter-demo"},
                   {"layers", layers},
                   {"length", n},
                   {"centroids", centroids},
                   {"centroid_increasing", r.centroid_increasing}});
}

}  // namespace mars
