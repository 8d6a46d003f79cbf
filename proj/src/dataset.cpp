#include "mars/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "mars/rng.hpp"

namespace mars {

void TimeSeriesBatch::validate(bool allow_poisoned_padding) const {
  if (lengths.size() != size()) throw StructuralError("batch: one length per row required");
  if (!labels.empty() && labels.size() != size()) {
    throw StructuralError("batch: one label per row required");
  }
  for (std::size_t b = 0; b < size(); ++b) {
    if (lengths[b] == 0 || lengths[b] > max_time()) {
      throw StructuralError("batch: row " + std::to_string(b) + " has length " +
                            std::to_string(lengths[b]) + " outside [1, " +
                            std::to_string(max_time()) + "]");
    }
    for (std::size_t t = 0; t < max_time(); ++t) {
      const double* x = values.slot(b, t);
      for (std::size_t c = 0; c < channels(); ++c) {
        if (t < lengths[b]) {
          if (!std::isfinite(x[c])) {
            throw DomainError("batch: non-finite value at row " + std::to_string(b) + ", t " +
                              std::to_string(t));
          }
        } else if (!allow_poisoned_padding && x[c] != 0.0) {
          throw StructuralError("batch: padding of row " + std::to_string(b) + " is not zero");
        }
      }
    }
  }
}

TimeSeriesBatch TimeSeriesBatch::select(std::span<const std::size_t> indices) const {
  std::size_t longest = 0;
  for (std::size_t i : indices) {
    if (i >= size()) throw StructuralError("batch select: index out of range");
    longest = std::max(longest, lengths[i]);
  }
  TimeSeriesBatch out;
  out.values = Tensor3<double>(indices.size(), longest, channels());
  out.lengths.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t src = indices[r];
    for (std::size_t t = 0; t < lengths[src]; ++t) {
      std::copy_n(values.slot(src, t), channels(), out.values.slot(r, t));
    }
    out.lengths.push_back(lengths[src]);
    if (labeled()) out.labels.push_back(labels[src]);
  }
  return out;
}

TimeSeriesBatch TimeSeriesBatch::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw StructuralError("batch slice: bad range");
  std::vector<std::size_t> idx(end - begin);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
  return select(idx);
}

void TimeSeriesBatch::poison_padding() {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t b = 0; b < size(); ++b) {
    for (std::size_t t = lengths[b]; t < max_time(); ++t) {
      std::fill_n(values.slot(b, t), channels(), nan);
    }
  }
}

TimeSeriesBatch synth_random_uniform(std::size_t batch, std::size_t length, std::size_t channels,
                                     std::uint64_t seed) {
  if (batch == 0 || length == 0 || channels == 0) {
    throw StructuralError("synth_random_uniform: dimensions must be positive");
  }
  TimeSeriesBatch out;
  out.values = Tensor3<double>(batch, length, channels);
  auto rng = CounterRng::substream(seed, CounterRng::kSynthetic);
  for (double& x : out.values.flat()) x = rng.uniform();
  out.lengths.assign(batch, length);
  return out;
}

NormalizationMode parse_normalization(const std::string& name) {
  if (name == "none") return NormalizationMode::None;
  if (name == "zscore") return NormalizationMode::ZScore;
  if (name == "minmax") return NormalizationMode::MinMax;
  throw ConfigError("unknown normalization mode '" + name + "' (none, zscore, minmax)");
}

std::string to_string(NormalizationMode mode) {
  switch (mode) {
    case NormalizationMode::ZScore: return "zscore";
    case NormalizationMode::MinMax: return "minmax";
    case NormalizationMode::None: break;
  }
  return "none";
}

ChannelStats fit_normalization(const TimeSeriesBatch& train, NormalizationMode mode) {
  const std::size_t channels = train.channels();
  ChannelStats stats;
  stats.mode = mode;
  stats.offset.assign(channels, 0.0);
  stats.scale.assign(channels, 1.0);
  if (mode == NormalizationMode::None) return stats;

  std::vector<double> sum(channels, 0.0), sum_sq(channels, 0.0);
  std::vector<double> lo(channels, std::numeric_limits<double>::infinity());
  std::vector<double> hi(channels, -std::numeric_limits<double>::infinity());
  std::size_t count = 0;
  for (std::size_t b = 0; b < train.size(); ++b) {
    for (std::size_t t = 0; t < train.lengths[b]; ++t, ++count) {
      const double* x = train.values.slot(b, t);
      for (std::size_t c = 0; c < channels; ++c) {
        sum[c] += x[c];
        sum_sq[c] += x[c] * x[c];
        lo[c] = std::min(lo[c], x[c]);
        hi[c] = std::max(hi[c], x[c]);
      }
    }
  }
  if (count == 0) throw StructuralError("fit_normalization: empty training split");
  for (std::size_t c = 0; c < channels; ++c) {
    if (mode == NormalizationMode::ZScore) {
      const double mean = sum[c] / static_cast<double>(count);
      const double var = std::max(0.0, sum_sq[c] / static_cast<double>(count) - mean * mean);
      stats.offset[c] = mean;
      stats.scale[c] = std::sqrt(var) + kNormalizationEpsilon;
    } else {
      stats.offset[c] = lo[c];
      stats.scale[c] = (hi[c] - lo[c]) + kNormalizationEpsilon * (hi[c] == lo[c]);
    }
  }
  return stats;
}

TimeSeriesBatch normalize(const TimeSeriesBatch& batch, const ChannelStats& stats) {
  if (stats.offset.size() != batch.channels() || stats.scale.size() != batch.channels()) {
    throw StructuralError("normalize: statistics fitted on a different channel count");
  }
  TimeSeriesBatch out = batch;
  if (stats.mode == NormalizationMode::None) return out;
  for (std::size_t b = 0; b < out.size(); ++b) {
    for (std::size_t t = 0; t < out.lengths[b]; ++t) {
      double* x = out.values.slot(b, t);
      for (std::size_t c = 0; c < out.channels(); ++c) {
        x[c] = (x[c] - stats.offset[c]) / stats.scale[c];
      }
    }
  }
  return out;
}

DatasetManifest make_manifest(const std::string& name, const TimeSeriesBatch& train,
                              const TimeSeriesBatch& test,
                              const std::vector<std::string>& class_labels) {
  DatasetManifest m;
  m.name = name;
  m.train_size = train.size();
  m.test_size = test.size();
  m.max_length = std::max(train.max_time(), test.max_time());
  m.num_classes = class_labels.size();
  m.input_dim = train.channels();
  m.class_labels = class_labels;
  return m;
}

void check_manifest(const DatasetManifest& m, const TimeSeriesBatch& train,
                    const TimeSeriesBatch& test) {
  if (m.train_size != train.size() || m.test_size != test.size() ||
      m.max_length != std::max(train.max_time(), test.max_time()) ||
      m.input_dim != train.channels() || m.input_dim != test.channels() ||
      m.num_classes != m.class_labels.size()) {
    throw ConfigError("manifest '" + m.name + "' disagrees with the loaded tensors");
  }
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  nlohmann::json j;
  j["name"] = m.name;
  j["train_size"] = m.train_size;
  j["test_size"] = m.test_size;
  j["max_length"] = m.max_length;
  j["num_classes"] = m.num_classes;
  j["input_dim"] = m.input_dim;
  j["class_labels"] = m.class_labels;
  j["normalization"] = m.normalization;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest " + path.string());
  const auto j = nlohmann::json::parse(in);
  DatasetManifest m;
  m.name = j.at("name").get<std::string>();
  m.train_size = j.at("train_size").get<std::size_t>();
  m.test_size = j.at("test_size").get<std::size_t>();
  m.max_length = j.at("max_length").get<std::size_t>();
  m.num_classes = j.at("num_classes").get<std::size_t>();
  m.input_dim = j.at("input_dim").get<std::size_t>();
  m.class_labels = j.at("class_labels").get<std::vector<std::string>>();
  m.normalization = j.value("normalization", "none");
  return m;
}

}  // namespace mars
