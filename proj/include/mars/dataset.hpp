#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mars/tensor.hpp"

namespace mars {

/// Batch of multivariate sequences, right-padded with zeros to a common length.
struct TimeSeriesBatch {
  Tensor3<double> values;            // [batch x max_time x channels]
  std::vector<std::size_t> lengths;  // valid steps per row, 1..max_time
  std::vector<int> labels;           // class index per row, empty when unlabeled

  std::size_t size() const { return values.batch(); }
  std::size_t max_time() const { return values.time(); }
  std::size_t channels() const { return values.width(); }
  bool labeled() const { return !labels.empty(); }

  /// Throws StructuralError/DomainError if an invariant is broken.
  /// `allow_poisoned_padding` skips the zero-padding check.
  void validate(bool allow_poisoned_padding = false) const;

  /// Rows in `indices`, trimmed to the longest selected row.
  TimeSeriesBatch select(std::span<const std::size_t> indices) const;
  TimeSeriesBatch slice(std::size_t begin, std::size_t end) const;

  /// Debug aid: fills every padding slot with NaN.
  void poison_padding();
};

struct DatasetManifest {
  std::string name;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::size_t max_length = 0;
  std::size_t num_classes = 0;
  std::size_t input_dim = 0;
  std::vector<std::string> class_labels;
  std::string normalization = "none";

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct LabeledSplit {
  TimeSeriesBatch batch;
  std::vector<std::string> class_labels;
  std::string problem_name;
};

struct Dataset {
  TimeSeriesBatch train;
  TimeSeriesBatch test;
  DatasetManifest manifest;
};

/// Parses one sktime-style `.ts` file. Labels map to 0-based indices in the order
/// of the header's @classLabel list.
LabeledSplit read_ts_file(const std::filesystem::path& path);

/// Loads `<Name>_TRAIN.ts` and `<Name>_TEST.ts`. `path` may be the dataset directory
/// `<dir>/<Name>`, either split file, or the common prefix `<dir>/<Name>`.
Dataset load_ts(const std::filesystem::path& path);

struct CsvSchema {
  bool has_header = false;
  bool label_first = true;  // otherwise unlabeled rows
  char delimiter = ',';
};

/// One sequence per row, optional label in the first column. Empty trailing cells
/// shorten the row (ragged input). Labels map to indices in first-appearance order.
LabeledSplit load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

/// Writes a univariate batch in the `load_csv` layout (label first when present).
void write_csv(const std::filesystem::path& path, const TimeSeriesBatch& batch,
               std::span<const std::string> class_labels);

/// Uniform [0, 1) values, all rows full length.
TimeSeriesBatch synth_random_uniform(std::size_t batch, std::size_t length, std::size_t channels,
                                     std::uint64_t seed);

enum class NormalizationMode { None, ZScore, MinMax };

NormalizationMode parse_normalization(const std::string& name);
std::string to_string(NormalizationMode mode);

/// Per-channel statistics over the valid region of a training split.
struct ChannelStats {
  NormalizationMode mode = NormalizationMode::None;
  std::vector<double> offset;
  std::vector<double> scale;
};

inline constexpr double kNormalizationEpsilon = 1e-8;

ChannelStats fit_normalization(const TimeSeriesBatch& train, NormalizationMode mode);

/// (x - offset) / scale over valid steps; padding stays zero.
TimeSeriesBatch normalize(const TimeSeriesBatch& batch, const ChannelStats& stats);

DatasetManifest make_manifest(const std::string& name, const TimeSeriesBatch& train,
                              const TimeSeriesBatch& test,
                              const std::vector<std::string>& class_labels);

/// Throws ConfigError when the manifest disagrees with the tensors.
void check_manifest(const DatasetManifest& manifest, const TimeSeriesBatch& train,
                    const TimeSeriesBatch& test);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace mars
