#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mars/dataset.hpp"
#include "mars/models.hpp"
#include "mars/readout.hpp"

namespace mars {

inline constexpr int kArtifactFormatVersion = 1;

nlohmann::json to_json(const MarsConfig& config);
nlohmann::json to_json(const EsnConfig& config);

/// Overlays the keys of `j` on `base`. Unknown keys are a ConfigError.
MarsConfig mars_config_from_json(const nlohmann::json& j, MarsConfig base = {});
EsnConfig esn_config_from_json(const nlohmann::json& j, EsnConfig base = {});

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

/// Everything needed to rebuild a trained classifier: the model is re-derived from
/// its config and seed, the readout is stored verbatim.
struct ModelArtifact {
  MarsConfig config;
  RidgeReadout readout;
  std::vector<std::string> class_labels;
  ChannelStats normalization;
};

nlohmann::json to_json(const ModelArtifact& artifact);
ModelArtifact artifact_from_json(const nlohmann::json& j);

void save_artifact(const std::filesystem::path& path, const ModelArtifact& artifact);
ModelArtifact load_artifact(const std::filesystem::path& path);

}  // namespace mars
