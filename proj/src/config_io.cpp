#include "mars/config_io.hpp"

#include <fstream>
#include <set>

namespace mars {
namespace {

using nlohmann::json;

template <typename T>
void take(const json& j, const char* key, T& field, std::set<std::string>& seen) {
  if (!j.contains(key)) return;
  seen.insert(key);
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& seen, const char* what) {
  for (const auto& item : j.items()) {
    if (!seen.contains(item.key())) {
      throw ConfigError(std::string(what) + ": unknown key '" + item.key() + "'");
    }
  }
}

}  // namespace

json to_json(const MarsConfig& c) {
  return {{"input_dim", c.input_dim},
          {"hidden_dim", c.hidden_dim},
          {"num_layers", c.num_layers},
          {"input_scaling", c.input_scaling},
          {"bias_scaling", c.bias_scaling},
          {"gamma", c.gamma},
          {"delta", c.delta},
          {"steepness", c.steepness},
          {"seed", c.seed},
          {"tc_enabled", c.tc_enabled},
          {"tc_channels", c.tc_channels},
          {"tc_kernel", c.tc_kernel},
          {"kp0", c.memristive.kp0},
          {"eta_p", c.memristive.eta_p},
          {"kd0", c.memristive.kd0},
          {"eta_d", c.memristive.eta_d},
          {"rescale_lower", c.rescale_lower},
          {"rescale_upper", c.rescale_upper}};
}

json to_json(const EsnConfig& c) {
  return {{"input_dim", c.input_dim},         {"hidden_dim", c.hidden_dim},
          {"leak", c.leak},                   {"spectral_radius", c.spectral_radius},
          {"input_scaling", c.input_scaling}, {"bias_scaling", c.bias_scaling},
          {"seed", c.seed}};
}

MarsConfig mars_config_from_json(const json& j, MarsConfig c) {
  if (!j.is_object()) throw ConfigError("mars config must be a JSON object");
  std::set<std::string> seen;
  take(j, "input_dim", c.input_dim, seen);
  take(j, "hidden_dim", c.hidden_dim, seen);
  take(j, "num_layers", c.num_layers, seen);
  take(j, "input_scaling", c.input_scaling, seen);
  take(j, "bias_scaling", c.bias_scaling, seen);
  take(j, "gamma", c.gamma, seen);
  take(j, "delta", c.delta, seen);
  take(j, "steepness", c.steepness, seen);
  take(j, "seed", c.seed, seen);
  take(j, "tc_enabled", c.tc_enabled, seen);
  take(j, "tc_channels", c.tc_channels, seen);
  take(j, "tc_kernel", c.tc_kernel, seen);
  take(j, "kp0", c.memristive.kp0, seen);
  take(j, "eta_p", c.memristive.eta_p, seen);
  take(j, "kd0", c.memristive.kd0, seen);
  take(j, "eta_d", c.memristive.eta_d, seen);
  take(j, "rescale_lower", c.rescale_lower, seen);
  take(j, "rescale_upper", c.rescale_upper, seen);
  reject_unknown(j, seen, "mars config");
  return c;
}

EsnConfig esn_config_from_json(const json& j, EsnConfig c) {
  if (!j.is_object()) throw ConfigError("esn config must be a JSON object");
  std::set<std::string> seen;
  take(j, "input_dim", c.input_dim, seen);
  take(j, "hidden_dim", c.hidden_dim, seen);
  take(j, "leak", c.leak, seen);
  take(j, "spectral_radius", c.spectral_radius, seen);
  take(j, "input_scaling", c.input_scaling, seen);
  take(j, "bias_scaling", c.bias_scaling, seen);
  take(j, "seed", c.seed, seen);
  reject_unknown(j, seen, "esn config");
  return c;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json to_json(const ModelArtifact& a) {
  json weights = json::array();
  for (Eigen::Index i = 0; i < a.readout.weights.rows(); ++i) {
    std::vector<double> row(a.readout.weights.row(i).data(),
                            a.readout.weights.row(i).data() + a.readout.weights.cols());
    weights.push_back(row);
  }
  return {{"format", "mars-model-artifact"},
          {"format_version", kArtifactFormatVersion},
          {"config", to_json(a.config)},
          {"class_labels", a.class_labels},
          {"normalization",
           {{"mode", to_string(a.normalization.mode)},
            {"offset", a.normalization.offset},
            {"scale", a.normalization.scale}}},
          {"readout",
           {{"lambda", a.readout.lambda},
            {"bias", a.readout.bias},
            {"standardize", !a.readout.feature_mean.empty()},
            {"num_classes", a.readout.num_classes},
            {"feature_mean", a.readout.feature_mean},
            {"feature_scale", a.readout.feature_scale},
            {"weights", weights}}}};
}

ModelArtifact artifact_from_json(const json& j) {
  if (j.value("format", "") != "mars-model-artifact") {
    throw ConfigError("not a model artifact (missing format tag)");
  }
  const int version = j.value("format_version", -1);
  if (version != kArtifactFormatVersion) {
    throw ConfigError("unsupported artifact format_version " + std::to_string(version));
  }
  ModelArtifact a;
  try {
    a.config = mars_config_from_json(j.at("config"));
    a.class_labels = j.at("class_labels").get<std::vector<std::string>>();
    const auto& norm = j.at("normalization");
    a.normalization.mode = parse_normalization(norm.at("mode").get<std::string>());
    a.normalization.offset = norm.at("offset").get<std::vector<double>>();
    a.normalization.scale = norm.at("scale").get<std::vector<double>>();
    const auto& r = j.at("readout");
    a.readout.lambda = r.at("lambda").get<double>();
    a.readout.bias = r.at("bias").get<bool>();
    a.readout.num_classes = r.at("num_classes").get<std::size_t>();
    a.readout.feature_mean = r.at("feature_mean").get<std::vector<double>>();
    a.readout.feature_scale = r.at("feature_scale").get<std::vector<double>>();
    const auto rows = r.at("weights").get<std::vector<std::vector<double>>>();
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    a.readout.weights.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != cols) throw ConfigError("artifact: ragged readout weights");
      for (std::size_t k = 0; k < cols; ++k) {
        a.readout.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("artifact: ") + e.what());
  }
  return a;
}

void save_artifact(const std::filesystem::path& path, const ModelArtifact& artifact) {
  write_json_file(path, to_json(artifact));
}

ModelArtifact load_artifact(const std::filesystem::path& path) {
  return artifact_from_json(read_json_file(path));
}

}  // namespace mars
