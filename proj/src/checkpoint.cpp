#include "gridcast/checkpoint.hpp"

#include <map>

#include "gridcast/errors.hpp"
#include "gridcast/serialization.hpp"

namespace gridcast {

std::string checkpoint_to_string(const ModelParams& params, const ModelConfig& cfg, const NormalizationParams& norm) {
  json tensors = json::array();
  for (const auto& [name, tensor] : named_tensors(params)) {
    if (!tensor->all_finite()) throw NumericalError("cannot save non-finite tensor '" + name + "'");
    tensors.push_back(json{{"name", name}, {"shape", tensor->shape()}, {"data", tensor->values()}});
  }
  const json doc{{"format_version", kCheckpointVersion},
                 {"config", to_json(cfg)},
                 {"normalization", to_json(norm)},
                 {"tensors", std::move(tensors)}};
  return doc.dump() + "\n";
}

Checkpoint checkpoint_from_string(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedFileError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw MalformedFileError("checkpoint must be a JSON object");
  auto version = doc.find("format_version");
  if (version == doc.end() || !version->is_number_integer()) {
    throw MalformedFileError("checkpoint has no integer format_version");
  }
  if (version->get<long long>() != kCheckpointVersion) {
    throw VersionMismatchError("checkpoint format_version " + std::to_string(version->get<long long>()) +
                               " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }

  Checkpoint out;
  std::map<std::string, std::pair<Shape, std::vector<double>>> stored;
  try {
    ObjectReader r(doc, "");
    int v = 0;
    r.require("format_version", v);
    const json* config = r.find("config");
    const json* norm = r.find("normalization");
    const json* tensors = r.find("tensors");
    if (config == nullptr || norm == nullptr || tensors == nullptr) {
      throw ConfigError("checkpoint needs config, normalization and tensors");
    }
    r.finish();
    read_json(*config, out.config, "config");
    out.config.validate();
    out.norm = normalization_from_json(*norm);
    if (!tensors->is_array()) throw ConfigError("tensors must be an array");
    for (std::size_t i = 0; i < tensors->size(); ++i) {
      ObjectReader t((*tensors)[i], "tensors[" + std::to_string(i) + "]");
      std::string name;
      Shape shape;
      std::vector<double> data;
      t.require("name", name);
      t.require("shape", shape);
      t.require("data", data);
      t.finish();
      if (shape_size(shape) != data.size()) {
        throw ConfigError("tensor '" + name + "' declares " + shape_string(shape) + " but holds " +
                          std::to_string(data.size()) + " values");
      }
      if (!stored.emplace(name, std::make_pair(std::move(shape), std::move(data))).second) {
        throw ConfigError("duplicate tensor name '" + name + "'");
      }
    }
  } catch (const ConfigError& e) {
    throw MalformedFileError(std::string("malformed checkpoint: ") + e.what());
  }

  if (out.norm.columns() != out.config.input_features) {
    throw ShapeMismatchError("checkpoint normalization has " + std::to_string(out.norm.columns()) +
                             " columns but the config expects " + std::to_string(out.config.input_features));
  }
  ModelParams params = init_params(out.config);
  const auto expected = named_tensors(params);
  if (stored.size() != expected.size()) {
    throw ShapeMismatchError("checkpoint holds " + std::to_string(stored.size()) + " tensors, config implies " +
                             std::to_string(expected.size()));
  }
  for (const auto& [name, tensor] : expected) {
    auto it = stored.find(name);
    if (it == stored.end()) throw ShapeMismatchError("checkpoint is missing tensor '" + name + "'");
    if (it->second.first != tensor->shape()) {
      throw ShapeMismatchError("tensor '" + name + "': expected " + shape_string(tensor->shape()) + ", found " +
                               shape_string(it->second.first));
    }
    *tensor = Tensor(tensor->shape(), std::move(it->second.second));
  }
  out.params = std::move(params);
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const ModelConfig& cfg,
                     const NormalizationParams& norm) {
  write_text_atomic(path, checkpoint_to_string(params, cfg, norm));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_string(read_text(path)); }

}  // namespace gridcast
