#pragma once

#include <filesystem>
#include <initializer_list>
#include <set>
#include <string>
#include <type_traits>

#include <json.hpp>

#include "gridcast/data.hpp"
#include "gridcast/errors.hpp"
#include "gridcast/metrics.hpp"
#include "gridcast/model.hpp"
#include "gridcast/pso.hpp"
#include "gridcast/train.hpp"

namespace gridcast {

using json = nlohmann::ordered_json;

// Reads fields from a JSON object, remembering which keys were consumed so
// that finish() can reject anything unknown. Type errors and unknown keys
// raise ConfigError with a dotted path such as "model.n_heads".
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string path);

  template <typename T>
  bool get(const std::string& key, T& out) {
    const json* value = find(key);
    if (value == nullptr) return false;
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!value->is_number_unsigned()) throw ConfigError(qualified(key) + " must be a non-negative integer");
    }
    try {
      out = value->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(qualified(key) + " has the wrong type (" + value->type_name() + ")");
    }
    return true;
  }

  template <typename T>
  void require(const std::string& key, T& out) {
    if (!get(key, out)) throw ConfigError("missing required field " + qualified(key));
  }

  // Nullptr when absent; marks the key as consumed.
  const json* find(const std::string& key);
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const std::string& path() const { return path_; }
  void finish() const;

 private:
  const json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

json to_json(const ModelConfig& cfg);
void read_json(const json& j, ModelConfig& cfg, const std::string& path = "model");
json to_json(const TrainConfig& cfg);
void read_json(const json& j, TrainConfig& cfg, const std::string& path = "train");
json to_json(const PsoConfig& cfg);
void read_json(const json& j, PsoConfig& cfg, const std::string& path = "pso");
json to_json(const SearchSpace& space);
SearchSpace search_space_from_json(const json& j, const std::string& path = "pso.search_space");

json to_json(const NormalizationParams& norm);
NormalizationParams normalization_from_json(const json& j);
json to_json(const MetricsReport& m);
json to_json(const PreprocessSummary& s);
json to_json(const TrainReport& r);  // wall time is left out so reports are reproducible
json to_json(const CrossValidationReport& r);

// Preprocessed dataset cache: windows, index maps and normalization.
json dataset_to_json(const PreparedDataset& data);
PreparedDataset dataset_from_json(const json& j);

std::string read_text(const std::filesystem::path& path);
// Writes to a temporary sibling, then renames over the target.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const json& j);
json read_json_file(const std::filesystem::path& path);

}  // namespace gridcast
