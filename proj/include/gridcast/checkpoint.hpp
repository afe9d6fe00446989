#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "gridcast/data.hpp"
#include "gridcast/model.hpp"

namespace gridcast {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  NormalizationParams norm;
  ModelParams params;
};

// JSON document: format_version, config, normalization, tensors[{name, shape, data}].
// Doubles are written in shortest round-trip form, so loading is bit-exact.
std::string checkpoint_to_string(const ModelParams& params, const ModelConfig& cfg, const NormalizationParams& norm);

// Throws MalformedFileError for unparseable or structurally invalid input,
// VersionMismatchError for another format_version and ShapeMismatchError
// when the tensors disagree with the stored config.
Checkpoint checkpoint_from_string(std::string_view text);

// Written to a temporary sibling and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const ModelConfig& cfg,
                     const NormalizationParams& norm);
// Throws InputError if the file cannot be read.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gridcast
