#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "gridcast/data.hpp"
#include "gridcast/model.hpp"
#include "gridcast/pso.hpp"
#include "gridcast/serialization.hpp"
#include "gridcast/train.hpp"
#include "gridcast/tuner.hpp"

namespace gridcast {

struct DataSection {
  std::filesystem::path csv;
  std::string target;
  std::filesystem::path cache;  // optional preprocessed dataset
  PipelineConfig pipeline;
};

// Everything a command needs. Relative paths are resolved against the
// directory holding the config file.
struct RunConfig {
  DataSection data;
  ModelConfig model;
  TrainConfig train;
  PsoConfig pso;
  SearchSpace search_space = default_search_space();
  std::size_t budget_epochs = 20;
  std::filesystem::path output_dir = "out";
};

// Strict: unknown keys and wrong types raise ConfigError. The model
// section may not set window_len, horizon or input_features; those follow
// the data section and the CSV.
RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// --seed: one value for the model, training and swarm seeds.
void override_seeds(RunConfig& cfg, std::uint64_t seed);

}  // namespace gridcast
