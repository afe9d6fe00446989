#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gridcast/data.hpp"
#include "gridcast/model.hpp"
#include "gridcast/pso.hpp"
#include "gridcast/train.hpp"

namespace gridcast {

// Hyperparameter names the tuner knows how to apply.
// learning_rate, dropout, lstm_hidden, window_len, fc_units, batch_size,
// lstm_layers, n_encoder_layers.
SearchSpace default_search_space();

// Writes each decoded value into the matching config field. Throws
// ConfigError for an unknown dimension name.
void apply_hyperparameters(const SearchSpace& space, std::span<const double> position, ModelConfig& model,
                           TrainConfig& train);

// Provides the prepared dataset for a window length. Called concurrently
// when threads > 1, so implementations must be thread-safe.
using DatasetSource = std::function<std::shared_ptr<const PreparedDataset>(std::size_t window_len)>;

// Caches one prepared dataset per window length.
DatasetSource cached_source(std::function<PreparedDataset(std::size_t window_len)> build);

struct TuneSettings {
  SearchSpace space;
  PsoConfig pso;
  std::size_t budget_epochs = 20;
  ModelConfig base_model;
  TrainConfig base_train;
  std::size_t threads = 1;
};

struct TuneResult {
  ModelConfig best_model;
  TrainConfig best_train;
  double best_fitness = 0.0;
  PsoResult pso;
};

// Fitness of one candidate: denormalized validation RMSE of a fresh model
// trained for `budget_epochs` (early stopping still applies) with the
// candidate's hyperparameters. Seeds come from the swarm seed, the particle
// and the iteration. A non-finite loss or prediction scores +inf.
double candidate_fitness(const PreparedDataset& data, const ModelConfig& model, const TrainConfig& train,
                         std::size_t budget_epochs);

TuneResult tune_hyperparameters(const DatasetSource& source, const TuneSettings& settings);

// iteration, particle_id, fitness, one column per dimension, gbest.
std::string trace_csv(const SearchSpace& space, const PsoResult& result);

}  // namespace gridcast
