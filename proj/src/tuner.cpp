#include "gridcast/tuner.hpp"

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "gridcast/errors.hpp"

namespace gridcast {

SearchSpace default_search_space() {
  return SearchSpace({
      {"learning_rate", 1e-4, 1e-2, Scale::logarithmic, DimKind::continuous},
      {"dropout", 0.0, 0.6, Scale::linear, DimKind::continuous},
      {"lstm_hidden", 16, 256, Scale::logarithmic, DimKind::integer},
      {"window_len", 12, 96, Scale::linear, DimKind::integer},
  });
}

namespace {

std::size_t as_count(const std::string& name, double value) {
  if (!(value >= 1.0)) throw ConfigError("hyperparameter " + name + " decoded to " + std::to_string(value));
  return static_cast<std::size_t>(std::llround(value));
}

std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

}  // namespace

void apply_hyperparameters(const SearchSpace& space, std::span<const double> position, ModelConfig& model,
                           TrainConfig& train) {
  if (position.size() != space.size()) throw DimensionError("position does not match the search space");
  for (std::size_t i = 0; i < space.size(); ++i) {
    const std::string& name = space.dims()[i].name;
    const double v = position[i];
    if (name == "learning_rate") {
      train.learning_rate = v;
    } else if (name == "dropout") {
      model.dropout = v;
    } else if (name == "lstm_hidden") {
      model.lstm_hidden = as_count(name, v);
    } else if (name == "window_len") {
      model.window_len = as_count(name, v);
    } else if (name == "fc_units") {
      model.fc_units = as_count(name, v);
    } else if (name == "batch_size") {
      train.batch_size = as_count(name, v);
    } else if (name == "lstm_layers") {
      model.lstm_layers = as_count(name, v);
    } else if (name == "n_encoder_layers") {
      model.n_encoder_layers = as_count(name, v);
    } else {
      throw ConfigError("unknown hyperparameter '" + name + "' in search space");
    }
  }
}

DatasetSource cached_source(std::function<PreparedDataset(std::size_t window_len)> build) {
  struct Cache {
    std::mutex mutex;
    std::map<std::size_t, std::shared_ptr<const PreparedDataset>> entries;
  };
  auto cache = std::make_shared<Cache>();
  return [cache, build = std::move(build)](std::size_t window_len) {
    std::lock_guard lock(cache->mutex);
    auto it = cache->entries.find(window_len);
    if (it == cache->entries.end()) {
      it = cache->entries.emplace(window_len, std::make_shared<const PreparedDataset>(build(window_len))).first;
    }
    return it->second;
  };
}

double candidate_fitness(const PreparedDataset& data, const ModelConfig& model, const TrainConfig& train,
                         std::size_t budget_epochs) {
  TrainConfig tc = train;
  tc.max_epochs = budget_epochs;
  tc.patience = std::min(tc.patience, budget_epochs);
  try {
    FitResult fitted = fit(init_params(model), model, data.windows, data.split, tc);
    const Tensor pred = predict_windows(fitted.params, model, data.windows, data.split.validation);
    if (!pred.all_finite()) return std::numeric_limits<double>::infinity();
    return evaluate(fitted.params, model, data.windows, data.split.validation, data.norm).metrics.rmse;
  } catch (const NumericalError& e) {
    spdlog::warn("candidate training failed: {}", e.what());
    return std::numeric_limits<double>::infinity();
  }
}

TuneResult tune_hyperparameters(const DatasetSource& source, const TuneSettings& settings) {
  if (settings.budget_epochs == 0) throw ConfigError("pso.budget_epochs must be >= 1");
  if (settings.space.empty()) throw ConfigError("PSO search space is empty");
  {
    // Reject unknown names before any training starts.
    ModelConfig m = settings.base_model;
    TrainConfig t = settings.base_train;
    std::vector<double> lower;
    for (std::size_t i = 0; i < settings.space.size(); ++i) lower.push_back(settings.space.decode(i, 0.0));
    apply_hyperparameters(settings.space, lower, m, t);
  }

  const Objective objective = [&](const Candidate& c) {
    ModelConfig model = settings.base_model;
    TrainConfig train = settings.base_train;
    apply_hyperparameters(settings.space, c.position, model, train);
    model.seed = derive_seed(settings.pso.seed, {c.particle, c.iteration, 0});
    train.seed = derive_seed(settings.pso.seed, {c.particle, c.iteration, 1});
    const std::shared_ptr<const PreparedDataset> data = source(model.window_len);
    model.input_features = data->windows.features;
    model.horizon = data->windows.horizon;
    const double f = candidate_fitness(*data, model, train, settings.budget_epochs);
    spdlog::info("iteration {} particle {}: fitness {}", c.iteration, c.particle, f);
    return f;
  };

  TuneResult out;
  out.pso = optimize(objective, settings.space, settings.pso, {}, settings.threads);
  out.best_fitness = out.pso.best_fitness;
  out.best_model = settings.base_model;
  out.best_train = settings.base_train;
  apply_hyperparameters(settings.space, out.pso.best_position, out.best_model, out.best_train);
  return out;
}

std::string trace_csv(const SearchSpace& space, const PsoResult& result) {
  std::string out = "iteration,particle_id,fitness";
  for (const SearchDim& d : space.dims()) out += "," + d.name;
  out += ",gbest\n";
  for (const Evaluation& e : result.evaluations) {
    out += std::to_string(e.iteration) + "," + std::to_string(e.particle) + "," + number(e.fitness);
    for (double v : e.position) out += "," + number(v);
    out += "," + number(e.gbest_f) + "\n";
  }
  return out;
}

}  // namespace gridcast
