#include "gridcast/serialization.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

namespace gridcast {

ObjectReader::ObjectReader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
  if (!object_.is_object()) {
    throw ConfigError((path_.empty() ? std::string("document") : path_) + " must be a JSON object");
  }
}

const json* ObjectReader::find(const std::string& key) {
  auto it = object_.find(key);
  if (it == object_.end()) return nullptr;
  seen_.insert(key);
  return &*it;
}

void ObjectReader::finish() const {
  for (auto it = object_.begin(); it != object_.end(); ++it) {
    if (!seen_.contains(it.key())) throw ConfigError("unknown key " + qualified(it.key()));
  }
}

json to_json(const ModelConfig& cfg) {
  return json{{"input_features", cfg.input_features},
              {"window_len", cfg.window_len},
              {"horizon", cfg.horizon},
              {"d_model", cfg.d_model},
              {"n_encoder_layers", cfg.n_encoder_layers},
              {"n_heads", cfg.n_heads},
              {"d_ff", cfg.d_ff},
              {"lstm_layers", cfg.lstm_layers},
              {"lstm_hidden", cfg.lstm_hidden},
              {"fc_units", cfg.fc_units},
              {"dropout", cfg.dropout},
              {"norm_eps", cfg.norm_eps},
              {"seed", cfg.seed}};
}

void read_json(const json& j, ModelConfig& cfg, const std::string& path) {
  ObjectReader r(j, path);
  r.get("input_features", cfg.input_features);
  r.get("window_len", cfg.window_len);
  r.get("horizon", cfg.horizon);
  r.get("d_model", cfg.d_model);
  r.get("n_encoder_layers", cfg.n_encoder_layers);
  r.get("n_heads", cfg.n_heads);
  r.get("d_ff", cfg.d_ff);
  r.get("lstm_layers", cfg.lstm_layers);
  r.get("lstm_hidden", cfg.lstm_hidden);
  r.get("fc_units", cfg.fc_units);
  r.get("dropout", cfg.dropout);
  r.get("norm_eps", cfg.norm_eps);
  r.get("seed", cfg.seed);
  r.finish();
}

json to_json(const TrainConfig& cfg) {
  return json{{"learning_rate", cfg.learning_rate}, {"batch_size", cfg.batch_size},
              {"max_epochs", cfg.max_epochs},       {"patience", cfg.patience},
              {"min_delta", cfg.min_delta},         {"adam_beta1", cfg.adam_beta1},
              {"adam_beta2", cfg.adam_beta2},       {"adam_eps", cfg.adam_eps},
              {"seed", cfg.seed}};
}

void read_json(const json& j, TrainConfig& cfg, const std::string& path) {
  ObjectReader r(j, path);
  r.get("learning_rate", cfg.learning_rate);
  r.get("batch_size", cfg.batch_size);
  r.get("max_epochs", cfg.max_epochs);
  r.get("patience", cfg.patience);
  r.get("min_delta", cfg.min_delta);
  r.get("adam_beta1", cfg.adam_beta1);
  r.get("adam_beta2", cfg.adam_beta2);
  r.get("adam_eps", cfg.adam_eps);
  r.get("seed", cfg.seed);
  r.finish();
}

json to_json(const PsoConfig& cfg) {
  return json{{"n_particles", cfg.n_particles}, {"t_max", cfg.t_max}, {"c1", cfg.c1},
              {"c2", cfg.c2},                   {"w_max", cfg.w_max}, {"w_min", cfg.w_min},
              {"v_max", cfg.v_max},             {"seed", cfg.seed}};
}

void read_json(const json& j, PsoConfig& cfg, const std::string& path) {
  ObjectReader r(j, path);
  r.get("n_particles", cfg.n_particles);
  r.get("t_max", cfg.t_max);
  r.get("c1", cfg.c1);
  r.get("c2", cfg.c2);
  r.get("w_max", cfg.w_max);
  r.get("w_min", cfg.w_min);
  r.get("v_max", cfg.v_max);
  r.get("seed", cfg.seed);
  r.finish();
}

json to_json(const SearchSpace& space) {
  json out = json::array();
  for (const SearchDim& d : space.dims()) {
    out.push_back(json{{"name", d.name},
                       {"lower", d.lower},
                       {"upper", d.upper},
                       {"scale", d.scale == Scale::logarithmic ? "log" : "linear"},
                       {"kind", d.kind == DimKind::integer ? "integer" : "continuous"}});
  }
  return out;
}

SearchSpace search_space_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + " must be an array");
  std::vector<SearchDim> dims;
  for (std::size_t i = 0; i < j.size(); ++i) {
    ObjectReader r(j[i], path + "[" + std::to_string(i) + "]");
    SearchDim d;
    std::string scale = "linear", kind = "continuous";
    r.require("name", d.name);
    r.require("lower", d.lower);
    r.require("upper", d.upper);
    r.get("scale", scale);
    r.get("kind", kind);
    r.finish();
    if (scale == "log") {
      d.scale = Scale::logarithmic;
    } else if (scale != "linear") {
      throw ConfigError(r.qualified("scale") + " must be \"linear\" or \"log\"");
    }
    if (kind == "integer") {
      d.kind = DimKind::integer;
    } else if (kind != "continuous") {
      throw ConfigError(r.qualified("kind") + " must be \"continuous\" or \"integer\"");
    }
    dims.push_back(std::move(d));
  }
  return SearchSpace(std::move(dims));
}

json to_json(const NormalizationParams& norm) {
  return json{{"names", norm.names}, {"mean", norm.mean}, {"std", norm.std}, {"target_index", norm.target_index}};
}

NormalizationParams normalization_from_json(const json& j) {
  ObjectReader r(j, "normalization");
  NormalizationParams norm;
  r.require("names", norm.names);
  r.require("mean", norm.mean);
  r.require("std", norm.std);
  r.require("target_index", norm.target_index);
  r.finish();
  if (norm.mean.size() != norm.names.size() || norm.std.size() != norm.names.size()) {
    throw ConfigError("normalization arrays have different lengths");
  }
  if (norm.target_index >= norm.names.size()) throw ConfigError("normalization.target_index out of range");
  for (double s : norm.std) {
    if (!(s > 0.0)) throw ConfigError("normalization.std must be positive");
  }
  return norm;
}

json to_json(const MetricsReport& m) {
  return json{{"rmse", m.rmse}, {"mae", m.mae}, {"smape_percent", m.smape}, {"r2", m.r2}, {"n", m.n}};
}

json to_json(const PreprocessSummary& s) {
  return json{{"rows_in", s.rows_in},
              {"rows_dropped", s.rows_dropped},
              {"values_interpolated", s.values_interpolated},
              {"values_clipped", s.values_clipped},
              {"split_rows", json{{"train", s.split_rows[0]}, {"validation", s.split_rows[1]}, {"test", s.split_rows[2]}}},
              {"split_windows",
               json{{"train", s.split_windows[0]}, {"validation", s.split_windows[1]}, {"test", s.split_windows[2]}}}};
}

json to_json(const TrainReport& r) {
  json out{{"epochs_run", r.epochs_run()},
           {"best_epoch", r.best_epoch},
           {"best_val_loss", r.best_val_loss},
           {"stop_reason", r.stop_reason == StopReason::early_stop ? "early_stop" : "max_epochs"},
           {"optimizer_steps", r.optimizer_steps},
           {"train_loss", r.train_loss},
           {"val_loss", r.val_loss}};
  if (r.test_metrics) out["test_metrics"] = to_json(*r.test_metrics);
  return out;
}

json to_json(const CrossValidationReport& r) {
  json folds = json::array();
  for (const MetricsReport& m : r.folds) folds.push_back(to_json(m));
  return json{{"k", r.folds.size()}, {"folds", folds}, {"mean", to_json(r.mean)}, {"std", to_json(r.stddev)}};
}

json dataset_to_json(const PreparedDataset& data) {
  const WindowedDataset& w = data.windows;
  return json{{"format_version", 1},
              {"window_len", w.window_len},
              {"horizon", w.horizon},
              {"features", w.features},
              {"target_rows", w.target_rows},
              {"target_timestamps", w.target_timestamps},
              {"inputs", w.inputs},
              {"targets", w.targets},
              {"split", json{{"train", data.split.train}, {"validation", data.split.validation}, {"test", data.split.test}}},
              {"normalization", to_json(data.norm)},
              {"summary", to_json(data.summary)}};
}

PreparedDataset dataset_from_json(const json& j) {
  PreparedDataset out;
  try {
    ObjectReader r(j, "");
    int version = 0;
    r.require("format_version", version);
    if (version != 1) throw ConfigError("unsupported dataset cache version " + std::to_string(version));
    WindowedDataset& w = out.windows;
    r.require("window_len", w.window_len);
    r.require("horizon", w.horizon);
    r.require("features", w.features);
    r.require("target_rows", w.target_rows);
    r.require("target_timestamps", w.target_timestamps);
    r.require("inputs", w.inputs);
    r.require("targets", w.targets);
    const json* split = r.find("split");
    if (split == nullptr) throw ConfigError("missing required field split");
    ObjectReader sr(*split, "split");
    sr.require("train", out.split.train);
    sr.require("validation", out.split.validation);
    sr.require("test", out.split.test);
    sr.finish();
    const json* norm = r.find("normalization");
    if (norm == nullptr) throw ConfigError("missing required field normalization");
    out.norm = normalization_from_json(*norm);
    const json* summary = r.find("summary");
    if (summary == nullptr) throw ConfigError("missing required field summary");
    ObjectReader s(*summary, "summary");
    s.require("rows_in", out.summary.rows_in);
    s.require("rows_dropped", out.summary.rows_dropped);
    s.require("values_interpolated", out.summary.values_interpolated);
    s.require("values_clipped", out.summary.values_clipped);
    for (const char* key : {"split_rows", "split_windows"}) {
      const json* part = s.find(key);
      if (part == nullptr) throw ConfigError(std::string("missing required field summary.") + key);
      auto& target = std::string(key) == "split_rows" ? out.summary.split_rows : out.summary.split_windows;
      ObjectReader pr(*part, std::string("summary.") + key);
      pr.require("train", target[0]);
      pr.require("validation", target[1]);
      pr.require("test", target[2]);
      pr.finish();
    }
    s.finish();
    r.finish();
  } catch (const ConfigError& e) {
    throw InputError(std::string("dataset cache: ") + e.what());
  }
  const WindowedDataset& w = out.windows;
  const std::size_t n = w.target_rows.size();
  if (w.inputs.size() != n * w.window_len * w.features || w.targets.size() != n * w.horizon ||
      w.target_timestamps.size() != n || w.features != out.norm.columns()) {
    throw InputError("dataset cache: array sizes are inconsistent");
  }
  for (const auto* part : {&out.split.train, &out.split.validation, &out.split.test}) {
    for (std::size_t i : *part) {
      if (i >= n) throw InputError("dataset cache: split index out of range");
    }
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write file: " + tmp.string());
    out << text;
    if (!out) throw InputError("failed writing file: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InputError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_json(const std::filesystem::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace gridcast
