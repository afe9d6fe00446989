#include "gridcast/run_config.hpp"

namespace gridcast {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  if (value.empty()) return {};
  std::filesystem::path p(value);
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

void read_data_section(const json& j, DataSection& data, const std::filesystem::path& base) {
  ObjectReader r(j, "data");
  std::string csv, cache;
  r.get("csv", csv);
  r.get("cache", cache);
  r.get("target", data.target);
  PipelineConfig& p = data.pipeline;
  r.get("window_len", p.window_len);
  r.get("horizon", p.horizon);
  r.get("stride", p.stride);
  r.get("max_missing_fraction", p.missing.max_fraction);
  r.get("allow_missing_excess", p.missing.allow_excess);
  r.get("iqr_k", p.iqr_k);
  if (const json* split = r.find("split")) {
    ObjectReader s(*split, "data.split");
    s.get("train", p.split.train);
    s.get("validation", p.split.validation);
    s.get("test", p.split.test);
    s.finish();
  }
  r.finish();
  data.csv = resolve(base, csv);
  data.cache = resolve(base, cache);
  if (p.window_len == 0) throw ConfigError("data.window_len must be >= 1");
  if (p.horizon == 0) throw ConfigError("data.horizon must be >= 1");
  if (p.stride == 0) throw ConfigError("data.stride must be >= 1");
  if (!(p.missing.max_fraction >= 0.0 && p.missing.max_fraction <= 1.0)) {
    throw ConfigError("data.max_missing_fraction must be in [0, 1]");
  }
  if (!(p.iqr_k > 0.0)) throw ConfigError("data.iqr_k must be positive");
}

}  // namespace

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  ObjectReader r(doc, "");
  if (const json* data = r.find("data")) read_data_section(*data, cfg.data, base_dir);
  if (const json* model = r.find("model")) {
    for (const char* key : {"window_len", "horizon", "input_features"}) {
      if (model->is_object() && model->contains(key)) {
        throw ConfigError(std::string("model.") + key + " is derived from the data; set it in the data section");
      }
    }
    read_json(*model, cfg.model, "model");
  }
  if (const json* train = r.find("train")) read_json(*train, cfg.train, "train");
  if (const json* pso = r.find("pso")) {
    ObjectReader p(*pso, "pso");
    json core = json::object();
    for (auto it = pso->begin(); it != pso->end(); ++it) {
      if (it.key() == "search_space") {
        cfg.search_space = search_space_from_json(*p.find("search_space"));
      } else if (it.key() == "budget_epochs") {
        p.get("budget_epochs", cfg.budget_epochs);
      } else {
        p.find(it.key());
        core[it.key()] = it.value();
      }
    }
    p.finish();
    read_json(core, cfg.pso, "pso");
  }
  std::string out;
  if (r.get("output_dir", out)) cfg.output_dir = resolve(base_dir, out);
  r.finish();

  cfg.model.window_len = cfg.data.pipeline.window_len;
  cfg.model.horizon = cfg.data.pipeline.horizon;
  // input_features is checked against the CSV once it is loaded.
  cfg.model.validate();
  cfg.train.validate();
  cfg.pso.validate();
  if (cfg.budget_epochs == 0) throw ConfigError("pso.budget_epochs must be >= 1");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const json doc = read_json_file(path);
  return parse_run_config(doc, path.parent_path());
}

void override_seeds(RunConfig& cfg, std::uint64_t seed) {
  cfg.model.seed = seed;
  cfg.train.seed = seed;
  cfg.pso.seed = seed;
}

}  // namespace gridcast
