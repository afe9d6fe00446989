#include "gridcast/commands.hpp"

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "gridcast/errors.hpp"
#include "gridcast/tuner.hpp"

namespace gridcast {

namespace {

std::string number(double v) { return fmt::format("{}", v); }

ModelConfig model_for(const RunConfig& cfg, const PreparedDataset& data) {
  ModelConfig model = cfg.model;
  model.input_features = data.windows.features;
  model.window_len = data.windows.window_len;
  model.horizon = data.windows.horizon;
  return model;
}

void write_predictions(const std::filesystem::path& dir, const EvaluationResult& eval, std::size_t horizon, bool plot) {
  write_text_atomic(dir / artifacts::kPredictions, predictions_csv(eval.timestamps, eval.actual, eval.predicted, horizon));
  if (plot) write_text_atomic(dir / artifacts::kPlot, line_chart_svg(eval.actual, eval.predicted));
}

}  // namespace

PreparedDataset prepare_from_csv(const RunConfig& cfg, const NormalizationParams* fixed_norm) {
  if (cfg.data.csv.empty()) throw ConfigError("data.csv is required");
  const RawSeries raw = load_csv(cfg.data.csv, cfg.data.target);
  PreparedDataset data = prepare_dataset(raw, cfg.data.pipeline, fixed_norm);
  spdlog::info("{}: {} rows, {} windows (train {}, validation {}, test {})", cfg.data.csv.string(), raw.rows(),
               data.windows.size(), data.split.train.size(), data.split.validation.size(), data.split.test.size());
  return data;
}

PreparedDataset load_dataset(const RunConfig& cfg, const NormalizationParams* fixed_norm) {
  if (!cfg.data.cache.empty() && std::filesystem::exists(cfg.data.cache)) {
    PreparedDataset data = dataset_from_json(read_json_file(cfg.data.cache));
    if (data.windows.window_len != cfg.data.pipeline.window_len || data.windows.horizon != cfg.data.pipeline.horizon) {
      throw ConfigError("dataset cache " + cfg.data.cache.string() + " was built for window_len " +
                        std::to_string(data.windows.window_len) + " and horizon " +
                        std::to_string(data.windows.horizon) + "; rerun preprocess");
    }
    if (fixed_norm != nullptr && (fixed_norm->names != data.norm.names || fixed_norm->mean != data.norm.mean ||
                                  fixed_norm->std != data.norm.std)) {
      throw IncompatibleCheckpointError("dataset cache normalization differs from the checkpoint's");
    }
    spdlog::info("loaded dataset cache {}", cfg.data.cache.string());
    return data;
  }
  return prepare_from_csv(cfg, fixed_norm);
}

std::vector<double> rolling_forecast(const ModelParams& params, const ModelConfig& cfg,
                                     const std::vector<std::vector<double>>& context, std::size_t steps) {
  if (steps == 0) throw ParameterError("steps must be >= 1");
  const std::size_t len = cfg.window_len;
  if (context.size() < len) {
    throw InsufficientDataError("forecast needs at least " + std::to_string(len) + " context rows, got " +
                                    std::to_string(context.size()),
                                len);
  }
  if (steps > cfg.horizon && cfg.input_features != 1) {
    throw ParameterError("recursive forecasts beyond the horizon (" + std::to_string(cfg.horizon) +
                         ") need a single input feature");
  }
  std::vector<std::vector<double>> rows(context.end() - static_cast<std::ptrdiff_t>(len), context.end());
  std::vector<double> out;
  while (out.size() < steps) {
    Tensor x(Shape{1, len, cfg.input_features});
    for (std::size_t t = 0; t < len; ++t) {
      if (rows[t].size() != cfg.input_features) throw DimensionError("context row has the wrong feature count");
      for (std::size_t f = 0; f < cfg.input_features; ++f) x.at(0, t, f) = rows[t][f];
    }
    const Tensor pred = predict(params, cfg, x);
    for (std::size_t h = 0; h < cfg.horizon && out.size() < steps; ++h) out.push_back(pred[h]);
    if (out.size() < steps) {
      for (std::size_t h = 0; h < cfg.horizon; ++h) {
        rows.erase(rows.begin());
        rows.push_back({pred[h]});
      }
    }
  }
  return out;
}

std::string predictions_csv(const std::vector<std::string>& timestamps, std::span<const double> actual,
                            std::span<const double> predicted, std::size_t horizon) {
  if (actual.size() != predicted.size() || actual.size() != timestamps.size() * horizon) {
    throw DimensionError("prediction dump: inconsistent lengths");
  }
  std::string out = horizon == 1 ? "timestamp,actual,predicted\n" : "timestamp,step,actual,predicted\n";
  for (std::size_t w = 0; w < timestamps.size(); ++w) {
    for (std::size_t h = 0; h < horizon; ++h) {
      const std::size_t i = w * horizon + h;
      out += timestamps[w];
      if (horizon != 1) out += "," + std::to_string(h + 1);
      out += "," + number(actual[i]) + "," + number(predicted[i]) + "\n";
    }
  }
  return out;
}

std::string line_chart_svg(std::span<const double> actual, std::span<const double> predicted) {
  constexpr double kWidth = 900.0, kHeight = 320.0, kPad = 30.0;
  double lo = INFINITY, hi = -INFINITY;
  for (auto series : {actual, predicted}) {
    for (double v : series) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const std::size_t n = std::max(actual.size(), predicted.size());
  auto polyline = [&](std::span<const double> series, const char* colour) {
    std::string points;
    for (std::size_t i = 0; i < series.size(); ++i) {
      const double x = kPad + (n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.5) * (kWidth - 2 * kPad);
      const double y = kHeight - kPad - (series[i] - lo) / (hi - lo) * (kHeight - 2 * kPad);
      points += fmt::format("{:.2f},{:.2f} ", x, y);
    }
    return fmt::format("  <polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" points=\"{}\"/>\n", colour, points);
  };
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
      "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      kWidth, kHeight);
  svg += polyline(actual, "#1f77b4");
  svg += polyline(predicted, "#d62728");
  svg += fmt::format("  <text x=\"{}\" y=\"18\" font-size=\"12\" fill=\"#1f77b4\">actual</text>\n", kPad);
  svg += fmt::format("  <text x=\"{}\" y=\"18\" font-size=\"12\" fill=\"#d62728\">predicted</text>\n", kPad + 60);
  svg += fmt::format("  <text x=\"{}\" y=\"{}\" font-size=\"10\">min {:.4g} / max {:.4g}</text>\n", kPad,
                     kHeight - 8, lo, hi);
  svg += "</svg>\n";
  return svg;
}

void cmd_preprocess(const RunConfig& cfg) {
  const PreparedDataset data = prepare_from_csv(cfg);
  const std::filesystem::path dataset_path = cfg.data.cache.empty() ? cfg.output_dir / artifacts::kDataset : cfg.data.cache;
  write_text_atomic(dataset_path, dataset_to_json(data).dump() + "\n");
  json summary = to_json(data.summary);
  summary["normalization"] = to_json(data.norm);
  write_json(cfg.output_dir / artifacts::kPreprocessSummary, summary);
  spdlog::info("wrote {}", dataset_path.string());
}

void cmd_train(const RunConfig& cfg, const TrainOptions& options) {
  const PreparedDataset data = load_dataset(cfg);
  ModelConfig model = model_for(cfg, data);
  FitResult fitted;
  if (options.init_checkpoint) {
    const Checkpoint ckpt = load_checkpoint(*options.init_checkpoint);
    fitted = fine_tune(ckpt, data.windows, data.split, cfg.train);
    model = ckpt.config;
  } else {
    fitted = fit(init_params(model), model, data.windows, data.split, cfg.train);
  }
  const EvaluationResult test = evaluate(fitted.params, model, data.windows, data.split.test, data.norm);
  fitted.report.test_metrics = test.metrics;
  spdlog::info("best epoch {} of {}; test rmse {:.6g}, r2 {:.4f}", fitted.report.best_epoch, fitted.report.epochs_run(),
               test.metrics.rmse, test.metrics.r2);

  save_checkpoint(cfg.output_dir / artifacts::kCheckpoint, fitted.params, model, data.norm);
  write_json(cfg.output_dir / artifacts::kTrainReport, to_json(fitted.report));
  write_json(cfg.output_dir / artifacts::kTiming, json{{"wall_seconds", fitted.report.wall_seconds}});
  write_predictions(cfg.output_dir, test, model.horizon, options.plot);
}

void cmd_tune(const RunConfig& cfg, std::size_t threads) {
  const DatasetSource source = cached_source([cfg](std::size_t window_len) {
    if (window_len == cfg.data.pipeline.window_len) return load_dataset(cfg);
    RunConfig c = cfg;
    c.data.pipeline.window_len = window_len;
    return prepare_from_csv(c);
  });
  TuneSettings settings;
  settings.space = cfg.search_space;
  settings.pso = cfg.pso;
  settings.budget_epochs = cfg.budget_epochs;
  settings.base_model = cfg.model;
  settings.base_train = cfg.train;
  settings.threads = threads;
  const TuneResult result = tune_hyperparameters(source, settings);

  json fragment = json::object();
  json named = json::object();
  for (std::size_t i = 0; i < settings.space.size(); ++i) {
    const SearchDim& d = settings.space.dims()[i];
    const double v = result.pso.best_position[i];
    const json value = d.kind == DimKind::integer ? json(static_cast<std::int64_t>(std::llround(v))) : json(v);
    named[d.name] = value;
    if (d.name == "learning_rate" || d.name == "batch_size") {
      fragment["train"][d.name] = value;
    } else if (d.name == "window_len") {
      fragment["data"][d.name] = value;
    } else {
      fragment["model"][d.name] = value;
    }
  }
  write_json(cfg.output_dir / artifacts::kBestConfig, fragment);
  write_json(cfg.output_dir / artifacts::kTuneSummary,
             json{{"best_fitness", result.best_fitness},
                  {"best", named},
                  {"evaluations", result.pso.evaluations.size()},
                  {"gbest_trace", result.pso.gbest_trace}});
  write_text_atomic(cfg.output_dir / artifacts::kTuneTrace, trace_csv(settings.space, result.pso));
  spdlog::info("best validation rmse {:.6g}", result.best_fitness);
}

void cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                  const std::optional<std::filesystem::path>& csv, bool plot) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  RunConfig c = cfg;
  c.data.pipeline.window_len = ckpt.config.window_len;
  c.data.pipeline.horizon = ckpt.config.horizon;
  c.data.target = ckpt.norm.names.at(ckpt.norm.target_index);
  PreparedDataset data;
  if (csv) {
    c.data.csv = *csv;
    data = prepare_from_csv(c, &ckpt.norm);
  } else if (!c.data.csv.empty()) {
    data = prepare_from_csv(c, &ckpt.norm);
  } else {
    data = load_dataset(c, &ckpt.norm);
  }
  check_compatible(ckpt.config, data.windows);
  const EvaluationResult test = evaluate(ckpt.params, ckpt.config, data.windows, data.split.test, data.norm);
  write_json(cfg.output_dir / artifacts::kMetrics, to_json(test.metrics));
  write_predictions(cfg.output_dir, test, ckpt.config.horizon, plot);
  spdlog::info("test rmse {:.6g}, mae {:.6g}, smape {:.4f}, r2 {:.4f}", test.metrics.rmse, test.metrics.mae,
               test.metrics.smape, test.metrics.r2);
}

void cmd_predict(const std::filesystem::path& checkpoint, const std::filesystem::path& csv, std::size_t steps,
                 const std::filesystem::path& out_dir, const MissingPolicy& missing) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const RawSeries raw = load_csv(csv, ckpt.norm.names.at(ckpt.norm.target_index));
  const CleanedSeries cleaned = handle_missing(raw, missing);
  const RawSeries normalized = zscore_apply(cleaned.series, ckpt.norm);
  std::vector<std::vector<double>> context(normalized.rows(), std::vector<double>(normalized.columns.size()));
  for (std::size_t c = 0; c < normalized.columns.size(); ++c) {
    for (std::size_t r = 0; r < normalized.rows(); ++r) context[r][c] = normalized.columns[c][r];
  }
  const std::vector<double> forecast =
      zscore_invert(rolling_forecast(ckpt.params, ckpt.config, context, steps), ckpt.norm, ckpt.norm.target_index);

  const auto& ts = cleaned.series.timestamps;
  const std::int64_t last = ts.back();
  const std::int64_t step = ts.size() > 1 ? ts.back() - ts[ts.size() - 2] : 0;
  std::string out = "timestamp,step,predicted\n";
  for (std::size_t i = 0; i < forecast.size(); ++i) {
    const std::string when = step > 0 ? format_timestamp(last + step * static_cast<std::int64_t>(i + 1)) : "";
    out += when + "," + std::to_string(i + 1) + "," + number(forecast[i]) + "\n";
  }
  write_text_atomic(out_dir / artifacts::kForecast, out);
}

void cmd_crossval(const RunConfig& cfg, std::size_t k) {
  const PreparedDataset data = load_dataset(cfg);
  const ModelConfig model = model_for(cfg, data);
  const CrossValidationReport report = cross_validate(data.windows, k, model, cfg.train, data.norm);
  write_json(cfg.output_dir / artifacts::kCrossval, to_json(report));
  spdlog::info("{}-fold rmse {:.6g} +- {:.3g}", k, report.mean.rmse, report.stddev.rmse);
}

}  // namespace gridcast
