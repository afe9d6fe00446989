// Command-line entry point: preprocess | train | tune | evaluate | predict | crossval.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "gridcast/commands.hpp"
#include "gridcast/errors.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitUser = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridcast: hybrid transformer/LSTM load forecaster with PSO tuning"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  bool verbose = false;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--out", out_dir, "Output directory (overrides output_dir)");
  app.add_option("--seed", seed, "Seed for model init, training and the swarm");
  app.add_option("--threads", threads, "Worker threads for tuning")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", verbose, "Per-epoch logging");

  auto* preprocess = app.add_subcommand("preprocess", "Clean, split, normalize and window the data");

  auto* train = app.add_subcommand("train", "Train a model and write checkpoint, report and predictions");
  std::string init_checkpoint;
  bool plot = false;
  train->add_option("--init-checkpoint", init_checkpoint, "Fine-tune starting from this checkpoint");
  train->add_flag("--plot", plot, "Also write an SVG chart of test predictions");

  auto* tune = app.add_subcommand("tune", "Search hyperparameters with particle swarm optimization");

  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on the test split");
  std::string checkpoint;
  std::string csv;
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  evaluate->add_option("--csv", csv, "Data file (defaults to the config's data.csv)");
  evaluate->add_flag("--plot", plot, "Also write an SVG chart of test predictions");

  auto* predict = app.add_subcommand("predict", "Forecast past the end of a CSV");
  std::size_t steps = 1;
  predict->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  predict->add_option("--csv", csv, "Context data (at least window_len rows)")->required();
  predict->add_option("--steps", steps, "Number of future steps")->check(CLI::PositiveNumber);

  auto* crossval = app.add_subcommand("crossval", "Blocked K-fold cross-validation");
  std::size_t k = 5;
  crossval->add_option("--k", k, "Number of folds")->check(CLI::Range(2, 1000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUser;
  }

  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
  try {
    auto load_config = [&](bool required) {
      gridcast::RunConfig cfg;
      if (!config_path.empty()) {
        cfg = gridcast::load_run_config(config_path);
      } else if (required) {
        throw gridcast::ConfigError("--config is required for this command");
      }
      if (seed) gridcast::override_seeds(cfg, *seed);
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      return cfg;
    };

    if (*preprocess) {
      gridcast::cmd_preprocess(load_config(true));
    } else if (*train) {
      gridcast::TrainOptions options;
      if (!init_checkpoint.empty()) options.init_checkpoint = fs::path(init_checkpoint);
      options.plot = plot;
      gridcast::cmd_train(load_config(true), options);
    } else if (*tune) {
      gridcast::cmd_tune(load_config(true), threads);
    } else if (*evaluate) {
      std::optional<fs::path> data;
      if (!csv.empty()) data = fs::path(csv);
      gridcast::cmd_evaluate(load_config(csv.empty()), checkpoint, data, plot);
    } else if (*predict) {
      const gridcast::RunConfig cfg = load_config(false);
      gridcast::cmd_predict(checkpoint, csv, steps, cfg.output_dir, cfg.data.pipeline.missing);
    } else if (*crossval) {
      gridcast::cmd_crossval(load_config(true), k);
    }
  } catch (const gridcast::UserError& e) {
    spdlog::error("{}", e.what());
    return kExitUser;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return kExitInternal;
  }
  return 0;
}
