// SPDX-License-Identifier: Apache-2.0
//
// beamtrack command-line front end: dataset generation, staged training,
// evaluation, parameter sweeps, and report printing.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "beamtrack/nn/serialize.hpp"
#include "beamtrack/pipeline.hpp"

namespace fs = std::filesystem;
using namespace beamtrack;

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << text;
}

void export_codebooks(const ExperimentArtifacts& artifacts, const std::string& dir) {
  {
    std::ofstream out(join(dir, "pencil_codebook.txt"));
    write_codebook_matrix(out, artifacts.pencil.columns);
  }
  {
    std::ofstream out(join(dir, "pn_codebook.txt"));
    write_codebook_matrix(out, artifacts.pn.columns);
  }
  {
    std::ofstream out(join(dir, "pn_phase_indices.txt"));
    write_phase_index_grid(out, artifacts.pn);
  }
}

int cmd_dataset_generate(const std::string& config_path, const std::string& out_dir,
                         bool with_codebooks) {
  const auto config = load_experiment_config(config_path);
  const auto dataset = build_dataset(config);
  save_dataset_dir(dataset, config, out_dir);
  if (with_codebooks) export_codebooks(make_artifacts(config), out_dir);
  std::cout << "dataset: " << dataset.train_stage1.size() << " stage1, "
            << dataset.train_stage2.size() << " stage2, " << dataset.validation.size()
            << " validation, " << dataset.test.size() << " test frames -> " << out_dir
            << '\n';
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& models_dir, const std::string& stage) {
  const auto config = load_experiment_config(config_path);
  const auto artifacts = make_artifacts(config);
  const auto dataset = load_dataset_dir(data_dir, config);
  fs::create_directories(models_dir);

  if (stage == "1" || stage == "all") {
    const auto samples = build_stage1_samples(config, artifacts, dataset.train_stage1);
    auto mm1 = train_mmrapid(samples.features_initial, samples.labels, 1,
                             mmrapid_config(config, 1));
    auto mm2 =
        train_mmrapid(samples.features_loop, samples.labels, 2, mmrapid_config(config, 2));
    mm1.save(join(models_dir, "mmrapid1.json"));
    mm2.save(join(models_dir, "mmrapid2.json"));
    std::cout << "stage 1: trained both mmRAPID instances on " << samples.labels.size()
              << " samples\n";
  }
  if (stage == "2" || stage == "all") {
    const auto frames = build_stage2_frames(config, artifacts, dataset.train_stage2);
    const auto validation = build_stage2_frames(config, artifacts, dataset.validation);
    const auto tracker = train_tracker(frames, validation, tracker_config(config));
    tracker.save(join(models_dir, "tracker.json"));
    std::cout << "stage 2: trained tracker on " << frames.size() << " frames ("
              << validation.size() << " validation)\n";
  }
  return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& data_dir,
                 const std::string& models_dir, const std::string& out_dir,
                 bool log_measurements) {
  const auto config = load_experiment_config(config_path);
  const auto artifacts = make_artifacts(config);
  const auto dataset = load_dataset_dir(data_dir, config);
  const auto mm1 = MmRapidModel::load(join(models_dir, "mmrapid1.json"));
  const auto mm2 = MmRapidModel::load(join(models_dir, "mmrapid2.json"));
  const auto tracker = TrackerModel::load(join(models_dir, "tracker.json"));
  fs::create_directories(out_dir);

  std::ofstream measurement_log;
  if (log_measurements) {
    measurement_log.open(join(out_dir, "measurements.csv"));
    if (!measurement_log) throw std::runtime_error("cannot open measurements.csv");
  }
  const auto outcome =
      evaluate_frames(config, artifacts, mm1, mm2, tracker, dataset.test,
                      log_measurements ? &measurement_log : nullptr);

  write_text(join(out_dir, "metrics.csv"),
             metrics_csv_header() + metrics_csv_rows(config, outcome));
  nlohmann::json extra;
  extra["test_frames"] = dataset.test.size();
  extra["full_algorithm"] = {
      {"accuracy", outcome.full_algorithm.accuracy},
      {"gl_p90_db", outcome.full_algorithm.gain_loss_db_percentiles.at(90)},
      {"infinite_gain_loss_count", outcome.full_algorithm.infinite_gain_loss_count}};
  extra["lstm_estimates"] = {
      {"accuracy", outcome.lstm_estimates.accuracy},
      {"gl_p90_db", outcome.lstm_estimates.gain_loss_db_percentiles.at(90)},
      {"infinite_gain_loss_count", outcome.lstm_estimates.infinite_gain_loss_count}};
  nn::save_json_file(join(out_dir, "manifest.json"), run_manifest(config, extra));
  std::cout << metrics_csv_header() << metrics_csv_rows(config, outcome);
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& grid,
              const std::string& out_dir) {
  const auto config = load_experiment_config(config_path);
  const auto kind = grid == "measurements" ? SweepGrid::measurements : SweepGrid::windows;
  fs::create_directories(out_dir);
  const std::string csv = run_sweep_csv(config, kind, &std::cerr);
  const std::string name =
      kind == SweepGrid::measurements ? "sweep_measurements.csv" : "sweep_windows.csv";
  write_text(join(out_dir, name), csv);
  nlohmann::json extra;
  extra["grid"] = grid;
  nn::save_json_file(join(out_dir, "manifest.json"), run_manifest(config, extra));
  std::cout << "sweep written to " << join(out_dir, name) << '\n';
  return 0;
}

int cmd_report(const std::string& metrics_path, Scalar threshold_db) {
  std::ifstream in(metrics_path);
  if (!in) throw std::runtime_error("cannot open " + metrics_path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty metrics file");
  std::cout << "variant            M_I M_L  T  P  accuracy  gl_p90_db  avg_meas  "
               "ovh_exh  ovh_mmr\n";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 10) throw std::runtime_error("malformed metrics row: " + line);
    const double p90 = fields[6] == "inf" ? std::numeric_limits<double>::infinity()
                                          : std::stod(fields[6]);
    std::printf("%-18s %3s %3s %2s %2s  %8s  %9s  %8s  %7s  %7s  %s\n", fields[0].c_str(),
                fields[1].c_str(), fields[2].c_str(), fields[3].c_str(), fields[4].c_str(),
                fields[5].c_str(), fields[6].c_str(), fields[7].c_str(), fields[8].c_str(),
                fields[9].c_str(),
                p90 <= threshold_db ? "[meets gain-loss threshold]" : "");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-less mmWave beam alignment, tracking, and prediction simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "run", data_dir = "run/dataset",
              models_dir = "run/models", stage = "all", grid = "measurements",
              metrics_path;
  bool with_codebooks = false, log_measurements = false;
  double threshold_db = 3.0;

  auto* dataset = app.add_subcommand("dataset", "Dataset operations");
  dataset->require_subcommand(1);
  auto* generate = dataset->add_subcommand("generate", "Generate the trajectory dataset");
  generate->add_option("--config", config_path, "Experiment config file")->required();
  generate->add_option("--out", out_dir, "Output directory")->required();
  generate->add_flag("--export-codebooks", with_codebooks, "Also export codebook text files");

  auto* train = app.add_subcommand("train", "Train models against a generated dataset");
  train->add_option("--config", config_path)->required();
  train->add_option("--data", data_dir, "Dataset directory")->required();
  train->add_option("--models", models_dir, "Model output directory")->required();
  train->add_option("--stage", stage, "1, 2, or all")
      ->check(CLI::IsMember({"1", "2", "all"}));

  auto* evaluate = app.add_subcommand("evaluate", "Score trained models on the test split");
  evaluate->add_option("--config", config_path)->required();
  evaluate->add_option("--data", data_dir)->required();
  evaluate->add_option("--models", models_dir)->required();
  evaluate->add_option("--out", out_dir)->required();
  evaluate->add_flag("--log-measurements", log_measurements,
                     "Write per-measurement CSV log");

  auto* sweep = app.add_subcommand("sweep", "Train/evaluate over a parameter grid");
  sweep->add_option("--config", config_path)->required();
  sweep->add_option("--grid", grid, "measurements or windows")
      ->required()
      ->check(CLI::IsMember({"measurements", "windows"}));
  sweep->add_option("--out", out_dir)->required();

  auto* report = app.add_subcommand("report", "Pretty-print a metrics CSV");
  report->add_option("--metrics", metrics_path)->required();
  report->add_option("--threshold-db", threshold_db, "Gain-loss requirement in dB");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_dataset_generate(config_path, out_dir, with_codebooks);
    if (train->parsed()) return cmd_train(config_path, data_dir, models_dir, stage);
    if (evaluate->parsed()) {
      return cmd_evaluate(config_path, data_dir, models_dir, out_dir, log_measurements);
    }
    if (sweep->parsed()) return cmd_sweep(config_path, grid, out_dir);
    if (report->parsed()) return cmd_report(metrics_path, threshold_db);
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = e.what();
    std::cerr << err.dump() << '\n';
    return 1;
  }
  std::cerr << R"({"error":"no subcommand"})" << '\n';
  return 1;
}
