// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMTRACK_PIPELINE_HPP
#define BEAMTRACK_PIPELINE_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "beamtrack/channel.hpp"
#include "beamtrack/estimators.hpp"
#include "beamtrack/metrics.hpp"
#include "beamtrack/tracker.hpp"

namespace beamtrack {

/// Flat experiment configuration; every field maps to one key of the
/// key=value config file (same names).
struct ExperimentConfig {
  // Array and codebooks.
  int num_elements = 36;
  Scalar spacing_over_wavelength = 0.5;
  int num_beams = 128;
  int pn_codewords = 9;

  // Scenario.
  Scalar cell_x_min = 15.0, cell_x_max = 35.0;
  Scalar cell_y_min = -20.0, cell_y_max = 20.0;
  Scalar grid_step = 0.2;
  Scalar start_x_min = 12.0, start_x_max = 38.0;
  Scalar start_y_min = 20.0, start_y_max = 56.0;
  int speed_min = 1, speed_max = 10;
  Scalar pathloss_exponent = 2.0;
  Scalar max_snr_db = 30.0;
  Scalar ref_distance = 15.0;

  // Sensing plan.
  int m_initial = 5;
  int m_loop = 5;
  int history_len = 7;
  int prediction_len = 2;

  // Dataset.
  int num_trajectories = 1000;
  std::string channel_table;  // optional CSV path replacing the LOS model

  // Seeds.
  std::uint64_t seed_data = 101;
  std::uint64_t seed_codebook = 202;
  std::uint64_t seed_noise = 303;
  std::uint64_t seed_init = 404;
  std::uint64_t seed_dropout = 505;
  std::uint64_t seed_shuffle = 606;

  // Training.
  int mmrapid_hidden1 = 128, mmrapid_hidden2 = 64;
  Scalar mmrapid_learning_rate = 1e-3;
  int mmrapid_max_epochs = 150;
  int mmrapid_batch_size = 64;
  int encoder_hidden = 64, decoder_hidden = 64;
  bool teacher_forcing = true;
  Scalar tracker_learning_rate = 1e-3;
  int tracker_max_epochs = 60;
  int tracker_batch_size = 128;
  Scalar dropout_rate = 0.1;
  int patience = 10;
  Scalar validation_fraction = 0.1;

  // Metrics.
  int mmrapid_baseline_m = 5;
  Scalar gain_loss_threshold_db = 3.0;

  // Sweep grids.
  std::vector<int> sweep_m_initial{2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> sweep_m_loop{2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> sweep_history{2, 3, 4, 5, 6, 7, 8};
  std::vector<int> sweep_prediction{1, 2, 3, 4, 5, 6, 7};
  int jobs = 1;

  Scenario scenario() const;
  SensingPlan plan() const;
  void validate() const;
};

/// Parses the flat key=value config format ('#' comments, blank lines
/// ignored); unknown keys are rejected.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Deterministic per-experiment artifacts derived from the config.
struct ExperimentArtifacts {
  ArrayGeometry geometry;
  PencilCodebook pencil;
  PnCodebook pn;
};
ExperimentArtifacts make_artifacts(const ExperimentConfig& config);

Dataset build_dataset(const ExperimentConfig& config);

/// Per-step training points of stage 1: one row per distinct in-cell step
/// of the stage-1 partition (exhaustive-search label plus the m_initial
/// RSS sweep, re-used as the truncated m_loop view for instance #2).
struct Stage1Samples {
  Matrix features_initial;  // rows x m_initial, unit-normalized
  Matrix features_loop;     // rows x m_loop, unit-normalized truncations
  std::vector<int> labels;  // 1-based noisy exhaustive labels
};
Stage1Samples build_stage1_samples(const ExperimentConfig& config,
                                   const ExperimentArtifacts& artifacts,
                                   const std::vector<FrameWindow>& stage1_frames);

/// Stage-2 frames: m_loop measurements per history step and exhaustive
/// labels for every step of the window.
std::vector<TrackerTrainingFrame> build_stage2_frames(
    const ExperimentConfig& config, const ExperimentArtifacts& artifacts,
    const std::vector<FrameWindow>& frames);

MmRapidConfig mmrapid_config(const ExperimentConfig& config, int instance);
TrackerConfig tracker_config(const ExperimentConfig& config);

struct EvalOutcome {
  MetricsReport full_algorithm;
  MetricsReport lstm_estimates;
};

/// Stage 3: runs predict_frame over the given frames with no exhaustive
/// search and scores both report variants against the noise-free oracle.
EvalOutcome evaluate_frames(const ExperimentConfig& config,
                            const ExperimentArtifacts& artifacts,
                            const MmRapidModel& mmrapid1, const MmRapidModel& mmrapid2,
                            const TrackerModel& tracker,
                            const std::vector<FrameWindow>& frames,
                            std::ostream* measurement_log = nullptr);

struct ThreeStageResult {
  MmRapidModel mmrapid1;
  MmRapidModel mmrapid2;
  TrackerModel tracker;
  EvalOutcome eval;
  int stage1_samples = 0;
  int stage2_frames = 0;
  int validation_frames = 0;
  int test_frames = 0;
};

ThreeStageResult run_three_stage(const ExperimentConfig& config,
                                 std::ostream* log = nullptr);

/// Two CSV rows (full_algorithm / lstm_estimates) under the header
/// variant,M_I,M_L,T,P,accuracy,gl_p90_db,avg_meas,overhead_vs_exhaustive,
/// overhead_vs_mmrapid.
std::string metrics_csv_header();
std::string metrics_csv_rows(const ExperimentConfig& config, const EvalOutcome& outcome);

enum class SweepGrid { measurements, windows };

/// Trains and evaluates every valid grid cell (invalid cells are skipped
/// with a note on `log`) and returns the merged CSV ordered by cell key.
std::string run_sweep_csv(const ExperimentConfig& config, SweepGrid grid,
                          std::ostream* log = nullptr);

nlohmann::json run_manifest(const ExperimentConfig& config, const nlohmann::json& extra);

/// Dataset directory layout: one JSONL file per partition plus a manifest.
void save_dataset_dir(const Dataset& dataset, const ExperimentConfig& config,
                      const std::string& dir);
Dataset load_dataset_dir(const std::string& dir, const ExperimentConfig& config);

}  // namespace beamtrack

#endif
