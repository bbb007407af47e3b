// SPDX-License-Identifier: Apache-2.0

#include "beamtrack/pipeline.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <sstream>
#include <stdexcept>

#include "beamtrack/nn/serialize.hpp"

namespace beamtrack {

namespace {

// Substream tags for per-step noise generators.
constexpr std::uint64_t kNoiseExhaustive = 0;
constexpr std::uint64_t kNoisePn = 1;

Rng step_noise_rng(std::uint64_t seed_noise, int trajectory_id, int time_step,
                   std::uint64_t purpose) {
  std::uint64_t s = Rng::derive(seed_noise, static_cast<std::uint64_t>(trajectory_id) + 1);
  s = Rng::derive(s, static_cast<std::uint64_t>(time_step) + 1);
  return Rng(Rng::derive(s, purpose));
}

std::string format_metric(Scalar value) {
  if (std::isinf(value)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

}  // namespace

Scenario ExperimentConfig::scenario() const {
  Scenario s;
  s.cell_rect = {cell_x_min, cell_x_max, cell_y_min, cell_y_max};
  s.grid_step = grid_step;
  s.start_box = {start_x_min, start_x_max, start_y_min, start_y_max};
  s.speed_min = speed_min;
  s.speed_max = speed_max;
  s.pathloss_exponent = pathloss_exponent;
  s.max_snr_db = max_snr_db;
  s.ref_distance = ref_distance;
  return s;
}

SensingPlan ExperimentConfig::plan() const {
  return {m_initial, m_loop, history_len, prediction_len};
}

void ExperimentConfig::validate() const {
  scenario().validate();
  plan().validate();
  if (num_elements < 1) throw std::invalid_argument("config: num_elements must be >= 1");
  if (num_beams <= num_elements) {
    throw std::invalid_argument("config: num_beams must exceed num_elements");
  }
  if (pn_codewords < m_initial) {
    throw std::invalid_argument("config: pn_codewords must cover m_initial");
  }
  if (num_trajectories < 20) {
    throw std::invalid_argument("config: num_trajectories must be >= 20");
  }
  if (mmrapid_baseline_m < 1) {
    throw std::invalid_argument("config: mmrapid_baseline_m must be >= 1");
  }
  if (jobs < 1) throw std::invalid_argument("config: jobs must be >= 1");
}

namespace {

std::vector<int> parse_int_list(const std::string& value) {
  std::vector<int> out;
  std::istringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoi(item));
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    auto as_int = [&] { return std::stoi(value); };
    auto as_real = [&] { return std::stod(value); };
    auto as_seed = [&] { return static_cast<std::uint64_t>(std::stoull(value)); };
    auto as_bool = [&] {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected boolean");
    };

    try {
      if (key == "num_elements") cfg.num_elements = as_int();
      else if (key == "spacing_over_wavelength") cfg.spacing_over_wavelength = as_real();
      else if (key == "num_beams") cfg.num_beams = as_int();
      else if (key == "pn_codewords") cfg.pn_codewords = as_int();
      else if (key == "cell_x_min") cfg.cell_x_min = as_real();
      else if (key == "cell_x_max") cfg.cell_x_max = as_real();
      else if (key == "cell_y_min") cfg.cell_y_min = as_real();
      else if (key == "cell_y_max") cfg.cell_y_max = as_real();
      else if (key == "grid_step") cfg.grid_step = as_real();
      else if (key == "start_x_min") cfg.start_x_min = as_real();
      else if (key == "start_x_max") cfg.start_x_max = as_real();
      else if (key == "start_y_min") cfg.start_y_min = as_real();
      else if (key == "start_y_max") cfg.start_y_max = as_real();
      else if (key == "speed_min") cfg.speed_min = as_int();
      else if (key == "speed_max") cfg.speed_max = as_int();
      else if (key == "pathloss_exponent") cfg.pathloss_exponent = as_real();
      else if (key == "max_snr_db") cfg.max_snr_db = as_real();
      else if (key == "ref_distance") cfg.ref_distance = as_real();
      else if (key == "m_initial") cfg.m_initial = as_int();
      else if (key == "m_loop") cfg.m_loop = as_int();
      else if (key == "history_len") cfg.history_len = as_int();
      else if (key == "prediction_len") cfg.prediction_len = as_int();
      else if (key == "num_trajectories") cfg.num_trajectories = as_int();
      else if (key == "channel_table") cfg.channel_table = value;
      else if (key == "seed_data") cfg.seed_data = as_seed();
      else if (key == "seed_codebook") cfg.seed_codebook = as_seed();
      else if (key == "seed_noise") cfg.seed_noise = as_seed();
      else if (key == "seed_init") cfg.seed_init = as_seed();
      else if (key == "seed_dropout") cfg.seed_dropout = as_seed();
      else if (key == "seed_shuffle") cfg.seed_shuffle = as_seed();
      else if (key == "mmrapid_hidden1") cfg.mmrapid_hidden1 = as_int();
      else if (key == "mmrapid_hidden2") cfg.mmrapid_hidden2 = as_int();
      else if (key == "mmrapid_learning_rate") cfg.mmrapid_learning_rate = as_real();
      else if (key == "mmrapid_max_epochs") cfg.mmrapid_max_epochs = as_int();
      else if (key == "mmrapid_batch_size") cfg.mmrapid_batch_size = as_int();
      else if (key == "encoder_hidden") cfg.encoder_hidden = as_int();
      else if (key == "decoder_hidden") cfg.decoder_hidden = as_int();
      else if (key == "teacher_forcing") cfg.teacher_forcing = as_bool();
      else if (key == "tracker_learning_rate") cfg.tracker_learning_rate = as_real();
      else if (key == "tracker_max_epochs") cfg.tracker_max_epochs = as_int();
      else if (key == "tracker_batch_size") cfg.tracker_batch_size = as_int();
      else if (key == "dropout_rate") cfg.dropout_rate = as_real();
      else if (key == "patience") cfg.patience = as_int();
      else if (key == "validation_fraction") cfg.validation_fraction = as_real();
      else if (key == "mmrapid_baseline_m") cfg.mmrapid_baseline_m = as_int();
      else if (key == "gain_loss_threshold_db") cfg.gain_loss_threshold_db = as_real();
      else if (key == "sweep_m_initial") cfg.sweep_m_initial = parse_int_list(value);
      else if (key == "sweep_m_loop") cfg.sweep_m_loop = parse_int_list(value);
      else if (key == "sweep_history") cfg.sweep_history = parse_int_list(value);
      else if (key == "sweep_prediction") cfg.sweep_prediction = parse_int_list(value);
      else if (key == "jobs") cfg.jobs = as_int();
      else {
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": bad value for '" + key + "'");
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_experiment_config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["num_elements"] = c.num_elements;
  j["spacing_over_wavelength"] = c.spacing_over_wavelength;
  j["num_beams"] = c.num_beams;
  j["pn_codewords"] = c.pn_codewords;
  j["cell_x_min"] = c.cell_x_min;
  j["cell_x_max"] = c.cell_x_max;
  j["cell_y_min"] = c.cell_y_min;
  j["cell_y_max"] = c.cell_y_max;
  j["grid_step"] = c.grid_step;
  j["start_x_min"] = c.start_x_min;
  j["start_x_max"] = c.start_x_max;
  j["start_y_min"] = c.start_y_min;
  j["start_y_max"] = c.start_y_max;
  j["speed_min"] = c.speed_min;
  j["speed_max"] = c.speed_max;
  j["pathloss_exponent"] = c.pathloss_exponent;
  j["max_snr_db"] = c.max_snr_db;
  j["ref_distance"] = c.ref_distance;
  j["m_initial"] = c.m_initial;
  j["m_loop"] = c.m_loop;
  j["history_len"] = c.history_len;
  j["prediction_len"] = c.prediction_len;
  j["num_trajectories"] = c.num_trajectories;
  j["channel_table"] = c.channel_table;
  j["seed_data"] = c.seed_data;
  j["seed_codebook"] = c.seed_codebook;
  j["seed_noise"] = c.seed_noise;
  j["seed_init"] = c.seed_init;
  j["seed_dropout"] = c.seed_dropout;
  j["seed_shuffle"] = c.seed_shuffle;
  j["mmrapid_hidden1"] = c.mmrapid_hidden1;
  j["mmrapid_hidden2"] = c.mmrapid_hidden2;
  j["mmrapid_learning_rate"] = c.mmrapid_learning_rate;
  j["mmrapid_max_epochs"] = c.mmrapid_max_epochs;
  j["mmrapid_batch_size"] = c.mmrapid_batch_size;
  j["encoder_hidden"] = c.encoder_hidden;
  j["decoder_hidden"] = c.decoder_hidden;
  j["teacher_forcing"] = c.teacher_forcing;
  j["tracker_learning_rate"] = c.tracker_learning_rate;
  j["tracker_max_epochs"] = c.tracker_max_epochs;
  j["tracker_batch_size"] = c.tracker_batch_size;
  j["dropout_rate"] = c.dropout_rate;
  j["patience"] = c.patience;
  j["validation_fraction"] = c.validation_fraction;
  j["mmrapid_baseline_m"] = c.mmrapid_baseline_m;
  j["gain_loss_threshold_db"] = c.gain_loss_threshold_db;
  j["sweep_m_initial"] = c.sweep_m_initial;
  j["sweep_m_loop"] = c.sweep_m_loop;
  j["sweep_history"] = c.sweep_history;
  j["sweep_prediction"] = c.sweep_prediction;
  j["jobs"] = c.jobs;
  return j;
}

ExperimentArtifacts make_artifacts(const ExperimentConfig& config) {
  config.validate();
  ExperimentArtifacts a{ArrayGeometry(config.num_elements, config.spacing_over_wavelength),
                        PencilCodebook{}, PnCodebook{}};
  a.pencil = build_pencil_codebook(a.geometry, config.num_beams);
  a.pn = build_pn_codebook(a.geometry, config.pn_codewords, config.seed_codebook);
  return a;
}

Dataset build_dataset(const ExperimentConfig& config) {
  config.validate();
  if (!config.channel_table.empty()) {
    const ChannelTable table(import_channel_table(config.channel_table, config.grid_step),
                             config.grid_step);
    return generate_dataset(config.scenario(), config.num_trajectories, config.history_len,
                            config.prediction_len, config.seed_data, &table);
  }
  return generate_dataset(config.scenario(), config.num_trajectories, config.history_len,
                          config.prediction_len, config.seed_data, nullptr);
}

namespace {

/// Distinct (trajectory, step) states of a frame list in deterministic order.
std::map<std::pair<int, int>, LosChannelState> collect_steps(
    const std::vector<FrameWindow>& frames) {
  std::map<std::pair<int, int>, LosChannelState> steps;
  for (const auto& f : frames) {
    for (const auto& s : f.states) {
      steps.emplace(std::make_pair(f.trajectory_id, s.time_step), s);
    }
  }
  return steps;
}

int exhaustive_label(const ExperimentConfig& config, const ExperimentArtifacts& artifacts,
                     int trajectory_id, const LosChannelState& state) {
  NoiseModel noise(1.0, 0);
  noise.rng = step_noise_rng(config.seed_noise, trajectory_id, state.time_step,
                             kNoiseExhaustive);
  return exhaustive_search(state, artifacts.pencil, artifacts.geometry, noise).beam_index;
}

MeasurementVector pn_sweep(const ExperimentConfig& config,
                           const ExperimentArtifacts& artifacts, int trajectory_id,
                           const LosChannelState& state, SensingPhase phase) {
  NoiseModel noise(1.0, 0);
  noise.rng = step_noise_rng(config.seed_noise, trajectory_id, state.time_step, kNoisePn);
  return measure_step(artifacts.pn, state, artifacts.geometry, config.plan(), phase, noise);
}

}  // namespace

Stage1Samples build_stage1_samples(const ExperimentConfig& config,
                                   const ExperimentArtifacts& artifacts,
                                   const std::vector<FrameWindow>& stage1_frames) {
  const auto steps = collect_steps(stage1_frames);
  if (steps.empty()) throw std::runtime_error("build_stage1_samples: no in-cell steps");

  Stage1Samples out;
  out.features_initial.resize(static_cast<Index>(steps.size()), config.m_initial);
  out.features_loop.resize(static_cast<Index>(steps.size()), config.m_loop);
  out.labels.reserve(steps.size());

  Index row = 0;
  for (const auto& [key, state] : steps) {
    const auto mv = pn_sweep(config, artifacts, key.first, state, SensingPhase::initial);
    out.features_initial.row(row) = normalize_unit(mv.values).transpose();
    out.features_loop.row(row) =
        normalize_unit(mv.values.head(config.m_loop)).transpose();
    out.labels.push_back(exhaustive_label(config, artifacts, key.first, state));
    ++row;
  }
  return out;
}

std::vector<TrackerTrainingFrame> build_stage2_frames(
    const ExperimentConfig& config, const ExperimentArtifacts& artifacts,
    const std::vector<FrameWindow>& frames) {
  // Per-step caches: overlapping windows reuse one physical measurement
  // and one exhaustive label per step.
  std::map<std::pair<int, int>, Vector> sweep_cache;
  std::map<std::pair<int, int>, int> label_cache;

  std::vector<TrackerTrainingFrame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    TrackerTrainingFrame tf;
    tf.encoder_inputs.resize(config.history_len, config.m_loop);
    tf.labels.reserve(f.states.size());
    for (std::size_t i = 0; i < f.states.size(); ++i) {
      const auto& state = f.states[i];
      const auto key = std::make_pair(f.trajectory_id, state.time_step);
      auto lab = label_cache.find(key);
      if (lab == label_cache.end()) {
        lab = label_cache
                  .emplace(key, exhaustive_label(config, artifacts, f.trajectory_id, state))
                  .first;
      }
      tf.labels.push_back(lab->second);
      if (static_cast<int>(i) < config.history_len) {
        auto sw = sweep_cache.find(key);
        if (sw == sweep_cache.end()) {
          const auto mv =
              pn_sweep(config, artifacts, f.trajectory_id, state, SensingPhase::loop);
          sw = sweep_cache.emplace(key, normalize_unit(mv.values)).first;
        }
        tf.encoder_inputs.row(static_cast<Index>(i)) = sw->second.transpose();
      }
    }
    out.push_back(std::move(tf));
  }
  return out;
}

MmRapidConfig mmrapid_config(const ExperimentConfig& config, int instance) {
  MmRapidConfig mc;
  mc.input_dim = instance == 1 ? config.m_initial : config.m_loop;
  mc.num_beams = config.num_beams;
  mc.hidden1 = config.mmrapid_hidden1;
  mc.hidden2 = config.mmrapid_hidden2;
  mc.dropout_rate = config.dropout_rate;
  mc.optimizer = {nn::OptimizerKind::rmsprop, config.mmrapid_learning_rate, 0.9, 0.9,
                  0.999, 1e-8};
  mc.max_epochs = config.mmrapid_max_epochs;
  mc.batch_size = config.mmrapid_batch_size;
  mc.patience = config.patience;
  mc.validation_fraction = config.validation_fraction;
  mc.seed_init = config.seed_init;
  mc.seed_dropout = config.seed_dropout;
  mc.seed_shuffle = config.seed_shuffle;
  return mc;
}

TrackerConfig tracker_config(const ExperimentConfig& config) {
  TrackerConfig tc;
  tc.history_len = config.history_len;
  tc.prediction_len = config.prediction_len;
  tc.m_loop = config.m_loop;
  tc.num_beams = config.num_beams;
  tc.encoder_hidden = config.encoder_hidden;
  tc.decoder_hidden = config.decoder_hidden;
  tc.teacher_forcing = config.teacher_forcing;
  tc.dropout_rate = config.dropout_rate;
  tc.optimizer = {nn::OptimizerKind::adam, config.tracker_learning_rate, 0.9, 0.9, 0.999,
                  1e-8};
  tc.max_epochs = config.tracker_max_epochs;
  tc.batch_size = config.tracker_batch_size;
  tc.patience = config.patience;
  tc.seed_init = Rng::derive(config.seed_init, 3);
  tc.seed_dropout = Rng::derive(config.seed_dropout, 3);
  tc.seed_shuffle = Rng::derive(config.seed_shuffle, 3);
  return tc;
}

namespace {

struct StepScore {
  std::vector<int> predictions;
  std::vector<int> oracles;
  std::vector<Scalar> gain_losses;
  int infinite = 0;

  void add(int predicted, int oracle, Scalar gl) {
    predictions.push_back(predicted);
    oracles.push_back(oracle);
    if (std::isinf(gl)) {
      ++infinite;
    } else {
      gain_losses.push_back(gl);
    }
  }

  MetricsReport report(const ExperimentConfig& config, int num_frames) const {
    MetricsReport r;
    r.accuracy = accuracy(predictions, oracles);
    for (int pct : {50, 90, 99}) {
      r.gain_loss_db_percentiles[pct] =
          gain_losses.empty() ? std::numeric_limits<Scalar>::infinity()
                              : percentile_nearest_rank(gain_losses, pct);
    }
    r.avg_measurements_per_step = avg_measurements(config.plan());
    r.overhead_reduction_vs["exhaustive"] =
        overhead_reduction(config.plan(), config.num_beams);
    r.overhead_reduction_vs["mmrapid"] =
        overhead_reduction(config.plan(), config.mmrapid_baseline_m);
    r.num_frames = num_frames;
    r.num_steps = static_cast<int>(predictions.size());
    r.infinite_gain_loss_count = infinite;
    return r;
  }
};

}  // namespace

EvalOutcome evaluate_frames(const ExperimentConfig& config,
                            const ExperimentArtifacts& artifacts,
                            const MmRapidModel& mmrapid1, const MmRapidModel& mmrapid2,
                            const TrackerModel& tracker,
                            const std::vector<FrameWindow>& frames,
                            std::ostream* measurement_log) {
  const SensingPlan plan = config.plan();
  if (measurement_log != nullptr) write_measurement_log_header(*measurement_log);

  StepScore full, lstm;
  int frame_id = 0;
  for (const auto& frame : frames) {
    std::vector<MeasurementVector> measurements;
    measurements.reserve(static_cast<std::size_t>(plan.history_len));
    for (int t = 0; t < plan.history_len; ++t) {
      const auto& state = frame.states[static_cast<std::size_t>(t)];
      const auto phase = t == 0 ? SensingPhase::initial : SensingPhase::loop;
      measurements.push_back(
          pn_sweep(config, artifacts, frame.trajectory_id, state, phase));
      if (measurement_log != nullptr) {
        append_measurement_log(*measurement_log, frame_id, phase, measurements.back());
      }
    }

    const auto run = predict_frame(tracker, mmrapid1, mmrapid2, measurements, plan);
    if (run.measurements_used != plan.measurements_per_frame()) {
      throw std::logic_error("evaluate_frames: measurement accounting broke");
    }

    for (int s = 0; s < plan.steps_per_frame(); ++s) {
      const auto& state = frame.states[static_cast<std::size_t>(s)];
      const int oracle =
          oracle_best_beam(state, artifacts.pencil, artifacts.geometry).beam_index;
      const CVector h = channel_vector(state, artifacts.geometry);

      const int full_pred = run.estimates[static_cast<std::size_t>(s)].beam_index;
      full.add(full_pred, oracle, gain_loss_db(full_pred, h, artifacts.pencil));

      // LSTM-estimates variant: initial alignment then decoder outputs for
      // the rest of the frame.
      int lstm_pred;
      if (s == 0) {
        lstm_pred = run.estimates[0].beam_index;
      } else if (s < plan.history_len) {
        lstm_pred = run.prediction.discarded[static_cast<std::size_t>(s - 1)];
      } else {
        lstm_pred =
            run.prediction.kept[static_cast<std::size_t>(s - plan.history_len)];
      }
      lstm.add(lstm_pred, oracle, gain_loss_db(lstm_pred, h, artifacts.pencil));
    }
    ++frame_id;
  }

  EvalOutcome out;
  out.full_algorithm = full.report(config, frame_id);
  out.lstm_estimates = lstm.report(config, frame_id);
  return out;
}

ThreeStageResult run_three_stage(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  const auto artifacts = make_artifacts(config);
  const Dataset dataset = build_dataset(config);
  if (log != nullptr) {
    *log << "dataset: stage1=" << dataset.train_stage1.size()
         << " stage2=" << dataset.train_stage2.size()
         << " validation=" << dataset.validation.size() << " test=" << dataset.test.size()
         << " frames\n";
  }

  // Stage 1: paired exhaustive + compressive sweeps train both mmRAPIDs.
  const auto stage1 = build_stage1_samples(config, artifacts, dataset.train_stage1);
  MmRapidModel mm1 = train_mmrapid(stage1.features_initial, stage1.labels, 1,
                                   mmrapid_config(config, 1));
  MmRapidModel mm2 =
      train_mmrapid(stage1.features_loop, stage1.labels, 2, mmrapid_config(config, 2));
  if (log != nullptr) {
    *log << "stage1: " << stage1.labels.size() << " samples, mmRAPIDs trained\n";
  }

  // Stage 2: loop-rate sweeps plus exhaustive labels train the tracker.
  const auto stage2 = build_stage2_frames(config, artifacts, dataset.train_stage2);
  const auto validation = build_stage2_frames(config, artifacts, dataset.validation);
  TrackerModel tracker = train_tracker(stage2, validation, tracker_config(config));
  if (log != nullptr) {
    *log << "stage2: " << stage2.size() << " frames (+" << validation.size()
         << " validation), tracker trained\n";
  }

  // Stage 3: measurement-free predictions on the test split.
  EvalOutcome eval =
      evaluate_frames(config, artifacts, mm1, mm2, tracker, dataset.test, nullptr);
  if (log != nullptr) {
    *log << "stage3: " << dataset.test.size() << " test frames evaluated\n";
  }

  return ThreeStageResult{std::move(mm1),
                          std::move(mm2),
                          std::move(tracker),
                          std::move(eval),
                          static_cast<int>(stage1.labels.size()),
                          static_cast<int>(stage2.size()),
                          static_cast<int>(validation.size()),
                          static_cast<int>(dataset.test.size())};
}

std::string metrics_csv_header() {
  return "variant,M_I,M_L,T,P,accuracy,gl_p90_db,avg_meas,overhead_vs_exhaustive,"
         "overhead_vs_mmrapid\n";
}

namespace {

std::string metrics_csv_row(const char* variant, const ExperimentConfig& config,
                            const MetricsReport& report) {
  std::ostringstream out;
  out << variant << ',' << config.m_initial << ',' << config.m_loop << ','
      << config.history_len << ',' << config.prediction_len << ','
      << format_metric(report.accuracy) << ','
      << format_metric(report.gain_loss_db_percentiles.at(90)) << ','
      << format_metric(report.avg_measurements_per_step) << ','
      << format_metric(report.overhead_reduction_vs.at("exhaustive")) << ','
      << format_metric(report.overhead_reduction_vs.at("mmrapid")) << '\n';
  return out.str();
}

}  // namespace

std::string metrics_csv_rows(const ExperimentConfig& config, const EvalOutcome& outcome) {
  return metrics_csv_row("full_algorithm", config, outcome.full_algorithm) +
         metrics_csv_row("lstm_estimates", config, outcome.lstm_estimates);
}

std::string run_sweep_csv(const ExperimentConfig& config, SweepGrid grid,
                          std::ostream* log) {
  config.validate();

  struct Cell {
    int m_initial, m_loop, history_len, prediction_len;
  };
  std::vector<Cell> cells;
  if (grid == SweepGrid::measurements) {
    for (int mi : config.sweep_m_initial) {
      for (int ml : config.sweep_m_loop) {
        cells.push_back({mi, ml, config.history_len, config.prediction_len});
      }
    }
  } else {
    for (int t : config.sweep_history) {
      for (int p : config.sweep_prediction) {
        cells.push_back({config.m_initial, config.m_loop, t, p});
      }
    }
  }

  auto run_cell = [&config](const Cell& cell) -> std::string {
    ExperimentConfig cfg = config;
    cfg.m_initial = cell.m_initial;
    cfg.m_loop = cell.m_loop;
    cfg.history_len = cell.history_len;
    cfg.prediction_len = cell.prediction_len;
    // Every cell owns its model/noise streams.
    const std::uint64_t tag =
        ((static_cast<std::uint64_t>(cell.m_initial) * 100 + cell.m_loop) * 100 +
         cell.history_len) *
            100 +
        cell.prediction_len;
    cfg.seed_init = Rng::derive(config.seed_init, tag);
    cfg.seed_dropout = Rng::derive(config.seed_dropout, tag);
    cfg.seed_shuffle = Rng::derive(config.seed_shuffle, tag);
    const auto result = run_three_stage(cfg, nullptr);
    return metrics_csv_rows(cfg, result.eval);
  };

  auto cell_valid = [&config, log](const Cell& cell) {
    std::string reason;
    if (cell.m_initial < cell.m_loop) {
      reason = "m_initial < m_loop";
    } else if (cell.m_initial > config.pn_codewords) {
      reason = "m_initial exceeds pn_codewords";
    } else if (cell.history_len < 2) {
      reason = "history_len < 2";
    } else if (cell.prediction_len < 1) {
      reason = "prediction_len < 1";
    }
    if (!reason.empty() && log != nullptr) {
      *log << "sweep: skipping cell (M_I=" << cell.m_initial << ",M_L=" << cell.m_loop
           << ",T=" << cell.history_len << ",P=" << cell.prediction_len << "): " << reason
           << '\n';
    }
    return reason.empty();
  };

  std::vector<Cell> valid;
  for (const auto& cell : cells) {
    if (cell_valid(cell)) valid.push_back(cell);
  }

  std::vector<std::string> rows(valid.size());
  if (config.jobs <= 1) {
    for (std::size_t i = 0; i < valid.size(); ++i) rows[i] = run_cell(valid[i]);
  } else {
    std::size_t next = 0;
    while (next < valid.size()) {
      const std::size_t stop =
          std::min(valid.size(), next + static_cast<std::size_t>(config.jobs));
      std::vector<std::future<std::string>> futures;
      for (std::size_t i = next; i < stop; ++i) {
        futures.push_back(
            std::async(std::launch::async, [&run_cell, &valid, i] { return run_cell(valid[i]); }));
      }
      for (std::size_t i = next; i < stop; ++i) rows[i] = futures[i - next].get();
      next = stop;
    }
  }

  std::string csv = metrics_csv_header();
  for (const auto& row : rows) csv += row;
  return csv;
}

nlohmann::json run_manifest(const ExperimentConfig& config, const nlohmann::json& extra) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["config"] = config_to_json(config);
  j["seeds"] = {{"seed_data", config.seed_data},     {"seed_codebook", config.seed_codebook},
                {"seed_noise", config.seed_noise},   {"seed_init", config.seed_init},
                {"seed_dropout", config.seed_dropout}, {"seed_shuffle", config.seed_shuffle}};
  if (!extra.is_null()) j["run"] = extra;
  return j;
}

void save_dataset_dir(const Dataset& dataset, const ExperimentConfig& config,
                      const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto path = [&dir](const char* name) {
    return (std::filesystem::path(dir) / name).string();
  };
  save_frames_jsonl(dataset.train_stage1, path("train_stage1.jsonl"));
  save_frames_jsonl(dataset.train_stage2, path("train_stage2.jsonl"));
  save_frames_jsonl(dataset.validation, path("validation.jsonl"));
  save_frames_jsonl(dataset.test, path("test.jsonl"));

  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["history_len"] = config.history_len;
  manifest["prediction_len"] = config.prediction_len;
  manifest["num_trajectories"] = config.num_trajectories;
  manifest["seed_data"] = config.seed_data;
  manifest["counts"] = {{"train_stage1", dataset.train_stage1.size()},
                        {"train_stage2", dataset.train_stage2.size()},
                        {"validation", dataset.validation.size()},
                        {"test", dataset.test.size()}};
  manifest["trajectories"] = {{"train_stage1", dataset.stage1_ids},
                              {"train_stage2", dataset.stage2_ids},
                              {"validation", dataset.validation_ids},
                              {"test", dataset.test_ids}};
  nn::save_json_file(path("dataset_manifest.json"), manifest);
}

Dataset load_dataset_dir(const std::string& dir, const ExperimentConfig& config) {
  const auto path = [&dir](const char* name) {
    return (std::filesystem::path(dir) / name).string();
  };
  const auto manifest = nn::load_json_file(path("dataset_manifest.json"));
  if (manifest.at("history_len").get<int>() != config.history_len ||
      manifest.at("prediction_len").get<int>() != config.prediction_len) {
    throw std::runtime_error("load_dataset_dir: dataset window does not match config");
  }
  Dataset ds;
  ds.train_stage1 =
      load_frames_jsonl(path("train_stage1.jsonl"), config.history_len, config.prediction_len);
  ds.train_stage2 =
      load_frames_jsonl(path("train_stage2.jsonl"), config.history_len, config.prediction_len);
  ds.validation =
      load_frames_jsonl(path("validation.jsonl"), config.history_len, config.prediction_len);
  ds.test = load_frames_jsonl(path("test.jsonl"), config.history_len, config.prediction_len);
  ds.stage1_ids = manifest.at("trajectories").at("train_stage1").get<std::vector<int>>();
  ds.stage2_ids = manifest.at("trajectories").at("train_stage2").get<std::vector<int>>();
  ds.validation_ids = manifest.at("trajectories").at("validation").get<std::vector<int>>();
  ds.test_ids = manifest.at("trajectories").at("test").get<std::vector<int>>();
  return ds;
}

}  // namespace beamtrack
