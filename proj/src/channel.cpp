// SPDX-License-Identifier: Apache-2.0

#include "beamtrack/channel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace beamtrack {

namespace {

constexpr Scalar kLn10 = 2.302585092994045684;
constexpr Scalar kMaxAbsAoaDeg = 55.0;

Scalar snr_to_log_amplitude(Scalar snr_db) {
  // Per-antenna SNR contract with unit noise variance and unit symbol power:
  // exp(2 * log_amplitude) = 10^(snr_db / 10).
  return snr_db * kLn10 / 20.0;
}

long grid_index(Scalar value, Scalar grid_step) {
  return std::lround(value / grid_step);
}

}  // namespace

void Scenario::validate() const {
  if (!(grid_step > 0)) throw std::invalid_argument("Scenario: grid_step must be > 0");
  if (speed_min < 1 || speed_max < speed_min) {
    throw std::invalid_argument("Scenario: need 1 <= speed_min <= speed_max");
  }
  if (cell_rect.x_min >= cell_rect.x_max || cell_rect.y_min >= cell_rect.y_max) {
    throw std::invalid_argument("Scenario: degenerate cell_rect");
  }
  // Nearest point of the cell to the BS fixes the reference distance.
  const Scalar nx = std::clamp(bs_position.x, cell_rect.x_min, cell_rect.x_max);
  const Scalar ny = std::clamp(bs_position.y, cell_rect.y_min, cell_rect.y_max);
  const Scalar nearest = std::hypot(nx - bs_position.x, ny - bs_position.y);
  if (std::abs(nearest - ref_distance) > 1e-9) {
    throw std::invalid_argument("Scenario: nearest cell point must sit at ref_distance");
  }
  // Angular limit over the cell corners.
  const Scalar limit = kMaxAbsAoaDeg * M_PI / 180.0;
  for (Scalar cx : {cell_rect.x_min, cell_rect.x_max}) {
    for (Scalar cy : {cell_rect.y_min, cell_rect.y_max}) {
      const Scalar aoa = std::atan2(cy - bs_position.y, cx - bs_position.x);
      if (std::abs(aoa) > limit) {
        throw std::invalid_argument("Scenario: cell exceeds the +-55 deg angular limit");
      }
    }
  }
}

LosChannelState los_channel_at(const Vec2& position, const Scenario& scenario) {
  if (!scenario.cell_rect.contains(position)) {
    throw std::invalid_argument("los_channel_at: position outside the cell");
  }
  const Scalar dx = position.x - scenario.bs_position.x;
  const Scalar dy = position.y - scenario.bs_position.y;
  const Scalar dist = std::hypot(dx, dy);
  LosChannelState state;
  state.aoa = std::atan2(dy, dx);
  state.snr_db = scenario.max_snr_db -
                 10.0 * scenario.pathloss_exponent * std::log10(dist / scenario.ref_distance);
  state.log_amplitude = snr_to_log_amplitude(state.snr_db);
  state.position = position;
  state.time_step = 0;
  return state;
}

CVector channel_vector(const LosChannelState& state, const ArrayGeometry& geometry) {
  return std::exp(state.log_amplitude) * steering_vector(geometry, state.aoa);
}

Trajectory sample_trajectory(const Scenario& scenario, Rng& rng) {
  Trajectory traj;
  const long gx = grid_index(rng.uniform(scenario.start_box.x_min, scenario.start_box.x_max),
                             scenario.grid_step);
  long gy = grid_index(rng.uniform(scenario.start_box.y_min, scenario.start_box.y_max),
                       scenario.grid_step);
  traj.speed = rng.uniform_int(scenario.speed_min, scenario.speed_max);
  const Scalar x = gx * scenario.grid_step;
  while (true) {
    const Scalar y = gy * scenario.grid_step;
    if (y < scenario.cell_rect.y_min) break;
    traj.positions.push_back({x, y});
    gy -= traj.speed;
  }
  return traj;
}

std::vector<FrameWindow> extract_frames(const Trajectory& trajectory, int history_len,
                                        int prediction_len, const Scenario& scenario,
                                        int stride, const ChannelTable* table) {
  if (history_len < 1 || prediction_len < 1) {
    throw std::invalid_argument("extract_frames: need history_len >= 1, prediction_len >= 1");
  }
  if (stride < 1) throw std::invalid_argument("extract_frames: stride must be >= 1");

  const int window = history_len + prediction_len;
  const int n = static_cast<int>(trajectory.positions.size());
  std::vector<FrameWindow> frames;

  auto state_at = [&](int step) {
    LosChannelState s = table ? table->state_at(trajectory.positions[step])
                              : los_channel_at(trajectory.positions[step], scenario);
    s.time_step = step;
    return s;
  };

  int run_start = -1;
  for (int i = 0; i <= n; ++i) {
    const bool in_cell = i < n && scenario.cell_rect.contains(trajectory.positions[i]);
    if (in_cell && run_start < 0) run_start = i;
    if (!in_cell && run_start >= 0) {
      const int run_len = i - run_start;
      for (int s = 0; s + window <= run_len; s += stride) {
        FrameWindow f;
        f.trajectory_id = trajectory.id;
        f.start_step = run_start + s;
        f.speed = trajectory.speed;
        f.history_len = history_len;
        f.prediction_len = prediction_len;
        f.states.reserve(window);
        for (int k = 0; k < window; ++k) f.states.push_back(state_at(run_start + s + k));
        frames.push_back(std::move(f));
      }
      run_start = -1;
    }
  }
  return frames;
}

Dataset generate_dataset(const Scenario& scenario, int num_trajectories, int history_len,
                         int prediction_len, std::uint64_t seed, const ChannelTable* table) {
  scenario.validate();
  if (num_trajectories < 20) {
    throw std::invalid_argument("generate_dataset: need at least 20 trajectories");
  }

  const int n1 = static_cast<int>(std::lround(0.10 * num_trajectories));
  const int ntest = static_cast<int>(std::lround(0.15 * num_trajectories));
  const int n2 = num_trajectories - n1 - ntest;
  const int nval = static_cast<int>(std::lround(0.10 * n2));
  if (n1 < 1 || ntest < 1 || nval < 1 || n2 - nval < 1) {
    throw std::invalid_argument("generate_dataset: partition too small to be non-empty");
  }

  std::vector<int> ids(num_trajectories);
  for (int i = 0; i < num_trajectories; ++i) ids[i] = i;
  Rng shuffle_rng(Rng::derive(seed, 0));
  for (int i = num_trajectories - 1; i > 0; --i) {
    std::swap(ids[i], ids[shuffle_rng.uniform_int(0, i)]);
  }

  Dataset ds;
  ds.stage1_ids.assign(ids.begin(), ids.begin() + n1);
  ds.validation_ids.assign(ids.begin() + n1, ids.begin() + n1 + nval);
  ds.stage2_ids.assign(ids.begin() + n1 + nval, ids.begin() + n1 + n2);
  ds.test_ids.assign(ids.begin() + n1 + n2, ids.end());

  enum class Part { stage1, validation, stage2, test };
  std::vector<Part> part_of(num_trajectories);
  for (int id : ds.stage1_ids) part_of[id] = Part::stage1;
  for (int id : ds.validation_ids) part_of[id] = Part::validation;
  for (int id : ds.stage2_ids) part_of[id] = Part::stage2;
  for (int id : ds.test_ids) part_of[id] = Part::test;

  const int window = history_len + prediction_len;
  for (int i = 0; i < num_trajectories; ++i) {
    Rng traj_rng(Rng::derive(seed, 1 + static_cast<std::uint64_t>(i)));
    Trajectory traj = sample_trajectory(scenario, traj_rng);
    traj.id = i;
    const int stride = part_of[i] == Part::test ? window : 1;
    auto frames = extract_frames(traj, history_len, prediction_len, scenario, stride, table);
    auto* dest = &ds.train_stage2;
    switch (part_of[i]) {
      case Part::stage1: dest = &ds.train_stage1; break;
      case Part::validation: dest = &ds.validation; break;
      case Part::stage2: dest = &ds.train_stage2; break;
      case Part::test: dest = &ds.test; break;
    }
    for (auto& f : frames) dest->push_back(std::move(f));
  }
  return ds;
}

void save_frames_jsonl(const std::vector<FrameWindow>& frames, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_frames_jsonl: cannot open " + path);
  for (const auto& f : frames) {
    nlohmann::json states = nlohmann::json::array();
    for (const auto& s : f.states) {
      states.push_back({{"x", s.position.x},
                        {"y", s.position.y},
                        {"aoa", s.aoa},
                        {"snr_db", s.snr_db}});
    }
    nlohmann::json line = {{"trajectory_id", f.trajectory_id},
                           {"start_step", f.start_step},
                           {"speed", f.speed},
                           {"states", states}};
    out << line.dump() << '\n';
  }
}

std::vector<FrameWindow> load_frames_jsonl(const std::string& path, int history_len,
                                           int prediction_len) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_frames_jsonl: cannot open " + path);
  std::vector<FrameWindow> frames;
  std::string line;
  const std::size_t window = static_cast<std::size_t>(history_len) + prediction_len;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    FrameWindow f;
    f.trajectory_id = j.at("trajectory_id").get<int>();
    f.start_step = j.at("start_step").get<int>();
    f.speed = j.at("speed").get<int>();
    f.history_len = history_len;
    f.prediction_len = prediction_len;
    const auto& states = j.at("states");
    if (states.size() != window) {
      throw std::runtime_error("load_frames_jsonl: frame length does not match window");
    }
    int k = 0;
    for (const auto& sj : states) {
      LosChannelState s;
      s.position = {sj.at("x").get<Scalar>(), sj.at("y").get<Scalar>()};
      s.aoa = sj.at("aoa").get<Scalar>();
      s.snr_db = sj.at("snr_db").get<Scalar>();
      s.log_amplitude = snr_to_log_amplitude(s.snr_db);
      s.time_step = f.start_step + k++;
      f.states.push_back(s);
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<ChannelRecord> import_channel_table(const std::string& path, Scalar grid_step) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("import_channel_table: cannot open " + path);
  std::vector<ChannelRecord> records;
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != "x_m,y_m,aoa_rad,gain_db") {
        throw std::runtime_error("import_channel_table: line 1: expected header "
                                 "x_m,y_m,aoa_rad,gain_db");
      }
      saw_header = true;
      continue;
    }
    std::istringstream ss(line);
    std::string field;
    Scalar vals[4];
    for (int i = 0; i < 4; ++i) {
      if (!std::getline(ss, field, ',')) {
        throw std::runtime_error("import_channel_table: line " + std::to_string(line_no) +
                                 ": expected 4 fields");
      }
      std::size_t consumed = 0;
      try {
        vals[i] = std::stod(field, &consumed);
      } catch (const std::exception&) {
        consumed = 0;
      }
      if (consumed != field.size() || field.empty() || !std::isfinite(vals[i])) {
        throw std::runtime_error("import_channel_table: line " + std::to_string(line_no) +
                                 ": malformed value '" + field + "'");
      }
    }
    if (std::getline(ss, field, ',')) {
      throw std::runtime_error("import_channel_table: line " + std::to_string(line_no) +
                               ": too many fields");
    }
    if (std::abs(vals[2]) > M_PI / 2) {
      throw std::runtime_error("import_channel_table: line " + std::to_string(line_no) +
                               ": aoa outside [-pi/2, pi/2]");
    }
    for (int i = 0; i < 2; ++i) {
      const Scalar ratio = vals[i] / grid_step;
      if (std::abs(ratio - std::round(ratio)) > 1e-6) {
        throw std::runtime_error("import_channel_table: line " + std::to_string(line_no) +
                                 ": position off the " + std::to_string(grid_step) + " m grid");
      }
    }
    records.push_back({{vals[0], vals[1]}, vals[2], vals[3]});
  }
  return records;
}

ChannelTable::ChannelTable(std::vector<ChannelRecord> records, Scalar grid_step)
    : records_(std::move(records)), grid_step_(grid_step) {
  for (const auto& r : records_) {
    by_grid_[{grid_index(r.position.x, grid_step_), grid_index(r.position.y, grid_step_)}] = r;
  }
}

LosChannelState ChannelTable::state_at(const Vec2& position) const {
  const auto it =
      by_grid_.find({grid_index(position.x, grid_step_), grid_index(position.y, grid_step_)});
  if (it == by_grid_.end()) {
    throw std::runtime_error("ChannelTable: no record at (" + std::to_string(position.x) +
                             ", " + std::to_string(position.y) + ")");
  }
  LosChannelState s;
  s.aoa = it->second.aoa;
  s.snr_db = it->second.gain_db;
  s.log_amplitude = snr_to_log_amplitude(s.snr_db);
  s.position = position;
  return s;
}

}  // namespace beamtrack
