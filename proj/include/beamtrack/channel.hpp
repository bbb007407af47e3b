// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMTRACK_CHANNEL_HPP
#define BEAMTRACK_CHANNEL_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "beamtrack/array.hpp"
#include "beamtrack/rng.hpp"
#include "beamtrack/types.hpp"

namespace beamtrack {

struct Vec2 {
  Scalar x = 0.0;
  Scalar y = 0.0;
};

struct Rect {
  Scalar x_min = 0.0, x_max = 0.0;
  Scalar y_min = 0.0, y_max = 0.0;

  bool contains(const Vec2& p, Scalar tol = 1e-9) const {
    return p.x >= x_min - tol && p.x <= x_max + tol && p.y >= y_min - tol &&
           p.y <= y_max + tol;
  }
};

/// Street-cell geometry and link-budget calibration.  The base station sits
/// at the origin with the array broadside pointing across the street (+x);
/// users move straight down the street (-y) on a fixed position grid.
struct Scenario {
  Vec2 bs_position{0.0, 0.0};
  Rect cell_rect{15.0, 35.0, -20.0, 20.0};
  Scalar grid_step = 0.2;
  Rect start_box{12.0, 38.0, 20.0, 56.0};
  int speed_min = 1;
  int speed_max = 10;  // grid steps per time step
  Scalar pathloss_exponent = 2.0;
  Scalar max_snr_db = 30.0;
  Scalar ref_distance = 15.0;

  void validate() const;  // throws std::invalid_argument on inconsistency
};

/// Line-of-sight channel at one position and time step.
struct LosChannelState {
  Scalar aoa = 0.0;            // radians from broadside
  Scalar log_amplitude = 0.0;  // channel amplitude is exp(log_amplitude)
  Scalar snr_db = 0.0;         // per-antenna SNR with unit symbol power
  Vec2 position;
  int time_step = 0;
};

/// Channel state from the log-distance path-loss model.  Throws if the
/// position is outside the cell.
LosChannelState los_channel_at(const Vec2& position, const Scenario& scenario);

/// exp(log_amplitude) * steering_vector(geometry, aoa).
CVector channel_vector(const LosChannelState& state, const ArrayGeometry& geometry);

/// Straight-line constant-speed motion on the position grid.
struct Trajectory {
  int id = 0;
  int speed = 1;  // grid steps per time step, direction fixed at -y
  std::vector<Vec2> positions;
};

Trajectory sample_trajectory(const Scenario& scenario, Rng& rng);

/// One tracking frame: history_len measured steps followed by
/// prediction_len measurement-free steps, all inside the cell.
struct FrameWindow {
  int trajectory_id = 0;
  int start_step = 0;  // index of the first state within its trajectory
  int speed = 1;
  int history_len = 0;
  int prediction_len = 0;
  std::vector<LosChannelState> states;  // size history_len + prediction_len
};

/// Grid-point channel table imported from an external file; positions are
/// keyed by integer grid coordinates.
class ChannelTable;

/// All windows of history_len + prediction_len consecutive in-cell steps,
/// advancing the window start by `stride` steps.  Returns an empty list if
/// the trajectory has fewer in-cell steps than one window.
std::vector<FrameWindow> extract_frames(const Trajectory& trajectory, int history_len,
                                        int prediction_len, const Scenario& scenario,
                                        int stride = 1,
                                        const ChannelTable* table = nullptr);

/// Trajectory-level partitions.  Training partitions hold every shifted
/// window; the test partition holds back-to-back non-overlapping frames.
struct Dataset {
  std::vector<FrameWindow> train_stage1;
  std::vector<FrameWindow> train_stage2;
  std::vector<FrameWindow> validation;
  std::vector<FrameWindow> test;
  std::vector<int> stage1_ids, stage2_ids, validation_ids, test_ids;
};

Dataset generate_dataset(const Scenario& scenario, int num_trajectories,
                         int history_len, int prediction_len, std::uint64_t seed,
                         const ChannelTable* table = nullptr);

/// JSON-lines persistence: one frame per line with fields
/// trajectory_id, start_step, speed, states:[{x,y,aoa,snr_db}].
void save_frames_jsonl(const std::vector<FrameWindow>& frames, const std::string& path);
std::vector<FrameWindow> load_frames_jsonl(const std::string& path, int history_len,
                                           int prediction_len);

struct ChannelRecord {
  Vec2 position;
  Scalar aoa = 0.0;
  Scalar gain_db = 0.0;
};

/// Reads a channel-table CSV with header `x_m,y_m,aoa_rad,gain_db`.
/// Rows must parse as finite numbers with |aoa| <= pi/2 and positions on the
/// grid; violations raise an error naming the line number.  An empty file
/// yields an empty list.
std::vector<ChannelRecord> import_channel_table(const std::string& path,
                                                Scalar grid_step = 0.2);

class ChannelTable {
 public:
  ChannelTable(std::vector<ChannelRecord> records, Scalar grid_step);

  /// Channel state at a grid position; throws if the point is missing.
  LosChannelState state_at(const Vec2& position) const;
  std::size_t size() const { return records_.size(); }

 private:
  std::map<std::pair<long, long>, ChannelRecord> by_grid_;
  std::vector<ChannelRecord> records_;
  Scalar grid_step_;
};

}  // namespace beamtrack

#endif
