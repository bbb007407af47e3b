// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "beamtrack/channel.hpp"

using namespace beamtrack;

namespace {

const Scenario kScenario;  // defaults
const ArrayGeometry kGeometry(36, 0.5);

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("scenario defaults validate") {
  CHECK_NOTHROW(kScenario.validate());
}

TEST_CASE("scenario validation rejects inconsistent geometry") {
  Scenario s = kScenario;
  s.ref_distance = 10.0;  // nearest cell point is at 15 m
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = kScenario;
  s.cell_rect.y_max = 40.0;  // pushes the corner angle past 55 degrees
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("los channel at the near edge hits max snr and zero aoa") {
  const auto state = los_channel_at({15.0, 0.0}, kScenario);
  CHECK(state.aoa == doctest::Approx(0.0));
  CHECK(state.snr_db == doctest::Approx(30.0));
}

TEST_CASE("los channel at the cell corner reaches the 53.13 degree limit") {
  const auto state = los_channel_at({15.0, 20.0}, kScenario);
  CHECK(state.aoa == doctest::Approx(std::atan2(20.0, 15.0)));
  CHECK(state.aoa * 180.0 / M_PI == doctest::Approx(53.1301).epsilon(1e-4));
}

TEST_CASE("los snr follows the log-distance law") {
  const auto state = los_channel_at({30.0, 0.0}, kScenario);
  CHECK(state.snr_db == doctest::Approx(30.0 - 20.0 * std::log10(2.0)).epsilon(1e-12));
  CHECK(state.snr_db == doctest::Approx(23.9794).epsilon(1e-4));
}

TEST_CASE("los channel rejects positions outside the cell") {
  CHECK_THROWS_AS(los_channel_at({14.0, 0.0}, kScenario), std::invalid_argument);
  CHECK_THROWS_AS(los_channel_at({20.0, 25.0}, kScenario), std::invalid_argument);
}

TEST_CASE("per-antenna snr calibration ties log amplitude to snr") {
  for (const Vec2 p : {Vec2{15.0, 0.0}, Vec2{27.4, -13.2}, Vec2{35.0, 20.0}}) {
    const auto state = los_channel_at(p, kScenario);
    CHECK(std::exp(2.0 * state.log_amplitude) ==
          doctest::Approx(std::pow(10.0, state.snr_db / 10.0)).epsilon(1e-12));
  }
}

TEST_CASE("channel vector is the scaled steering vector") {
  LosChannelState state;
  state.aoa = 0.0;
  state.log_amplitude = 0.0;
  const CVector h = channel_vector(state, ArrayGeometry(4, 0.5));
  REQUIRE(h.size() == 4);
  for (int n = 0; n < 4; ++n) CHECK(h(n) == Complex{1.0, 0.0});

  state.log_amplitude = -1.3;
  state.aoa = 0.4;
  const CVector h2 = channel_vector(state, kGeometry);
  CHECK(h2.squaredNorm() == doctest::Approx(std::exp(-2.6) * 36.0).epsilon(1e-12));

  const CVector h3 = channel_vector(state, kGeometry);
  CHECK(h2 == h3);
}

TEST_CASE("trajectories step down the street at speed grid-steps per step") {
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(400 + static_cast<std::uint64_t>(trial));
    const auto traj = sample_trajectory(kScenario, rng);
    REQUIRE(traj.positions.size() >= 2);
    REQUIRE(traj.speed >= 1);
    REQUIRE(traj.speed <= 10);
    CHECK(traj.positions.front().x >= kScenario.start_box.x_min - 1e-9);
    CHECK(traj.positions.front().x <= kScenario.start_box.x_max + 1e-9);
    CHECK(traj.positions.front().y >= kScenario.start_box.y_min - 1e-9);
    CHECK(traj.positions.front().y <= kScenario.start_box.y_max + 1e-9);
    for (std::size_t i = 1; i < traj.positions.size(); ++i) {
      CHECK(traj.positions[i].x == traj.positions[i - 1].x);
      CHECK(traj.positions[i - 1].y - traj.positions[i].y ==
            doctest::Approx(traj.speed * kScenario.grid_step).epsilon(1e-12));
    }
    // Ends once the cell's far edge is crossed.
    CHECK(traj.positions.back().y >= kScenario.cell_rect.y_min - 1e-9);
    CHECK(traj.positions.back().y - traj.speed * kScenario.grid_step <
          kScenario.cell_rect.y_min);
  }
}

TEST_CASE("fixed seed reproduces the trajectory") {
  Rng a(77), b(77);
  const auto t1 = sample_trajectory(kScenario, a);
  const auto t2 = sample_trajectory(kScenario, b);
  REQUIRE(t1.positions.size() == t2.positions.size());
  CHECK(t1.speed == t2.speed);
  for (std::size_t i = 0; i < t1.positions.size(); ++i) {
    CHECK(t1.positions[i].x == t2.positions[i].x);
    CHECK(t1.positions[i].y == t2.positions[i].y);
  }
}

namespace {

Trajectory synthetic_trajectory(int in_cell_steps, int lead_in, int speed = 1) {
  Trajectory t;
  t.id = 9;
  t.speed = speed;
  const Scalar x = 25.0;
  Scalar y = kScenario.cell_rect.y_max + lead_in * speed * kScenario.grid_step;
  for (int i = 0; i < lead_in; ++i) {
    t.positions.push_back({x, y});
    y -= speed * kScenario.grid_step;
  }
  y = kScenario.cell_rect.y_max;
  for (int i = 0; i < in_cell_steps; ++i) {
    t.positions.push_back({x, y});
    y -= speed * kScenario.grid_step;
  }
  return t;
}

}  // namespace

TEST_CASE("frame extraction counts shifted windows") {
  const auto traj = synthetic_trajectory(15, 3);
  const auto frames = extract_frames(traj, 7, 2, kScenario);
  CHECK(frames.size() == 7);  // 15 - 9 + 1
  for (const auto& f : frames) {
    CHECK(f.states.size() == 9);
    for (const auto& s : f.states) CHECK(kScenario.cell_rect.contains(s.position));
  }
  CHECK(frames[1].start_step == frames[0].start_step + 1);
}

TEST_CASE("frame extraction yields nothing when the run is too short") {
  const auto traj = synthetic_trajectory(8, 2);
  CHECK(extract_frames(traj, 7, 2, kScenario).empty());
}

TEST_CASE("non-overlapping extraction strides by the window length") {
  const auto traj = synthetic_trajectory(30, 0);
  const auto frames = extract_frames(traj, 7, 2, kScenario, 9);
  CHECK(frames.size() == 3);
  CHECK(frames[1].start_step - frames[0].start_step == 9);
}

TEST_CASE("aoa decreases monotonically along a trajectory") {
  const auto traj = synthetic_trajectory(40, 0, 2);
  const auto frames = extract_frames(traj, 10, 10, kScenario);
  REQUIRE(!frames.empty());
  const auto& states = frames.front().states;
  for (std::size_t i = 1; i < states.size(); ++i) {
    CHECK(states[i].aoa < states[i - 1].aoa);
    CHECK(states[i].aoa ==
          doctest::Approx(std::atan2(states[i].position.y, states[i].position.x)));
  }
}

TEST_CASE("dataset splits 1000 trajectories into 100/675/75/150") {
  const auto ds = generate_dataset(kScenario, 1000, 7, 2, 2024);
  CHECK(ds.stage1_ids.size() == 100);
  CHECK(ds.stage2_ids.size() == 675);
  CHECK(ds.validation_ids.size() == 75);
  CHECK(ds.test_ids.size() == 150);

  std::set<int> all;
  for (const auto* ids : {&ds.stage1_ids, &ds.stage2_ids, &ds.validation_ids, &ds.test_ids}) {
    for (int id : *ids) all.insert(id);
  }
  CHECK(all.size() == 1000);  // pairwise disjoint union covers everything
  CHECK(*all.begin() == 0);
  CHECK(*all.rbegin() == 999);
}

TEST_CASE("dataset generation is a pure function of its seed") {
  const auto a = generate_dataset(kScenario, 60, 4, 3, 55);
  const auto b = generate_dataset(kScenario, 60, 4, 3, 55);
  CHECK(a.stage1_ids == b.stage1_ids);
  CHECK(a.test_ids == b.test_ids);
  REQUIRE(a.train_stage2.size() == b.train_stage2.size());
  for (std::size_t i = 0; i < a.train_stage2.size(); ++i) {
    CHECK(a.train_stage2[i].trajectory_id == b.train_stage2[i].trajectory_id);
    CHECK(a.train_stage2[i].start_step == b.train_stage2[i].start_step);
    for (std::size_t k = 0; k < a.train_stage2[i].states.size(); ++k) {
      CHECK(a.train_stage2[i].states[k].aoa == b.train_stage2[i].states[k].aoa);
    }
  }
  const auto c = generate_dataset(kScenario, 60, 4, 3, 56);
  CHECK(a.stage1_ids != c.stage1_ids);
}

TEST_CASE("generated frames respect the snr and aoa envelopes") {
  const auto ds = generate_dataset(kScenario, 40, 7, 2, 11);
  const Scalar snr_floor =
      30.0 - 20.0 * std::log10(std::hypot(35.0, 20.0) / 15.0);  // far corner
  int checked = 0;
  for (const auto& f : ds.train_stage2) {
    for (const auto& s : f.states) {
      CHECK(s.snr_db <= 30.0 + 1e-9);
      CHECK(s.snr_db > snr_floor - 1e-9);
      CHECK(std::abs(s.aoa) <= 53.2 * M_PI / 180.0);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("dataset rejects degenerate sizes") {
  CHECK_THROWS_AS(generate_dataset(kScenario, 10, 7, 2, 1), std::invalid_argument);
}

TEST_CASE("frames round-trip through jsonl") {
  const auto ds = generate_dataset(kScenario, 30, 5, 2, 99);
  REQUIRE(!ds.test.empty());
  const auto path = temp_path("beamtrack_frames_test.jsonl");
  save_frames_jsonl(ds.test, path);
  const auto loaded = load_frames_jsonl(path, 5, 2);
  REQUIRE(loaded.size() == ds.test.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].trajectory_id == ds.test[i].trajectory_id);
    CHECK(loaded[i].start_step == ds.test[i].start_step);
    CHECK(loaded[i].speed == ds.test[i].speed);
    for (std::size_t k = 0; k < loaded[i].states.size(); ++k) {
      const auto& a = loaded[i].states[k];
      const auto& b = ds.test[i].states[k];
      CHECK(a.position.x == b.position.x);  // bit-exact through json
      CHECK(a.position.y == b.position.y);
      CHECK(a.aoa == b.aoa);
      CHECK(a.snr_db == b.snr_db);
      CHECK(a.log_amplitude == b.log_amplitude);
      CHECK(a.time_step == b.time_step);
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("channel table import accepts a well-formed file") {
  const auto path = temp_path("beamtrack_table_ok.csv");
  {
    std::ofstream out(path);
    out << "x_m,y_m,aoa_rad,gain_db\n";
    out << "15.0,0.0,0.0,30.0\n";
    out << "15.2,0.0,0.013,29.9\n";
    out << "15.4,-0.2,0.02,29.8\n";
  }
  const auto records = import_channel_table(path);
  REQUIRE(records.size() == 3);
  CHECK(records[0].position.x == 15.0);
  CHECK(records[2].gain_db == doctest::Approx(29.8));
  std::remove(path.c_str());
}

TEST_CASE("channel table import rejects out-of-range aoa with a line number") {
  const auto path = temp_path("beamtrack_table_aoa.csv");
  {
    std::ofstream out(path);
    out << "x_m,y_m,aoa_rad,gain_db\n";
    out << "15.0,0.0,2.0,30.0\n";
  }
  CHECK_THROWS_WITH_AS(import_channel_table(path), doctest::Contains("line 2"),
                       std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("channel table import rejects malformed rows and off-grid points") {
  const auto path = temp_path("beamtrack_table_bad.csv");
  {
    std::ofstream out(path);
    out << "x_m,y_m,aoa_rad,gain_db\n";
    out << "15.0,zero,0.1,30.0\n";
  }
  CHECK_THROWS_WITH_AS(import_channel_table(path), doctest::Contains("line 2"),
                       std::runtime_error);
  {
    std::ofstream out(path);
    out << "x_m,y_m,aoa_rad,gain_db\n";
    out << "15.05,0.0,0.1,30.0\n";  // not a multiple of 0.2
  }
  CHECK_THROWS_WITH_AS(import_channel_table(path), doctest::Contains("grid"),
                       std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("empty channel table file yields an empty list") {
  const auto path = temp_path("beamtrack_table_empty.csv");
  { std::ofstream out(path); }
  CHECK(import_channel_table(path).empty());
  std::remove(path.c_str());
}

TEST_CASE("channel table lookup mirrors the imported records") {
  const auto path = temp_path("beamtrack_table_lookup.csv");
  {
    std::ofstream out(path);
    out << "x_m,y_m,aoa_rad,gain_db\n";
    out << "20.0,1.2,0.345,25.0\n";
  }
  const ChannelTable table(import_channel_table(path), 0.2);
  const auto state = table.state_at({20.0, 1.2});
  CHECK(state.aoa == doctest::Approx(0.345));
  CHECK(state.snr_db == doctest::Approx(25.0));
  CHECK(std::exp(2.0 * state.log_amplitude) == doctest::Approx(std::pow(10.0, 2.5)));
  CHECK_THROWS_AS(table.state_at({20.2, 1.2}), std::runtime_error);
  std::remove(path.c_str());
}
