// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "beamtrack/estimators.hpp"
#include "beamtrack/metrics.hpp"
#include "beamtrack/nn/serialize.hpp"

using namespace beamtrack;

namespace {

const ArrayGeometry kGeometry(36, 0.5);

LosChannelState state_at_aoa(Scalar aoa, Scalar log_amplitude = 0.0) {
  LosChannelState s;
  s.aoa = aoa;
  s.log_amplitude = log_amplitude;
  return s;
}

// Independent argmax over the explicit element formulas, bypassing the
// codebook construction path entirely.
int brute_force_best_beam(Scalar aoa, int n_elements, int num_beams) {
  int best = 1;
  double best_gain = -1.0;
  for (int k = 1; k <= num_beams; ++k) {
    const double angle = M_PI * (k - 1) / num_beams - M_PI / 2.0;
    Complex acc{0.0, 0.0};
    for (int n = 0; n < n_elements; ++n) {
      acc += std::polar(1.0, M_PI * n * (std::sin(aoa) + std::sin(angle)));
    }
    const double gain = std::norm(acc);
    if (gain > best_gain + 1e-12) {
      best_gain = gain;
      best = k;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("oracle picks beam 65 at broadside") {
  const auto cb = build_pencil_codebook(kGeometry, 128);
  const auto est = oracle_best_beam(state_at_aoa(0.0), cb, kGeometry);
  CHECK(est.beam_index == 65);
  CHECK(est.source == EstimateSource::oracle);
  CHECK(est.beam_index == brute_force_best_beam(0.0, 36, 128));
}

TEST_CASE("oracle matches the independent brute force across angles") {
  const auto cb = build_pencil_codebook(kGeometry, 128);
  for (const Scalar aoa : {-0.9, -0.35, -0.01, 0.17, 0.6, 0.92}) {
    CHECK(oracle_best_beam(state_at_aoa(aoa), cb, kGeometry).beam_index ==
          brute_force_best_beam(aoa, 36, 128));
  }
}

TEST_CASE("oracle returns k when the aoa sits exactly on a negated beam angle") {
  const auto cb = build_pencil_codebook(kGeometry, 128);
  for (int k = 5; k <= 128; k += 13) {
    const Scalar aoa = -cb.beam_angles(k - 1);
    if (std::abs(aoa) > M_PI / 2) continue;
    CHECK(oracle_best_beam(state_at_aoa(aoa), cb, kGeometry).beam_index == k);
  }
}

TEST_CASE("oracle ignores amplitude scaling") {
  const auto cb = build_pencil_codebook(kGeometry, 128);
  for (const Scalar aoa : {-0.6, 0.2, 0.85}) {
    const int a = oracle_best_beam(state_at_aoa(aoa, 0.0), cb, kGeometry).beam_index;
    const int b = oracle_best_beam(state_at_aoa(aoa, -3.5), cb, kGeometry).beam_index;
    CHECK(a == b);
  }
}

TEST_CASE("noise-free exhaustive search reduces to the oracle") {
  const auto cb = build_pencil_codebook(kGeometry, 128);
  Rng rng(21);
  for (int i = 0; i < 200; ++i) {
    const auto state = state_at_aoa(rng.uniform(-0.92, 0.92), rng.uniform(-1.0, 1.0));
    NoiseModel noise(0.0, 100 + static_cast<std::uint64_t>(i));
    int used = 0;
    const auto est = exhaustive_search(state, cb, kGeometry, noise, &used);
    CHECK(est.beam_index == oracle_best_beam(state, cb, kGeometry).beam_index);
    CHECK(used == 128);
    CHECK(est.source == EstimateSource::exhaustive);
  }
}

TEST_CASE("exhaustive search at high snr nearly always matches the oracle") {
  const auto cb = build_pencil_codebook(kGeometry, 128);
  Rng rng(22);
  const Scalar log_amp_30db = 30.0 * std::log(10.0) / 20.0;
  int agree = 0;
  const int trials = 300;
  for (int i = 0; i < trials; ++i) {
    const auto state = state_at_aoa(rng.uniform(-0.92, 0.92), log_amp_30db);
    NoiseModel noise(1.0, 500 + static_cast<std::uint64_t>(i));
    const auto est = exhaustive_search(state, cb, kGeometry, noise);
    agree += est.beam_index == oracle_best_beam(state, cb, kGeometry).beam_index;
  }
  CHECK(static_cast<double>(agree) / trials >= 0.95);
}

TEST_CASE("oracle over a swept aoa grid is a staircase covering all beams") {
  // 1e4-point sweep: beams form contiguous plateaus, adjacent plateaus
  // differ by one index, every beam appears.  Within ~1 degree of
  // aoa = -pi/2 the opposite end-fire beam aliases through the
  // half-wavelength grating lobe (|sin a + sin theta| = 2), so the sweep
  // starts just inside that fringe; scenario angles stay below 55 degrees
  // anyway.
  const auto cb = build_pencil_codebook(kGeometry, 128);
  const int grid = 10000;
  const Scalar lo = -M_PI / 2.0 + 0.02;
  std::set<int> seen;
  int prev = 0;
  int plateaus = 0;
  for (int i = 0; i < grid; ++i) {
    const Scalar aoa = lo + (M_PI / 2.0 - lo) * i / grid;
    const int k = oracle_best_beam(state_at_aoa(aoa), cb, kGeometry).beam_index;
    seen.insert(k);
    if (k != prev) {
      ++plateaus;
      if (prev != 0) {
        CHECK(std::abs(k - prev) == 1);
      }
      prev = k;
    }
  }
  CHECK(seen.size() == 128);
  CHECK(plateaus == 128);
  CHECK(*seen.begin() == 1);
  CHECK(*seen.rbegin() == 128);
}

namespace {

struct ToySet {
  Matrix features;
  std::vector<int> labels;
};

// Noise-free unit-norm PN features labelled by the oracle.
ToySet make_toy_set(const PnCodebook& pn, const PencilCodebook& pencil, int m, int count,
                    std::uint64_t seed) {
  ToySet set;
  set.features.resize(count, m);
  Rng rng(seed);
  NoiseModel no_noise(0.0, 0);
  for (int i = 0; i < count; ++i) {
    const auto state = state_at_aoa(rng.uniform(-0.92, 0.92));
    const CVector h = channel_vector(state, kGeometry);
    Vector values(m);
    for (int j = 0; j < m; ++j) {
      values(j) = phaseless_measure(pn.columns.col(j), h, {1.0, 0.0}, no_noise);
    }
    set.features.row(i) = normalize_unit(values).transpose();
    set.labels.push_back(oracle_best_beam(state, pencil, kGeometry).beam_index);
  }
  return set;
}

MmRapidConfig small_config(int input_dim, int num_beams) {
  MmRapidConfig cfg;
  cfg.input_dim = input_dim;
  cfg.num_beams = num_beams;
  cfg.max_epochs = 60;
  cfg.batch_size = 32;
  return cfg;
}

}  // namespace

TEST_CASE("training on a single class memorizes it") {
  MmRapidConfig cfg = small_config(4, 16);
  cfg.max_epochs = 40;
  Matrix features(40, 4);
  Rng rng(31);
  for (int i = 0; i < 40; ++i) {
    Vector v(4);
    for (int j = 0; j < 4; ++j) v(j) = rng.uniform(0.1, 1.0);
    features.row(i) = normalize_unit(v).transpose();
  }
  const std::vector<int> labels(40, 7);
  const auto model = train_mmrapid(features, labels, 1, cfg);
  const auto pred = model.predict(features);
  for (int p : pred) CHECK(p == 7);
}

TEST_CASE("training rejects malformed inputs") {
  MmRapidConfig cfg = small_config(4, 16);
  CHECK_THROWS_AS(train_mmrapid(Matrix(0, 4), {}, 1, cfg), std::invalid_argument);
  Matrix bad = Matrix::Ones(3, 4);  // rows are not unit-norm
  CHECK_THROWS_AS(train_mmrapid(bad, {1, 2, 3}, 1, cfg), std::invalid_argument);
  Matrix ok(2, 4);
  ok.row(0) = normalize_unit(Vector::Ones(4)).transpose();
  ok.row(1) = normalize_unit(Vector::Ones(4)).transpose();
  CHECK_THROWS_AS(train_mmrapid(ok, {1, 99}, 1, cfg), std::invalid_argument);
}

TEST_CASE("training is deterministic given seeds") {
  const auto pn = build_pn_codebook(kGeometry, 5, 7);
  const auto pencil = build_pencil_codebook(kGeometry, 128);
  const auto set = make_toy_set(pn, pencil, 5, 300, 41);
  MmRapidConfig cfg = small_config(5, 128);
  cfg.max_epochs = 15;
  auto m1 = train_mmrapid(set.features, set.labels, 1, cfg);
  auto m2 = train_mmrapid(set.features, set.labels, 1, cfg);
  const auto d1 = nn::tensors_to_json(m1.parameters()).dump();
  const auto d2 = nn::tensors_to_json(m2.parameters()).dump();
  CHECK(d1 == d2);
}

TEST_CASE("prediction ties break to the smallest index and match batch mode") {
  MmRapidConfig cfg = small_config(3, 8);
  MmRapidModel model(cfg, 1);
  // Zero the whole network: logits collapse to the batch-norm shift, which
  // is identical across classes, so the argmax must fall on beam 1.
  for (auto& p : model.parameters()) p.value->setZero();
  Vector f = normalize_unit(Vector::Ones(3));
  CHECK(model.predict_one(f) == 1);

  Matrix batch(2, 3);
  batch.row(0) = f.transpose();
  batch.row(1) = f.transpose();
  const auto preds = model.predict(batch);
  CHECK(preds[0] == model.predict_one(f));
  CHECK(preds[1] == preds[0]);
}

TEST_CASE("prediction source follows the instance") {
  MmRapidConfig cfg = small_config(3, 8);
  const MmRapidModel m1(cfg, 1), m2(cfg, 2);
  const Vector f = normalize_unit(Vector::Ones(3));
  CHECK(mmrapid_predict(m1, f, 4).source == EstimateSource::mmrapid1);
  CHECK(mmrapid_predict(m2, f, 4).source == EstimateSource::mmrapid2);
  CHECK(mmrapid_predict(m1, f, 4).time_step == 4);
}

TEST_CASE("model persists through json with exact weights") {
  const auto pn = build_pn_codebook(kGeometry, 5, 7);
  const auto pencil = build_pencil_codebook(kGeometry, 128);
  const auto set = make_toy_set(pn, pencil, 5, 200, 43);
  MmRapidConfig cfg = small_config(5, 128);
  cfg.max_epochs = 8;
  auto model = train_mmrapid(set.features, set.labels, 2, cfg);
  const auto path =
      (std::filesystem::temp_directory_path() / "beamtrack_mmrapid_test.json").string();
  model.save(path);
  auto loaded = MmRapidModel::load(path);
  CHECK(loaded.instance() == 2);
  CHECK(loaded.input_dim() == 5);
  CHECK(loaded.num_beams() == 128);
  const auto before = model.predict(set.features);
  const auto after = loaded.predict(set.features);
  CHECK(before == after);
  std::remove(path.c_str());
}
