// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "beamtrack/array.hpp"
#include "beamtrack/rng.hpp"

using namespace beamtrack;

namespace {

const ArrayGeometry kGeometry(36, 0.5);

// Independent route: |sum_n exp(j*pi*n*(sin(aoa) + sin(beam_angle)))|^2 via
// the closed-form Dirichlet kernel.
double dirichlet_gain(int n_elements, double aoa, double beam_angle) {
  const double x = M_PI * (std::sin(aoa) + std::sin(beam_angle));
  if (std::abs(std::sin(x / 2.0)) < 1e-15) {
    return static_cast<double>(n_elements) * n_elements;
  }
  const double ratio = std::sin(n_elements * x / 2.0) / std::sin(x / 2.0);
  return ratio * ratio;
}

}  // namespace

TEST_CASE("steering vector broadside is all ones") {
  const auto v = steering_vector(ArrayGeometry(4, 0.5), 0.0);
  REQUIRE(v.size() == 4);
  for (int n = 0; n < 4; ++n) {
    CHECK(v(n).real() == doctest::Approx(1.0));
    CHECK(v(n).imag() == doctest::Approx(0.0));
  }
}

TEST_CASE("steering vector endfire alternates sign for two elements") {
  const auto v = steering_vector(ArrayGeometry(2, 0.5), M_PI / 2.0);
  CHECK(v(0).real() == doctest::Approx(1.0));
  CHECK(v(1).real() == doctest::Approx(-1.0));
  CHECK(std::abs(v(1).imag()) < 1e-12);
}

TEST_CASE("steering vector entries are unit modulus, squared norm N_r") {
  const auto v = steering_vector(kGeometry, 0.3);
  CHECK(v.squaredNorm() == doctest::Approx(36.0).epsilon(1e-12));
  for (int n = 0; n < 36; ++n) CHECK(std::abs(v(n)) == doctest::Approx(1.0));
}

TEST_CASE("steering vector rejects non-finite aoa") {
  CHECK_THROWS_AS(steering_vector(kGeometry, std::numeric_limits<double>::quiet_NaN()),
                  std::invalid_argument);
  CHECK_THROWS_AS(steering_vector(kGeometry, std::numeric_limits<double>::infinity()),
                  std::invalid_argument);
}

TEST_CASE("geometry validation") {
  CHECK_THROWS_AS(ArrayGeometry(0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(ArrayGeometry(4, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(ArrayGeometry(4, -1.0), std::invalid_argument);
}

TEST_CASE("pencil codebook beam 65 of 128 is broadside all-ones") {
  const auto cb = build_pencil_codebook(kGeometry, 128);
  REQUIRE(cb.num_beams() == 128);
  CHECK(cb.beam_angles(64) == doctest::Approx(0.0));
  const auto beam = cb.beam(65);
  for (int n = 0; n < 36; ++n) {
    CHECK(beam(n).real() == doctest::Approx(1.0));
    CHECK(std::abs(beam(n).imag()) < 1e-12);
  }
}

TEST_CASE("pencil codebook first beam points at -pi/2") {
  const auto cb = build_pencil_codebook(kGeometry, 128);
  CHECK(cb.beam_angles(0) == doctest::Approx(-M_PI / 2.0));
}

TEST_CASE("pencil codebook entries are unit modulus") {
  const auto cb = build_pencil_codebook(ArrayGeometry(8, 0.5), 16);
  for (Index n = 0; n < cb.columns.rows(); ++n) {
    for (Index k = 0; k < cb.columns.cols(); ++k) {
      CHECK(std::abs(cb.columns(n, k)) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("pencil codebook rejects K <= N_r") {
  CHECK_THROWS_AS(build_pencil_codebook(kGeometry, 36), std::invalid_argument);
  CHECK_THROWS_AS(build_pencil_codebook(kGeometry, 20), std::invalid_argument);
}

TEST_CASE("pn codebook regeneration is bit-identical") {
  const auto a = build_pn_codebook(kGeometry, 5, 7);
  const auto b = build_pn_codebook(kGeometry, 5, 7);
  CHECK(a.phase_indices == b.phase_indices);
  CHECK(a.columns == b.columns);
  const auto c = build_pn_codebook(kGeometry, 5, 8);
  CHECK(a.phase_indices != c.phase_indices);
}

TEST_CASE("pn codebook phases live in {1, j, -1, -j}") {
  const auto cb = build_pn_codebook(kGeometry, 5, 123);
  for (Index n = 0; n < cb.columns.rows(); ++n) {
    for (Index m = 0; m < cb.columns.cols(); ++m) {
      const int idx = cb.phase_indices(m, n);
      REQUIRE(idx >= 0);
      REQUIRE(idx <= 3);
      const Complex expected = std::polar(1.0, idx * M_PI / 2.0);
      CHECK(std::abs(cb.columns(n, m) - expected) < 1e-15);
      // Entries are exact unit phasors, not approximations.
      CHECK(std::abs(cb.columns(n, m)) == 1.0);
    }
  }
}

TEST_CASE("pn codeword squared norm equals N_r") {
  const auto cb = build_pn_codebook(kGeometry, 9, 55);
  for (Index m = 0; m < cb.num_codewords(); ++m) {
    CHECK(cb.columns.col(m).squaredNorm() == doctest::Approx(36.0));
  }
}

TEST_CASE("pn phase histogram is uniform over regenerated codebooks") {
  // 1e4 codebooks of 36 x 5 entries; 3-sigma multinomial bound per phase.
  const int codebooks = 10000;
  long counts[4] = {0, 0, 0, 0};
  for (int i = 0; i < codebooks; ++i) {
    const auto cb = build_pn_codebook(kGeometry, 5, 1000 + static_cast<std::uint64_t>(i));
    for (Index m = 0; m < cb.phase_indices.rows(); ++m) {
      for (Index n = 0; n < cb.phase_indices.cols(); ++n) {
        ++counts[cb.phase_indices(m, n)];
      }
    }
  }
  const double draws = 36.0 * 5.0 * codebooks;
  const double expected = draws / 4.0;
  const double sigma = std::sqrt(draws * 0.25 * 0.75);
  for (long c : counts) {
    CHECK(std::abs(static_cast<double>(c) - expected) < 3.0 * sigma);
  }
}

TEST_CASE("beam gain of a conjugate-matched codeword is N_r^2") {
  // beam_gain conjugates the codeword, so the matched codeword equals the
  // channel itself: |h^H h|^2 = N_r^2 for unit-modulus entries.
  const CVector h = steering_vector(kGeometry, 0.37);
  CHECK(beam_gain(h, h, 1.0) == doctest::Approx(1296.0).epsilon(1e-12));
}

TEST_CASE("beam gain of a zero channel is zero") {
  const auto cb = build_pencil_codebook(kGeometry, 128);
  const CVector zero = CVector::Zero(36);
  CHECK(beam_gain(cb.beam(10), zero, 1.0) == 0.0);
}

TEST_CASE("beam gain rejects mismatched lengths") {
  CHECK_THROWS_AS(beam_gain(CVector::Ones(4), CVector::Ones(5), 1.0),
                  std::invalid_argument);
}

TEST_CASE("broadside channel is brute-force best served by beam 65") {
  const auto cb = build_pencil_codebook(kGeometry, 128);
  const auto h = steering_vector(kGeometry, 0.0);
  int best = 0;
  double best_gain = -1.0;
  for (int k = 1; k <= 128; ++k) {
    const double g = beam_gain(cb.beam(k), h, 1.0);
    if (g > best_gain) {
      best_gain = g;
      best = k;
    }
  }
  CHECK(best == 65);
  CHECK(best_gain == doctest::Approx(1296.0));
}

TEST_CASE("every beam achieves N_r^2 on the steering vector at its negated angle") {
  const auto cb = build_pencil_codebook(kGeometry, 128);
  for (int k = 1; k <= 128; k += 9) {
    const auto h = steering_vector(kGeometry, -cb.beam_angles(k - 1));
    CHECK(beam_gain(cb.beam(k), h, 1.0) == doctest::Approx(1296.0).epsilon(1e-9));
  }
}

TEST_CASE("beam gain matches the closed-form array factor") {
  const auto cb = build_pencil_codebook(kGeometry, 128);
  for (const double aoa : {0.0, 0.21, -0.4, 0.9}) {
    const auto h = steering_vector(kGeometry, aoa);
    for (int k = 1; k <= 128; k += 17) {
      CHECK(beam_gain(cb.beam(k), h, 1.0) ==
            doctest::Approx(dirichlet_gain(36, aoa, cb.beam_angles(k - 1))).epsilon(1e-9));
    }
  }
}

TEST_CASE("beam gain is invariant under a global channel phase") {
  Rng rng(3);
  const auto cb = build_pn_codebook(kGeometry, 4, 9);
  const CVector h = steering_vector(kGeometry, 0.52) * 1.7;
  for (int trial = 0; trial < 20; ++trial) {
    const Complex rot = std::polar(1.0, rng.uniform(0.0, 2.0 * M_PI));
    const CVector rotated = h * rot;
    for (int m = 1; m <= 4; ++m) {
      CHECK(beam_gain(cb.codeword(m), rotated, 2.0) ==
            doctest::Approx(beam_gain(cb.codeword(m), h, 2.0)).epsilon(1e-9));
    }
  }
}

TEST_CASE("codebook text export has the documented shape") {
  const auto cb = build_pn_codebook(ArrayGeometry(3, 0.5), 2, 5);
  std::ostringstream out;
  write_codebook_matrix(out, cb.columns);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "3 2");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 1);  // 2 entries per row
    CHECK(std::count(line.begin(), line.end(), ':') == 2);
  }
  CHECK(rows == 3);

  std::ostringstream grid;
  write_phase_index_grid(grid, cb);
  std::istringstream gin(grid.str());
  std::getline(gin, header);
  CHECK(header == "3 2");
}
