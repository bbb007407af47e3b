// SPDX-License-Identifier: Apache-2.0

#include "beamtrack/array.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "beamtrack/rng.hpp"

namespace beamtrack {

ArrayGeometry::ArrayGeometry(int elements, Scalar spacing)
    : num_elements(elements), spacing_over_wavelength(spacing) {
  if (num_elements < 1) {
    throw std::invalid_argument("ArrayGeometry: num_elements must be >= 1");
  }
  if (!(spacing_over_wavelength > 0) || !std::isfinite(spacing_over_wavelength)) {
    throw std::invalid_argument("ArrayGeometry: spacing_over_wavelength must be > 0");
  }
}

CVector steering_vector(const ArrayGeometry& geometry, Scalar aoa_rad) {
  if (!std::isfinite(aoa_rad)) {
    throw std::invalid_argument("steering_vector: aoa must be finite");
  }
  const Scalar phase_step = 2.0 * M_PI * std::sin(aoa_rad) * geometry.spacing_over_wavelength;
  CVector v(geometry.num_elements);
  for (int n = 0; n < geometry.num_elements; ++n) {
    v(n) = std::polar(1.0, phase_step * n);
  }
  return v;
}

PencilCodebook build_pencil_codebook(const ArrayGeometry& geometry, int num_beams) {
  if (num_beams <= geometry.num_elements) {
    throw std::invalid_argument("build_pencil_codebook: need num_beams > num_elements");
  }
  PencilCodebook cb;
  cb.columns.resize(geometry.num_elements, num_beams);
  cb.beam_angles.resize(num_beams);
  for (int k = 0; k < num_beams; ++k) {
    const Scalar angle = M_PI * k / num_beams - M_PI / 2.0;
    cb.beam_angles(k) = angle;
    const Scalar phase_step =
        -2.0 * M_PI * std::sin(angle) * geometry.spacing_over_wavelength;
    for (int n = 0; n < geometry.num_elements; ++n) {
      cb.columns(n, k) = std::polar(1.0, phase_step * n);
    }
  }
  return cb;
}

PnCodebook build_pn_codebook(const ArrayGeometry& geometry, int num_codewords,
                             std::uint64_t seed) {
  if (num_codewords < 1) {
    throw std::invalid_argument("build_pn_codebook: need num_codewords >= 1");
  }
  static const Complex kPhases[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  PnCodebook cb;
  cb.seed = seed;
  cb.columns.resize(geometry.num_elements, num_codewords);
  cb.phase_indices.resize(num_codewords, geometry.num_elements);
  Rng rng(seed);
  for (int m = 0; m < num_codewords; ++m) {
    for (int n = 0; n < geometry.num_elements; ++n) {
      const int idx = rng.uniform_int(0, 3);
      cb.phase_indices(m, n) = idx;
      cb.columns(n, m) = kPhases[idx];
    }
  }
  return cb;
}

Scalar beam_gain(const CVector& codeword, const CVector& channel, Scalar symbol_power) {
  if (codeword.size() != channel.size()) {
    throw std::invalid_argument("beam_gain: codeword/channel length mismatch");
  }
  // Eigen's dot conjugates the first operand: codeword^H * channel.
  return std::norm(codeword.dot(channel)) * symbol_power;
}

void write_codebook_matrix(std::ostream& out, const CMatrix& columns) {
  out << columns.rows() << ' ' << columns.cols() << '\n';
  out.precision(17);
  for (Index n = 0; n < columns.rows(); ++n) {
    for (Index m = 0; m < columns.cols(); ++m) {
      if (m) out << ',';
      out << columns(n, m).real() << ':' << columns(n, m).imag();
    }
    out << '\n';
  }
}

void write_phase_index_grid(std::ostream& out, const PnCodebook& codebook) {
  out << codebook.num_elements() << ' ' << codebook.num_codewords() << '\n';
  for (Index n = 0; n < codebook.num_elements(); ++n) {
    for (Index m = 0; m < codebook.num_codewords(); ++m) {
      if (m) out << ',';
      out << codebook.phase_indices(m, n);
    }
    out << '\n';
  }
}

}  // namespace beamtrack
