// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMTRACK_ARRAY_HPP
#define BEAMTRACK_ARRAY_HPP

#include <cstdint>
#include <iosfwd>

#include "beamtrack/types.hpp"

namespace beamtrack {

/// Uniform linear array at the receiver.
struct ArrayGeometry {
  int num_elements = 36;
  Scalar spacing_over_wavelength = 0.5;

  ArrayGeometry() = default;
  ArrayGeometry(int elements, Scalar spacing);
};

/// Spatial response a(aoa): entry n (0-based) is
/// exp(j * 2*pi * n * sin(aoa) * d/lambda).  Rejects non-finite angles.
CVector steering_vector(const ArrayGeometry& geometry, Scalar aoa_rad);

/// Narrow directional beams for data communication, one column per beam.
/// Beam k (1-based) points at angle pi*(k-1)/K - pi/2 and its entries are
/// the conjugate steering phases at that angle.
struct PencilCodebook {
  CMatrix columns;     // num_elements x num_beams
  Vector beam_angles;  // radians, ascending

  Index num_beams() const { return columns.cols(); }
  Index num_elements() const { return columns.rows(); }
  /// Column of beam k, 1-based.
  CVector beam(int k) const { return columns.col(k - 1); }
};

PencilCodebook build_pencil_codebook(const ArrayGeometry& geometry, int num_beams);

/// Pseudo-random sensing beams with 2-bit phase shifters.  Every entry is
/// one of {1, j, -1, -j}; regeneration with the same seed is bit-identical.
struct PnCodebook {
  CMatrix columns;         // num_elements x num_codewords
  IntMatrix phase_indices; // num_codewords x num_elements, values in {0,1,2,3}
  std::uint64_t seed = 0;

  Index num_codewords() const { return columns.cols(); }
  Index num_elements() const { return columns.rows(); }
  /// Column of codeword m, 1-based.
  CVector codeword(int m) const { return columns.col(m - 1); }
};

PnCodebook build_pn_codebook(const ArrayGeometry& geometry, int num_codewords,
                             std::uint64_t seed);

/// Received power |codeword^H channel|^2 * symbol_power.
Scalar beam_gain(const CVector& codeword, const CVector& channel, Scalar symbol_power);

/// Text export: header "N_r M", then N_r rows of M comma-separated re:im pairs.
void write_codebook_matrix(std::ostream& out, const CMatrix& columns);

/// Text export of the 2-bit phase indices: header "N_r M", then N_r rows of
/// M comma-separated integers in {0,1,2,3}.
void write_phase_index_grid(std::ostream& out, const PnCodebook& codebook);

}  // namespace beamtrack

#endif
