// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMTRACK_MEASUREMENT_HPP
#define BEAMTRACK_MEASUREMENT_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "beamtrack/array.hpp"
#include "beamtrack/channel.hpp"
#include "beamtrack/rng.hpp"
#include "beamtrack/types.hpp"

namespace beamtrack {

/// Additive receiver noise: i.i.d. circular complex Gaussian per antenna
/// with E|n_i|^2 = sigma^2, drawn from an explicit generator state.
struct NoiseModel {
  Scalar sigma = 1.0;
  Rng rng{0};

  NoiseModel(Scalar sigma_, std::uint64_t seed);
};

/// Magnitude-only received signal strength
/// |codeword^H channel * symbol + codeword^H n|.
Scalar phaseless_measure(const CVector& codeword, const CVector& channel, Complex symbol,
                         NoiseModel& noise);

enum class SensingPhase { initial, loop, prediction };

/// Measurement schedule of a frame: m_initial codewords at the first step,
/// m_loop at each of the remaining history steps, none afterwards.
struct SensingPlan {
  int m_initial = 5;
  int m_loop = 5;
  int history_len = 7;
  int prediction_len = 2;

  void validate() const;  // m_initial >= m_loop >= 1, history_len >= 2, prediction_len >= 1
  int measurements_per_frame() const { return m_initial + m_loop * (history_len - 1); }
  int steps_per_frame() const { return history_len + prediction_len; }
};

struct MeasurementVector {
  Vector values;                     // non-negative magnitudes
  std::vector<int> codeword_indices; // 1-based indices into the PN codebook
  int time_step = 0;
};

/// RSS sweep for one time step.  The channel is held constant over the
/// sweep; codewords w_1..w_m are used in order, so under identical noise
/// draws a loop-phase sweep is the prefix of an initial-phase sweep.
MeasurementVector measure_step(const PnCodebook& codebook, const LosChannelState& state,
                               const ArrayGeometry& geometry, const SensingPlan& plan,
                               SensingPhase phase, NoiseModel& noise);

/// values / ||values||_2; rejects the zero vector.
Vector normalize_unit(const Vector& values);

/// CSV log line per measurement: frame_id, time_step, phase, m_index, value.
/// Codeword indices are written 0-based.
void write_measurement_log_header(std::ostream& out);
void append_measurement_log(std::ostream& out, int frame_id, SensingPhase phase,
                            const MeasurementVector& mv);

}  // namespace beamtrack

#endif
