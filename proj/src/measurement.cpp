// SPDX-License-Identifier: Apache-2.0

#include "beamtrack/measurement.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace beamtrack {

NoiseModel::NoiseModel(Scalar sigma_, std::uint64_t seed) : sigma(sigma_), rng(seed) {
  if (!std::isfinite(sigma) || sigma < 0) {
    throw std::invalid_argument("NoiseModel: sigma must be finite and >= 0");
  }
}

Scalar phaseless_measure(const CVector& codeword, const CVector& channel, Complex symbol,
                         NoiseModel& noise) {
  if (codeword.size() != channel.size()) {
    throw std::invalid_argument("phaseless_measure: codeword/channel length mismatch");
  }
  Complex z = codeword.dot(channel) * symbol;
  for (Index n = 0; n < codeword.size(); ++n) {
    z += std::conj(codeword(n)) * noise.rng.normal_complex(noise.sigma);
  }
  return std::abs(z);
}

void SensingPlan::validate() const {
  if (m_loop < 1 || m_initial < m_loop) {
    throw std::invalid_argument("SensingPlan: need m_initial >= m_loop >= 1");
  }
  if (history_len < 2) throw std::invalid_argument("SensingPlan: need history_len >= 2");
  if (prediction_len < 1) throw std::invalid_argument("SensingPlan: need prediction_len >= 1");
}

MeasurementVector measure_step(const PnCodebook& codebook, const LosChannelState& state,
                               const ArrayGeometry& geometry, const SensingPlan& plan,
                               SensingPhase phase, NoiseModel& noise) {
  plan.validate();
  if (codebook.num_codewords() < plan.m_initial) {
    throw std::invalid_argument("measure_step: PN codebook smaller than m_initial");
  }
  int count = 0;
  switch (phase) {
    case SensingPhase::initial: count = plan.m_initial; break;
    case SensingPhase::loop: count = plan.m_loop; break;
    case SensingPhase::prediction: count = 0; break;
  }
  MeasurementVector mv;
  mv.time_step = state.time_step;
  mv.values.resize(count);
  mv.codeword_indices.reserve(count);
  if (count == 0) return mv;

  const CVector h = channel_vector(state, geometry);
  for (int m = 0; m < count; ++m) {
    mv.values(m) = phaseless_measure(codebook.columns.col(m), h, Complex{1.0, 0.0}, noise);
    mv.codeword_indices.push_back(m + 1);
  }
  return mv;
}

Vector normalize_unit(const Vector& values) {
  const Scalar norm = values.norm();
  if (norm == 0.0) {
    throw std::invalid_argument("normalize_unit: zero vector has no unit direction");
  }
  return values / norm;
}

void write_measurement_log_header(std::ostream& out) {
  out << "frame_id,time_step,phase,m_index,value\n";
}

void append_measurement_log(std::ostream& out, int frame_id, SensingPhase phase,
                            const MeasurementVector& mv) {
  const char* phase_name = phase == SensingPhase::initial ? "initial"
                           : phase == SensingPhase::loop  ? "loop"
                                                          : "prediction";
  out.precision(17);
  for (Index m = 0; m < mv.values.size(); ++m) {
    out << frame_id << ',' << mv.time_step << ',' << phase_name << ','
        << mv.codeword_indices[static_cast<std::size_t>(m)] - 1 << ',' << mv.values(m)
        << '\n';
  }
}

}  // namespace beamtrack
