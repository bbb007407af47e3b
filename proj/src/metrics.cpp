// SPDX-License-Identifier: Apache-2.0

#include "beamtrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "beamtrack/estimators.hpp"

namespace beamtrack {

Scalar accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.empty() || predictions.size() != labels.size()) {
    throw std::invalid_argument("accuracy: need equal non-empty lists");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == labels[i]) ++hits;
  }
  return static_cast<Scalar>(hits) / static_cast<Scalar>(predictions.size());
}

Scalar gain_loss_db(int predicted_index, const CVector& channel,
                    const PencilCodebook& codebook) {
  if (predicted_index < 1 || predicted_index > codebook.num_beams()) {
    throw std::invalid_argument("gain_loss_db: predicted beam index out of range");
  }
  Scalar best = 0.0;
  for (Index k = 0; k < codebook.num_beams(); ++k) {
    best = std::max(best, beam_gain(codebook.columns.col(k), channel, 1.0));
  }
  const Scalar predicted = beam_gain(codebook.beam(predicted_index), channel, 1.0);
  if (predicted == 0.0) return std::numeric_limits<Scalar>::infinity();
  return std::max(0.0, 10.0 * std::log10(best / predicted));
}

Scalar gain_loss_db(int predicted_index, const LosChannelState& state,
                    const PencilCodebook& codebook, const ArrayGeometry& geometry) {
  return gain_loss_db(predicted_index, channel_vector(state, geometry), codebook);
}

Scalar percentile_nearest_rank(std::vector<Scalar> values, Scalar pct) {
  if (values.empty()) throw std::invalid_argument("percentile_nearest_rank: empty input");
  if (pct < 0.0 || pct > 100.0) {
    throw std::invalid_argument("percentile_nearest_rank: pct must lie in [0, 100]");
  }
  std::sort(values.begin(), values.end());
  const auto n = static_cast<Scalar>(values.size());
  const auto idx = static_cast<std::size_t>(
      std::min(n - 1.0, std::floor(pct / 100.0 * n)));
  return values[idx];
}

Scalar avg_measurements(const SensingPlan& plan) {
  plan.validate();
  return static_cast<Scalar>(plan.measurements_per_frame()) /
         static_cast<Scalar>(plan.steps_per_frame());
}

Scalar overhead_reduction(const SensingPlan& plan, int baseline_m) {
  plan.validate();
  if (baseline_m < 1) throw std::invalid_argument("overhead_reduction: baseline_m must be >= 1");
  return 1.0 - static_cast<Scalar>(plan.measurements_per_frame()) /
                   (static_cast<Scalar>(baseline_m) *
                    static_cast<Scalar>(plan.steps_per_frame()));
}

}  // namespace beamtrack
