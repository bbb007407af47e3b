// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMTRACK_METRICS_HPP
#define BEAMTRACK_METRICS_HPP

#include <map>
#include <string>
#include <vector>

#include "beamtrack/array.hpp"
#include "beamtrack/channel.hpp"
#include "beamtrack/measurement.hpp"
#include "beamtrack/types.hpp"

namespace beamtrack {

/// Fraction of positions where prediction equals label.
Scalar accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

/// 10*log10(best gain / predicted gain), noise-free, clamped at 0 dB from
/// below.  A predicted beam with exactly zero gain reports +infinity.
Scalar gain_loss_db(int predicted_index, const CVector& channel,
                    const PencilCodebook& codebook);
Scalar gain_loss_db(int predicted_index, const LosChannelState& state,
                    const PencilCodebook& codebook, const ArrayGeometry& geometry);

/// Nearest-rank percentile of the values (pct in [0, 100]).
Scalar percentile_nearest_rank(std::vector<Scalar> values, Scalar pct);

/// (m_initial + m_loop*(history_len-1)) / (history_len + prediction_len).
Scalar avg_measurements(const SensingPlan& plan);

/// 1 - (m_initial + m_loop*(history_len-1)) / (baseline_m * steps_per_frame).
Scalar overhead_reduction(const SensingPlan& plan, int baseline_m);

struct MetricsReport {
  Scalar accuracy = 0.0;
  std::map<int, Scalar> gain_loss_db_percentiles;  // percentile -> dB
  Scalar avg_measurements_per_step = 0.0;
  std::map<std::string, Scalar> overhead_reduction_vs;  // baseline name -> fraction
  int num_frames = 0;
  int num_steps = 0;
  int infinite_gain_loss_count = 0;
};

}  // namespace beamtrack

#endif
