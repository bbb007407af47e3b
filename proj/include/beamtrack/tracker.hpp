// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMTRACK_TRACKER_HPP
#define BEAMTRACK_TRACKER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "beamtrack/estimators.hpp"
#include "beamtrack/measurement.hpp"
#include "beamtrack/nn/lstm.hpp"
#include "beamtrack/nn/optimizer.hpp"
#include "beamtrack/types.hpp"

namespace beamtrack {

struct TrackerConfig {
  int history_len = 7;     // T
  int prediction_len = 2;  // P
  int m_loop = 5;          // encoder feature width
  int num_beams = 128;
  int encoder_hidden = 64;
  int decoder_hidden = 64;  // must equal encoder_hidden (state handoff)
  bool teacher_forcing = true;
  Scalar dropout_rate = 0.1;
  nn::OptimizerConfig optimizer{nn::OptimizerKind::adam, 1e-3, 0.9, 0.9, 0.999, 1e-8};
  int max_epochs = 60;
  int batch_size = 128;
  int patience = 10;
  std::uint64_t seed_init = 1;
  std::uint64_t seed_dropout = 2;
  std::uint64_t seed_shuffle = 3;

  void validate() const;
};

/// Decoder outputs of one frame: for a frame of T history steps and P
/// prediction steps the decoder emits T-1+P estimates covering frame steps
/// 2..T+P; the first T-1 are discarded and the final P are kept.
struct FramePrediction {
  std::vector<int> kept;       // prediction_len 1-based beam indices
  std::vector<int> discarded;  // history_len - 1 indices
  Matrix distributions;        // (history_len - 1 + prediction_len) x num_beams
};

/// Encoder-decoder LSTM beam predictor.  The encoder consumes T steps of
/// unit-normalized m_loop-wide measurements through a dense adapter; the
/// decoder starts from the encoder's final state, eats one-hot beam
/// indices, and emits a softmax over beams through a dense head.
class TrackerModel {
 public:
  explicit TrackerModel(const TrackerConfig& config);

  /// Runs the encoder over exactly T unit-normalized vectors (tolerance
  /// 1e-6) in time order and returns the final (hidden, cell) state.
  nn::LstmCell::State encode_history(const std::vector<Vector>& unit_inputs) const;

  /// Runs the decoder for T-1+P steps.  Step 1 consumes the seed index;
  /// the next T-2 steps consume known_indices (teacher labels in training,
  /// loop-phase estimates in operation); the remaining steps consume the
  /// decoder's own previous argmax.
  FramePrediction decode_predict(const nn::LstmCell::State& encoder_state, int seed_index,
                                 const std::vector<int>& known_indices) const;

  std::vector<nn::ParamRef> parameters();
  const TrackerConfig& config() const { return cfg_; }

  void save(const std::string& path) const;
  static TrackerModel load(const std::string& path);

 private:
  Matrix head_infer(const Matrix& h) const;

  TrackerConfig cfg_;
  nn::Dense enc_in_;
  nn::Dropout enc_do_;
  nn::BatchNorm enc_bn_;
  nn::LstmCell encoder_;
  nn::LstmCell decoder_;
  nn::Dense head_;
  nn::Dropout head_do_;
  nn::BatchNorm head_bn_;

  friend TrackerModel train_tracker(const std::vector<struct TrackerTrainingFrame>&,
                                    const std::vector<struct TrackerTrainingFrame>&,
                                    const TrackerConfig&, std::vector<Scalar>*);
};

/// One training frame: T encoder input rows plus exhaustive-search labels
/// for every one of the T+P steps (the step-1 label seeds the decoder; the
/// remaining T-1+P labels are both teacher inputs and loss targets).
struct TrackerTrainingFrame {
  Matrix encoder_inputs;   // history_len x m_loop, unit-normalized rows
  std::vector<int> labels; // history_len + prediction_len, 1-based
};

/// Minimizes summed sparse cross-entropy over all T-1+P decoder outputs
/// with early stopping on validation loss; restores the best weights.
/// When epoch_losses is given it receives the mean per-frame training loss
/// of each epoch.
TrackerModel train_tracker(const std::vector<TrackerTrainingFrame>& train_frames,
                           const std::vector<TrackerTrainingFrame>& validation_frames,
                           const TrackerConfig& config,
                           std::vector<Scalar>* epoch_losses = nullptr);

/// Full-frame run of the deployed algorithm: mmRAPID #1 aligns the initial
/// step, mmRAPID #2 tracks the remaining history steps, and the tracker
/// predicts the measurement-free window.
struct FrameRunResult {
  std::vector<BeamEstimate> estimates;  // T+P entries
  FramePrediction prediction;
  int measurements_used = 0;
};

FrameRunResult predict_frame(const TrackerModel& tracker, const MmRapidModel& mmrapid1,
                             const MmRapidModel& mmrapid2,
                             const std::vector<MeasurementVector>& measurements,
                             const SensingPlan& plan);

}  // namespace beamtrack

#endif
