// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMTRACK_ESTIMATORS_HPP
#define BEAMTRACK_ESTIMATORS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "beamtrack/array.hpp"
#include "beamtrack/channel.hpp"
#include "beamtrack/measurement.hpp"
#include "beamtrack/nn/layers.hpp"
#include "beamtrack/nn/optimizer.hpp"
#include "beamtrack/types.hpp"

namespace beamtrack {

enum class EstimateSource { exhaustive, oracle, mmrapid1, mmrapid2, lstm };

const char* to_string(EstimateSource source);

struct BeamEstimate {
  int beam_index = 1;  // 1-based
  EstimateSource source = EstimateSource::oracle;
  int time_step = 0;
};

/// First index of the row maximum (ties resolve to the smallest index).
int argmax_index(const Vector& values);

/// Noise-free argmax of beam_gain over the pencil codebook.
BeamEstimate oracle_best_beam(const LosChannelState& state, const PencilCodebook& codebook,
                              const ArrayGeometry& geometry);

/// Noisy sweep of every pencil beam with fresh noise per beam; consumes
/// one measurement per beam (reported through measurements_used).
BeamEstimate exhaustive_search(const LosChannelState& state, const PencilCodebook& codebook,
                               const ArrayGeometry& geometry, NoiseModel& noise,
                               int* measurements_used = nullptr);

/// MLP beam classifier over unit-normalized RSS features:
/// dense(hidden1)+relu -> dropout -> batchnorm -> dense(hidden2)+relu ->
/// dropout -> batchnorm -> dense(num_beams) softmax.
struct MmRapidConfig {
  int input_dim = 5;
  int num_beams = 128;
  int hidden1 = 128;
  int hidden2 = 64;
  Scalar dropout_rate = 0.1;
  nn::OptimizerConfig optimizer{nn::OptimizerKind::rmsprop, 1e-3, 0.9, 0.9, 0.999, 1e-8};
  int max_epochs = 150;
  int batch_size = 64;
  int patience = 10;
  Scalar validation_fraction = 0.1;
  std::uint64_t seed_init = 1;
  std::uint64_t seed_dropout = 2;
  std::uint64_t seed_shuffle = 3;

  void validate() const;
};

class MmRapidModel {
 public:
  MmRapidModel(const MmRapidConfig& config, int instance);

  struct Caches {
    Matrix x1, a1, mask1;
    nn::BatchNorm::Cache bn1;
    Matrix x2, a2, mask2;
    nn::BatchNorm::Cache bn2;
    Matrix x3;
  };

  Matrix forward_train(const Matrix& x, Rng& dropout_rng, Caches* caches);
  Matrix forward_infer(const Matrix& x) const;
  void backward(const Matrix& dlogits, const Caches& caches);
  void zero_grad();
  std::vector<nn::ParamRef> parameters();

  /// 1-based beam index per row, ties to the smallest index.
  int predict_one(const Vector& unit_features) const;
  std::vector<int> predict(const Matrix& unit_features) const;

  int instance() const { return instance_; }
  int input_dim() const { return config_.input_dim; }
  int num_beams() const { return config_.num_beams; }
  const MmRapidConfig& config() const { return config_; }

  void save(const std::string& path) const;
  static MmRapidModel load(const std::string& path);

 private:
  MmRapidConfig config_;
  int instance_;
  nn::Dense dense1_, dense2_, head_;
  nn::Dropout drop1_, drop2_;
  nn::BatchNorm bn1_, bn2_;
};

BeamEstimate mmrapid_predict(const MmRapidModel& model, const Vector& unit_features,
                             int time_step);

/// Trains on unit-normalized features and 1-based exhaustive-search labels
/// until validation accuracy plateaus (early stopping with the configured
/// patience); the best weights are restored before returning.
MmRapidModel train_mmrapid(const Matrix& features, const std::vector<int>& labels,
                           int instance, const MmRapidConfig& config);

}  // namespace beamtrack

#endif
