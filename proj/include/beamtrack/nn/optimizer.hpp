// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMTRACK_NN_OPTIMIZER_HPP
#define BEAMTRACK_NN_OPTIMIZER_HPP

#include <vector>

#include "beamtrack/nn/layers.hpp"
#include "beamtrack/types.hpp"

namespace beamtrack::nn {

enum class OptimizerKind { rmsprop, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  Scalar learning_rate = 1e-3;
  Scalar rho = 0.9;  // RMSprop squared-gradient decay
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar epsilon = 1e-8;

  void validate() const;
};

/// Stateful first-order optimizer; slots are sized lazily on the first step
/// and pinned to the parameter shapes afterwards.
class Optimizer {
 public:
  explicit Optimizer(const OptimizerConfig& config);

  void step(const std::vector<ParamRef>& params);

 private:
  OptimizerConfig cfg_;
  long t_ = 0;
  std::vector<Matrix> second_moment_;
  std::vector<Matrix> first_moment_;  // Adam only
  bool initialized_ = false;
};

}  // namespace beamtrack::nn

#endif
