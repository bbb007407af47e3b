// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMTRACK_NN_LAYERS_HPP
#define BEAMTRACK_NN_LAYERS_HPP

#include <string>
#include <vector>

#include "beamtrack/rng.hpp"
#include "beamtrack/types.hpp"

namespace beamtrack::nn {

enum class Mode { train, infer };

/// Named view of one trainable tensor and its gradient.
struct ParamRef {
  std::string name;
  Matrix* value;
  Matrix* grad;
};

std::vector<Matrix> snapshot(const std::vector<ParamRef>& params);
void restore(const std::vector<ParamRef>& params, const std::vector<Matrix>& saved);

/// Affine map y = x W + b over row-vector samples.  Forward passes are
/// const; training captures the input in an explicit cache for backward.
struct Dense {
  Matrix weights;  // in x out
  Matrix bias;     // 1 x out
  Matrix grad_weights, grad_bias;

  Dense(Index in, Index out);
  void init_glorot(Rng& rng);
  void zero_grad();

  Matrix forward(const Matrix& x, Matrix* cache_x = nullptr) const;
  Matrix backward(const Matrix& dy, const Matrix& cache_x);
  std::vector<ParamRef> params(const std::string& prefix);
};

struct Relu {
  static Matrix forward(const Matrix& x);
  static Matrix backward(const Matrix& dy, const Matrix& x);
};

/// Inverted dropout: training zeroes units with probability `rate` and
/// scales survivors by 1/(1-rate); inference is the identity.
struct Dropout {
  Scalar rate = 0.1;

  Dropout() = default;
  explicit Dropout(Scalar r);

  /// In training mode draws a fresh mask from `rng` and stores it in
  /// `cache_mask`; in inference mode both may be null.
  Matrix forward(const Matrix& x, Mode mode, Rng* rng, Matrix* cache_mask = nullptr) const;
  static Matrix backward(const Matrix& dy, const Matrix& mask);
};

/// Per-feature batch normalization over the rows of a batch.
struct BatchNorm {
  Matrix gamma, beta;               // 1 x features
  Matrix running_mean, running_var; // 1 x features
  Scalar momentum = 0.99;
  Scalar epsilon = 1e-3;
  Matrix grad_gamma, grad_beta;

  struct Cache {
    Matrix xhat;
    Matrix inv_std;  // 1 x features
  };

  explicit BatchNorm(Index features);
  void zero_grad();

  /// Normalizes by batch statistics (>= 2 rows) and updates running stats.
  Matrix forward_train(const Matrix& x, Cache* cache);
  /// Normalizes by running statistics; row-independent.
  Matrix forward_infer(const Matrix& x) const;
  Matrix backward(const Matrix& dy, const Cache& cache);
  std::vector<ParamRef> params(const std::string& prefix);
};

}  // namespace beamtrack::nn

#endif
