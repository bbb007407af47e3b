// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMTRACK_NN_LOSS_HPP
#define BEAMTRACK_NN_LOSS_HPP

#include <vector>

#include "beamtrack/types.hpp"

namespace beamtrack::nn {

/// Row-wise numerically stable softmax.
Matrix softmax_rows(const Matrix& logits);

struct XentResult {
  Scalar loss = 0.0;   // mean over rows of -log softmax(logits)[label]
  Matrix dlogits;      // (softmax - onehot) / rows
  Matrix probs;
};

/// Sparse categorical cross-entropy with 0-based integer labels.
XentResult sparse_xent_loss(const Matrix& logits, const std::vector<int>& labels);

}  // namespace beamtrack::nn

#endif
