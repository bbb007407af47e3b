// SPDX-License-Identifier: Apache-2.0

#include "beamtrack/nn/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace beamtrack::nn {

Matrix softmax_rows(const Matrix& logits) {
  Matrix shifted = logits;
  shifted.colwise() -= logits.rowwise().maxCoeff();
  Matrix e = shifted.array().exp().matrix();
  const Vector sums = e.rowwise().sum();
  for (Index r = 0; r < e.rows(); ++r) e.row(r) /= sums(r);
  return e;
}

XentResult sparse_xent_loss(const Matrix& logits, const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) != logits.rows() || logits.rows() == 0) {
    throw std::invalid_argument("sparse_xent_loss: label count must match rows");
  }
  const Index k = logits.cols();
  XentResult res;
  res.probs = softmax_rows(logits);
  res.dlogits = res.probs;
  const Scalar inv_rows = 1.0 / static_cast<Scalar>(logits.rows());

  Scalar total = 0.0;
  for (Index r = 0; r < logits.rows(); ++r) {
    const int label = labels[static_cast<std::size_t>(r)];
    if (label < 0 || label >= k) {
      throw std::invalid_argument("sparse_xent_loss: label out of range");
    }
    // log-sum-exp form keeps confident rows from producing -log(0).
    const Scalar row_max = logits.row(r).maxCoeff();
    const Scalar lse = row_max + std::log((logits.row(r).array() - row_max).exp().sum());
    total += lse - logits(r, label);
    res.dlogits(r, label) -= 1.0;
  }
  res.dlogits *= inv_rows;
  res.loss = total * inv_rows;
  return res;
}

}  // namespace beamtrack::nn
