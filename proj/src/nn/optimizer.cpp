// SPDX-License-Identifier: Apache-2.0

#include "beamtrack/nn/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace beamtrack::nn {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0)) {
    throw std::invalid_argument("OptimizerConfig: learning_rate must be > 0");
  }
  if (rho < 0 || rho >= 1 || beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
    throw std::invalid_argument("OptimizerConfig: decay parameters must lie in [0, 1)");
  }
  if (!(epsilon > 0)) throw std::invalid_argument("OptimizerConfig: epsilon must be > 0");
}

Optimizer::Optimizer(const OptimizerConfig& config) : cfg_(config) {
  cfg_.validate();
}

void Optimizer::step(const std::vector<ParamRef>& params) {
  if (!initialized_) {
    for (const auto& p : params) {
      second_moment_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
      if (cfg_.kind == OptimizerKind::adam) {
        first_moment_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
      }
    }
    initialized_ = true;
  }
  if (params.size() != second_moment_.size()) {
    throw std::invalid_argument("Optimizer::step: parameter count changed");
  }
  ++t_;

  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& value = *params[i].value;
    const Matrix& grad = *params[i].grad;
    Matrix& v = second_moment_[i];
    if (grad.rows() != value.rows() || grad.cols() != value.cols() ||
        v.rows() != value.rows() || v.cols() != value.cols()) {
      throw std::invalid_argument("Optimizer::step: shape mismatch");
    }
    if (cfg_.kind == OptimizerKind::rmsprop) {
      v = cfg_.rho * v + (1.0 - cfg_.rho) * grad.cwiseProduct(grad);
      value.array() -= cfg_.learning_rate * grad.array() / (v.array().sqrt() + cfg_.epsilon);
    } else {
      Matrix& m = first_moment_[i];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * grad;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
      const Scalar bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<Scalar>(t_));
      const Scalar bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<Scalar>(t_));
      value.array() -= cfg_.learning_rate * (m.array() / bc1) /
                       ((v.array() / bc2).sqrt() + cfg_.epsilon);
    }
  }
}

}  // namespace beamtrack::nn
