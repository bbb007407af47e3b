// SPDX-License-Identifier: Apache-2.0

#include "beamtrack/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace beamtrack::nn {

std::vector<Matrix> snapshot(const std::vector<ParamRef>& params) {
  std::vector<Matrix> saved;
  saved.reserve(params.size());
  for (const auto& p : params) saved.push_back(*p.value);
  return saved;
}

void restore(const std::vector<ParamRef>& params, const std::vector<Matrix>& saved) {
  if (params.size() != saved.size()) {
    throw std::invalid_argument("restore: parameter count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) *params[i].value = saved[i];
}

Dense::Dense(Index in, Index out)
    : weights(Matrix::Zero(in, out)),
      bias(Matrix::Zero(1, out)),
      grad_weights(Matrix::Zero(in, out)),
      grad_bias(Matrix::Zero(1, out)) {}

void Dense::init_glorot(Rng& rng) {
  const Scalar limit = std::sqrt(6.0 / static_cast<Scalar>(weights.rows() + weights.cols()));
  for (Index i = 0; i < weights.rows(); ++i) {
    for (Index j = 0; j < weights.cols(); ++j) {
      weights(i, j) = rng.uniform(-limit, limit);
    }
  }
  bias.setZero();
}

void Dense::zero_grad() {
  grad_weights.setZero();
  grad_bias.setZero();
}

Matrix Dense::forward(const Matrix& x, Matrix* cache_x) const {
  if (x.cols() != weights.rows()) {
    throw std::invalid_argument("Dense::forward: input width mismatch");
  }
  if (cache_x != nullptr) *cache_x = x;
  Matrix y = x * weights;
  y.rowwise() += bias.row(0);
  return y;
}

Matrix Dense::backward(const Matrix& dy, const Matrix& cache_x) {
  if (dy.rows() != cache_x.rows() || dy.cols() != weights.cols()) {
    throw std::invalid_argument("Dense::backward: gradient shape mismatch");
  }
  grad_weights.noalias() += cache_x.transpose() * dy;
  grad_bias.row(0) += dy.colwise().sum();
  return dy * weights.transpose();
}

std::vector<ParamRef> Dense::params(const std::string& prefix) {
  return {{prefix + ".weights", &weights, &grad_weights},
          {prefix + ".bias", &bias, &grad_bias}};
}

Matrix Relu::forward(const Matrix& x) {
  return x.cwiseMax(0.0);
}

Matrix Relu::backward(const Matrix& dy, const Matrix& x) {
  return dy.cwiseProduct((x.array() > 0.0).cast<Scalar>().matrix());
}

Dropout::Dropout(Scalar r) : rate(r) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("Dropout: rate must lie in [0, 1)");
  }
}

Matrix Dropout::forward(const Matrix& x, Mode mode, Rng* rng, Matrix* cache_mask) const {
  if (mode == Mode::infer || rate == 0.0) {
    if (cache_mask != nullptr) *cache_mask = Matrix::Ones(x.rows(), x.cols());
    return x;
  }
  if (rng == nullptr) throw std::logic_error("Dropout: no rng supplied for training mode");
  const Scalar keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      mask(i, j) = rng->uniform() >= rate ? keep_scale : 0.0;
    }
  }
  Matrix y = x.cwiseProduct(mask);
  if (cache_mask != nullptr) *cache_mask = std::move(mask);
  return y;
}

Matrix Dropout::backward(const Matrix& dy, const Matrix& mask) {
  return dy.cwiseProduct(mask);
}

BatchNorm::BatchNorm(Index features)
    : gamma(Matrix::Ones(1, features)),
      beta(Matrix::Zero(1, features)),
      running_mean(Matrix::Zero(1, features)),
      running_var(Matrix::Ones(1, features)),
      grad_gamma(Matrix::Zero(1, features)),
      grad_beta(Matrix::Zero(1, features)) {}

void BatchNorm::zero_grad() {
  grad_gamma.setZero();
  grad_beta.setZero();
}

Matrix BatchNorm::forward_train(const Matrix& x, Cache* cache) {
  if (x.cols() != gamma.cols()) {
    throw std::invalid_argument("BatchNorm::forward_train: feature width mismatch");
  }
  if (x.rows() < 2) {
    throw std::invalid_argument("BatchNorm::forward_train: needs a batch of >= 2");
  }
  const Matrix mu = x.colwise().mean();
  Matrix centered = x;
  centered.rowwise() -= mu.row(0);
  const Matrix var = centered.array().square().colwise().mean().matrix();
  const Matrix inv_std = (var.array() + epsilon).rsqrt().matrix();
  Matrix xhat = (centered.array().rowwise() * inv_std.row(0).array()).matrix();
  running_mean = momentum * running_mean + (1.0 - momentum) * mu;
  running_var = momentum * running_var + (1.0 - momentum) * var;

  Matrix y = (xhat.array().rowwise() * gamma.row(0).array()).matrix();
  y.rowwise() += beta.row(0);
  if (cache != nullptr) {
    cache->inv_std = inv_std;
    cache->xhat = std::move(xhat);
  }
  return y;
}

Matrix BatchNorm::forward_infer(const Matrix& x) const {
  if (x.cols() != gamma.cols()) {
    throw std::invalid_argument("BatchNorm::forward_infer: feature width mismatch");
  }
  const Matrix inv_std = (running_var.array() + epsilon).rsqrt().matrix();
  Matrix xhat = x;
  xhat.rowwise() -= running_mean.row(0);
  xhat = (xhat.array().rowwise() * inv_std.row(0).array()).matrix();
  Matrix y = (xhat.array().rowwise() * gamma.row(0).array()).matrix();
  y.rowwise() += beta.row(0);
  return y;
}

Matrix BatchNorm::backward(const Matrix& dy, const Cache& cache) {
  const Scalar batch = static_cast<Scalar>(dy.rows());
  grad_gamma.row(0) += dy.cwiseProduct(cache.xhat).colwise().sum();
  grad_beta.row(0) += dy.colwise().sum();

  const Matrix dxhat = (dy.array().rowwise() * gamma.row(0).array()).matrix();
  const Matrix sum_dxhat = dxhat.colwise().sum();
  const Matrix sum_dxhat_xhat = dxhat.cwiseProduct(cache.xhat).colwise().sum();

  Matrix dx = batch * dxhat;
  dx.rowwise() -= sum_dxhat.row(0);
  dx -= (cache.xhat.array().rowwise() * sum_dxhat_xhat.row(0).array()).matrix();
  dx = (dx.array().rowwise() * (cache.inv_std.row(0).array() / batch)).matrix();
  return dx;
}

std::vector<ParamRef> BatchNorm::params(const std::string& prefix) {
  return {{prefix + ".gamma", &gamma, &grad_gamma},
          {prefix + ".beta", &beta, &grad_beta}};
}

}  // namespace beamtrack::nn
