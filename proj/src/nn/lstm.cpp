// SPDX-License-Identifier: Apache-2.0

#include "beamtrack/nn/lstm.hpp"

#include <cmath>
#include <stdexcept>

namespace beamtrack::nn {

namespace {

Matrix sigmoid(const Matrix& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

void glorot_fill(Matrix& w, Rng& rng) {
  const Scalar limit = std::sqrt(6.0 / static_cast<Scalar>(w.rows() + w.cols()));
  for (Index i = 0; i < w.rows(); ++i) {
    for (Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-limit, limit);
  }
}

}  // namespace

LstmCell::LstmCell(Index input, Index hidden) : input_dim(input), hidden_dim(hidden) {
  if (input < 1 || hidden < 1) {
    throw std::invalid_argument("LstmCell: dims must be >= 1");
  }
  const Index z = input + hidden;
  for (Matrix* w : {&w_input, &w_forget, &w_output, &w_cand}) *w = Matrix::Zero(z, hidden);
  for (Matrix* b : {&b_input, &b_forget, &b_output, &b_cand}) *b = Matrix::Zero(1, hidden);
  for (Matrix* g : {&gw_input, &gw_forget, &gw_output, &gw_cand}) *g = Matrix::Zero(z, hidden);
  for (Matrix* g : {&gb_input, &gb_forget, &gb_output, &gb_cand}) *g = Matrix::Zero(1, hidden);
}

LstmCell::State LstmCell::zero_state(Index batch) const {
  return {Matrix::Zero(batch, hidden_dim), Matrix::Zero(batch, hidden_dim)};
}

void LstmCell::init_glorot(Rng& rng) {
  glorot_fill(w_input, rng);
  glorot_fill(w_forget, rng);
  glorot_fill(w_output, rng);
  glorot_fill(w_cand, rng);
  b_input.setZero();
  b_forget.setOnes();
  b_output.setZero();
  b_cand.setZero();
}

void LstmCell::zero_grad() {
  for (Matrix* g : {&gw_input, &gw_forget, &gw_output, &gw_cand}) g->setZero();
  for (Matrix* g : {&gb_input, &gb_forget, &gb_output, &gb_cand}) g->setZero();
}

LstmCell::State LstmCell::step(const Matrix& x, const State& prev, StepCache* cache) const {
  if (x.cols() != input_dim || prev.h.cols() != hidden_dim || prev.h.rows() != x.rows() ||
      prev.c.rows() != x.rows() || prev.c.cols() != hidden_dim) {
    throw std::invalid_argument("LstmCell::step: shape mismatch");
  }
  Matrix z(x.rows(), input_dim + hidden_dim);
  z.leftCols(input_dim) = x;
  z.rightCols(hidden_dim) = prev.h;

  Matrix ai = z * w_input;
  ai.rowwise() += b_input.row(0);
  Matrix af = z * w_forget;
  af.rowwise() += b_forget.row(0);
  Matrix ao = z * w_output;
  ao.rowwise() += b_output.row(0);
  Matrix ag = z * w_cand;
  ag.rowwise() += b_cand.row(0);

  const Matrix i = sigmoid(ai);
  const Matrix f = sigmoid(af);
  const Matrix o = sigmoid(ao);
  const Matrix g = ag.array().tanh().matrix();

  State next;
  next.c = f.cwiseProduct(prev.c) + i.cwiseProduct(g);
  const Matrix tanh_c = next.c.array().tanh().matrix();
  next.h = o.cwiseProduct(tanh_c);

  if (cache != nullptr) {
    cache->z = std::move(z);
    cache->i = i;
    cache->f = f;
    cache->o = o;
    cache->g = g;
    cache->c_prev = prev.c;
    cache->tanh_c = tanh_c;
  }
  return next;
}

LstmCell::StepGrad LstmCell::backward_step(const Matrix& dh, const Matrix& dc_in,
                                           const StepCache& cache) {
  const Matrix do_ = dh.cwiseProduct(cache.tanh_c);
  const Matrix dc =
      dc_in + dh.cwiseProduct(cache.o).cwiseProduct(
                  (1.0 - cache.tanh_c.array().square()).matrix());

  const Matrix di = dc.cwiseProduct(cache.g);
  const Matrix df = dc.cwiseProduct(cache.c_prev);
  const Matrix dg = dc.cwiseProduct(cache.i);

  // Pre-activation gradients.
  const Matrix dai =
      di.cwiseProduct(cache.i).cwiseProduct((1.0 - cache.i.array()).matrix());
  const Matrix daf =
      df.cwiseProduct(cache.f).cwiseProduct((1.0 - cache.f.array()).matrix());
  const Matrix dao =
      do_.cwiseProduct(cache.o).cwiseProduct((1.0 - cache.o.array()).matrix());
  const Matrix dag = dg.cwiseProduct((1.0 - cache.g.array().square()).matrix());

  gw_input.noalias() += cache.z.transpose() * dai;
  gw_forget.noalias() += cache.z.transpose() * daf;
  gw_output.noalias() += cache.z.transpose() * dao;
  gw_cand.noalias() += cache.z.transpose() * dag;
  gb_input.row(0) += dai.colwise().sum();
  gb_forget.row(0) += daf.colwise().sum();
  gb_output.row(0) += dao.colwise().sum();
  gb_cand.row(0) += dag.colwise().sum();

  Matrix dz = dai * w_input.transpose();
  dz.noalias() += daf * w_forget.transpose();
  dz.noalias() += dao * w_output.transpose();
  dz.noalias() += dag * w_cand.transpose();

  StepGrad out;
  out.dx = dz.leftCols(input_dim);
  out.dh_prev = dz.rightCols(hidden_dim);
  out.dc_prev = dc.cwiseProduct(cache.f);
  return out;
}

std::vector<ParamRef> LstmCell::params(const std::string& prefix) {
  return {{prefix + ".w_input", &w_input, &gw_input},
          {prefix + ".w_forget", &w_forget, &gw_forget},
          {prefix + ".w_output", &w_output, &gw_output},
          {prefix + ".w_cand", &w_cand, &gw_cand},
          {prefix + ".b_input", &b_input, &gb_input},
          {prefix + ".b_forget", &b_forget, &gb_forget},
          {prefix + ".b_output", &b_output, &gb_output},
          {prefix + ".b_cand", &b_cand, &gb_cand}};
}

}  // namespace beamtrack::nn
