// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMTRACK_NN_LSTM_HPP
#define BEAMTRACK_NN_LSTM_HPP

#include <string>
#include <vector>

#include "beamtrack/nn/layers.hpp"
#include "beamtrack/types.hpp"

namespace beamtrack::nn {

/// Standard LSTM cell.  Gates act on z = [x, h_prev]:
///   i = sig(z Wi + bi)   f = sig(z Wf + bf)   o = sig(z Wo + bo)
///   g = tanh(z Wg + bg)
///   c = f .* c_prev + i .* g,   h = o .* tanh(c)
struct LstmCell {
  Index input_dim = 0;
  Index hidden_dim = 0;
  Matrix w_input, w_forget, w_output, w_cand;  // (input_dim + hidden_dim) x hidden_dim
  Matrix b_input, b_forget, b_output, b_cand;  // 1 x hidden_dim
  Matrix gw_input, gw_forget, gw_output, gw_cand;
  Matrix gb_input, gb_forget, gb_output, gb_cand;

  struct State {
    Matrix h, c;  // batch x hidden_dim
  };

  struct StepCache {
    Matrix z;             // batch x (input_dim + hidden_dim)
    Matrix i, f, o, g;    // gate activations
    Matrix c_prev, tanh_c;
  };

  struct StepGrad {
    Matrix dx, dh_prev, dc_prev;
  };

  LstmCell(Index input, Index hidden);
  State zero_state(Index batch) const;
  /// Glorot-uniform weights; forget-gate bias starts at 1.
  void init_glorot(Rng& rng);
  void zero_grad();

  State step(const Matrix& x, const State& prev, StepCache* cache = nullptr) const;
  /// Reverse-mode step: consumes upstream dh/dc, accumulates weight grads.
  StepGrad backward_step(const Matrix& dh, const Matrix& dc, const StepCache& cache);

  std::vector<ParamRef> params(const std::string& prefix);
};

}  // namespace beamtrack::nn

#endif
