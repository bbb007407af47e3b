// SPDX-License-Identifier: Apache-2.0

#include "beamtrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "beamtrack/nn/loss.hpp"
#include "beamtrack/nn/serialize.hpp"

namespace beamtrack {

namespace {

Matrix one_hot_rows(const std::vector<int>& indices_1based, Index num_beams) {
  Matrix x = Matrix::Zero(static_cast<Index>(indices_1based.size()), num_beams);
  for (std::size_t r = 0; r < indices_1based.size(); ++r) {
    const int idx = indices_1based[r];
    if (idx < 1 || idx > num_beams) {
      throw std::invalid_argument("one_hot_rows: beam index out of range");
    }
    x(static_cast<Index>(r), idx - 1) = 1.0;
  }
  return x;
}

void check_unit_norm(const Vector& v) {
  if (std::abs(v.norm() - 1.0) > 1e-6) {
    throw std::invalid_argument("encode_history: inputs must be unit-normalized");
  }
}

}  // namespace

void TrackerConfig::validate() const {
  if (history_len < 2) throw std::invalid_argument("TrackerConfig: history_len must be >= 2");
  if (prediction_len < 1) {
    throw std::invalid_argument("TrackerConfig: prediction_len must be >= 1");
  }
  if (m_loop < 1) throw std::invalid_argument("TrackerConfig: m_loop must be >= 1");
  if (num_beams < 2) throw std::invalid_argument("TrackerConfig: num_beams must be >= 2");
  if (encoder_hidden < 1 || decoder_hidden < 1) {
    throw std::invalid_argument("TrackerConfig: hidden dims must be >= 1");
  }
  if (encoder_hidden != decoder_hidden) {
    throw std::invalid_argument(
        "TrackerConfig: decoder state is initialized from the encoder, hidden dims must match");
  }
  if (dropout_rate < 0 || dropout_rate >= 1) {
    throw std::invalid_argument("TrackerConfig: dropout_rate must lie in [0, 1)");
  }
  if (max_epochs < 1 || batch_size < 1 || patience < 1) {
    throw std::invalid_argument("TrackerConfig: bad training parameters");
  }
  optimizer.validate();
}

TrackerModel::TrackerModel(const TrackerConfig& config)
    : cfg_(config),
      enc_in_(config.m_loop, config.encoder_hidden),
      enc_do_(config.dropout_rate),
      enc_bn_(config.encoder_hidden),
      encoder_(config.encoder_hidden, config.encoder_hidden),
      decoder_(config.num_beams, config.decoder_hidden),
      head_(config.decoder_hidden, config.num_beams),
      head_do_(config.dropout_rate),
      head_bn_(config.num_beams) {
  cfg_.validate();
  Rng init_rng(cfg_.seed_init);
  enc_in_.init_glorot(init_rng);
  encoder_.init_glorot(init_rng);
  decoder_.init_glorot(init_rng);
  head_.init_glorot(init_rng);
}

Matrix TrackerModel::head_infer(const Matrix& h) const {
  return head_bn_.forward_infer(head_.forward(h));
}

nn::LstmCell::State TrackerModel::encode_history(const std::vector<Vector>& unit_inputs) const {
  const int t_len = cfg_.history_len;
  if (static_cast<int>(unit_inputs.size()) != t_len) {
    throw std::invalid_argument("encode_history: expected exactly history_len inputs");
  }
  Matrix x(t_len, cfg_.m_loop);
  for (int t = 0; t < t_len; ++t) {
    if (unit_inputs[static_cast<std::size_t>(t)].size() != cfg_.m_loop) {
      throw std::invalid_argument("encode_history: input width must equal m_loop");
    }
    check_unit_norm(unit_inputs[static_cast<std::size_t>(t)]);
    x.row(t) = unit_inputs[static_cast<std::size_t>(t)].transpose();
  }
  const Matrix adapted = enc_bn_.forward_infer(nn::Relu::forward(enc_in_.forward(x)));
  nn::LstmCell::State state = encoder_.zero_state(1);
  for (int t = 0; t < t_len; ++t) {
    state = encoder_.step(adapted.row(t), state);
  }
  return state;
}

FramePrediction TrackerModel::decode_predict(const nn::LstmCell::State& encoder_state,
                                             int seed_index,
                                             const std::vector<int>& known_indices) const {
  const int t_len = cfg_.history_len;
  const int p_len = cfg_.prediction_len;
  const int steps = t_len - 1 + p_len;
  if (seed_index < 1 || seed_index > cfg_.num_beams) {
    throw std::invalid_argument("decode_predict: seed_index out of range");
  }
  if (static_cast<int>(known_indices.size()) != t_len - 2) {
    throw std::invalid_argument("decode_predict: expected history_len - 2 known indices");
  }

  FramePrediction out;
  out.distributions.resize(steps, cfg_.num_beams);
  nn::LstmCell::State state = encoder_state;
  int prev_estimate = 0;
  for (int d = 1; d <= steps; ++d) {
    int input_index;
    if (d == 1) {
      input_index = seed_index;
    } else if (d <= t_len - 1) {
      input_index = known_indices[static_cast<std::size_t>(d - 2)];
    } else {
      input_index = prev_estimate;
    }
    const Matrix x = one_hot_rows({input_index}, cfg_.num_beams);
    state = decoder_.step(x, state);
    const Matrix probs = nn::softmax_rows(head_infer(state.h));
    out.distributions.row(d - 1) = probs.row(0);
    const int estimate = argmax_index(probs.row(0).transpose()) + 1;
    prev_estimate = estimate;
    if (d <= t_len - 1) {
      out.discarded.push_back(estimate);
    } else {
      out.kept.push_back(estimate);
    }
  }
  return out;
}

std::vector<nn::ParamRef> TrackerModel::parameters() {
  std::vector<nn::ParamRef> out;
  for (auto& p : enc_in_.params("enc_in")) out.push_back(p);
  for (auto& p : enc_bn_.params("enc_bn")) out.push_back(p);
  for (auto& p : encoder_.params("encoder")) out.push_back(p);
  for (auto& p : decoder_.params("decoder")) out.push_back(p);
  for (auto& p : head_.params("head")) out.push_back(p);
  for (auto& p : head_bn_.params("head_bn")) out.push_back(p);
  out.push_back({"enc_bn.running_mean", &enc_bn_.running_mean, nullptr});
  out.push_back({"enc_bn.running_var", &enc_bn_.running_var, nullptr});
  out.push_back({"head_bn.running_mean", &head_bn_.running_mean, nullptr});
  out.push_back({"head_bn.running_var", &head_bn_.running_var, nullptr});
  return out;
}

void TrackerModel::save(const std::string& path) const {
  auto& self = const_cast<TrackerModel&>(*this);
  nlohmann::json doc = nn::tensors_to_json(self.parameters());
  doc["model"] = "tracker";
  doc["history_len"] = cfg_.history_len;
  doc["prediction_len"] = cfg_.prediction_len;
  doc["m_loop"] = cfg_.m_loop;
  doc["num_beams"] = cfg_.num_beams;
  doc["encoder_hidden"] = cfg_.encoder_hidden;
  doc["decoder_hidden"] = cfg_.decoder_hidden;
  doc["dropout_rate"] = cfg_.dropout_rate;
  nn::save_json_file(path, doc);
}

TrackerModel TrackerModel::load(const std::string& path) {
  const nlohmann::json doc = nn::load_json_file(path);
  if (doc.at("model").get<std::string>() != "tracker") {
    throw std::runtime_error("TrackerModel::load: not a tracker model file");
  }
  TrackerConfig cfg;
  cfg.history_len = doc.at("history_len").get<int>();
  cfg.prediction_len = doc.at("prediction_len").get<int>();
  cfg.m_loop = doc.at("m_loop").get<int>();
  cfg.num_beams = doc.at("num_beams").get<int>();
  cfg.encoder_hidden = doc.at("encoder_hidden").get<int>();
  cfg.decoder_hidden = doc.at("decoder_hidden").get<int>();
  cfg.dropout_rate = doc.at("dropout_rate").get<Scalar>();
  TrackerModel model(cfg);
  nn::tensors_from_json(doc, model.parameters());
  return model;
}

namespace {

struct BatchTensors {
  Matrix enc_x;                 // (T*B) x m_loop
  std::vector<std::vector<int>> step_inputs0;   // teacher inputs per decoder step, 0-based rows of batch
  std::vector<std::vector<int>> step_targets0;  // loss targets per decoder step
};

void validate_frames(const std::vector<TrackerTrainingFrame>& frames,
                     const TrackerConfig& cfg, const char* what) {
  const int t_len = cfg.history_len;
  const int p_len = cfg.prediction_len;
  for (const auto& f : frames) {
    if (f.encoder_inputs.rows() != t_len || f.encoder_inputs.cols() != cfg.m_loop) {
      throw std::invalid_argument(std::string("train_tracker: bad encoder input shape in ") +
                                  what);
    }
    if (static_cast<int>(f.labels.size()) != t_len + p_len) {
      throw std::invalid_argument(std::string("train_tracker: bad label count in ") + what);
    }
    for (int label : f.labels) {
      if (label < 1 || label > cfg.num_beams) {
        throw std::invalid_argument(std::string("train_tracker: label out of range in ") +
                                    what);
      }
    }
  }
}

}  // namespace

TrackerModel train_tracker(const std::vector<TrackerTrainingFrame>& train_frames,
                           const std::vector<TrackerTrainingFrame>& validation_frames,
                           const TrackerConfig& config, std::vector<Scalar>* epoch_losses) {
  config.validate();
  if (train_frames.empty()) throw std::invalid_argument("train_tracker: empty dataset");
  validate_frames(train_frames, config, "training frames");
  validate_frames(validation_frames, config, "validation frames");

  const int t_len = config.history_len;
  const int p_len = config.prediction_len;
  const int steps = t_len - 1 + p_len;

  TrackerModel model(config);
  Rng shuffle_rng(config.seed_shuffle);
  Rng dropout_rng(config.seed_dropout);

  nn::Optimizer opt(config.optimizer);
  auto params = model.parameters();
  std::vector<nn::ParamRef> trainable;
  for (auto& p : params) {
    if (p.grad != nullptr) trainable.push_back(p);
  }

  auto zero_grads = [&]() {
    model.enc_in_.zero_grad();
    model.enc_bn_.zero_grad();
    model.encoder_.zero_grad();
    model.decoder_.zero_grad();
    model.head_.zero_grad();
    model.head_bn_.zero_grad();
  };

  // Forward + optional backward over one batch of frames; returns the
  // summed-over-steps cross-entropy averaged over the batch.
  auto run_batch = [&](const std::vector<std::size_t>& idx,
                       const std::vector<TrackerTrainingFrame>& frames,
                       bool training) -> Scalar {
    const Index batch = static_cast<Index>(idx.size());
    Matrix enc_x(static_cast<Index>(t_len) * batch, config.m_loop);
    for (Index b = 0; b < batch; ++b) {
      const auto& f = frames[idx[static_cast<std::size_t>(b)]];
      for (int t = 0; t < t_len; ++t) {
        enc_x.row(static_cast<Index>(t) * batch + b) = f.encoder_inputs.row(t);
      }
    }

    // Encoder adapter.
    Matrix cache_enc_x, enc_mask;
    nn::BatchNorm::Cache enc_bn_cache;
    Matrix pre = model.enc_in_.forward(enc_x, training ? &cache_enc_x : nullptr);
    Matrix act = nn::Relu::forward(pre);
    Matrix dropped =
        model.enc_do_.forward(act, training ? nn::Mode::train : nn::Mode::infer,
                              training ? &dropout_rng : nullptr, training ? &enc_mask : nullptr);
    Matrix adapted = training ? model.enc_bn_.forward_train(dropped, &enc_bn_cache)
                              : model.enc_bn_.forward_infer(dropped);

    // Encoder roll-out.
    std::vector<nn::LstmCell::StepCache> enc_caches(static_cast<std::size_t>(t_len));
    nn::LstmCell::State state = model.encoder_.zero_state(batch);
    for (int t = 0; t < t_len; ++t) {
      state = model.encoder_.step(adapted.middleRows(static_cast<Index>(t) * batch, batch),
                                  state,
                                  training ? &enc_caches[static_cast<std::size_t>(t)] : nullptr);
    }

    // Decoder roll-out with per-step head.
    std::vector<nn::LstmCell::StepCache> dec_caches(static_cast<std::size_t>(steps));
    std::vector<Matrix> head_x(static_cast<std::size_t>(steps));
    std::vector<Matrix> head_mask(static_cast<std::size_t>(steps));
    std::vector<nn::BatchNorm::Cache> head_bn_caches(static_cast<std::size_t>(steps));
    std::vector<Matrix> dlogits(static_cast<std::size_t>(steps));
    std::vector<int> prev_argmax(static_cast<std::size_t>(batch), 1);
    Scalar loss_sum = 0.0;

    for (int d = 1; d <= steps; ++d) {
      std::vector<int> inputs(static_cast<std::size_t>(batch));
      std::vector<int> targets0(static_cast<std::size_t>(batch));
      for (Index b = 0; b < batch; ++b) {
        const auto& f = frames[idx[static_cast<std::size_t>(b)]];
        const bool use_own = !config.teacher_forcing && d > t_len - 1 && d > 1;
        inputs[static_cast<std::size_t>(b)] =
            use_own ? prev_argmax[static_cast<std::size_t>(b)]
                    : f.labels[static_cast<std::size_t>(d - 1)];
        targets0[static_cast<std::size_t>(b)] = f.labels[static_cast<std::size_t>(d)] - 1;
      }
      const Matrix x = one_hot_rows(inputs, config.num_beams);
      const std::size_t di = static_cast<std::size_t>(d - 1);
      state = model.decoder_.step(x, state, training ? &dec_caches[di] : nullptr);

      Matrix hd = model.head_.forward(state.h, training ? &head_x[di] : nullptr);
      Matrix hdd = model.head_do_.forward(hd, training ? nn::Mode::train : nn::Mode::infer,
                                          training ? &dropout_rng : nullptr,
                                          training ? &head_mask[di] : nullptr);
      Matrix logits = training ? model.head_bn_.forward_train(hdd, &head_bn_caches[di])
                               : model.head_bn_.forward_infer(hdd);
      const auto xent = nn::sparse_xent_loss(logits, targets0);
      loss_sum += xent.loss;
      if (training) dlogits[di] = xent.dlogits;
      if (!config.teacher_forcing) {
        for (Index b = 0; b < batch; ++b) {
          prev_argmax[static_cast<std::size_t>(b)] =
              argmax_index(xent.probs.row(b).transpose()) + 1;
        }
      }
    }

    if (training) {
      zero_grads();
      nn::LstmCell::State dstate{Matrix::Zero(batch, config.decoder_hidden),
                                 Matrix::Zero(batch, config.decoder_hidden)};
      for (int d = steps; d >= 1; --d) {
        const std::size_t di = static_cast<std::size_t>(d - 1);
        Matrix dh = model.head_bn_.backward(dlogits[di], head_bn_caches[di]);
        dh = nn::Dropout::backward(dh, head_mask[di]);
        dh = model.head_.backward(dh, head_x[di]);
        dh += dstate.h;
        const auto grad = model.decoder_.backward_step(dh, dstate.c, dec_caches[di]);
        dstate.h = grad.dh_prev;
        dstate.c = grad.dc_prev;
      }
      Matrix d_adapted(static_cast<Index>(t_len) * batch, config.encoder_hidden);
      nn::LstmCell::State estate = dstate;  // encoder final state receives decoder's gradient
      for (int t = t_len; t >= 1; --t) {
        const auto grad = model.encoder_.backward_step(
            estate.h, estate.c, enc_caches[static_cast<std::size_t>(t - 1)]);
        d_adapted.middleRows(static_cast<Index>(t - 1) * batch, batch) = grad.dx;
        estate.h = grad.dh_prev;
        estate.c = grad.dc_prev;
      }
      Matrix dd = model.enc_bn_.backward(d_adapted, enc_bn_cache);
      dd = nn::Dropout::backward(dd, enc_mask);
      dd = nn::Relu::backward(dd, pre);
      model.enc_in_.backward(dd, cache_enc_x);
      opt.step(trainable);
    }
    return loss_sum;
  };

  auto dataset_loss = [&](const std::vector<TrackerTrainingFrame>& frames) -> Scalar {
    if (frames.empty()) return 0.0;
    Scalar total = 0.0;
    std::size_t done = 0;
    while (done < frames.size()) {
      const std::size_t stop =
          std::min(frames.size(), done + static_cast<std::size_t>(config.batch_size));
      std::vector<std::size_t> idx;
      for (std::size_t i = done; i < stop; ++i) idx.push_back(i);
      total += run_batch(idx, frames, false) * static_cast<Scalar>(idx.size());
      done = stop;
    }
    return total / static_cast<Scalar>(frames.size());
  };

  std::vector<std::size_t> order(train_frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const bool monitor_validation = !validation_frames.empty();
  Scalar best_loss = std::numeric_limits<Scalar>::infinity();
  std::vector<Matrix> best_weights = nn::snapshot(params);
  int stall = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.uniform_int(0, static_cast<int>(i))]);
    }
    Scalar epoch_loss = 0.0;
    std::size_t done = 0;
    while (done < order.size()) {
      const std::size_t stop =
          std::min(order.size(), done + static_cast<std::size_t>(config.batch_size));
      std::vector<std::size_t> idx(order.begin() + static_cast<long>(done),
                                   order.begin() + static_cast<long>(stop));
      epoch_loss += run_batch(idx, train_frames, true) * static_cast<Scalar>(idx.size());
      done = stop;
    }
    epoch_loss /= static_cast<Scalar>(order.size());
    if (epoch_losses != nullptr) epoch_losses->push_back(epoch_loss);

    const Scalar monitored =
        monitor_validation ? dataset_loss(validation_frames) : epoch_loss;
    if (monitored < best_loss - 1e-12) {
      best_loss = monitored;
      best_weights = nn::snapshot(params);
      stall = 0;
    } else if (++stall >= config.patience) {
      break;
    }
  }
  nn::restore(params, best_weights);
  return model;
}

FrameRunResult predict_frame(const TrackerModel& tracker, const MmRapidModel& mmrapid1,
                             const MmRapidModel& mmrapid2,
                             const std::vector<MeasurementVector>& measurements,
                             const SensingPlan& plan) {
  plan.validate();
  const TrackerConfig& cfg = tracker.config();
  const int t_len = plan.history_len;
  const int p_len = plan.prediction_len;
  if (cfg.history_len != t_len || cfg.prediction_len != p_len || cfg.m_loop != plan.m_loop) {
    throw std::invalid_argument("predict_frame: plan does not match the tracker config");
  }
  if (mmrapid1.input_dim() != plan.m_initial || mmrapid2.input_dim() != plan.m_loop) {
    throw std::invalid_argument("predict_frame: mmRAPID input widths do not match the plan");
  }
  if (mmrapid1.num_beams() != cfg.num_beams || mmrapid2.num_beams() != cfg.num_beams) {
    throw std::invalid_argument("predict_frame: codebook sizes do not match");
  }
  if (static_cast<int>(measurements.size()) != t_len) {
    throw std::invalid_argument("predict_frame: expected history_len measurement vectors");
  }
  if (measurements[0].values.size() != plan.m_initial) {
    throw std::invalid_argument("predict_frame: initial step must carry m_initial values");
  }
  for (int t = 1; t < t_len; ++t) {
    if (measurements[static_cast<std::size_t>(t)].values.size() != plan.m_loop) {
      throw std::invalid_argument("predict_frame: loop steps must carry m_loop values");
    }
  }

  FrameRunResult out;
  out.measurements_used = plan.measurements_per_frame();

  // History-window alignment: instance #1 on the initial sweep, #2 afterwards.
  const Vector initial_features = normalize_unit(measurements[0].values);
  out.estimates.push_back(
      mmrapid_predict(mmrapid1, initial_features, measurements[0].time_step));
  for (int t = 1; t < t_len; ++t) {
    const auto& mv = measurements[static_cast<std::size_t>(t)];
    out.estimates.push_back(mmrapid_predict(mmrapid2, normalize_unit(mv.values), mv.time_step));
  }

  // Encoder sees m_loop-wide features at every step, the initial sweep
  // truncated to its first m_loop entries.
  std::vector<Vector> enc_inputs;
  enc_inputs.reserve(static_cast<std::size_t>(t_len));
  enc_inputs.push_back(normalize_unit(measurements[0].values.head(plan.m_loop)));
  for (int t = 1; t < t_len; ++t) {
    enc_inputs.push_back(normalize_unit(measurements[static_cast<std::size_t>(t)].values));
  }

  std::vector<int> known;
  for (int t = 1; t < t_len - 1; ++t) {
    known.push_back(out.estimates[static_cast<std::size_t>(t)].beam_index);
  }
  out.prediction = tracker.decode_predict(tracker.encode_history(enc_inputs),
                                          out.estimates[0].beam_index, known);

  const int last_step = measurements.back().time_step;
  for (int p = 0; p < p_len; ++p) {
    out.estimates.push_back({out.prediction.kept[static_cast<std::size_t>(p)],
                             EstimateSource::lstm, last_step + 1 + p});
  }
  return out;
}

}  // namespace beamtrack
