// SPDX-License-Identifier: Apache-2.0

#include "beamtrack/estimators.hpp"

#include <cmath>
#include <stdexcept>

#include "beamtrack/nn/loss.hpp"
#include "beamtrack/nn/serialize.hpp"

namespace beamtrack {

const char* to_string(EstimateSource source) {
  switch (source) {
    case EstimateSource::exhaustive: return "exhaustive";
    case EstimateSource::oracle: return "oracle";
    case EstimateSource::mmrapid1: return "mmrapid1";
    case EstimateSource::mmrapid2: return "mmrapid2";
    case EstimateSource::lstm: return "lstm";
  }
  return "unknown";
}

int argmax_index(const Vector& values) {
  int best = 0;
  for (Index i = 1; i < values.size(); ++i) {
    if (values(i) > values(best)) best = static_cast<int>(i);
  }
  return best;
}

BeamEstimate oracle_best_beam(const LosChannelState& state, const PencilCodebook& codebook,
                              const ArrayGeometry& geometry) {
  const CVector h = channel_vector(state, geometry);
  Vector gains(codebook.num_beams());
  for (Index k = 0; k < codebook.num_beams(); ++k) {
    gains(k) = beam_gain(codebook.columns.col(k), h, 1.0);
  }
  return {argmax_index(gains) + 1, EstimateSource::oracle, state.time_step};
}

BeamEstimate exhaustive_search(const LosChannelState& state, const PencilCodebook& codebook,
                               const ArrayGeometry& geometry, NoiseModel& noise,
                               int* measurements_used) {
  const CVector h = channel_vector(state, geometry);
  Vector values(codebook.num_beams());
  for (Index k = 0; k < codebook.num_beams(); ++k) {
    values(k) = phaseless_measure(codebook.columns.col(k), h, Complex{1.0, 0.0}, noise);
  }
  if (measurements_used != nullptr) {
    *measurements_used = static_cast<int>(codebook.num_beams());
  }
  return {argmax_index(values) + 1, EstimateSource::exhaustive, state.time_step};
}

void MmRapidConfig::validate() const {
  if (input_dim < 1) throw std::invalid_argument("MmRapidConfig: input_dim must be >= 1");
  if (num_beams < 2) throw std::invalid_argument("MmRapidConfig: num_beams must be >= 2");
  if (hidden1 < 1 || hidden2 < 1) {
    throw std::invalid_argument("MmRapidConfig: hidden dims must be >= 1");
  }
  if (dropout_rate < 0 || dropout_rate >= 1) {
    throw std::invalid_argument("MmRapidConfig: dropout_rate must lie in [0, 1)");
  }
  if (max_epochs < 1 || batch_size < 2 || patience < 1) {
    throw std::invalid_argument("MmRapidConfig: bad training parameters");
  }
  if (validation_fraction < 0 || validation_fraction >= 1) {
    throw std::invalid_argument("MmRapidConfig: validation_fraction must lie in [0, 1)");
  }
  optimizer.validate();
}

MmRapidModel::MmRapidModel(const MmRapidConfig& config, int instance)
    : config_(config),
      instance_(instance),
      dense1_(config.input_dim, config.hidden1),
      dense2_(config.hidden1, config.hidden2),
      head_(config.hidden2, config.num_beams),
      drop1_(config.dropout_rate),
      drop2_(config.dropout_rate),
      bn1_(config.hidden1),
      bn2_(config.hidden2) {
  config_.validate();
  if (instance != 1 && instance != 2) {
    throw std::invalid_argument("MmRapidModel: instance must be 1 or 2");
  }
  Rng init_rng(Rng::derive(config_.seed_init, static_cast<std::uint64_t>(instance)));
  dense1_.init_glorot(init_rng);
  dense2_.init_glorot(init_rng);
  head_.init_glorot(init_rng);
}

Matrix MmRapidModel::forward_train(const Matrix& x, Rng& dropout_rng, Caches* c) {
  const Matrix a1 = dense1_.forward(x, &c->x1);
  c->a1 = a1;
  const Matrix r1 = nn::Relu::forward(a1);
  const Matrix d1 = drop1_.forward(r1, nn::Mode::train, &dropout_rng, &c->mask1);
  const Matrix b1 = bn1_.forward_train(d1, &c->bn1);

  const Matrix a2 = dense2_.forward(b1, &c->x2);
  c->a2 = a2;
  const Matrix r2 = nn::Relu::forward(a2);
  const Matrix d2 = drop2_.forward(r2, nn::Mode::train, &dropout_rng, &c->mask2);
  const Matrix b2 = bn2_.forward_train(d2, &c->bn2);

  return head_.forward(b2, &c->x3);
}

Matrix MmRapidModel::forward_infer(const Matrix& x) const {
  const Matrix b1 = bn1_.forward_infer(nn::Relu::forward(dense1_.forward(x)));
  const Matrix b2 = bn2_.forward_infer(nn::Relu::forward(dense2_.forward(b1)));
  return head_.forward(b2);
}

void MmRapidModel::backward(const Matrix& dlogits, const Caches& c) {
  Matrix d = head_.backward(dlogits, c.x3);
  d = bn2_.backward(d, c.bn2);
  d = nn::Dropout::backward(d, c.mask2);
  d = nn::Relu::backward(d, c.a2);
  d = dense2_.backward(d, c.x2);
  d = bn1_.backward(d, c.bn1);
  d = nn::Dropout::backward(d, c.mask1);
  d = nn::Relu::backward(d, c.a1);
  dense1_.backward(d, c.x1);
}

void MmRapidModel::zero_grad() {
  dense1_.zero_grad();
  dense2_.zero_grad();
  head_.zero_grad();
  bn1_.zero_grad();
  bn2_.zero_grad();
}

std::vector<nn::ParamRef> MmRapidModel::parameters() {
  std::vector<nn::ParamRef> out;
  for (auto& p : dense1_.params("dense1")) out.push_back(p);
  for (auto& p : bn1_.params("bn1")) out.push_back(p);
  for (auto& p : dense2_.params("dense2")) out.push_back(p);
  for (auto& p : bn2_.params("bn2")) out.push_back(p);
  for (auto& p : head_.params("head")) out.push_back(p);
  // Running statistics ride along for persistence but carry no gradients.
  out.push_back({"bn1.running_mean", &bn1_.running_mean, nullptr});
  out.push_back({"bn1.running_var", &bn1_.running_var, nullptr});
  out.push_back({"bn2.running_mean", &bn2_.running_mean, nullptr});
  out.push_back({"bn2.running_var", &bn2_.running_var, nullptr});
  return out;
}

int MmRapidModel::predict_one(const Vector& unit_features) const {
  if (unit_features.size() != config_.input_dim) {
    throw std::invalid_argument("MmRapidModel::predict_one: feature width mismatch");
  }
  const Matrix logits = forward_infer(unit_features.transpose());
  return argmax_index(logits.row(0).transpose()) + 1;
}

std::vector<int> MmRapidModel::predict(const Matrix& unit_features) const {
  if (unit_features.cols() != config_.input_dim) {
    throw std::invalid_argument("MmRapidModel::predict: feature width mismatch");
  }
  const Matrix logits = forward_infer(unit_features);
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Index r = 0; r < logits.rows(); ++r) {
    out[static_cast<std::size_t>(r)] = argmax_index(logits.row(r).transpose()) + 1;
  }
  return out;
}

BeamEstimate mmrapid_predict(const MmRapidModel& model, const Vector& unit_features,
                             int time_step) {
  const int beam = model.predict_one(unit_features);
  return {beam,
          model.instance() == 1 ? EstimateSource::mmrapid1 : EstimateSource::mmrapid2,
          time_step};
}

void MmRapidModel::save(const std::string& path) const {
  auto& self = const_cast<MmRapidModel&>(*this);
  nlohmann::json doc = nn::tensors_to_json(self.parameters());
  doc["model"] = "mmrapid";
  doc["instance"] = instance_;
  doc["input_dim"] = config_.input_dim;
  doc["num_beams"] = config_.num_beams;
  doc["hidden1"] = config_.hidden1;
  doc["hidden2"] = config_.hidden2;
  doc["dropout_rate"] = config_.dropout_rate;
  nn::save_json_file(path, doc);
}

MmRapidModel MmRapidModel::load(const std::string& path) {
  const nlohmann::json doc = nn::load_json_file(path);
  if (doc.at("model").get<std::string>() != "mmrapid") {
    throw std::runtime_error("MmRapidModel::load: not an mmrapid model file");
  }
  MmRapidConfig cfg;
  cfg.input_dim = doc.at("input_dim").get<int>();
  cfg.num_beams = doc.at("num_beams").get<int>();
  cfg.hidden1 = doc.at("hidden1").get<int>();
  cfg.hidden2 = doc.at("hidden2").get<int>();
  cfg.dropout_rate = doc.at("dropout_rate").get<Scalar>();
  MmRapidModel model(cfg, doc.at("instance").get<int>());
  nn::tensors_from_json(doc, model.parameters());
  return model;
}

namespace {

void check_unit_rows(const Matrix& features) {
  for (Index r = 0; r < features.rows(); ++r) {
    if (std::abs(features.row(r).norm() - 1.0) > 1e-6) {
      throw std::invalid_argument("train_mmrapid: features must be unit-normalized");
    }
  }
}

Scalar accuracy_on(const MmRapidModel& model, const Matrix& x, const std::vector<int>& labels,
                   const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0.0;
  Matrix batch(static_cast<Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) batch.row(static_cast<Index>(i)) = x.row(static_cast<Index>(idx[i]));
  const auto pred = model.predict(batch);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (pred[i] == labels[idx[i]]) ++hits;
  }
  return static_cast<Scalar>(hits) / static_cast<Scalar>(idx.size());
}

}  // namespace

MmRapidModel train_mmrapid(const Matrix& features, const std::vector<int>& labels,
                           int instance, const MmRapidConfig& config) {
  config.validate();
  if (features.rows() == 0) throw std::invalid_argument("train_mmrapid: empty training set");
  if (features.cols() != config.input_dim) {
    throw std::invalid_argument("train_mmrapid: feature width must equal input_dim");
  }
  if (static_cast<Index>(labels.size()) != features.rows()) {
    throw std::invalid_argument("train_mmrapid: label count mismatch");
  }
  for (int label : labels) {
    if (label < 1 || label > config.num_beams) {
      throw std::invalid_argument("train_mmrapid: label outside [1, num_beams]");
    }
  }
  check_unit_rows(features);

  MmRapidModel model(config, instance);
  Rng shuffle_rng(Rng::derive(config.seed_shuffle, static_cast<std::uint64_t>(instance)));
  Rng dropout_rng(Rng::derive(config.seed_dropout, static_cast<std::uint64_t>(instance)));

  const std::size_t n = static_cast<std::size_t>(features.rows());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[shuffle_rng.uniform_int(0, static_cast<int>(i))]);
  }
  const std::size_t n_val = static_cast<std::size_t>(
      std::floor(config.validation_fraction * static_cast<Scalar>(n)));
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());
  if (train_idx.empty()) throw std::invalid_argument("train_mmrapid: no training rows left");
  // Plateau detection falls back to training accuracy for tiny datasets.
  const std::vector<std::size_t>& monitor_idx = val_idx.empty() ? train_idx : val_idx;

  nn::Optimizer opt(config.optimizer);
  auto params = model.parameters();
  std::vector<nn::ParamRef> trainable;
  for (auto& p : params) {
    if (p.grad != nullptr) trainable.push_back(p);
  }

  Scalar best_acc = -1.0;
  std::vector<Matrix> best_weights = nn::snapshot(params);
  int stall = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    for (std::size_t i = train_idx.size() - 1; i > 0; --i) {
      std::swap(train_idx[i], train_idx[shuffle_rng.uniform_int(0, static_cast<int>(i))]);
    }
    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(train_idx.size(), start + static_cast<std::size_t>(config.batch_size));
      const Index rows = static_cast<Index>(stop - start);
      if (rows < 2) continue;  // batch-norm needs at least two rows
      Matrix x(rows, features.cols());
      std::vector<int> y(static_cast<std::size_t>(rows));
      for (Index r = 0; r < rows; ++r) {
        const std::size_t src = train_idx[start + static_cast<std::size_t>(r)];
        x.row(r) = features.row(static_cast<Index>(src));
        y[static_cast<std::size_t>(r)] = labels[src] - 1;
      }
      MmRapidModel::Caches caches;
      const Matrix logits = model.forward_train(x, dropout_rng, &caches);
      const auto xent = nn::sparse_xent_loss(logits, y);
      model.zero_grad();
      model.backward(xent.dlogits, caches);
      opt.step(trainable);
    }

    const Scalar acc = accuracy_on(model, features, labels, monitor_idx);
    if (acc > best_acc) {
      best_acc = acc;
      best_weights = nn::snapshot(params);
      stall = 0;
    } else if (++stall >= config.patience) {
      break;
    }
  }
  nn::restore(params, best_weights);
  return model;
}

}  // namespace beamtrack
