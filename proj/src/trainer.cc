// granalign/src/trainer.cc

#include "granalign/trainer.h"

#include <cmath>
#include <numeric>

#include "granalign/error.h"
#include "granalign/evaluator.h"

namespace granalign::train {
namespace {

std::uint64_t SplitMix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t Derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return SplitMix(SplitMix(SplitMix(seed) ^ a) ^ b);
}

struct SetScore {
  double loss = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
};

// Segment-level loss, accuracy and F1 (PD positive, threshold 0.5).
SetScore Score(std::span<const dataset::LabeledSequence> sequences,
               const model::ModelParams &params, const model::ClassifierConfig &config,
               std::size_t batch_size) {
  const Inference inf = Predict(sequences, params, config, batch_size);
  SetScore s;
  std::vector<int> predicted, truth;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const int y = sequences[i].label;
    const double p = y == 1 ? inf.pd_prob[i] : 1.0 - inf.pd_prob[i];
    s.loss -= std::log(std::max(p, 1e-12));
    predicted.push_back(inf.pd_prob[i] >= 0.5);
    truth.push_back(y);
  }
  s.loss /= static_cast<double>(sequences.size());
  s.accuracy = eval::Accuracy(predicted, truth);
  s.f1 = eval::F1Score(predicted, truth);
  return s;
}

}  // namespace

void TrainConfig::Validate() const {
  if (!(lr > 0.0) || weight_decay < 0.0 || batch_size < 1 || max_epochs < 1 ||
      !(plateau_factor > 0.0 && plateau_factor < 1.0) || plateau_patience < 1 ||
      early_stop_patience < 1 || !(beta1 >= 0.0 && beta1 < 1.0) ||
      !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0))
    throw Error(ErrorKind::kPrecondition, "invalid training configuration");
}

double ClipGlobalNorm(std::span<model::TensorRef> grads, double max_norm) {
  double sq = 0.0;
  for (const auto &g : grads)
    for (Eigen::Index i = 0; i < g.size(); ++i) sq += g.data[i] * g.data[i];
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto &g : grads)
      for (Eigen::Index i = 0; i < g.size(); ++i) g.data[i] *= scale;
  }
  return norm;
}

void AdamW::Step(std::span<model::TensorRef> params, std::span<model::TensorRef> grads,
                 double lr) {
  if (params.size() != grads.size())
    throw Error(ErrorKind::kPrecondition, "parameter and gradient lists differ");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size())
      throw Error(ErrorKind::kPrecondition, "gradient shape mismatch for " + params[k].name);
    for (Eigen::Index i = 0; i < grads[k].size(); ++i)
      if (!std::isfinite(grads[k].data[i]))
        throw Error(ErrorKind::kNumeric, "non-finite gradient in " + grads[k].name);
  }
  if (m_.empty()) {
    for (const auto &p : params) {
      m_.emplace_back(static_cast<std::size_t>(p.size()), 0.0);
      v_.emplace_back(static_cast<std::size_t>(p.size()), 0.0);
    }
  }
  ClipGlobalNorm(grads, config_.clip_norm);

  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    double *theta = params[k].data;
    const double *g = grads[k].data;
    auto &m = m_[k];
    auto &v = v_[k];
    for (std::size_t i = 0; i < m.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      theta[i] -= lr * (m_hat / (std::sqrt(v_hat) + config_.eps)) + lr * config_.weight_decay * theta[i];
    }
  }
}

bool PlateauScheduler::Step(double val_loss) {
  if (val_loss < best_) {
    best_ = val_loss;
    bad_epochs_ = 0;
    return false;
  }
  if (++bad_epochs_ >= patience_) {
    lr_ *= factor_;
    bad_epochs_ = 0;
    return true;
  }
  return false;
}

Inference Predict(std::span<const dataset::LabeledSequence> sequences,
                  const model::ModelParams &params, const model::ClassifierConfig &config,
                  std::size_t batch_size) {
  if (batch_size < 1) throw Error(ErrorKind::kPrecondition, "batch size must be at least 1");
  Inference out;
  std::vector<std::size_t> order(sequences.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    const auto batch = dataset::PadBatch(sequences, std::span(order).subspan(start, end - start));
    const auto fwd = model::Forward(batch, params, config, false);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      out.pd_prob.push_back(fwd.probs(static_cast<Eigen::Index>(b), 1));
      out.attention.push_back(fwd.attention[b].leftCols(batch.lengths[b]));
    }
  }
  return out;
}

FitResult Fit(std::span<const dataset::LabeledSequence> train,
              std::span<const dataset::LabeledSequence> val,
              const model::ClassifierConfig &model_config, const TrainConfig &train_config,
              std::uint64_t seed) {
  model_config.Validate();
  train_config.Validate();
  if (train.empty() || val.empty())
    throw Error(ErrorKind::kPrecondition, "training and validation splits must be non-empty");

  FitResult result;
  model::ModelParams params = model::ModelParams::Init(model_config, Derive(seed, 1));
  AdamW optimizer(train_config);

  const SetScore initial = Score(val, params, model_config, train_config.batch_size);
  result.initial_val_loss = initial.loss;
  PlateauScheduler scheduler(train_config.lr, train_config.plateau_factor,
                             train_config.plateau_patience, initial.loss);
  result.best_params = params;
  double best_f1 = initial.f1;
  double best_loss = initial.loss;
  int epochs_since_best = 0;

  for (int epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = scheduler.lr();
    const auto batches =
        dataset::MakeBatches(train, train_config.batch_size, Derive(seed, 2, epoch));
    double loss_sum = 0.0;
    for (std::size_t j = 0; j < batches.size(); ++j) {
      auto step = model::ForwardBackward(batches[j], params, model_config, true,
                                         Derive(seed, 3 + static_cast<std::uint64_t>(epoch), j));
      if (!std::isfinite(step.loss) || !step.grads.AllFinite()) {
        result.diverged = true;
        break;
      }
      loss_sum += step.loss;
      auto p = params.Tensors();
      auto g = step.grads.Tensors();
      optimizer.Step(p, g, rec.lr);
    }
    if (result.diverged || !params.AllFinite()) {
      result.diverged = true;
      break;
    }
    rec.mean_batch_loss = loss_sum / static_cast<double>(batches.size());

    const SetScore tr = Score(train, params, model_config, train_config.batch_size);
    const SetScore va = Score(val, params, model_config, train_config.batch_size);
    rec.train_loss = tr.loss;
    rec.train_accuracy = tr.accuracy;
    rec.val_loss = va.loss;
    rec.val_f1 = va.f1;
    rec.val_accuracy = va.accuracy;
    if (!std::isfinite(va.loss) || !std::isfinite(tr.loss)) {
      result.diverged = true;
      result.history.push_back(rec);
      break;
    }

    scheduler.Step(va.loss);
    if (va.f1 > best_f1 || (va.f1 == best_f1 && va.loss < best_loss)) {
      best_f1 = va.f1;
      best_loss = va.loss;
      result.best_params = params;
      result.best_epoch = epoch;
      rec.best = true;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
    }
    result.history.push_back(rec);
    if (epochs_since_best >= train_config.early_stop_patience) {
      result.stopped_early = true;
      break;
    }
  }
  result.steps = optimizer.step();
  return result;
}

}  // namespace granalign::train
