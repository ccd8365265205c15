// granalign/trainer.h
//
// AdamW with global-norm clipping, a reduce-on-plateau learning-rate
// schedule, and the epoch loop with F1-based early stopping.

#ifndef GRANALIGN_TRAINER_H_
#define GRANALIGN_TRAINER_H_

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "granalign/classifier.h"
#include "granalign/dataset.h"

namespace granalign::train {

struct TrainConfig {
  double lr = 1e-5;
  double weight_decay = 0.01;
  double clip_norm = 1.0;  // <= 0 disables clipping
  std::size_t batch_size = 32;
  int max_epochs = 15;
  double plateau_factor = 0.5;
  int plateau_patience = 5;
  int early_stop_patience = 5;  // epochs without a validation-F1 gain
  int seeds = 5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void Validate() const;
};

// Scales all gradients jointly so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double ClipGlobalNorm(std::span<model::TensorRef> grads, double max_norm);

// Decoupled weight decay:
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta
// Gradients are clipped to config.clip_norm before the moment update.
class AdamW {
 public:
  explicit AdamW(const TrainConfig &config) : config_(config) {}

  // `grads` is modified in place by clipping. Throws kNumeric on non-finite
  // gradients.
  void Step(std::span<model::TensorRef> params, std::span<model::TensorRef> grads, double lr);

  long step() const { return step_; }

 private:
  TrainConfig config_;
  long step_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// lr <- lr * factor once `patience` consecutive epochs fail to improve on the
// best validation loss; the counter then restarts.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, int patience, double baseline_loss)
      : lr_(lr), factor_(factor), patience_(patience), best_(baseline_loss) {}

  // Returns true when this call reduced the learning rate.
  bool Step(double val_loss);

  double lr() const { return lr_; }
  int bad_epochs() const { return bad_epochs_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double best_;
  int bad_epochs_ = 0;
};

struct Inference {
  std::vector<double> pd_prob;                // per sequence
  std::vector<Eigen::MatrixXd> attention;     // per sequence: heads x length
};

Inference Predict(std::span<const dataset::LabeledSequence> sequences,
                  const model::ModelParams &params, const model::ClassifierConfig &config,
                  std::size_t batch_size = 32);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;               // learning rate used during the epoch
  double mean_batch_loss = 0.0;  // training loss averaged over the epoch's steps
  double train_loss = 0.0;       // full train split, evaluation mode, after the epoch
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_f1 = 0.0;
  double val_accuracy = 0.0;
  bool best = false;
};

struct FitResult {
  model::ModelParams best_params;
  int best_epoch = 0;  // 0 = initial parameters
  double initial_val_loss = 0.0;
  std::vector<EpochRecord> history;
  bool diverged = false;
  bool stopped_early = false;
  long steps = 0;
};

// Deterministic given `seed`: it drives initialization, shuffling and dropout.
FitResult Fit(std::span<const dataset::LabeledSequence> train,
              std::span<const dataset::LabeledSequence> val,
              const model::ClassifierConfig &model_config, const TrainConfig &train_config,
              std::uint64_t seed);

}  // namespace granalign::train

#endif  // GRANALIGN_TRAINER_H_
