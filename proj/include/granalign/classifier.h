// granalign/classifier.h
//
// Stacked bidirectional LSTM followed by multi-head additive attention
// pooling and a softmax classifier, with exact reverse-mode gradients.
//
// Per head h the pooling is
//   u_t = tanh(W_h y_t),  s_t = q_h . u_t,  a = softmax(s over valid steps),
//   context_h = sum_t a_t y_t
// and the concatenated head contexts feed an affine layer + softmax.
//
// Sequences are processed unpadded (each item uses only its first
// `length` steps), so padded steps never influence outputs or gradients.

#ifndef GRANALIGN_CLASSIFIER_H_
#define GRANALIGN_CLASSIFIER_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "granalign/dataset.h"

namespace granalign::model {

struct ClassifierConfig {
  int input_dim = 1024;
  int num_layers = 6;
  int hidden = 512;  // per direction
  double dropout = 0.3;
  int heads = 8;
  int classes = 2;

  int attention_dim() const { return 2 * hidden / heads; }
  int context_dim() const { return heads * 2 * hidden; }
  // Throws kPrecondition on inconsistent settings.
  void Validate() const;

  bool operator==(const ClassifierConfig &) const = default;
};

// Gate rows are stacked [input; forget; cell; output].
struct LstmDirection {
  Eigen::MatrixXd w_ih;  // 4H x in
  Eigen::MatrixXd w_hh;  // 4H x H
  Eigen::VectorXd bias;  // 4H
};

struct AttentionHead {
  Eigen::MatrixXd w;      // A x 2H
  Eigen::VectorXd query;  // A
};

// Mutable view of one parameter tensor (column-major storage).
struct TensorRef {
  std::string name;
  double *data;
  Eigen::Index rows;
  Eigen::Index cols;

  Eigen::Index size() const { return rows * cols; }
};

struct ConstTensorRef {
  std::string name;
  const double *data;
  Eigen::Index rows;
  Eigen::Index cols;

  Eigen::Index size() const { return rows * cols; }
};

struct ModelParams {
  std::vector<std::array<LstmDirection, 2>> lstm;  // [layer][forward, backward]
  std::vector<AttentionHead> heads;
  Eigen::MatrixXd w_out;  // classes x context_dim
  Eigen::VectorXd b_out;  // classes

  static ModelParams Zeros(const ClassifierConfig &config);
  // uniform(-1/sqrt(H), 1/sqrt(H)) weights, zero biases except forget gate +1.
  static ModelParams Init(const ClassifierConfig &config, std::uint64_t seed);

  // Every tensor in a fixed order with a stable name.
  std::vector<TensorRef> Tensors();
  std::vector<ConstTensorRef> Tensors() const;

  bool AllFinite() const;
};

struct ForwardResult {
  Eigen::MatrixXd probs;                  // B x classes
  std::vector<Eigen::MatrixXd> attention;  // per item: heads x Lmax, zero on padding
};

ForwardResult Forward(const dataset::Batch &batch, const ModelParams &params,
                      const ClassifierConfig &config, bool train_mode,
                      std::uint64_t dropout_seed = 0);

// Mean over the batch of -ln p(label). Probabilities on the true class are
// clamped at 1e-12; `clamped` reports whether that happened.
double CrossEntropyLoss(const Eigen::MatrixXd &probs, std::span<const int> labels,
                        bool *clamped = nullptr);

struct LossAndGrads {
  double loss = 0.0;
  Eigen::MatrixXd probs;
  ModelParams grads;
};

// Loss and gradients of the batch. With train_mode the same dropout masks as
// Forward(..., true, dropout_seed) are applied and differentiated through.
LossAndGrads ForwardBackward(const dataset::Batch &batch, const ModelParams &params,
                             const ClassifierConfig &config, bool train_mode = false,
                             std::uint64_t dropout_seed = 0);

// Exact gradients of CrossEntropyLoss(Forward(batch)) with dropout disabled.
ModelParams Backward(const dataset::Batch &batch, const ModelParams &params,
                     const ClassifierConfig &config);

}  // namespace granalign::model

#endif  // GRANALIGN_CLASSIFIER_H_
