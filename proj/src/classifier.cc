// granalign/src/classifier.cc

#include "granalign/classifier.h"

#include <cmath>
#include <random>

#include "granalign/error.h"

namespace granalign::model {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kProbFloor = 1e-12;

VectorXd Softmax(const VectorXd &x) {
  VectorXd e = (x.array() - x.maxCoeff()).exp();
  return e / e.sum();
}

VectorXd Sigmoid(const VectorXd &x) { return (1.0 + (-x.array()).exp()).inverse(); }

struct DirectionCache {
  MatrixXd gates;  // 4H x n, activated
  MatrixXd cell;   // H x n
  MatrixXd hidden;  // H x n
};

struct LayerCache {
  MatrixXd input;  // in x n, after dropout
  std::array<DirectionCache, 2> dir;
  MatrixXd output;  // 2H x n
};

struct SequenceCache {
  std::vector<LayerCache> layers;
  std::vector<MatrixXd> squashed;  // per head: A x n
  std::vector<VectorXd> alpha;     // per head: n
  VectorXd context;
  VectorXd probs;
};

// Per item, per layer >= 1: 2H x length masks holding 0 or 1/(1-p).
using DropoutMasks = std::vector<std::vector<MatrixXd>>;

DropoutMasks MakeDropoutMasks(const dataset::Batch &batch, const ClassifierConfig &config,
                              std::uint64_t seed) {
  DropoutMasks masks(batch.size());
  if (config.dropout <= 0.0 || config.num_layers < 2) return masks;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - config.dropout);
  const double scale = 1.0 / (1.0 - config.dropout);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (int l = 1; l < config.num_layers; ++l) {
      MatrixXd m(2 * config.hidden, batch.lengths[b]);
      for (Index k = 0; k < m.size(); ++k) m.data()[k] = keep(rng) ? scale : 0.0;
      masks[b].push_back(std::move(m));
    }
  }
  return masks;
}

void RunDirection(const LstmDirection &p, const MatrixXd &input, bool reverse, int hidden,
                  DirectionCache *out) {
  const Index n = input.cols();
  const Index h_dim = hidden;
  MatrixXd pre = p.w_ih * input;
  pre.colwise() += p.bias;
  out->gates.resize(4 * h_dim, n);
  out->cell.resize(h_dim, n);
  out->hidden.resize(h_dim, n);
  VectorXd h = VectorXd::Zero(h_dim);
  VectorXd c = VectorXd::Zero(h_dim);
  for (Index k = 0; k < n; ++k) {
    const Index t = reverse ? n - 1 - k : k;
    const VectorXd z = pre.col(t) + p.w_hh * h;
    const VectorXd in_gate = Sigmoid(z.segment(0, h_dim));
    const VectorXd forget = Sigmoid(z.segment(h_dim, h_dim));
    const VectorXd cand = z.segment(2 * h_dim, h_dim).array().tanh();
    const VectorXd out_gate = Sigmoid(z.segment(3 * h_dim, h_dim));
    c = forget.cwiseProduct(c) + in_gate.cwiseProduct(cand);
    h = out_gate.array() * c.array().tanh();
    out->gates.col(t) << in_gate, forget, cand, out_gate;
    out->cell.col(t) = c;
    out->hidden.col(t) = h;
  }
}

SequenceCache RunSequence(const MatrixXd &padded, Index length, const ModelParams &params,
                          const ClassifierConfig &config, const std::vector<MatrixXd> *masks) {
  if (length <= 0) throw Error(ErrorKind::kPrecondition, "sequence has no valid steps");
  if (padded.cols() != config.input_dim)
    throw Error(ErrorKind::kPrecondition,
                "feature dimension " + std::to_string(padded.cols()) + " does not match input_dim " +
                    std::to_string(config.input_dim));
  SequenceCache cache;
  cache.layers.resize(static_cast<std::size_t>(config.num_layers));
  for (int l = 0; l < config.num_layers; ++l) {
    auto &layer = cache.layers[static_cast<std::size_t>(l)];
    if (l == 0) {
      layer.input = padded.topRows(length).transpose();
    } else {
      layer.input = cache.layers[static_cast<std::size_t>(l - 1)].output;
      if (masks != nullptr && !masks->empty())
        layer.input.array() *= (*masks)[static_cast<std::size_t>(l - 1)].array();
    }
    const auto &p = params.lstm[static_cast<std::size_t>(l)];
    RunDirection(p[0], layer.input, false, config.hidden, &layer.dir[0]);
    RunDirection(p[1], layer.input, true, config.hidden, &layer.dir[1]);
    layer.output.resize(2 * config.hidden, length);
    layer.output << layer.dir[0].hidden, layer.dir[1].hidden;
    if (!layer.output.allFinite())
      throw Error(ErrorKind::kNumeric, "non-finite activation in LSTM layer " + std::to_string(l));
  }

  const MatrixXd &y = cache.layers.back().output;
  const Index two_h = 2 * config.hidden;
  cache.context.resize(config.context_dim());
  for (int h = 0; h < config.heads; ++h) {
    const auto &head = params.heads[static_cast<std::size_t>(h)];
    MatrixXd u = (head.w * y).array().tanh();
    const VectorXd scores = u.transpose() * head.query;
    VectorXd alpha = Softmax(scores);
    cache.context.segment(h * two_h, two_h) = y * alpha;
    cache.squashed.push_back(std::move(u));
    cache.alpha.push_back(std::move(alpha));
  }
  if (!cache.context.allFinite())
    throw Error(ErrorKind::kNumeric, "non-finite activation in attention pooling");
  const VectorXd logits = params.w_out * cache.context + params.b_out;
  if (!logits.allFinite()) throw Error(ErrorKind::kNumeric, "non-finite activation in classifier");
  cache.probs = Softmax(logits);
  return cache;
}

void BackwardDirection(const LstmDirection &p, const MatrixXd &input, const DirectionCache &cache,
                       const MatrixXd &d_hidden, bool reverse, int hidden, LstmDirection *grad,
                       MatrixXd *d_input) {
  const Index n = input.cols();
  const Index h_dim = hidden;
  MatrixXd dz_all(4 * h_dim, n);
  VectorXd dh_next = VectorXd::Zero(h_dim);
  VectorXd dc_next = VectorXd::Zero(h_dim);
  for (Index k = n - 1; k >= 0; --k) {
    const Index t = reverse ? n - 1 - k : k;
    const bool first = (k == 0);
    const Index t_prev = reverse ? t + 1 : t - 1;
    const auto gates = cache.gates.col(t);
    const VectorXd in_gate = gates.segment(0, h_dim);
    const VectorXd forget = gates.segment(h_dim, h_dim);
    const VectorXd cand = gates.segment(2 * h_dim, h_dim);
    const VectorXd out_gate = gates.segment(3 * h_dim, h_dim);
    const VectorXd c_prev = first ? VectorXd::Zero(h_dim) : VectorXd(cache.cell.col(t_prev));
    const VectorXd h_prev = first ? VectorXd::Zero(h_dim) : VectorXd(cache.hidden.col(t_prev));
    const VectorXd tanh_c = cache.cell.col(t).array().tanh();

    const VectorXd dh = d_hidden.col(t) + dh_next;
    const VectorXd d_out = dh.cwiseProduct(tanh_c);
    const VectorXd dc =
        dc_next + (dh.array() * out_gate.array() * (1.0 - tanh_c.array().square())).matrix();
    const VectorXd d_in = dc.cwiseProduct(cand);
    const VectorXd d_cand = dc.cwiseProduct(in_gate);
    const VectorXd d_forget = dc.cwiseProduct(c_prev);
    dc_next = dc.cwiseProduct(forget);

    VectorXd dz(4 * h_dim);
    dz << d_in.array() * in_gate.array() * (1.0 - in_gate.array()),
        d_forget.array() * forget.array() * (1.0 - forget.array()),
        d_cand.array() * (1.0 - cand.array().square()),
        d_out.array() * out_gate.array() * (1.0 - out_gate.array());
    dz_all.col(t) = dz;
    if (!first) grad->w_hh.noalias() += dz * h_prev.transpose();
    dh_next.noalias() = p.w_hh.transpose() * dz;
  }
  grad->w_ih.noalias() += dz_all * input.transpose();
  grad->bias += dz_all.rowwise().sum();
  d_input->noalias() += p.w_ih.transpose() * dz_all;
}

void BackwardSequence(const SequenceCache &cache, const VectorXd &d_logits,
                      const ModelParams &params, const ClassifierConfig &config,
                      const std::vector<MatrixXd> *masks, ModelParams *grads) {
  grads->w_out.noalias() += d_logits * cache.context.transpose();
  grads->b_out += d_logits;
  const VectorXd d_context = params.w_out.transpose() * d_logits;

  const MatrixXd &y = cache.layers.back().output;
  const Index two_h = 2 * config.hidden;
  MatrixXd d_y = MatrixXd::Zero(y.rows(), y.cols());
  for (int h = 0; h < config.heads; ++h) {
    const auto &head = params.heads[static_cast<std::size_t>(h)];
    auto &g = grads->heads[static_cast<std::size_t>(h)];
    const VectorXd dctx = d_context.segment(h * two_h, two_h);
    const VectorXd &alpha = cache.alpha[static_cast<std::size_t>(h)];
    const MatrixXd &u = cache.squashed[static_cast<std::size_t>(h)];

    const VectorXd d_alpha = y.transpose() * dctx;
    const VectorXd d_scores = alpha.array() * (d_alpha.array() - alpha.dot(d_alpha));
    d_y.noalias() += dctx * alpha.transpose();
    g.query.noalias() += u * d_scores;
    const MatrixXd d_pre = ((head.query * d_scores.transpose()).array() * (1.0 - u.array().square())).matrix();
    g.w.noalias() += d_pre * y.transpose();
    d_y.noalias() += head.w.transpose() * d_pre;
  }

  for (int l = config.num_layers - 1; l >= 0; --l) {
    const auto &layer = cache.layers[static_cast<std::size_t>(l)];
    const auto &p = params.lstm[static_cast<std::size_t>(l)];
    auto &g = grads->lstm[static_cast<std::size_t>(l)];
    MatrixXd d_input = MatrixXd::Zero(layer.input.rows(), layer.input.cols());
    BackwardDirection(p[0], layer.input, layer.dir[0], d_y.topRows(config.hidden), false,
                      config.hidden, &g[0], &d_input);
    BackwardDirection(p[1], layer.input, layer.dir[1], d_y.bottomRows(config.hidden), true,
                      config.hidden, &g[1], &d_input);
    if (l > 0) {
      if (masks != nullptr && !masks->empty())
        d_input.array() *= (*masks)[static_cast<std::size_t>(l - 1)].array();
      d_y = std::move(d_input);
    }
  }
}

void CheckBatch(const dataset::Batch &batch, const ModelParams &params,
                const ClassifierConfig &config) {
  config.Validate();
  if (params.lstm.size() != static_cast<std::size_t>(config.num_layers) ||
      params.heads.size() != static_cast<std::size_t>(config.heads))
    throw Error(ErrorKind::kPrecondition, "parameters do not match the classifier config");
  if (batch.size() == 0) throw Error(ErrorKind::kPrecondition, "empty batch");
  for (std::size_t b = 0; b < batch.size(); ++b)
    if (batch.lengths[b] <= 0)
      throw Error(ErrorKind::kPrecondition, "batch item " + std::to_string(b) + " is fully masked");
}

}  // namespace

void ClassifierConfig::Validate() const {
  if (input_dim <= 0 || num_layers <= 0 || hidden <= 0 || heads <= 0 || classes < 2)
    throw Error(ErrorKind::kPrecondition, "classifier dimensions must be positive");
  if ((2 * hidden) % heads != 0)
    throw Error(ErrorKind::kPrecondition, "2 * hidden must be divisible by heads");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw Error(ErrorKind::kPrecondition, "dropout must lie in [0,1)");
}

ModelParams ModelParams::Zeros(const ClassifierConfig &config) {
  config.Validate();
  const Index h = config.hidden;
  ModelParams p;
  for (int l = 0; l < config.num_layers; ++l) {
    const Index in = (l == 0) ? config.input_dim : 2 * h;
    std::array<LstmDirection, 2> layer;
    for (auto &d : layer) {
      d.w_ih = MatrixXd::Zero(4 * h, in);
      d.w_hh = MatrixXd::Zero(4 * h, h);
      d.bias = VectorXd::Zero(4 * h);
    }
    p.lstm.push_back(std::move(layer));
  }
  for (int k = 0; k < config.heads; ++k)
    p.heads.push_back({MatrixXd::Zero(config.attention_dim(), 2 * h),
                       VectorXd::Zero(config.attention_dim())});
  p.w_out = MatrixXd::Zero(config.classes, config.context_dim());
  p.b_out = VectorXd::Zero(config.classes);
  return p;
}

ModelParams ModelParams::Init(const ClassifierConfig &config, std::uint64_t seed) {
  ModelParams p = Zeros(config);
  const double k = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-k, k);
  const auto fill = [&](double *data, Index n) {
    for (Index i = 0; i < n; ++i) data[i] = dist(rng);
  };
  for (auto &layer : p.lstm) {
    for (auto &d : layer) {
      fill(d.w_ih.data(), d.w_ih.size());
      fill(d.w_hh.data(), d.w_hh.size());
      d.bias.segment(config.hidden, config.hidden).setOnes();
    }
  }
  for (auto &head : p.heads) {
    fill(head.w.data(), head.w.size());
    fill(head.query.data(), head.query.size());
  }
  fill(p.w_out.data(), p.w_out.size());
  return p;
}

namespace {

template <typename Ref, typename Params>
std::vector<Ref> CollectTensors(Params &p) {
  std::vector<Ref> out;
  const auto add = [&out](std::string name, auto &t) {
    out.push_back(Ref{std::move(name), t.data(), t.rows(), t.cols()});
  };
  for (std::size_t l = 0; l < p.lstm.size(); ++l) {
    for (std::size_t d = 0; d < 2; ++d) {
      const std::string prefix =
          "lstm.l" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd");
      add(prefix + ".w_ih", p.lstm[l][d].w_ih);
      add(prefix + ".w_hh", p.lstm[l][d].w_hh);
      add(prefix + ".bias", p.lstm[l][d].bias);
    }
  }
  for (std::size_t h = 0; h < p.heads.size(); ++h) {
    add("attn.h" + std::to_string(h) + ".w", p.heads[h].w);
    add("attn.h" + std::to_string(h) + ".query", p.heads[h].query);
  }
  add("out.w", p.w_out);
  add("out.b", p.b_out);
  return out;
}

}  // namespace

std::vector<TensorRef> ModelParams::Tensors() { return CollectTensors<TensorRef>(*this); }

std::vector<ConstTensorRef> ModelParams::Tensors() const {
  return CollectTensors<ConstTensorRef>(*this);
}

bool ModelParams::AllFinite() const {
  for (const auto &t : Tensors())
    for (Index i = 0; i < t.size(); ++i)
      if (!std::isfinite(t.data[i])) return false;
  return true;
}

ForwardResult Forward(const dataset::Batch &batch, const ModelParams &params,
                      const ClassifierConfig &config, bool train_mode,
                      std::uint64_t dropout_seed) {
  CheckBatch(batch, params, config);
  const DropoutMasks masks =
      train_mode ? MakeDropoutMasks(batch, config, dropout_seed) : DropoutMasks(batch.size());
  ForwardResult out;
  out.probs.resize(static_cast<Index>(batch.size()), config.classes);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto cache =
        RunSequence(batch.features[b], batch.lengths[b], params, config, &masks[b]);
    out.probs.row(static_cast<Index>(b)) = cache.probs.transpose();
    MatrixXd att = MatrixXd::Zero(config.heads, batch.max_length());
    for (int h = 0; h < config.heads; ++h)
      att.row(h).head(batch.lengths[b]) = cache.alpha[static_cast<std::size_t>(h)].transpose();
    out.attention.push_back(std::move(att));
  }
  return out;
}

double CrossEntropyLoss(const Eigen::MatrixXd &probs, std::span<const int> labels, bool *clamped) {
  if (probs.rows() != static_cast<Index>(labels.size()) || probs.rows() == 0)
    throw Error(ErrorKind::kPrecondition, "probabilities and labels differ in batch size");
  bool any_clamped = false;
  double total = 0.0;
  for (Index b = 0; b < probs.rows(); ++b) {
    if (std::abs(probs.row(b).sum() - 1.0) > 1e-6)
      throw Error(ErrorKind::kPrecondition, "probability row " + std::to_string(b) +
                                                " does not sum to 1");
    const int y = labels[static_cast<std::size_t>(b)];
    if (y < 0 || y >= probs.cols())
      throw Error(ErrorKind::kPrecondition, "label out of range");
    double p = probs(b, y);
    if (p < kProbFloor) {
      p = kProbFloor;
      any_clamped = true;
    }
    total -= std::log(p);
  }
  if (clamped != nullptr) *clamped = any_clamped;
  return total / static_cast<double>(probs.rows());
}

LossAndGrads ForwardBackward(const dataset::Batch &batch, const ModelParams &params,
                             const ClassifierConfig &config, bool train_mode,
                             std::uint64_t dropout_seed) {
  CheckBatch(batch, params, config);
  const DropoutMasks masks =
      train_mode ? MakeDropoutMasks(batch, config, dropout_seed) : DropoutMasks(batch.size());
  LossAndGrads out;
  out.grads = ModelParams::Zeros(config);
  out.probs.resize(static_cast<Index>(batch.size()), config.classes);
  std::vector<SequenceCache> caches;
  caches.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    caches.push_back(RunSequence(batch.features[b], batch.lengths[b], params, config, &masks[b]));
    out.probs.row(static_cast<Index>(b)) = caches.back().probs.transpose();
  }
  out.loss = CrossEntropyLoss(out.probs, batch.labels);

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    VectorXd d_logits = caches[b].probs;
    d_logits(batch.labels[b]) -= 1.0;
    d_logits *= inv_b;
    BackwardSequence(caches[b], d_logits, params, config, &masks[b], &out.grads);
  }
  return out;
}

ModelParams Backward(const dataset::Batch &batch, const ModelParams &params,
                     const ClassifierConfig &config) {
  return ForwardBackward(batch, params, config, false).grads;
}

}  // namespace granalign::model
