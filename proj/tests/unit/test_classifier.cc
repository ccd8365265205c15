#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "granalign/classifier.h"
#include "oracles/lstm_reference.h"
#include "test_helpers.h"

using namespace granalign::model;
using granalign::ErrorKind;
using granalign::dataset::Batch;
using granalign::dataset::LabeledSequence;
using granalign::dataset::PadBatch;

namespace {

ClassifierConfig Tiny(int D, int layers, int hidden, int heads) {
  ClassifierConfig c;
  c.input_dim = D;
  c.num_layers = layers;
  c.hidden = hidden;
  c.heads = heads;
  return c;
}

LabeledSequence RandomSequence(std::mt19937_64 &rng, int len, int D, int label) {
  std::normal_distribution<double> n(0.0, 1.0);
  LabeledSequence s;
  s.label = label;
  s.features.resize(len, D);
  for (int t = 0; t < len; ++t)
    for (int d = 0; d < D; ++d) s.features(t, d) = n(rng);
  return s;
}

Batch BatchOf(const std::vector<LabeledSequence> &seqs) {
  std::vector<std::size_t> order(seqs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  return PadBatch(seqs, order);
}

oracle::Seq ToSeq(const Eigen::MatrixXd &m) {
  oracle::Seq out(m.rows(), oracle::Vec(m.cols()));
  for (Eigen::Index t = 0; t < m.rows(); ++t)
    for (Eigen::Index d = 0; d < m.cols(); ++d) out[t][d] = m(t, d);
  return out;
}

// Randomizes every tensor so that biases and queries are nonzero too.
void Scramble(ModelParams &p, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto &t : p.Tensors())
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = u(rng);
}

}  // namespace

TEST_CASE("zero parameters give uniform probabilities and full attention") {
  const auto cfg = Tiny(3, 2, 4, 2);
  const auto p = ModelParams::Zeros(cfg);
  std::mt19937_64 rng(1);
  const auto out = Forward(BatchOf({RandomSequence(rng, 1, 3, 1)}), p, cfg, false);
  CHECK(out.probs(0, 0) == 0.5);
  CHECK(out.probs(0, 1) == 0.5);
  for (int h = 0; h < cfg.heads; ++h) CHECK(out.attention[0](h, 0) == 1.0);
}

TEST_CASE("forward matches the scalar recurrence") {
  SUBCASE("D=2, one layer, hidden 2, one head") {
    const auto cfg = Tiny(2, 1, 2, 1);
    auto p = ModelParams::Zeros(cfg);
    Scramble(p, 42, 0.8);
    std::mt19937_64 rng(2);
    const auto seq = RandomSequence(rng, 2, 2, 0);
    const auto out = Forward(BatchOf({seq}), p, cfg, false);
    const auto ref = oracle::ScalarForward(p, cfg, ToSeq(seq.features));
    for (int k = 0; k < 2; ++k) CHECK(std::abs(out.probs(0, k) - ref.probs[k]) <= 1e-9);
    for (int t = 0; t < 2; ++t) CHECK(std::abs(out.attention[0](0, t) - ref.attention[0][t]) <= 1e-9);
  }
  SUBCASE("stacked layers and several heads, padded batch") {
    const auto cfg = Tiny(3, 3, 4, 4);
    const auto p = ModelParams::Init(cfg, 9);
    std::mt19937_64 rng(3);
    std::vector<LabeledSequence> seqs;
    for (int len : {1, 6, 3, 4}) seqs.push_back(RandomSequence(rng, len, 3, len % 2));
    const auto out = Forward(BatchOf(seqs), p, cfg, false);
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      const auto ref = oracle::ScalarForward(p, cfg, ToSeq(seqs[i].features));
      for (int k = 0; k < 2; ++k) CHECK(std::abs(out.probs(i, k) - ref.probs[k]) <= 1e-9);
      for (int h = 0; h < cfg.heads; ++h) {
        double sum = 0.0;
        for (Eigen::Index t = 0; t < out.attention[i].cols(); ++t) {
          if (t < seqs[i].length()) {
            CHECK(std::abs(out.attention[i](h, t) - ref.attention[h][t]) <= 1e-9);
            CHECK(out.attention[i](h, t) >= 0.0);
            sum += out.attention[i](h, t);
          } else {
            CHECK(out.attention[i](h, t) == 0.0);
          }
        }
        CHECK(std::abs(sum - 1.0) <= 1e-6);
      }
    }
  }
}

TEST_CASE("initialization follows the documented ranges") {
  const auto cfg = Tiny(5, 2, 8, 2);
  const auto p = ModelParams::Init(cfg, 123);
  const double bound = 1.0 / std::sqrt(8.0);
  for (const auto &t : p.Tensors()) {
    if (t.name.ends_with(".bias") || t.name == "out.b") continue;
    for (Eigen::Index i = 0; i < t.size(); ++i) CHECK(std::abs(t.data[i]) <= bound);
  }
  for (const auto &layer : p.lstm)
    for (const auto &dir : layer) {
      CHECK(dir.bias.segment(0, 8).isZero(0.0));
      CHECK((dir.bias.segment(8, 8).array() == 1.0).all());
      CHECK(dir.bias.segment(16, 16).isZero(0.0));
    }
  CHECK(p.b_out.isZero(0.0));
  const auto q = ModelParams::Init(cfg, 123);
  CHECK(q.w_out == p.w_out);
  CHECK(q.lstm[1][1].w_hh == p.lstm[1][1].w_hh);
}

TEST_CASE("cross entropy") {
  Eigen::MatrixXd half(1, 2);
  half << 0.5, 0.5;
  const std::vector<int> zero{0}, one{1};
  CHECK(CrossEntropyLoss(half, zero) == doctest::Approx(std::log(2.0)));
  Eigen::MatrixXd sure(1, 2);
  sure << 0.0, 1.0;
  CHECK(CrossEntropyLoss(sure, one) == 0.0);
  bool clamped = false;
  CHECK(CrossEntropyLoss(sure, zero, &clamped) == doctest::Approx(-std::log(1e-12)));
  CHECK(clamped);
  Eigen::MatrixXd two(2, 2);
  two << 1.0, 0.0, 0.5, 0.5;
  const std::vector<int> labels{0, 1};
  CHECK(CrossEntropyLoss(two, labels) == doctest::Approx(0.3466).epsilon(1e-4));
  Eigen::MatrixXd bad(1, 2);
  bad << 0.5, 0.6;
  CHECK_THROWS_KIND(CrossEntropyLoss(bad, zero), ErrorKind::kPrecondition);
}

TEST_CASE("saturated correct prediction has zero output-bias gradient") {
  const auto cfg = Tiny(2, 1, 2, 1);
  auto p = ModelParams::Zeros(cfg);
  p.b_out << 60.0, -60.0;
  std::mt19937_64 rng(4);
  auto seq = RandomSequence(rng, 3, 2, 0);
  const auto r = ForwardBackward(BatchOf({seq}), p, cfg);
  CHECK(r.grads.b_out.cwiseAbs().maxCoeff() <= 1e-20);
  CHECK(r.grads.w_out.cwiseAbs().maxCoeff() <= 1e-20);
}

TEST_CASE("analytic gradients match central differences") {
  const auto cfg = Tiny(3, 2, 3, 2);
  auto p = ModelParams::Init(cfg, 77);
  Scramble(p, 78, 0.6);
  std::mt19937_64 rng(5);
  const auto batch = BatchOf({RandomSequence(rng, 4, 3, 1), RandomSequence(rng, 2, 3, 0)});
  const auto analytic = ForwardBackward(batch, p, cfg);
  auto grads = analytic.grads;
  auto g_tensors = grads.Tensors();
  auto p_tensors = p.Tensors();
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t k = 0; k < p_tensors.size(); ++k) {
    for (Eigen::Index i = 0; i < p_tensors[k].size(); ++i) {
      double &theta = p_tensors[k].data[i];
      const double saved = theta;
      theta = saved + h;
      const double up = CrossEntropyLoss(Forward(batch, p, cfg, false).probs, batch.labels);
      theta = saved - h;
      const double down = CrossEntropyLoss(Forward(batch, p, cfg, false).probs, batch.labels);
      theta = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = g_tensors[k].data[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, rel);
      if (rel > 1e-4) MESSAGE(p_tensors[k].name, "[", i, "] analytic ", a, " numeric ", numeric);
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("padding leaves outputs and gradients unchanged") {
  const auto cfg = Tiny(3, 2, 4, 2);
  const auto p = ModelParams::Init(cfg, 8);
  std::mt19937_64 rng(6);
  const auto a = RandomSequence(rng, 3, 3, 1);
  const auto b = RandomSequence(rng, 7, 3, 0);
  const auto alone = ForwardBackward(BatchOf({a}), p, cfg);
  auto padded_batch = BatchOf({a, b});
  const auto together = Forward(padded_batch, p, cfg, false);
  for (int k = 0; k < 2; ++k) CHECK(std::abs(together.probs(0, k) - alone.probs(0, k)) <= 1e-12);

  // Garbage in the padded rows must not leak into the loss or gradients.
  const auto clean = ForwardBackward(padded_batch, p, cfg);
  padded_batch.features[0].bottomRows(4).setConstant(1e3);
  const auto dirty = ForwardBackward(padded_batch, p, cfg);
  CHECK(dirty.loss == clean.loss);
  const auto gc = clean.grads.Tensors();
  const auto gd = dirty.grads.Tensors();
  for (std::size_t k = 0; k < gc.size(); ++k)
    for (Eigen::Index i = 0; i < gc[k].size(); ++i) CHECK(gc[k].data[i] == gd[k].data[i]);
}

TEST_CASE("train mode dropout is seeded") {
  auto cfg = Tiny(3, 3, 4, 2);
  cfg.dropout = 0.5;
  const auto p = ModelParams::Init(cfg, 10);
  std::mt19937_64 rng(7);
  const auto batch = BatchOf({RandomSequence(rng, 5, 3, 1), RandomSequence(rng, 3, 3, 0)});
  const auto x = Forward(batch, p, cfg, true, 99);
  const auto y = Forward(batch, p, cfg, true, 99);
  const auto z = Forward(batch, p, cfg, true, 100);
  const auto eval = Forward(batch, p, cfg, false);
  CHECK(x.probs == y.probs);
  CHECK(x.probs != z.probs);
  CHECK(x.probs != eval.probs);
}

TEST_CASE("first-batch loss sits near chance") {
  const auto cfg = Tiny(16, 2, 16, 4);
  std::mt19937_64 rng(8);
  std::vector<LabeledSequence> seqs;
  for (int i = 0; i < 32; ++i) seqs.push_back(RandomSequence(rng, 2 + i % 9, 16, i % 2));
  const auto batch = BatchOf(seqs);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double loss = CrossEntropyLoss(Forward(batch, ModelParams::Init(cfg, seed), cfg, false).probs,
                                         batch.labels);
    CHECK(loss >= 0.5 * std::log(2.0));
    CHECK(loss <= 2.0 * std::log(2.0));
  }
}

TEST_CASE("config validation and errors") {
  auto cfg = Tiny(3, 1, 3, 4);
  CHECK_THROWS_KIND(cfg.Validate(), ErrorKind::kPrecondition);
  cfg = Tiny(3, 1, 4, 2);
  cfg.dropout = 1.0;
  CHECK_THROWS_KIND(cfg.Validate(), ErrorKind::kPrecondition);

  cfg = Tiny(3, 1, 4, 2);
  const auto p = ModelParams::Init(cfg, 1);
  std::mt19937_64 rng(9);
  auto wrong_dim = BatchOf({RandomSequence(rng, 2, 4, 0)});
  CHECK_THROWS_KIND(Forward(wrong_dim, p, cfg, false), ErrorKind::kPrecondition);

  auto empty = BatchOf({RandomSequence(rng, 2, 3, 0)});
  empty.lengths[0] = 0;
  empty.mask[0].assign(empty.mask[0].size(), false);
  CHECK_THROWS_KIND(Forward(empty, p, cfg, false), ErrorKind::kPrecondition);

  auto blown = p;
  blown.lstm[0][0].w_ih(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    Forward(BatchOf({RandomSequence(rng, 2, 3, 0)}), blown, cfg, false);
    FAIL("expected numeric error");
  } catch (const granalign::Error &e) {
    CHECK(e.kind() == ErrorKind::kNumeric);
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
  }
}
