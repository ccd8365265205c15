#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "granalign/trainer.h"
#include "test_helpers.h"

using namespace granalign::train;
using granalign::ErrorKind;
using granalign::dataset::LabeledSequence;
using granalign::model::ClassifierConfig;
using granalign::model::TensorRef;

namespace {

TensorRef Scalar(const char *name, double &x) { return TensorRef{name, &x, 1, 1}; }

std::vector<LabeledSequence> Separable(std::size_t n, int D, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<LabeledSequence> out;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledSequence s;
    s.utterance_id = "u" + std::to_string(i);
    s.speaker_id = "s" + std::to_string(i);
    s.label = static_cast<int>(i % 2);
    const int len = 2 + static_cast<int>(rng() % 5);
    s.features.resize(len, D);
    for (int t = 0; t < len; ++t)
      for (int d = 0; d < D; ++d) s.features(t, d) = (s.label ? 1.0 : -1.0) + noise(rng);
    s.unit_labels.assign(len, "x");
    out.push_back(std::move(s));
  }
  return out;
}

ClassifierConfig Small(int D) {
  ClassifierConfig c;
  c.input_dim = D;
  c.num_layers = 1;
  c.hidden = 4;
  c.heads = 2;
  c.dropout = 0.0;
  return c;
}

}  // namespace

TEST_CASE("config echo") {
  const TrainConfig c;
  CHECK(c.lr == 1e-5);
  CHECK(c.batch_size == 32);
  CHECK(c.max_epochs == 15);
  CHECK(c.weight_decay == 0.01);
  CHECK(c.clip_norm == 1.0);
  CHECK(c.plateau_factor == 0.5);
  CHECK(c.plateau_patience == 5);
  CHECK(c.seeds == 5);
  CHECK(c.beta1 == 0.9);
  CHECK(c.beta2 == 0.999);
  CHECK(c.eps == 1e-8);
  CHECK_NOTHROW(c.Validate());
  TrainConfig bad = c;
  bad.lr = 0.0;
  CHECK_THROWS_KIND(bad.Validate(), ErrorKind::kPrecondition);
}

TEST_CASE("AdamW worked steps") {
  SUBCASE("zero gradient and zero decay leaves parameters alone") {
    TrainConfig c;
    c.weight_decay = 0.0;
    double theta = 0.7, g = 0.0;
    std::vector<TensorRef> p{Scalar("t", theta)}, gr{Scalar("t", g)};
    AdamW opt(c);
    opt.Step(p, gr, c.lr);
    CHECK(theta == 0.7);
  }
  SUBCASE("decay-only step scales by 1 - lr * wd") {
    TrainConfig c;
    double theta = 2.0, g = 0.0;
    std::vector<TensorRef> p{Scalar("t", theta)}, gr{Scalar("t", g)};
    AdamW opt(c);
    opt.Step(p, gr, c.lr);
    CHECK(theta == doctest::Approx(2.0 * (1.0 - 1e-7)).epsilon(1e-15));
  }
  SUBCASE("first step with unit gradient") {
    TrainConfig c;
    double theta = 0.3, g = 1.0;
    std::vector<TensorRef> p{Scalar("t", theta)}, gr{Scalar("t", g)};
    AdamW opt(c);
    opt.Step(p, gr, c.lr);
    // m_hat = 1, v_hat = 1, so the Adam part is lr / (1 + eps).
    const double expected = 0.3 - 1e-5 / (1.0 + 1e-8) - 1e-5 * 0.01 * 0.3;
    CHECK(theta == doctest::Approx(expected).epsilon(1e-14));
    CHECK(opt.step() == 1);
  }
  SUBCASE("non-finite gradients are rejected") {
    TrainConfig c;
    double theta = 0.3, g = std::numeric_limits<double>::infinity();
    std::vector<TensorRef> p{Scalar("t", theta)}, gr{Scalar("t", g)};
    AdamW opt(c);
    CHECK_THROWS_KIND(opt.Step(p, gr, c.lr), ErrorKind::kNumeric);
  }
}

TEST_CASE("global norm clipping") {
  double a = 3.0, b = 4.0;
  std::vector<TensorRef> g{Scalar("a", a), Scalar("b", b)};
  CHECK(ClipGlobalNorm(g, 1.0) == doctest::Approx(5.0));
  CHECK(a == doctest::Approx(0.6));
  CHECK(b == doctest::Approx(0.8));
  double c = 0.3;
  std::vector<TensorRef> small{Scalar("c", c)};
  ClipGlobalNorm(small, 1.0);
  CHECK(c == 0.3);
}

TEST_CASE("plateau scheduler halves at the start of epoch 6 without improvement") {
  PlateauScheduler sched(1e-5, 0.5, 5, 1.0);
  // lr in effect for each epoch, then the epoch's validation loss.
  std::vector<double> used;
  for (int epoch = 1; epoch <= 11; ++epoch) {
    used.push_back(sched.lr());
    sched.Step(1.0);
  }
  for (int e = 1; e <= 5; ++e) CHECK(used[e - 1] == 1e-5);
  for (int e = 6; e <= 10; ++e) CHECK(used[e - 1] == 5e-6);
  CHECK(used[10] == 2.5e-6);

  PlateauScheduler better(1.0, 0.5, 5, 1.0);
  for (int i = 0; i < 20; ++i) CHECK_FALSE(better.Step(0.9 - 0.01 * i));
  CHECK(better.lr() == 1.0);
}

TEST_CASE("fit reaches full train accuracy on a separable set") {
  const auto train = Separable(60, 4, 1);
  const auto val = Separable(20, 4, 2);
  TrainConfig tc;
  tc.lr = 1e-2;
  tc.batch_size = 8;
  const auto result = Fit(train, val, Small(4), tc, 3);
  REQUIRE_FALSE(result.history.empty());
  CHECK_FALSE(result.diverged);
  bool perfect = false;
  for (const auto &e : result.history) perfect = perfect || e.train_accuracy == 1.0;
  CHECK(perfect);
  CHECK(result.history.size() <= 15u);
}

TEST_CASE("fit is deterministic for a seed") {
  const auto train = Separable(24, 3, 4);
  const auto val = Separable(8, 3, 5);
  TrainConfig tc;
  tc.lr = 1e-3;
  tc.batch_size = 8;
  tc.max_epochs = 3;
  auto cfg = Small(3);
  cfg.dropout = 0.2;
  cfg.num_layers = 2;
  const auto a = Fit(train, val, cfg, tc, 11);
  const auto b = Fit(train, val, cfg, tc, 11);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].mean_batch_loss == b.history[i].mean_batch_loss);
    CHECK(a.history[i].val_loss == b.history[i].val_loss);
  }
  CHECK(a.best_params.w_out == b.best_params.w_out);
  const auto c = Fit(train, val, cfg, tc, 12);
  CHECK(c.history[0].mean_batch_loss != a.history[0].mean_batch_loss);
}

TEST_CASE("fit preconditions") {
  const auto train = Separable(4, 3, 6);
  TrainConfig tc;
  CHECK_THROWS_KIND(Fit(train, {}, Small(3), tc, 0), ErrorKind::kPrecondition);
  CHECK_THROWS_KIND(Fit({}, train, Small(3), tc, 0), ErrorKind::kPrecondition);
}

TEST_CASE("predict returns per-sequence probabilities and attention") {
  const auto seqs = Separable(5, 3, 7);
  const auto cfg = Small(3);
  const auto params = granalign::model::ModelParams::Init(cfg, 1);
  const auto inf = Predict(seqs, params, cfg, 2);
  REQUIRE(inf.pd_prob.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(inf.pd_prob[i] > 0.0);
    CHECK(inf.pd_prob[i] < 1.0);
    CHECK(inf.attention[i].rows() == cfg.heads);
    CHECK(inf.attention[i].cols() == seqs[i].length());
  }
}
