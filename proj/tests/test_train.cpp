#include <doctest.h>

#include "rsr/error.hpp"
#include "rsr/model.hpp"
#include "rsr/trainer.hpp"
#include "support.hpp"

using namespace rsr;

namespace {

// Relative error with a floor on the denominator so that gradients that are
// numerically zero are compared absolutely.
double rel_err(double a, double b) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6}); }

}  // namespace

TEST_CASE("analytic loss gradient matches central finite differences") {
  auto ckpt = rsr::test::tiny_checkpoint(31);
  auto window = ckpt.vocab.encode("the cat sat on the mat . the dog ran to the cat");
  auto grads = ModelWeights::zeros(ckpt.config);
  const double loss = sequence_loss_and_grad(ckpt, window, grads);
  CHECK(loss == doctest::Approx(sequence_loss(ckpt, window)).epsilon(1e-13));

  auto params = ckpt.weights.tensors();
  auto g = grads.tensors();
  Rng rng(77);
  const double h = 1e-5;
  int checked = 0;
  while (checked < 10) {
    const std::size_t t = rng.below(params.size());
    const std::size_t k = rng.below(params[t]->size());
    double& w = params[t]->values()[k];
    const double saved = w;
    w = saved + h;
    const double up = sequence_loss(ckpt, window);
    w = saved - h;
    const double down = sequence_loss(ckpt, window);
    w = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = g[t]->values()[k];
    if (std::fabs(numeric) < 1e-9 && std::fabs(analytic) < 1e-9) continue;  // e.g. unused embedding rows
    INFO("tensor " << t << " index " << k << " analytic " << analytic << " numeric " << numeric);
    CHECK(rel_err(analytic, numeric) <= 1e-5);
    ++checked;
  }
}

TEST_CASE("every tensor receives gradient") {
  auto ckpt = rsr::test::tiny_checkpoint(32);
  auto window = ckpt.vocab.encode("a bird sang in the tree ! did the dog see the bird ?");
  auto grads = ModelWeights::zeros(ckpt.config);
  sequence_loss_and_grad(ckpt, window, grads);
  for (const Matrix* t : grads.tensors()) {
    double s = 0.0;
    for (double x : t->values()) s += std::fabs(x);
    CHECK(s > 0.0);
  }
}

TEST_CASE("a single repeated sequence is memorised") {
  std::string corpus;
  for (int i = 0; i < 60; ++i) corpus += "one two three four five six seven eight nine ten . ";
  ModelConfig cfg;
  cfg.d_model = 32;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_ff = 64;
  cfg.max_seq_len = 32;
  TrainHyper hyper;
  hyper.steps = 500;
  hyper.seq_len = 16;
  hyper.batch = 4;
  hyper.lr = 3e-3;
  hyper.warmup = 50;
  auto result = train(corpus, cfg, hyper);
  REQUIRE(result.losses.size() == 500);
  CHECK(result.losses.back() < 0.1);
  CHECK(smoothed_final_loss(result.losses, 20) < 0.1);
}

TEST_CASE("training is bitwise reproducible") {
  ModelConfig cfg = rsr::test::tiny_config();
  TrainHyper hyper;
  hyper.steps = 30;
  hyper.seq_len = 12;
  hyper.seed = 9;
  auto a = train(rsr::test::kTinyCorpus, cfg, hyper);
  auto b = train(rsr::test::kTinyCorpus, cfg, hyper);
  CHECK(a.losses == b.losses);
  auto ta = a.checkpoint.weights.tensors();
  auto tb = b.checkpoint.weights.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(bitwise_equal(*ta[i], *tb[i]));

  hyper.seed = 10;
  auto c = train(rsr::test::kTinyCorpus, cfg, hyper);
  CHECK(c.losses != a.losses);
}

TEST_CASE("training input validation") {
  ModelConfig cfg = rsr::test::tiny_config();
  TrainHyper hyper;
  hyper.seq_len = 64;
  CHECK_THROWS_AS(train(rsr::test::kTinyCorpus, cfg, hyper), InvalidArgument);
  hyper.seq_len = 8;
  CHECK_THROWS_AS(train("too short", cfg, hyper), InvalidArgument);
  CHECK_THROWS_AS(train("", cfg, hyper), InvalidArgument);
}

TEST_CASE("smoothed loss is the mean of the tail") {
  CHECK(smoothed_final_loss({5, 4, 3, 2, 1}, 2) == 1.5);
  CHECK(smoothed_final_loss({3, 1}, 50) == 2.0);
}
