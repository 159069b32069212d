#include <doctest.h>

#include "rsr/error.hpp"
#include "rsr/generation.hpp"
#include "rsr/perplexity.hpp"
#include "rsr/regeneration.hpp"
#include "support.hpp"

using namespace rsr;
using rsr::test::tiny_checkpoint;

TEST_CASE("zero steps returns the prompt") {
  auto ckpt = tiny_checkpoint(41);
  auto prompt = ckpt.vocab.encode("the cat");
  CHECK(generate(ckpt, prompt, 0, SamplerConfig::greedy()).tokens == prompt);
}

TEST_CASE("greedy and seeded sampling are deterministic") {
  auto ckpt = tiny_checkpoint(42);
  auto prompt = ckpt.vocab.encode("the dog");
  auto g1 = generate(ckpt, prompt, 12, SamplerConfig::greedy());
  auto g2 = generate(ckpt, prompt, 12, SamplerConfig::greedy());
  CHECK(g1.tokens == g2.tokens);
  CHECK(g1.tokens.size() == prompt.size() + 12);
  auto s1 = generate(ckpt, prompt, 12, SamplerConfig::with_temperature(1.0, 5));
  auto s2 = generate(ckpt, prompt, 12, SamplerConfig::with_temperature(1.0, 5));
  CHECK(s1.tokens == s2.tokens);
}

TEST_CASE("greedy picks the first maximum") {
  Rng rng(1);
  const std::vector<double> logits{0.5, 2.0, 2.0, -1.0};
  CHECK(select_token(logits, SamplerConfig::greedy(), rng) == 1);
}

TEST_CASE("temperature sampling follows softmax probabilities") {
  Rng rng(1234);
  const std::vector<double> logits{0.0, std::log(3.0)};
  const auto sampler = SamplerConfig::with_temperature(1.0, 0);
  int ones = 0;
  const int draws = 40000;
  for (int i = 0; i < draws; ++i) ones += select_token(logits, sampler, rng) == 1;
  CHECK(static_cast<double>(ones) / draws == doctest::Approx(0.75).epsilon(0.02));

  // Temperature 2 flattens 1:3 odds to 1:sqrt(3).
  const auto warm = SamplerConfig::with_temperature(2.0, 0);
  ones = 0;
  for (int i = 0; i < draws; ++i) ones += select_token(logits, warm, rng) == 1;
  CHECK(static_cast<double>(ones) / draws == doctest::Approx(std::sqrt(3.0) / (1 + std::sqrt(3.0))).epsilon(0.02));
}

TEST_CASE("tiny temperature reduces to greedy") {
  auto ckpt = tiny_checkpoint(43);
  auto prompt = ckpt.vocab.encode("a bird");
  auto g = generate(ckpt, prompt, 15, SamplerConfig::greedy());
  for (std::uint64_t seed : {1u, 2u, 3u}) CHECK(generate(ckpt, prompt, 15, SamplerConfig::with_temperature(1e-6, seed)).tokens == g.tokens);
}

TEST_CASE("stop on end of sequence") {
  auto ckpt = tiny_checkpoint(44);
  ckpt.weights.b_out.fill(0.0);
  ckpt.weights.b_out(0, kEosId) = 100.0;
  SamplerConfig s = SamplerConfig::greedy();
  s.stop_on_eos = true;
  auto g = generate(ckpt, ckpt.vocab.encode("the"), 10, s);
  CHECK(g.stopped_on_eos);
  CHECK(g.tokens.size() == 2);
}

TEST_CASE("generation input validation") {
  auto ckpt = tiny_checkpoint(45);
  CHECK_THROWS_AS(generate(ckpt, TokenSequence{}, 3, SamplerConfig::greedy()), InvalidArgument);
  CHECK_THROWS_AS(generate(ckpt, ckpt.vocab.encode("the"), ckpt.config.max_seq_len + 1, SamplerConfig::greedy()),
                  InvalidArgument);
  CHECK_THROWS_AS(generate(ckpt, ckpt.vocab.encode("the"), 2, SamplerConfig::with_temperature(0.0, 1)),
                  InvalidArgument);
}

TEST_CASE("uniform logits give perplexity equal to the vocabulary size") {
  auto ckpt = tiny_checkpoint(46);
  ckpt.weights = ModelWeights::zeros(ckpt.config);
  const double ppl = perplexity(ckpt, std::string_view("the cat sat on the mat ."));
  CHECK(std::fabs(ppl - static_cast<double>(ckpt.config.vocab_size)) <= 1e-9);
}

TEST_CASE("perplexity equals exp of the mean NLL from raw logits") {
  auto ckpt = tiny_checkpoint(47);
  auto seq = ckpt.vocab.encode("the dog ran to the cat . a bird sang in the tree !");
  auto tr = forward(ckpt, seq);
  long double nll = 0.0L;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    long double z = 0.0L;
    for (std::size_t v = 0; v < tr.logits.cols(); ++v) z += std::exp(static_cast<long double>(tr.logits(i, v)));
    nll += std::log(z) - tr.logits(i, seq.ids[i + 1]);
  }
  const double expected = static_cast<double>(std::exp(nll / static_cast<long double>(seq.size() - 1)));
  CHECK(std::fabs(perplexity(ckpt, seq) - expected) <= 1e-9 * expected);
}

TEST_CASE("long sequences are scored in context-sized chunks") {
  auto ckpt = tiny_checkpoint(48);
  const std::size_t L = ckpt.config.max_seq_len;
  Rng rng(3);
  TokenSequence seq;
  for (std::size_t i = 0; i < 2 * L + 5; ++i) seq.ids.push_back(static_cast<TokenId>(4 + rng.below(ckpt.vocab.size() - 4)));
  double nll = 0.0;
  std::size_t count = 0;
  for (std::size_t start : {std::size_t{0}, L, 2 * L}) {
    TokenSequence part{{seq.ids.begin() + start, seq.ids.begin() + std::min(seq.size(), start + L)}};
    const double ppl = perplexity(ckpt, part);
    nll += std::log(ppl) * static_cast<double>(part.size() - 1);
    count += part.size() - 1;
  }
  CHECK(perplexity(ckpt, seq) == doctest::Approx(std::exp(nll / count)).epsilon(1e-12));
}

TEST_CASE("alpha zero perturbation leaves perplexity unchanged") {
  auto ckpt = tiny_checkpoint(49);
  auto seq = ckpt.vocab.encode("did the dog see the bird ? the cat and the dog slept");
  PerturbationConfig p;
  p.alpha = 0.0;
  CHECK(perplexity(ckpt, seq, &p) == perplexity(ckpt, seq));
  p.alpha = 0.3;
  CHECK(perplexity(ckpt, seq, &p) != perplexity(ckpt, seq));
  CHECK_THROWS_AS(perplexity(ckpt, ckpt.vocab.encode("cat")), InvalidArgument);
}
