#include "rsr/generation.hpp"

#include <cmath>

#include "rsr/error.hpp"
#include "rsr/random.hpp"

namespace rsr {

TokenId select_token(std::span<const double> logits, const SamplerConfig& sampler, Rng& rng) {
  if (logits.empty()) throw InvalidArgument("select_token: empty logits");
  std::size_t best = 0;
  for (std::size_t j = 1; j < logits.size(); ++j)
    if (logits[j] > logits[best]) best = j;
  if (sampler.kind == SamplerConfig::Kind::greedy) return static_cast<TokenId>(best);

  const double tau = sampler.temperature;
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("sampler: temperature must be positive");
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    p[j] = std::exp((logits[j] - logits[best]) / tau);
    sum += p[j];
  }
  const double u = rng.uniform() * sum;
  double cum = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    cum += p[j];
    if (u < cum) return static_cast<TokenId>(j);
  }
  return static_cast<TokenId>(best);
}

Generation generate_with_override(const Checkpoint& ckpt, const TokenSequence& prompt, std::size_t steps,
                                  const SamplerConfig& sampler, const OverrideProvider& provider) {
  if (prompt.empty()) throw InvalidArgument("generate: empty prompt");
  if (prompt.size() + steps > ckpt.config.max_seq_len + 1)
    throw InvalidArgument("generate: prompt length plus steps exceeds the model context");

  Rng rng(sampler.seed);
  Generation out;
  out.tokens = prompt;
  for (std::size_t s = 0; s < steps; ++s) {
    std::optional<Matrix> override;
    if (provider) override = provider(out.tokens);
    const ForwardTrace trace = forward(ckpt, out.tokens, override ? &*override : nullptr);
    const TokenId next = select_token(trace.logits.row(trace.logits.rows() - 1), sampler, rng);
    out.tokens.ids.push_back(next);
    if (sampler.stop_on_eos && next == kEosId) {
      out.stopped_on_eos = true;
      break;
    }
  }
  return out;
}

Generation generate(const Checkpoint& ckpt, const TokenSequence& prompt, std::size_t steps,
                    const SamplerConfig& sampler) {
  return generate_with_override(ckpt, prompt, steps, sampler, {});
}

}  // namespace rsr
