#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "rsr/model.hpp"
#include "rsr/random.hpp"

namespace rsr {

struct SamplerConfig {
  enum class Kind { greedy, temperature };
  Kind kind = Kind::greedy;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  bool stop_on_eos = false;

  static SamplerConfig greedy() { return {}; }
  static SamplerConfig with_temperature(double tau, std::uint64_t seed) {
    return {Kind::temperature, tau, seed, false};
  }
};

struct Generation {
  TokenSequence tokens;  // prompt followed by generated ids
  bool stopped_on_eos = false;
};

/// Chooses the next token from one row of logits. Greedy takes the first
/// maximum; temperature sampling draws from softmax(logits / tau).
TokenId select_token(std::span<const double> logits, const SamplerConfig& sampler, Rng& rng);

/// Supplies the embedding override for the current sequence (nullopt means
/// use the embedding table).
using OverrideProvider = std::function<std::optional<Matrix>(const TokenSequence& current)>;

/// Autoregressive decoding without caching: every step runs a full forward
/// pass over the current sequence.
Generation generate(const Checkpoint& ckpt, const TokenSequence& prompt, std::size_t steps,
                    const SamplerConfig& sampler);

/// As generate(), but each step's forward pass uses the override produced by
/// `provider`.
Generation generate_with_override(const Checkpoint& ckpt, const TokenSequence& prompt, std::size_t steps,
                                  const SamplerConfig& sampler, const OverrideProvider& provider);

}  // namespace rsr
