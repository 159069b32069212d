#pragma once

#include <string_view>

#include "rsr/model.hpp"
#include "rsr/regeneration.hpp"

namespace rsr {

/// exp(mean next-token NLL) over positions 1..n-1. Sequences longer than the
/// model context are scored in consecutive non-overlapping chunks of
/// max_seq_len tokens; a trailing chunk of a single token is ignored. With a
/// perturbation, each chunk's embeddings are regenerated before scoring.
double perplexity(const Checkpoint& ckpt, const TokenSequence& seq,
                  const PerturbationConfig* perturbation = nullptr);

double perplexity(const Checkpoint& ckpt, std::string_view text,
                  const PerturbationConfig* perturbation = nullptr);

}  // namespace rsr
