#pragma once

// Recursive symbolic regeneration: an inference-time, attention-conditioned
// perturbation of token embeddings. Model weights are never touched.
//
// Given original embeddings E0 (n x d) and a causal row-stochastic attention
// matrix W (n x n), regenerate() runs
//
//   E <- E0
//   repeat depth times:
//     C_i  = sum_{j in N(i)} W_ij e_j            (all i, from iteration-start E)
//     e_i += alpha * sigma(C_i - e_i)            (all i, simultaneously)
//     e_i *= |e_i^0| / |e_i|                     (restore each row's original norm)
//   E' = E - lambda * (E - E0)                   (descent step on 1/2 sum |e_i - e_i^0|^2)

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rsr/generation.hpp"
#include "rsr/model.hpp"
#include "rsr/numerics.hpp"

namespace rsr {

enum class Activation { tanh, linear };
enum class PerturbationMode { prompt_only, continuous };

struct PerturbationConfig {
  double alpha = 0.1;
  std::uint32_t depth = 3;
  double lambda = 0.1;
  Activation activation = Activation::tanh;
  std::uint32_t attention_layer = 0;
  std::optional<std::uint32_t> neighborhood_k;  // nullopt = all causal positions
  bool recompute_attention = false;
  PerturbationMode mode = PerturbationMode::prompt_only;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument if alpha/lambda are negative or non-finite, or
  /// lambda > 1, or neighborhood_k == 0.
  void validate() const;
  /// validate() plus attention_layer < n_layers.
  void validate_for(const ModelConfig& model) const;

  bool operator==(const PerturbationConfig&) const = default;
};

struct PerturbationTrace {
  Matrix original;                   // E0
  Matrix pre_residual;               // E after the last iteration, before the residual step
  Matrix perturbed;                  // E'
  std::vector<double> mean_delta_norm;  // per iteration, mean over rows of |delta e_i|
  Matrix attention;                  // W used (last one, when refreshed)
};

/// Recomputes W from the current embeddings; used when recompute_attention is set.
using AttentionSource = std::function<Matrix(const Matrix& embeddings)>;

/// C_i = sum_j W_ij e_j over causal positions j <= i. With `k` smaller than
/// i + 1 only the k largest weights are kept (ties to the lower index) and
/// renormalised. Throws if row i's causal weights do not sum to 1 within 1e-6.
std::vector<double> attention_context(const Matrix& embeddings, const Matrix& weights, std::size_t i,
                                      std::optional<std::size_t> k = std::nullopt);

/// alpha * sigma(context - e).
std::vector<double> perturb_delta(std::span<const double> e, std::span<const double> context,
                                  const PerturbationConfig& cfg);

/// Runs the recursion described at the top of this header. With
/// cfg.recompute_attention and a `refresh` source, W is recomputed from the
/// current embeddings at the start of every iteration after the first.
PerturbationTrace regenerate(const Matrix& original, const Matrix& weights, const PerturbationConfig& cfg,
                             const AttentionSource& refresh = {});

/// Gradient of L(E) = 1/2 sum_i |e_i - e_i^0|^2, i.e. E - E0.
Matrix consistency_loss_gradient(const Matrix& current, const Matrix& original);
double consistency_loss(const Matrix& current, const Matrix& original);

/// Decodes with regenerated prompt embeddings.
///
/// prompt_only: W comes from a clean pass over the prompt; the prompt is
/// perturbed once and decoding uses the perturbed rows for prompt positions
/// and table rows for generated positions.
/// continuous: before every decoding step the whole current sequence is
/// regenerated from its table embeddings, with W from a clean pass over it.
/// The returned trace is the last regeneration performed.
std::pair<Generation, PerturbationTrace> generate_perturbed(const Checkpoint& ckpt, const TokenSequence& prompt,
                                                            std::size_t steps, const SamplerConfig& sampler,
                                                            const PerturbationConfig& cfg);

/// Regenerates the embeddings of `seq` against a clean pass of `ckpt`.
PerturbationTrace regenerate_sequence(const Checkpoint& ckpt, const TokenSequence& seq,
                                      const PerturbationConfig& cfg);

}  // namespace rsr
