#pragma once

// Decoder-only pre-norm transformer over word-level tokens.
//
//   x0      = E + PE                         (E: token embeddings or override)
//   per layer:
//     x    += Wo . MHA_causal(LN1(x)) + bo
//     x    += W2 . gelu(W1 . LN2(x) + b1) + b2
//   logits  = LNf(x) . Wout + bout
//
// Positional encodings are sinusoidal and added after the embedding lookup, so
// an embedding override replaces pure token embeddings only.

#include <cstdint>
#include <optional>
#include <vector>

#include "rsr/numerics.hpp"
#include "rsr/vocab.hpp"

namespace rsr {

struct ModelConfig {
  std::uint32_t d_model = 64;
  std::uint32_t n_layers = 4;
  std::uint32_t n_heads = 4;
  std::uint32_t d_ff = 256;
  std::uint32_t max_seq_len = 128;
  std::uint32_t vocab_size = 0;

  std::uint32_t head_dim() const { return d_model / n_heads; }
  /// Throws InvalidArgument unless every field is positive and d_model % n_heads == 0.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct LayerWeights {
  Matrix ln1_gain, ln1_bias;  // 1 x d
  Matrix wq, bq;              // d x d, 1 x d
  Matrix wk, bk;
  Matrix wv, bv;
  Matrix wo, bo;
  Matrix ln2_gain, ln2_bias;
  Matrix w1, b1;  // d x ff, 1 x ff
  Matrix w2, b2;  // ff x d, 1 x d
};

/// All trainable tensors. tensors() lists them in the fixed checkpoint order:
/// token_embedding; per layer ln1_gain, ln1_bias, wq, bq, wk, bk, wv, bv, wo,
/// bo, ln2_gain, ln2_bias, w1, b1, w2, b2; then lnf_gain, lnf_bias, w_out, b_out.
struct ModelWeights {
  Matrix token_embedding;  // V x d
  std::vector<LayerWeights> layers;
  Matrix lnf_gain, lnf_bias;
  Matrix w_out, b_out;  // d x V, 1 x V

  /// Correctly shaped tensors, all zero (layer-norm gains included).
  static ModelWeights zeros(const ModelConfig& cfg);
  /// Normal(0, 0.02) matrices, zero biases, unit layer-norm gains.
  static ModelWeights init(const ModelConfig& cfg, std::uint64_t seed);

  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;
  std::size_t parameter_count() const;
};

struct Checkpoint {
  ModelConfig config;
  Vocab vocab;
  ModelWeights weights;
};

struct ForwardTrace {
  Matrix logits;                             // n x V
  std::vector<Matrix> hidden_states;         // n_layers + 1 entries, each n x d
  std::vector<std::vector<Matrix>> attentions;  // [layer][head], n x n causal
};

/// Sinusoidal positional encodings, n x d.
Matrix positional_encoding(std::size_t n, std::size_t d);

/// Rows of the embedding table for `seq`, n x d.
Matrix token_embeddings(const Checkpoint& ckpt, const TokenSequence& seq);

/// Full forward pass. If `embedding_override` is given it replaces the table
/// lookup (it must be n x d_model); positional encodings are still added.
ForwardTrace forward(const Checkpoint& ckpt, const TokenSequence& seq,
                     const Matrix* embedding_override = nullptr);

/// Head-averaged attention of one layer, n x n.
Matrix head_averaged_attention(const ForwardTrace& trace, std::size_t layer);

/// Mean next-token cross-entropy of `window` (targets are window[1..]) and its
/// gradient with respect to every weight, accumulated into `grads` after
/// scaling by `grad_scale`. `grads` must have the shapes of ckpt.weights.
double sequence_loss_and_grad(const Checkpoint& ckpt, const TokenSequence& window,
                              ModelWeights& grads, double grad_scale = 1.0);

/// Mean next-token cross-entropy only (same arithmetic as above, no backward).
double sequence_loss(const Checkpoint& ckpt, const TokenSequence& window);

}  // namespace rsr
