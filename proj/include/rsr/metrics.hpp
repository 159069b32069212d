#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rsr/model.hpp"
#include "rsr/numerics.hpp"
#include "rsr/regeneration.hpp"

namespace rsr {

struct ShiftReport {
  double mean_cosine = 1.0;     // mean_i cos(e_i, e_i')
  double mean_euclidean = 0.0;  // mean_i |e_i - e_i'|
  // Mean row-wise distance between clean and perturbed hidden states; entry 0
  // is the embedding layer (after positional encodings), n_layers + 1 total.
  std::vector<double> per_layer_hidden_distance;
  // Mean pairwise distance between positions within one run, per layer.
  std::vector<double> per_layer_dispersion_clean;
  std::vector<double> per_layer_dispersion_perturbed;
  // Joint PCA of final-layer hidden states: rows [0, n) clean, [n, 2n) perturbed.
  Pca2 pca;
};

/// Compares a regeneration trace against the clean model on `seq`.
ShiftReport embedding_shift(const PerturbationTrace& trace, const Checkpoint& ckpt, const TokenSequence& seq);

struct LexicalOptions {
  std::size_t repetition_window = 10;
  std::uint64_t rare_threshold = 5;
  std::set<std::string, std::less<>> stopwords = default_stopwords();

  /// the a an and or but of to in on at by for with from as is was are were
  /// be been it its he she they him her them his their i you we that this
  /// these those not no so if then than there what when which who
  static std::set<std::string, std::less<>> default_stopwords();
};

struct LexicalProfile {
  double ttr = 0.0;
  double mean_sentence_len = 0.0;
  double lexical_density = 0.0;
  double repetition_rate = 0.0;
  double rare_word_rate = 0.0;
  std::size_t token_count = 0;
  std::size_t type_count = 0;
  std::size_t sentence_count = 0;
};

/// Word-level statistics of `text`. Punctuation tokens (. ! ? ,) are not
/// counted as words; sentences end at . ! ? and empty sentences are skipped.
/// A token repeats if the same word occurs among the previous
/// `repetition_window` words; it is rare if its training frequency in `vocab`
/// is below `rare_threshold` (unknown words are always rare).
LexicalProfile lexical_profile(std::string_view text, const Vocab& vocab, const LexicalOptions& opts = {});

/// Per layer, population std of every causal entry of the head-averaged
/// attention matrix, as (clean, perturbed) pairs.
std::vector<std::pair<double, double>> attention_variance(const ForwardTrace& clean, const ForwardTrace& perturbed);

/// Population standard deviation of the causal entries of one n x n matrix.
double causal_entry_std(const Matrix& attention);

struct DriftCurve {
  std::size_t window = 0;
  std::size_t horizon = 0;
  std::vector<double> similarity;  // s_t for t = window .. horizon (1-based end positions)
};

/// s_t = cos(centroid of table embeddings of tokens t-w+1..t, centroid of
/// tokens 1..w), positions 1-based, t = w..horizon. Requires
/// tokens.size() >= horizon >= 2w and w >= 1.
DriftCurve semantic_drift(const Checkpoint& ckpt, const TokenSequence& tokens, std::size_t window,
                          std::size_t horizon);

}  // namespace rsr
