#include "rsr/metrics.hpp"

#include <cmath>
#include <unordered_set>

#include "rsr/error.hpp"

namespace rsr {

namespace {

double row_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double mean_row_distance(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += row_distance(a.row(i), b.row(i));
  return s / static_cast<double>(a.rows());
}

double mean_pairwise_distance(const Matrix& m) {
  const std::size_t n = m.rows();
  if (n < 2) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) s += row_distance(m.row(i), m.row(j));
  return s / static_cast<double>(n * (n - 1) / 2);
}

}  // namespace

ShiftReport embedding_shift(const PerturbationTrace& trace, const Checkpoint& ckpt, const TokenSequence& seq) {
  const std::size_t n = seq.size();
  const std::size_t d = ckpt.config.d_model;
  if (trace.original.rows() != n || trace.perturbed.rows() != n || trace.original.cols() != d ||
      trace.perturbed.cols() != d)
    throw InvalidArgument("embedding_shift: trace shape does not match sequence");

  ShiftReport r;
  double cos_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) cos_sum += cosine_sim(trace.original.row(i), trace.perturbed.row(i));
  r.mean_cosine = cos_sum / static_cast<double>(n);
  r.mean_euclidean = mean_row_distance(trace.original, trace.perturbed);

  const ForwardTrace clean = forward(ckpt, seq);
  const ForwardTrace pert = forward(ckpt, seq, &trace.perturbed);
  for (std::size_t l = 0; l < clean.hidden_states.size(); ++l) {
    r.per_layer_hidden_distance.push_back(mean_row_distance(clean.hidden_states[l], pert.hidden_states[l]));
    r.per_layer_dispersion_clean.push_back(mean_pairwise_distance(clean.hidden_states[l]));
    r.per_layer_dispersion_perturbed.push_back(mean_pairwise_distance(pert.hidden_states[l]));
  }

  const Matrix& hc = clean.hidden_states.back();
  const Matrix& hp = pert.hidden_states.back();
  Matrix stacked(2 * n, d);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(hc.row(i).begin(), hc.row(i).end(), stacked.row(i).begin());
    std::copy(hp.row(i).begin(), hp.row(i).end(), stacked.row(n + i).begin());
  }
  r.pca = pca2(stacked);
  return r;
}

std::set<std::string, std::less<>> LexicalOptions::default_stopwords() {
  return {"the",  "a",    "an",  "and",   "or",    "but",  "of",    "to",   "in",   "on",
          "at",   "by",   "for", "with",  "from",  "as",   "is",    "was",  "are",  "were",
          "be",   "been", "it",  "its",   "he",    "she",  "they",  "him",  "her",  "them",
          "his",  "their", "i",  "you",   "we",    "that", "this",  "these", "those", "not",
          "no",   "so",   "if",  "then",  "than",  "there", "what", "when", "which", "who"};
}

LexicalProfile lexical_profile(std::string_view text, const Vocab& vocab, const LexicalOptions& opts) {
  std::vector<std::string> words;
  std::size_t sentences = 0;
  bool open_sentence = false;
  for (auto& tok : tokenize(text)) {
    if (is_sentence_delimiter(tok)) {
      if (open_sentence) ++sentences;
      open_sentence = false;
    } else if (!is_punctuation_token(tok)) {
      words.push_back(std::move(tok));
      open_sentence = true;
    }
  }
  if (open_sentence) ++sentences;
  if (words.empty()) throw InvalidArgument("lexical_profile: text has no word tokens");

  LexicalProfile p;
  p.token_count = words.size();
  p.sentence_count = sentences;
  std::unordered_set<std::string_view> types;
  std::size_t content = 0, repeats = 0, rare = 0;
  for (std::size_t t = 0; t < words.size(); ++t) {
    const std::string& w = words[t];
    types.insert(w);
    if (!opts.stopwords.contains(w)) ++content;
    const std::size_t from = t >= opts.repetition_window ? t - opts.repetition_window : 0;
    for (std::size_t u = from; u < t; ++u) {
      if (words[u] == w) {
        ++repeats;
        break;
      }
    }
    const auto id = vocab.find(w);
    if (!id || *id < kReservedCount || vocab.frequency(*id) < opts.rare_threshold) ++rare;
  }
  const double n = static_cast<double>(words.size());
  p.type_count = types.size();
  p.ttr = static_cast<double>(p.type_count) / n;
  p.mean_sentence_len = n / static_cast<double>(sentences);
  p.lexical_density = static_cast<double>(content) / n;
  p.repetition_rate = static_cast<double>(repeats) / n;
  p.rare_word_rate = static_cast<double>(rare) / n;
  return p;
}

double causal_entry_std(const Matrix& attention) {
  const std::size_t n = attention.rows();
  if (n == 0 || attention.cols() != n) throw InvalidArgument("attention matrix must be square and non-empty");
  const double first = attention(0, 0);
  bool all_equal = true;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      sum += attention(i, j);
      all_equal = all_equal && attention(i, j) == first;
      ++count;
    }
  }
  if (all_equal) return 0.0;
  const double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) ss += (attention(i, j) - mean) * (attention(i, j) - mean);
  return std::sqrt(ss / static_cast<double>(count));
}

std::vector<std::pair<double, double>> attention_variance(const ForwardTrace& clean, const ForwardTrace& perturbed) {
  if (clean.attentions.size() != perturbed.attentions.size())
    throw InvalidArgument("attention_variance: layer count mismatch");
  std::vector<std::pair<double, double>> out;
  for (std::size_t l = 0; l < clean.attentions.size(); ++l) {
    const auto& a = clean.attentions[l];
    const auto& b = perturbed.attentions[l];
    if (a.size() != b.size() || a.empty()) throw InvalidArgument("attention_variance: head count mismatch");
    if (a.front().rows() != b.front().rows()) throw InvalidArgument("attention_variance: sequence length mismatch");
    out.emplace_back(causal_entry_std(head_averaged_attention(clean, l)),
                     causal_entry_std(head_averaged_attention(perturbed, l)));
  }
  return out;
}

DriftCurve semantic_drift(const Checkpoint& ckpt, const TokenSequence& tokens, std::size_t window,
                          std::size_t horizon) {
  if (window == 0) throw InvalidArgument("semantic_drift: window must be positive");
  if (horizon < 2 * window) throw InvalidArgument("semantic_drift: horizon must be at least twice the window");
  if (tokens.size() < horizon)
    throw InvalidArgument("semantic_drift: sequence of " + std::to_string(tokens.size()) +
                          " tokens is shorter than horizon " + std::to_string(horizon));

  const Matrix e = token_embeddings(
      ckpt, TokenSequence{{tokens.ids.begin(), tokens.ids.begin() + static_cast<std::ptrdiff_t>(horizon)}});
  auto centroid = [&](std::size_t first) {
    std::vector<double> c(e.cols(), 0.0);
    for (std::size_t i = first; i < first + window; ++i)
      for (std::size_t j = 0; j < c.size(); ++j) c[j] += e(i, j);
    for (double& x : c) x /= static_cast<double>(window);
    return c;
  };

  DriftCurve curve;
  curve.window = window;
  curve.horizon = horizon;
  const auto reference = centroid(0);
  for (std::size_t t = window; t <= horizon; ++t) curve.similarity.push_back(cosine_sim(centroid(t - window), reference));
  return curve;
}

}  // namespace rsr
