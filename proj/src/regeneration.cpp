#include "rsr/regeneration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rsr/error.hpp"

namespace rsr {

void PerturbationConfig::validate() const {
  if (!std::isfinite(alpha) || alpha < 0.0) throw InvalidArgument("perturbation: alpha must be finite and >= 0");
  if (!std::isfinite(lambda) || lambda < 0.0) throw InvalidArgument("perturbation: lambda must be finite and >= 0");
  if (lambda > 1.0) throw InvalidArgument("perturbation: lambda > 1 would overshoot past the original embeddings");
  if (neighborhood_k && *neighborhood_k == 0) throw InvalidArgument("perturbation: neighborhood_k must be positive");
}

void PerturbationConfig::validate_for(const ModelConfig& model) const {
  validate();
  if (attention_layer >= model.n_layers)
    throw InvalidArgument("perturbation: attention_layer " + std::to_string(attention_layer) +
                          " >= n_layers " + std::to_string(model.n_layers));
}

std::vector<double> attention_context(const Matrix& embeddings, const Matrix& weights, std::size_t i,
                                      std::optional<std::size_t> k) {
  const std::size_t n = embeddings.rows();
  if (weights.rows() != n || weights.cols() != n)
    throw InvalidArgument("attention_context: W must be n x n with n = embedding rows");
  if (i >= n) throw InvalidArgument("attention_context: position out of range");
  if (k && *k == 0) throw InvalidArgument("attention_context: neighbourhood size must be positive");

  double causal_sum = 0.0;
  for (std::size_t j = 0; j <= i; ++j) causal_sum += weights(i, j);
  for (std::size_t j = i + 1; j < n; ++j) {
    if (weights(i, j) != 0.0) throw InvalidArgument("attention_context: W is not causal");
  }
  if (!(std::fabs(causal_sum - 1.0) <= 1e-6))
    throw InvalidArgument("attention_context: W row " + std::to_string(i) + " is not stochastic");

  std::vector<std::size_t> idx(i + 1);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> w(i + 1);
  for (std::size_t j = 0; j <= i; ++j) w[j] = weights(i, j);

  if (k && *k < i + 1) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
    idx.resize(*k);
    std::sort(idx.begin(), idx.end());
    double kept = 0.0;
    for (std::size_t j : idx) kept += w[j];
    if (!(kept > 0.0)) throw InvalidArgument("attention_context: truncated neighbourhood has zero weight");
    for (std::size_t j : idx) w[j] /= kept;
  }

  std::vector<double> ctx(embeddings.cols(), 0.0);
  for (std::size_t j : idx) {
    const double wj = w[j];
    auto e = embeddings.row(j);
    for (std::size_t c = 0; c < ctx.size(); ++c) ctx[c] += wj * e[c];
  }
  return ctx;
}

std::vector<double> perturb_delta(std::span<const double> e, std::span<const double> context,
                                  const PerturbationConfig& cfg) {
  if (e.size() != context.size()) throw InvalidArgument("perturb_delta: dimension mismatch");
  std::vector<double> delta(e.size());
  for (std::size_t c = 0; c < e.size(); ++c) {
    const double diff = context[c] - e[c];
    const double act = cfg.activation == Activation::tanh ? std::tanh(diff) : diff;
    delta[c] = cfg.alpha * act;
  }
  return delta;
}

Matrix consistency_loss_gradient(const Matrix& current, const Matrix& original) {
  if (current.rows() != original.rows() || current.cols() != original.cols())
    throw InvalidArgument("consistency_loss_gradient: shape mismatch");
  Matrix g(current.rows(), current.cols());
  for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = current.values()[i] - original.values()[i];
  return g;
}

double consistency_loss(const Matrix& current, const Matrix& original) {
  const Matrix g = consistency_loss_gradient(current, original);
  return 0.5 * dot(g.values(), g.values());
}

PerturbationTrace regenerate(const Matrix& original, const Matrix& weights, const PerturbationConfig& cfg,
                             const AttentionSource& refresh) {
  cfg.validate();
  const std::size_t n = original.rows();
  if (n == 0) throw InvalidArgument("regenerate: no embeddings");
  if (!original.all_finite()) throw InvalidArgument("regenerate: non-finite embeddings");
  if (weights.rows() != n || weights.cols() != n) throw InvalidArgument("regenerate: W must be n x n");

  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = l2_norm(original.row(i));
    if (norms[i] == 0.0) throw InvalidArgument("regenerate: embedding row " + std::to_string(i) + " has zero norm");
  }

  PerturbationTrace trace;
  trace.original = original;
  trace.attention = weights;
  Matrix e = original;
  const std::optional<std::size_t> k =
      cfg.neighborhood_k ? std::optional<std::size_t>(*cfg.neighborhood_k) : std::nullopt;

  for (std::uint32_t iter = 0; iter < cfg.depth; ++iter) {
    if (iter > 0 && cfg.recompute_attention && refresh) trace.attention = refresh(e);

    // All deltas come from the iteration-start embeddings.
    Matrix delta(n, e.cols());
    double norm_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ctx = attention_context(e, trace.attention, i, k);
      const auto d = perturb_delta(e.row(i), ctx, cfg);
      std::copy(d.begin(), d.end(), delta.row(i).begin());
      norm_sum += l2_norm(d);
    }
    trace.mean_delta_norm.push_back(norm_sum / static_cast<double>(n));

    for (std::size_t i = 0; i < n; ++i) {
      auto row = e.row(i);
      auto d = delta.row(i);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += d[c];
      const double len = l2_norm(row);
      if (len == 0.0) throw Error("regenerate: embedding row " + std::to_string(i) + " collapsed to zero");
      const double ratio = norms[i] / len;
      for (double& x : row) x *= ratio;
    }
  }

  trace.pre_residual = e;
  const Matrix grad = consistency_loss_gradient(e, original);
  for (std::size_t i = 0; i < e.size(); ++i) e.values()[i] -= cfg.lambda * grad.values()[i];
  trace.perturbed = std::move(e);
  return trace;
}

namespace {

AttentionSource attention_source(const Checkpoint& ckpt, const TokenSequence& seq, std::uint32_t layer) {
  return [&ckpt, seq, layer](const Matrix& embeddings) {
    return head_averaged_attention(forward(ckpt, seq, &embeddings), layer);
  };
}

}  // namespace

PerturbationTrace regenerate_sequence(const Checkpoint& ckpt, const TokenSequence& seq,
                                      const PerturbationConfig& cfg) {
  cfg.validate_for(ckpt.config);
  const Matrix w = head_averaged_attention(forward(ckpt, seq), cfg.attention_layer);
  return regenerate(token_embeddings(ckpt, seq), w, cfg, attention_source(ckpt, seq, cfg.attention_layer));
}

std::pair<Generation, PerturbationTrace> generate_perturbed(const Checkpoint& ckpt, const TokenSequence& prompt,
                                                            std::size_t steps, const SamplerConfig& sampler,
                                                            const PerturbationConfig& cfg) {
  cfg.validate_for(ckpt.config);
  if (prompt.empty()) throw InvalidArgument("generate: empty prompt");

  PerturbationTrace trace = regenerate_sequence(ckpt, prompt, cfg);
  OverrideProvider provider;
  if (cfg.mode == PerturbationMode::prompt_only) {
    const Matrix prompt_rows = trace.perturbed;
    provider = [&ckpt, prompt_rows](const TokenSequence& current) -> std::optional<Matrix> {
      Matrix e = token_embeddings(ckpt, current);
      for (std::size_t i = 0; i < prompt_rows.rows(); ++i) {
        auto src = prompt_rows.row(i);
        std::copy(src.begin(), src.end(), e.row(i).begin());
      }
      return e;
    };
  } else {
    provider = [&ckpt, &cfg, &trace, &prompt](const TokenSequence& current) -> std::optional<Matrix> {
      if (current.size() != prompt.size()) trace = regenerate_sequence(ckpt, current, cfg);
      return trace.perturbed;
    };
  }
  Generation gen = generate_with_override(ckpt, prompt, steps, sampler, provider);
  return {std::move(gen), std::move(trace)};
}

}  // namespace rsr
