#include "rsr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rsr/error.hpp"
#include "rsr/random.hpp"

namespace rsr {

namespace {

struct AdamState {
  std::vector<Matrix> m, v;
};

void zero_grads(ModelWeights& g) {
  for (Matrix* t : g.tensors()) t->fill(0.0);
}

double global_norm(const ModelWeights& g) {
  double s = 0.0;
  for (const Matrix* t : g.tensors())
    for (double x : t->values()) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TrainResult train(std::string_view corpus, ModelConfig cfg, const TrainHyper& hyper, const StepCallback& on_step) {
  if (hyper.batch == 0 || hyper.seq_len == 0) throw InvalidArgument("train: batch and seq_len must be positive");
  if (!(hyper.lr > 0.0) || !std::isfinite(hyper.lr)) throw InvalidArgument("train: lr must be positive");
  if (hyper.max_vocab == 0) throw InvalidArgument("train: max_vocab must be positive");

  Vocab vocab = Vocab::build(corpus, hyper.max_vocab);
  cfg.vocab_size = static_cast<std::uint32_t>(vocab.size());
  cfg.validate();
  if (hyper.seq_len > cfg.max_seq_len) throw InvalidArgument("train: seq_len exceeds max_seq_len");

  const TokenSequence stream = vocab.encode(corpus);
  const std::size_t window = hyper.seq_len + 1;
  if (stream.size() < window)
    throw InvalidArgument("train: corpus too small (" + std::to_string(stream.size()) +
                          " tokens, need at least " + std::to_string(window) + ")");

  Rng init_rng(splitmix64(hyper.seed));
  TrainResult result;
  result.checkpoint.config = cfg;
  result.checkpoint.vocab = std::move(vocab);
  result.checkpoint.weights = ModelWeights::init(cfg, init_rng.next_u64());
  Checkpoint& ckpt = result.checkpoint;

  ModelWeights grads = ModelWeights::zeros(cfg);
  AdamState adam;
  for (const Matrix* t : ckpt.weights.tensors()) {
    adam.m.emplace_back(t->rows(), t->cols());
    adam.v.emplace_back(t->rows(), t->cols());
  }

  Rng batch_rng(splitmix64(hyper.seed ^ 0xA5A5A5A5A5A5A5A5ULL));
  const std::uint64_t n_starts = stream.size() - window + 1;
  result.losses.reserve(hyper.steps);
  TokenSequence win;
  win.ids.resize(window);

  for (std::uint32_t step = 0; step < hyper.steps; ++step) {
    zero_grads(grads);
    double loss = 0.0;
    const double scale = 1.0 / static_cast<double>(hyper.batch);
    for (std::uint32_t b = 0; b < hyper.batch; ++b) {
      const std::uint64_t start = batch_rng.below(n_starts);
      std::copy_n(stream.ids.begin() + static_cast<std::ptrdiff_t>(start), window, win.ids.begin());
      loss += sequence_loss_and_grad(ckpt, win, grads, scale);
    }
    loss *= scale;
    result.losses.push_back(loss);
    if (on_step) on_step(step, loss);

    double clip = 1.0;
    if (hyper.clip_norm > 0.0) {
      const double norm = global_norm(grads);
      if (norm > hyper.clip_norm) clip = hyper.clip_norm / norm;
    }
    const double warm = hyper.warmup == 0 ? 1.0 : std::min(1.0, static_cast<double>(step + 1) / hyper.warmup);
    const double lr = hyper.lr * warm;
    const double t = static_cast<double>(step + 1);
    const double bc1 = 1.0 - std::pow(hyper.beta1, t);
    const double bc2 = 1.0 - std::pow(hyper.beta2, t);

    auto params = ckpt.weights.tensors();
    auto gs = grads.tensors();
    for (std::size_t ti = 0; ti < params.size(); ++ti) {
      auto p = params[ti]->values();
      auto g = gs[ti]->values();
      auto m = adam.m[ti].values();
      auto v = adam.v[ti].values();
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i] * clip;
        m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * gi;
        v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * gi * gi;
        p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + hyper.eps);
      }
    }
  }
  return result;
}

double smoothed_final_loss(const std::vector<double>& losses, std::size_t window) {
  if (losses.empty()) throw InvalidArgument("smoothed_final_loss: no losses");
  const std::size_t k = std::min(window, losses.size());
  return std::accumulate(losses.end() - static_cast<std::ptrdiff_t>(k), losses.end(), 0.0) /
         static_cast<double>(k);
}

}  // namespace rsr
