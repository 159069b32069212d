#include <cmath>
#include <numbers>

#include "rsr/error.hpp"
#include "rsr/model.hpp"
#include "rsr/random.hpp"

namespace rsr {

void ModelConfig::validate() const {
  if (d_model == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0 || max_seq_len == 0 || vocab_size == 0)
    throw InvalidArgument("model config: all dimensions must be positive");
  if (d_model % n_heads != 0) throw InvalidArgument("model config: d_model must be divisible by n_heads");
}

ModelWeights ModelWeights::zeros(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.d_model, f = cfg.d_ff, v = cfg.vocab_size;
  ModelWeights w;
  w.token_embedding = Matrix(v, d);
  w.layers.resize(cfg.n_layers);
  for (auto& l : w.layers) {
    l.ln1_gain = Matrix(1, d);
    l.ln1_bias = Matrix(1, d);
    l.wq = Matrix(d, d);
    l.bq = Matrix(1, d);
    l.wk = Matrix(d, d);
    l.bk = Matrix(1, d);
    l.wv = Matrix(d, d);
    l.bv = Matrix(1, d);
    l.wo = Matrix(d, d);
    l.bo = Matrix(1, d);
    l.ln2_gain = Matrix(1, d);
    l.ln2_bias = Matrix(1, d);
    l.w1 = Matrix(d, f);
    l.b1 = Matrix(1, f);
    l.w2 = Matrix(f, d);
    l.b2 = Matrix(1, d);
  }
  w.lnf_gain = Matrix(1, d);
  w.lnf_bias = Matrix(1, d);
  w.w_out = Matrix(d, v);
  w.b_out = Matrix(1, v);
  return w;
}

ModelWeights ModelWeights::init(const ModelConfig& cfg, std::uint64_t seed) {
  ModelWeights w = zeros(cfg);
  Rng rng(seed);
  auto normal_fill = [&](Matrix& m) {
    for (double& x : m.values()) x = 0.02 * rng.normal();
  };
  normal_fill(w.token_embedding);
  for (auto& l : w.layers) {
    l.ln1_gain.fill(1.0);
    l.ln2_gain.fill(1.0);
    normal_fill(l.wq);
    normal_fill(l.wk);
    normal_fill(l.wv);
    normal_fill(l.wo);
    normal_fill(l.w1);
    normal_fill(l.w2);
  }
  w.lnf_gain.fill(1.0);
  normal_fill(w.w_out);
  return w;
}

std::vector<Matrix*> ModelWeights::tensors() {
  std::vector<Matrix*> out{&token_embedding};
  for (auto& l : layers) {
    for (Matrix* m : {&l.ln1_gain, &l.ln1_bias, &l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo,
                      &l.bo, &l.ln2_gain, &l.ln2_bias, &l.w1, &l.b1, &l.w2, &l.b2})
      out.push_back(m);
  }
  for (Matrix* m : {&lnf_gain, &lnf_bias, &w_out, &b_out}) out.push_back(m);
  return out;
}

std::vector<const Matrix*> ModelWeights::tensors() const {
  auto mut = const_cast<ModelWeights*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

std::size_t ModelWeights::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix* m : tensors()) n += m->size();
  return n;
}

Matrix positional_encoding(std::size_t n, std::size_t d) {
  Matrix pe(n, d);
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      const double angle = static_cast<double>(pos) * freq;
      pe(pos, i) = std::sin(angle);
      if (i + 1 < d) pe(pos, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

Matrix token_embeddings(const Checkpoint& ckpt, const TokenSequence& seq) {
  const auto& table = ckpt.weights.token_embedding;
  Matrix e(seq.size(), table.cols());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const TokenId id = seq.ids[i];
    if (id >= table.rows()) throw InvalidArgument("token id " + std::to_string(id) + " out of vocabulary range");
    auto src = table.row(id);
    std::copy(src.begin(), src.end(), e.row(i).begin());
  }
  return e;
}

namespace {

constexpr double kLayerNormEps = 1e-5;

struct NormCache {
  Matrix xhat;
  std::vector<double> rstd;
};

struct LayerCache {
  NormCache norm1;
  Matrix a;  // LN1 output
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head
  Matrix o;                   // concatenated head outputs
  NormCache norm2;
  Matrix b;  // LN2 output
  Matrix u;  // pre-activation
  Matrix g;  // gelu(u)
};

struct Cache {
  std::vector<LayerCache> layers;
  NormCache normf;
  Matrix z;
};

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, NormCache* cache) {
  const std::size_t n = x.rows(), d = x.cols();
  Matrix y(n, d);
  if (cache) {
    cache->xhat = Matrix(n, d);
    cache->rstd.assign(n, 0.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (r[j] - mean) * rstd;
      y(i, j) = xh * gain(0, j) + bias(0, j);
      if (cache) cache->xhat(i, j) = xh;
    }
    if (cache) cache->rstd[i] = rstd;
  }
  return y;
}

// Returns dL/dx and accumulates gain/bias gradients.
Matrix layer_norm_backward(const Matrix& dy, const NormCache& c, const Matrix& gain, Matrix& dgain,
                           Matrix& dbias) {
  const std::size_t n = dy.rows(), d = dy.cols();
  Matrix dx(n, d);
  std::vector<double> dxhat(d);
  for (std::size_t i = 0; i < n; ++i) {
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dgain(0, j) += dy(i, j) * c.xhat(i, j);
      dbias(0, j) += dy(i, j);
      dxhat[j] = dy(i, j) * gain(0, j);
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * c.xhat(i, j);
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j)
      dx(i, j) = c.rstd[i] * (dxhat[j] - mean_dxhat - c.xhat(i, j) * mean_dxhat_xhat);
  }
  return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
  return cdf + x * pdf;
}

Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = matmul(x, w);
  add_row_vector(y, b);
  return y;
}

void add_inplace(Matrix& a, const Matrix& b) {
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) av[i] += bv[i];
}

ForwardTrace run_forward(const Checkpoint& ckpt, const TokenSequence& seq, const Matrix* override,
                         Cache* cache) {
  const ModelConfig& cfg = ckpt.config;
  const ModelWeights& w = ckpt.weights;
  const std::size_t n = seq.size();
  const std::size_t d = cfg.d_model;
  const std::size_t heads = cfg.n_heads;
  const std::size_t dh = cfg.head_dim();

  if (n == 0) throw InvalidArgument("forward: empty sequence");
  if (n > cfg.max_seq_len)
    throw InvalidArgument("forward: sequence length " + std::to_string(n) + " exceeds max_seq_len " +
                          std::to_string(cfg.max_seq_len));

  Matrix x;
  if (override) {
    if (override->rows() != n || override->cols() != d)
      throw InvalidArgument("forward: embedding override must be " + std::to_string(n) + "x" +
                            std::to_string(d));
    if (!override->all_finite()) throw InvalidArgument("forward: embedding override is not finite");
    x = *override;
  } else {
    x = token_embeddings(ckpt, seq);
  }
  add_inplace(x, positional_encoding(n, d));

  ForwardTrace trace;
  trace.hidden_states.reserve(cfg.n_layers + 1);
  trace.hidden_states.push_back(x);
  trace.attentions.resize(cfg.n_layers);
  if (cache) cache->layers.resize(cfg.n_layers);

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const LayerWeights& lw = w.layers[l];
    LayerCache* lc = cache ? &cache->layers[l] : nullptr;

    Matrix a = layer_norm(x, lw.ln1_gain, lw.ln1_bias, lc ? &lc->norm1 : nullptr);
    Matrix q = linear(a, lw.wq, lw.bq);
    Matrix k = linear(a, lw.wk, lw.bk);
    Matrix v = linear(a, lw.wv, lw.bv);

    Matrix o(n, d);
    auto& layer_attn = trace.attentions[l];
    layer_attn.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      Matrix scores(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += q(i, off + c) * k(j, off + c);
          scores(i, j) = s * scale;
        }
      }
      Matrix p = softmax_rows(scores, /*causal=*/true);
      for (std::size_t i = 0; i < n; ++i) {
        double* orow = o.row(i).data() + off;
        for (std::size_t j = 0; j <= i; ++j) {
          const double pij = p(i, j);
          const double* vrow = v.row(j).data() + off;
          for (std::size_t c = 0; c < dh; ++c) orow[c] += pij * vrow[c];
        }
      }
      layer_attn.push_back(std::move(p));
    }

    Matrix attn_out = linear(o, lw.wo, lw.bo);
    add_inplace(x, attn_out);

    Matrix b = layer_norm(x, lw.ln2_gain, lw.ln2_bias, lc ? &lc->norm2 : nullptr);
    Matrix u = linear(b, lw.w1, lw.b1);
    Matrix g(u.rows(), u.cols());
    for (std::size_t i = 0; i < u.size(); ++i) g.values()[i] = gelu(u.values()[i]);
    Matrix f = linear(g, lw.w2, lw.b2);
    add_inplace(x, f);

    trace.hidden_states.push_back(x);
    if (lc) {
      lc->a = std::move(a);
      lc->q = std::move(q);
      lc->k = std::move(k);
      lc->v = std::move(v);
      lc->probs = layer_attn;
      lc->o = std::move(o);
      lc->b = std::move(b);
      lc->u = std::move(u);
      lc->g = std::move(g);
    }
  }

  Matrix z = layer_norm(x, w.lnf_gain, w.lnf_bias, cache ? &cache->normf : nullptr);
  trace.logits = linear(z, w.w_out, w.b_out);
  if (cache) cache->z = std::move(z);
  return trace;
}

// Writes softmax(logits row) - onehot(target) scaled by `scale` into dlogits
// and returns the negative log-likelihood of `target`.
double cross_entropy_row(std::span<const double> logits, TokenId target, std::span<double> dlogits,
                         double scale) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double log_z = mx + std::log(sum);
  if (!dlogits.empty()) {
    for (std::size_t j = 0; j < logits.size(); ++j) dlogits[j] = std::exp(logits[j] - log_z) * scale;
    dlogits[target] -= scale;
  }
  return log_z - logits[target];
}

TokenSequence inputs_of(const TokenSequence& window) {
  if (window.size() < 2) throw InvalidArgument("loss: window needs at least two tokens");
  return TokenSequence{{window.ids.begin(), window.ids.end() - 1}};
}

}  // namespace

ForwardTrace forward(const Checkpoint& ckpt, const TokenSequence& seq, const Matrix* embedding_override) {
  return run_forward(ckpt, seq, embedding_override, nullptr);
}

Matrix head_averaged_attention(const ForwardTrace& trace, std::size_t layer) {
  if (layer >= trace.attentions.size()) throw InvalidArgument("attention layer index out of range");
  const auto& heads = trace.attentions[layer];
  Matrix avg(heads.front().rows(), heads.front().cols());
  for (const Matrix& h : heads) add_inplace(avg, h);
  const double inv = 1.0 / static_cast<double>(heads.size());
  for (double& x : avg.values()) x *= inv;
  return avg;
}

double sequence_loss(const Checkpoint& ckpt, const TokenSequence& window) {
  const TokenSequence input = inputs_of(window);
  const ForwardTrace trace = run_forward(ckpt, input, nullptr, nullptr);
  double total = 0.0;
  for (std::size_t i = 0; i < input.size(); ++i)
    total += cross_entropy_row(trace.logits.row(i), window.ids[i + 1], {}, 0.0);
  return total / static_cast<double>(input.size());
}

double sequence_loss_and_grad(const Checkpoint& ckpt, const TokenSequence& window, ModelWeights& grads,
                              double grad_scale) {
  const ModelConfig& cfg = ckpt.config;
  const ModelWeights& w = ckpt.weights;
  const TokenSequence input = inputs_of(window);
  const std::size_t n = input.size();
  const std::size_t heads = cfg.n_heads;
  const std::size_t dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Cache cache;
  const ForwardTrace trace = run_forward(ckpt, input, nullptr, &cache);

  Matrix dlogits(n, cfg.vocab_size);
  const double row_scale = grad_scale / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    total += cross_entropy_row(trace.logits.row(i), window.ids[i + 1], dlogits.row(i), row_scale);

  // Output head and final norm.
  matmul_at_b_acc(cache.z, dlogits, grads.w_out);
  column_sums_acc(dlogits, grads.b_out);
  Matrix dz = matmul_a_bt(dlogits, w.w_out);
  Matrix dx = layer_norm_backward(dz, cache.normf, w.lnf_gain, grads.lnf_gain, grads.lnf_bias);

  for (std::size_t l = cfg.n_layers; l-- > 0;) {
    const LayerWeights& lw = w.layers[l];
    LayerWeights& gw = grads.layers[l];
    const LayerCache& lc = cache.layers[l];

    // Feed-forward block: x2 = x1 + W2 gelu(W1 LN2(x1) + b1) + b2.
    matmul_at_b_acc(lc.g, dx, gw.w2);
    column_sums_acc(dx, gw.b2);
    Matrix du = matmul_a_bt(dx, lw.w2);
    for (std::size_t i = 0; i < du.size(); ++i) du.values()[i] *= gelu_grad(lc.u.values()[i]);
    matmul_at_b_acc(lc.b, du, gw.w1);
    column_sums_acc(du, gw.b1);
    Matrix db = matmul_a_bt(du, lw.w1);
    add_inplace(dx, layer_norm_backward(db, lc.norm2, lw.ln2_gain, gw.ln2_gain, gw.ln2_bias));

    // Attention block: x1 = x0 + Wo MHA(LN1(x0)) + bo.
    matmul_at_b_acc(lc.o, dx, gw.wo);
    column_sums_acc(dx, gw.bo);
    Matrix dout = matmul_a_bt(dx, lw.wo);

    Matrix dq(n, cfg.d_model), dk(n, cfg.d_model), dv(n, cfg.d_model);
    std::vector<double> dp(n);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      const Matrix& p = lc.probs[h];
      for (std::size_t i = 0; i < n; ++i) {
        const double* dorow = dout.row(i).data() + off;
        double weighted = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          const double* vrow = lc.v.row(j).data() + off;
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += dorow[c] * vrow[c];
          dp[j] = s;
          weighted += s * p(i, j);
          double* dvrow = dv.row(j).data() + off;
          for (std::size_t c = 0; c < dh; ++c) dvrow[c] += p(i, j) * dorow[c];
        }
        for (std::size_t j = 0; j <= i; ++j) {
          const double ds = p(i, j) * (dp[j] - weighted) * scale;
          if (ds == 0.0) continue;
          for (std::size_t c = 0; c < dh; ++c) {
            dq(i, off + c) += ds * lc.k(j, off + c);
            dk(j, off + c) += ds * lc.q(i, off + c);
          }
        }
      }
    }

    matmul_at_b_acc(lc.a, dq, gw.wq);
    column_sums_acc(dq, gw.bq);
    matmul_at_b_acc(lc.a, dk, gw.wk);
    column_sums_acc(dk, gw.bk);
    matmul_at_b_acc(lc.a, dv, gw.wv);
    column_sums_acc(dv, gw.bv);
    Matrix da = matmul_a_bt(dq, lw.wq);
    add_inplace(da, matmul_a_bt(dk, lw.wk));
    add_inplace(da, matmul_a_bt(dv, lw.wv));
    add_inplace(dx, layer_norm_backward(da, lc.norm1, lw.ln1_gain, gw.ln1_gain, gw.ln1_bias));
  }

  // Positional encodings are constant; the embedding rows take dx directly.
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = grads.token_embedding.row(input.ids[i]);
    auto src = dx.row(i);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
  return total / static_cast<double>(n);
}

}  // namespace rsr
