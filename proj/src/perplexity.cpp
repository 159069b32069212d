#include "rsr/perplexity.hpp"

#include <algorithm>
#include <cmath>

#include "rsr/error.hpp"

namespace rsr {

double perplexity(const Checkpoint& ckpt, const TokenSequence& seq, const PerturbationConfig* perturbation) {
  if (seq.size() < 2) throw InvalidArgument("perplexity: text must encode to at least two tokens");
  if (perturbation) perturbation->validate_for(ckpt.config);

  const std::size_t chunk = ckpt.config.max_seq_len;
  double nll = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start + 1 < seq.size(); start += chunk) {
    const std::size_t end = std::min(seq.size(), start + chunk);
    TokenSequence part{{seq.ids.begin() + static_cast<std::ptrdiff_t>(start),
                        seq.ids.begin() + static_cast<std::ptrdiff_t>(end)}};
    ForwardTrace trace;
    if (perturbation) {
      const PerturbationTrace pt = regenerate_sequence(ckpt, part, *perturbation);
      trace = forward(ckpt, part, &pt.perturbed);
    } else {
      trace = forward(ckpt, part);
    }
    for (std::size_t i = 0; i + 1 < part.size(); ++i) {
      auto row = trace.logits.row(i);
      const double mx = *std::max_element(row.begin(), row.end());
      double sum = 0.0;
      for (double v : row) sum += std::exp(v - mx);
      nll += mx + std::log(sum) - row[part.ids[i + 1]];
      ++count;
    }
  }
  return std::exp(nll / static_cast<double>(count));
}

double perplexity(const Checkpoint& ckpt, std::string_view text, const PerturbationConfig* perturbation) {
  return perplexity(ckpt, ckpt.vocab.encode(text), perturbation);
}

}  // namespace rsr
