#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "rsr/model.hpp"

namespace rsr {

struct TrainHyper {
  double lr = 3e-3;
  std::uint32_t steps = 2000;
  std::uint32_t batch = 4;
  std::uint32_t seq_len = 32;
  std::uint64_t seed = 1;
  std::uint32_t warmup = 100;  // linear learning-rate warmup steps
  double clip_norm = 1.0;      // global gradient-norm clip; <= 0 disables
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t max_vocab = 4092;  // words, reserved ids excluded
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> losses;  // mean batch loss at each step, before the update
};

using StepCallback = std::function<void(std::uint32_t step, double loss)>;

/// Builds a vocabulary from `corpus`, initialises a model with `cfg` (its
/// vocab_size is replaced by the built vocabulary's size) and optimises
/// next-token cross-entropy with Adam. Single-threaded and bitwise
/// reproducible for a fixed (corpus, cfg, hyper).
TrainResult train(std::string_view corpus, ModelConfig cfg, const TrainHyper& hyper,
                  const StepCallback& on_step = {});

/// Mean of the last `window` entries (or all, if fewer).
double smoothed_final_loss(const std::vector<double>& losses, std::size_t window = 50);

}  // namespace rsr
