// Checks that need a trained model. The checkpoint is produced by the
// train_desk_model fixture (10 KB corpus, default config) through the CLI.
#include <doctest.h>

#include "rsr/checkpoint_io.hpp"
#include "rsr/generation.hpp"
#include "rsr/harness.hpp"
#include "rsr/regeneration.hpp"
#include "rsr/trainer.hpp"
#include "support.hpp"

using namespace rsr;
namespace fs = std::filesystem;

namespace {

const Checkpoint& desk() {
  static const Checkpoint c = load_checkpoint(RSR_DESK_CKPT);
  return c;
}

std::vector<std::string> prompts() {
  std::vector<std::string> out;
  std::istringstream in(rsr::test::slurp(fs::path(RSR_DATA_DIR) / "prompts.txt"));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("training on the small corpus reduces the smoothed loss to at most 0.7 of the initial loss") {
  std::istringstream in(rsr::test::slurp(RSR_DESK_LOSS));
  std::string line;
  std::getline(in, line);
  std::vector<double> losses;
  while (std::getline(in, line)) losses.push_back(std::stod(line.substr(line.find(',') + 1)));
  REQUIRE(losses.size() == 2000);
  const double ratio = smoothed_final_loss(losses) / losses.front();
  MESSAGE("initial " << losses.front() << " smoothed final " << smoothed_final_loss(losses) << " ratio " << ratio);
  CHECK(ratio <= 0.7);
}

TEST_CASE("near-zero temperature reproduces greedy decoding on the trained model") {
  for (const auto& p : prompts()) {
    auto prompt = desk().vocab.encode(p);
    auto greedy = generate(desk(), prompt, 30, SamplerConfig::greedy());
    for (std::uint64_t seed : {1u, 2u})
      CHECK(generate(desk(), prompt, 30, SamplerConfig::with_temperature(1e-4, seed)).tokens == greedy.tokens);
  }
}

TEST_CASE("identity suite on the trained model") {
  for (const auto& p : prompts()) {
    auto prompt = desk().vocab.encode(p);
    const auto sampler = SamplerConfig::with_temperature(0.8, 11);
    auto plain = generate(desk(), prompt, 20, sampler);
    PerturbationConfig a0, k0, l0;
    a0.alpha = 0.0;
    k0.depth = 0;
    l0.lambda = 0.0;
    l0.alpha = 0.0;
    for (const auto& cfg : {a0, k0, l0}) CHECK(generate_perturbed(desk(), prompt, 20, sampler, cfg).first.tokens == plain.tokens);
  }
}

TEST_CASE("continuous-mode drift variance over the last steps (reported)") {
  PerturbationConfig cfg;
  cfg.alpha = 0.1;
  cfg.depth = 3;
  cfg.mode = PerturbationMode::continuous;
  double clean_var = 0.0, pert_var = 0.0;
  auto ps = prompts();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto prompt = desk().vocab.encode(ps[i]);
    const auto sampler = SamplerConfig::with_temperature(0.8, 100 + i);
    const std::size_t steps = 100 - prompt.size();
    auto clean = generate(desk(), prompt, steps, sampler);
    auto pert = generate_perturbed(desk(), prompt, steps, sampler, cfg).first;
    auto tail_var = [](const DriftCurve& c) {
      std::vector<double> t(c.similarity.end() - 11, c.similarity.end());
      double m = 0.0, v = 0.0;
      for (double x : t) m += x / 11.0;
      for (double x : t) v += (x - m) * (x - m) / 11.0;
      return v;
    };
    clean_var += tail_var(semantic_drift(desk(), clean.tokens, 10, 100)) / ps.size();
    pert_var += tail_var(semantic_drift(desk(), pert.tokens, 10, 100)) / ps.size();
  }
  MESSAGE("mean step 90-100 drift variance: clean " << clean_var << ", perturbed " << pert_var);
  CHECK(std::isfinite(clean_var));
  CHECK(std::isfinite(pert_var));
}
