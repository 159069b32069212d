#include "rsr/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "rsr/checkpoint_io.hpp"
#include "rsr/config_json.hpp"
#include "rsr/error.hpp"
#include "rsr/generation.hpp"
#include "rsr/harness.hpp"
#include "rsr/logging.hpp"
#include "rsr/metrics.hpp"
#include "rsr/regeneration.hpp"
#include "rsr/trainer.hpp"

namespace fs = std::filesystem;

namespace rsr {

namespace {

std::string read_text(const fs::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(std::string("cannot open ") + what + " '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InvalidArgument(origin + " is not valid JSON: " + e.what());
  }
}

// --perturb takes inline JSON or a path to a JSON file.
PerturbationConfig perturbation_arg(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && arg[first] == '{') return perturbation_from_json(parse_json(arg, "--perturb"));
  return perturbation_from_json(parse_json(read_text(arg, "perturbation file"), arg));
}

struct TrainArgs {
  std::string corpus, out, config, loss_log;
  std::uint64_t seed = 0;
  std::optional<std::uint32_t> steps;
};

struct GenerateArgs {
  std::string ckpt, prompt, perturb;
  std::size_t steps = 0;
  std::optional<double> temperature;
  std::uint64_t seed = 0;
};

struct ExperimentArgs {
  std::string config, ckpt, out_dir;
  std::optional<unsigned> workers;
};

struct MetricsArgs {
  std::string ckpt, text;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainingSetup setup;
  if (!a.config.empty()) setup = training_setup_from_json(parse_json(read_text(a.config, "config"), a.config));
  setup.hyper.seed = a.seed;
  if (a.steps) setup.hyper.steps = *a.steps;
  const std::string corpus = read_text(a.corpus, "corpus");

  const auto every = std::max<std::uint32_t>(1, setup.hyper.steps / 20);
  auto result = train(corpus, setup.model, setup.hyper, [&](std::uint32_t step, double loss) {
    if (step % every == 0) log().info("step {} loss {:.4f}", step, loss);
  });
  save_checkpoint(result.checkpoint, a.out);
  if (!a.loss_log.empty()) {
    std::ofstream log_out(a.loss_log, std::ios::binary | std::ios::trunc);
    log_out << "step,loss\n";
    for (std::size_t i = 0; i < result.losses.size(); ++i) log_out << i << ',' << format_number(result.losses[i]) << '\n';
    if (!log_out) throw Error("failed to write loss log '" + a.loss_log + "'");
  }
  const double first = result.losses.empty() ? 0.0 : result.losses.front();
  out << "initial_loss,smoothed_final_loss,vocab_size,parameters\n"
      << format_number(first) << ',' << format_number(smoothed_final_loss(result.losses)) << ','
      << result.checkpoint.config.vocab_size << ',' << result.checkpoint.weights.parameter_count() << '\n';
  return kExitOk;
}

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  const TokenSequence prompt = ckpt.vocab.encode(a.prompt);
  if (prompt.empty()) throw InvalidArgument("prompt has no tokens");
  const SamplerConfig sampler =
      a.temperature ? SamplerConfig::with_temperature(*a.temperature, a.seed) : SamplerConfig::greedy();
  if (sampler.kind == SamplerConfig::Kind::temperature && !(sampler.temperature > 0.0))
    throw InvalidArgument("--temperature must be positive");
  Generation g;
  if (a.perturb.empty()) {
    g = generate(ckpt, prompt, a.steps, sampler);
  } else {
    const PerturbationConfig p = perturbation_arg(a.perturb);
    p.validate_for(ckpt.config);
    g = generate_perturbed(ckpt, prompt, a.steps, sampler, p).first;
  }
  out << ckpt.vocab.decode(g.tokens) << '\n';
  return kExitOk;
}

int cmd_experiment(const ExperimentArgs& a) {
  ExperimentConfig cfg = load_experiment_config(a.config);
  if (!a.ckpt.empty()) cfg.checkpoint = a.ckpt;
  if (!a.out_dir.empty()) cfg.output_dir = a.out_dir;
  if (a.workers) cfg.workers = std::max(1u, *a.workers);
  run_experiment(cfg);
  return kExitOk;
}

int cmd_metrics(const MetricsArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  const std::string text = read_text(a.text, "text file");
  const LexicalProfile p = lexical_profile(text, ckpt.vocab);
  out << kLexicalProfileHeader << '\n' << lexical_profile_csv_row(p) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Recursive embedding regeneration toolkit", "rsr"};
  app.set_version_flag("--version", RSR_VERSION);
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a text corpus");
  train_cmd->add_option("--corpus", train_args.corpus, "Corpus text file")->required();
  train_cmd->add_option("--out", train_args.out, "Checkpoint to write")->required();
  train_cmd->add_option("--config", train_args.config, "JSON model/training config");
  train_cmd->add_option("--seed", train_args.seed, "Training seed")->required();
  train_cmd->add_option("--steps", train_args.steps, "Override the number of steps");
  train_cmd->add_option("--loss-log", train_args.loss_log, "Write per-step losses as CSV");

  GenerateArgs gen_args;
  auto* gen_cmd = app.add_subcommand("generate", "Generate a continuation of a prompt");
  gen_cmd->add_option("--ckpt", gen_args.ckpt, "Checkpoint file")->required();
  gen_cmd->add_option("--prompt", gen_args.prompt, "Prompt text")->required();
  gen_cmd->add_option("--steps", gen_args.steps, "Tokens to generate")->required();
  gen_cmd->add_option("--perturb", gen_args.perturb, "Perturbation config (inline JSON or file)");
  gen_cmd->add_option("--temperature", gen_args.temperature, "Sample at this temperature (default: greedy)");
  gen_cmd->add_option("--seed", gen_args.seed, "Sampling seed");

  ExperimentArgs exp_args;
  auto* exp_cmd = app.add_subcommand("experiment", "Run an experiment grid and write reports");
  exp_cmd->add_option("--config", exp_args.config, "Experiment config JSON")->required();
  exp_cmd->add_option("--ckpt", exp_args.ckpt, "Override the checkpoint path");
  exp_cmd->add_option("--out-dir", exp_args.out_dir, "Override the output directory");
  exp_cmd->add_option("--workers", exp_args.workers, "Worker threads");

  MetricsArgs met_args;
  auto* met_cmd = app.add_subcommand("metrics", "Lexical profile of a text file");
  met_cmd->add_option("--ckpt", met_args.ckpt, "Checkpoint file (vocabulary frequencies)")->required();
  met_cmd->add_option("--text", met_args.text, "Text file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args, out);
    if (gen_cmd->parsed()) return cmd_generate(gen_args, out);
    if (exp_cmd->parsed()) return cmd_experiment(exp_args);
    if (met_cmd->parsed()) return cmd_metrics(met_args, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace rsr
