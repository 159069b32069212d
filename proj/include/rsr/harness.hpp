#pragma once

// Experiment orchestration: clean vs perturbed generation over a grid of
// perturbation settings and a fixed prompt set, with every metric written to
// report.json plus five CSV files.
//
// Per (grid point, prompt) the sampler seed is
//   mix_seed(master_seed, point_key, prompt_index)
// where point_key is the FNV-1a hash of the point's (alpha, depth, lambda,
// mode) and mix_seed is defined in random.hpp. Seeds therefore depend on the
// point's values, not its position, so any sub-grid reproduces the matching
// rows of the full grid byte for byte.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rsr/config_json.hpp"
#include "rsr/generation.hpp"
#include "rsr/metrics.hpp"
#include "rsr/regeneration.hpp"

namespace rsr {

struct PerturbationGrid {
  std::vector<double> alpha{0.0, 0.05, 0.1, 0.2};
  std::vector<std::uint32_t> depth{3};
  std::vector<double> lambda{0.1};
  std::vector<PerturbationMode> mode{PerturbationMode::prompt_only};
};

struct ExperimentConfig {
  std::filesystem::path checkpoint;
  std::filesystem::path prompts;
  SamplerConfig sampler = SamplerConfig::with_temperature(0.8, 0);
  PerturbationConfig base;  // non-grid fields (activation, attention_layer, ...)
  PerturbationGrid grid;
  std::size_t horizon = 100;
  std::size_t drift_window = 10;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  LexicalOptions lexical;
  unsigned workers = 1;

  /// Expands the grid in alpha-major, then depth, lambda, mode order.
  std::vector<PerturbationConfig> grid_points() const;
};

/// Parses an experiment config. Relative paths are resolved against `base_dir`
/// (normally the directory holding the config file).
ExperimentConfig experiment_config_from_json(const Json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
Json to_json(const ExperimentConfig& cfg);

std::uint64_t grid_point_key(const PerturbationConfig& point);
std::uint64_t run_seed(std::uint64_t master, const PerturbationConfig& point, std::size_t prompt_index);

struct PromptRun {
  std::size_t prompt_index = 0;
  std::string prompt;
  std::uint64_t seed = 0;
  TokenSequence clean_tokens;
  TokenSequence perturbed_tokens;
  std::string clean_text;
  std::string perturbed_text;
  ShiftReport shift;
  LexicalProfile lexical_clean;
  LexicalProfile lexical_perturbed;
  double perplexity_clean = 0.0;
  double perplexity_perturbed = 0.0;
  DriftCurve drift_clean;
  DriftCurve drift_perturbed;
  std::vector<std::pair<double, double>> attention_std;  // per layer (clean, perturbed)
};

struct GridPointRun {
  PerturbationConfig point;
  std::vector<PromptRun> prompts;
};

struct ExperimentReport {
  std::string config_hash;      // FNV-1a (hex) of the canonical config JSON
  std::string checkpoint_hash;  // FNV-1a (hex) of the checkpoint file
  std::uint64_t seed = 0;
  std::vector<GridPointRun> points;
};

/// Computes every metric for one (grid point, prompt) pair.
PromptRun run_prompt(const Checkpoint& ckpt, const ExperimentConfig& cfg, const PerturbationConfig& point,
                     std::size_t prompt_index, const std::string& prompt);

/// Validates the whole config, runs the grid and writes report.json,
/// shift.csv, lexical.csv, attention_variance.csv, drift.csv and
/// pca_points.csv into cfg.output_dir. Nothing is written if validation fails.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

// Output rendering (exposed for tests).
inline constexpr const char* kShiftHeader =
    "alpha,depth,lambda,mode,prompt,mean_cosine,mean_euclidean,layer,hidden_distance,"
    "hidden_dispersion_clean,hidden_dispersion_perturbed";
inline constexpr const char* kLexicalHeader =
    "alpha,depth,lambda,mode,prompt,variant,token_count,type_count,sentence_count,ttr,mean_sentence_len,"
    "lexical_density,repetition_rate,rare_word_rate,perplexity";
inline constexpr const char* kAttentionHeader = "alpha,depth,lambda,mode,prompt,layer,std_clean,std_perturbed";
inline constexpr const char* kDriftHeader = "alpha,depth,lambda,mode,prompt,step,similarity_clean,similarity_perturbed";
inline constexpr const char* kPcaHeader = "alpha,depth,lambda,mode,prompt,population,position,pc1,pc2";

struct ReportFiles {
  std::string report_json;
  std::string shift_csv;
  std::string lexical_csv;
  std::string attention_csv;
  std::string drift_csv;
  std::string pca_csv;
};

ReportFiles render_report(const ExperimentReport& report, const ExperimentConfig& cfg);

/// Shortest round-trip decimal form of a double.
std::string format_number(double v);

/// Lexical profile as one CSV row (no variant/perplexity columns), with header.
inline constexpr const char* kLexicalProfileHeader =
    "token_count,type_count,sentence_count,ttr,mean_sentence_len,lexical_density,repetition_rate,rare_word_rate";
std::string lexical_profile_csv_row(const LexicalProfile& p);

}  // namespace rsr
