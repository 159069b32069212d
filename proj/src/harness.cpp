#include "rsr/harness.hpp"

#include <atomic>
#include <bit>
#include <charconv>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "rsr/checkpoint_io.hpp"
#include "rsr/error.hpp"
#include "rsr/logging.hpp"
#include "rsr/perplexity.hpp"
#include "rsr/random.hpp"

namespace fs = std::filesystem;

namespace rsr {

namespace {

constexpr const char* kReportFormat = "rsr-report/1";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t hash_string(const std::string& s) {
  return fnv1a64({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

PerturbationMode parse_mode(const Json& m) {
  if (m == "prompt_only") return PerturbationMode::prompt_only;
  if (m == "continuous") return PerturbationMode::continuous;
  throw InvalidArgument("experiment config: grid mode must be \"prompt_only\" or \"continuous\"");
}

template <typename T>
std::vector<T> read_list(const Json& j, const char* key) {
  const Json& v = j.at(key);
  if (!v.is_array() || v.empty())
    throw InvalidArgument(std::string("experiment config: grid.") + key + " must be a non-empty list");
  try {
    return v.get<std::vector<T>>();
  } catch (const Json::exception&) {
    throw InvalidArgument(std::string("experiment config: grid.") + key + " has the wrong element type");
  }
}

std::string describe(const PerturbationConfig& p) {
  return "alpha=" + format_number(p.alpha) + ", depth=" + std::to_string(p.depth) +
         ", lambda=" + format_number(p.lambda) + ", mode=" + to_string(p.mode);
}

std::vector<std::string> read_prompts(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open prompts file '" + path.string() + "'");
  std::vector<std::string> prompts;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    prompts.push_back(line);
  }
  if (prompts.empty()) throw InvalidArgument("prompts file '" + path.string() + "' has no prompts");
  return prompts;
}

void check_output_dir(const fs::path& dir) {
  if (dir.empty()) throw InvalidArgument("experiment config: output_dir is required");
  fs::path probe = fs::absolute(dir);
  while (!fs::exists(probe)) {
    if (!probe.has_parent_path() || probe.parent_path() == probe)
      throw InvalidArgument("output_dir '" + dir.string() + "' is not resolvable");
    probe = probe.parent_path();
  }
  if (!fs::is_directory(probe)) throw InvalidArgument("output_dir '" + dir.string() + "' is not under a directory");
}

void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw InvalidArgument(std::string("experiment config: ") + what + " path is required");
  if (!fs::is_regular_file(p)) throw Error(std::string(what) + " '" + p.string() + "' does not exist");
}

std::string prefix(const PerturbationConfig& p, std::size_t prompt) {
  return format_number(p.alpha) + "," + std::to_string(p.depth) + "," + format_number(p.lambda) + "," +
         to_string(p.mode) + "," + std::to_string(prompt);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double tail_variance(const DriftCurve& c, std::size_t last) {
  const std::size_t k = std::min(last, c.similarity.size());
  std::vector<double> tail(c.similarity.end() - static_cast<std::ptrdiff_t>(k), c.similarity.end());
  const double m = mean_of(tail);
  double ss = 0.0;
  for (double x : tail) ss += (x - m) * (x - m);
  return k == 0 ? 0.0 : ss / static_cast<double>(k);
}

Json lexical_json(const LexicalProfile& p, double ppl) {
  return Json{{"token_count", p.token_count},
              {"type_count", p.type_count},
              {"sentence_count", p.sentence_count},
              {"ttr", p.ttr},
              {"mean_sentence_len", p.mean_sentence_len},
              {"lexical_density", p.lexical_density},
              {"repetition_rate", p.repetition_rate},
              {"rare_word_rate", p.rare_word_rate},
              {"perplexity", ppl}};
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string lexical_profile_csv_row(const LexicalProfile& p) {
  return std::to_string(p.token_count) + "," + std::to_string(p.type_count) + "," + std::to_string(p.sentence_count) +
         "," + format_number(p.ttr) + "," + format_number(p.mean_sentence_len) + "," +
         format_number(p.lexical_density) + "," + format_number(p.repetition_rate) + "," +
         format_number(p.rare_word_rate);
}

std::vector<PerturbationConfig> ExperimentConfig::grid_points() const {
  std::vector<PerturbationConfig> out;
  for (double a : grid.alpha)
    for (std::uint32_t k : grid.depth)
      for (double l : grid.lambda)
        for (PerturbationMode m : grid.mode) {
          PerturbationConfig p = base;
          p.alpha = a;
          p.depth = k;
          p.lambda = l;
          p.mode = m;
          out.push_back(p);
        }
  return out;
}

ExperimentConfig experiment_config_from_json(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw InvalidArgument("experiment config: expected a JSON object");
  reject_unknown_keys(j, {"checkpoint", "prompts", "sampler", "perturbation", "grid", "horizon", "drift_window",
                          "output_dir", "seed", "lexical", "workers"},
                      "experiment config");
  auto path_of = [&](const char* key) -> fs::path {
    if (!j.contains(key) || !j.at(key).is_string())
      throw InvalidArgument(std::string("experiment config: '") + key + "' must be a path string");
    fs::path p = j.at(key).get<std::string>();
    return p.is_absolute() ? p : base_dir / p;
  };

  ExperimentConfig cfg;
  cfg.checkpoint = path_of("checkpoint");
  cfg.prompts = path_of("prompts");
  cfg.output_dir = path_of("output_dir");
  try {
    if (j.contains("sampler")) cfg.sampler = sampler_from_json(j.at("sampler"));
    if (j.contains("perturbation")) cfg.base = perturbation_from_json(j.at("perturbation"));
    if (j.contains("grid")) {
      const Json& g = j.at("grid");
      if (!g.is_object()) throw InvalidArgument("experiment config: grid must be an object");
      reject_unknown_keys(g, {"alpha", "depth", "lambda", "mode"}, "experiment config grid");
      if (g.contains("alpha")) cfg.grid.alpha = read_list<double>(g, "alpha");
      if (g.contains("depth")) cfg.grid.depth = read_list<std::uint32_t>(g, "depth");
      if (g.contains("lambda")) cfg.grid.lambda = read_list<double>(g, "lambda");
      if (g.contains("mode")) {
        cfg.grid.mode.clear();
        for (const Json& m : read_list<Json>(g, "mode")) cfg.grid.mode.push_back(parse_mode(m));
      }
    }
    cfg.horizon = j.value("horizon", cfg.horizon);
    cfg.drift_window = j.value("drift_window", cfg.drift_window);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.workers = j.value("workers", cfg.workers);
    if (j.contains("lexical")) {
      const Json& l = j.at("lexical");
      reject_unknown_keys(l, {"repetition_window", "rare_threshold", "stopwords"}, "experiment config lexical");
      cfg.lexical.repetition_window = l.value("repetition_window", cfg.lexical.repetition_window);
      cfg.lexical.rare_threshold = l.value("rare_threshold", cfg.lexical.rare_threshold);
      if (l.contains("stopwords")) {
        cfg.lexical.stopwords.clear();
        for (const auto& w : l.at("stopwords").get<std::vector<std::string>>()) cfg.lexical.stopwords.insert(w);
      }
    }
  } catch (const Json::exception& e) {
    throw InvalidArgument(std::string("experiment config: ") + e.what());
  }
  if (cfg.workers == 0) cfg.workers = 1;
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open experiment config '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidArgument("experiment config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return experiment_config_from_json(j, path.parent_path());
}

Json to_json(const ExperimentConfig& cfg) {
  Json modes = Json::array();
  for (auto m : cfg.grid.mode) modes.push_back(to_string(m));
  Json base = to_json(cfg.base);
  for (const char* k : {"alpha", "depth", "lambda", "mode", "seed"}) base.erase(k);
  return Json{{"checkpoint", cfg.checkpoint.generic_string()},
              {"prompts", cfg.prompts.generic_string()},
              {"sampler", to_json(cfg.sampler)},
              {"perturbation", base},
              {"grid", {{"alpha", cfg.grid.alpha}, {"depth", cfg.grid.depth}, {"lambda", cfg.grid.lambda}, {"mode", modes}}},
              {"horizon", cfg.horizon},
              {"drift_window", cfg.drift_window},
              {"seed", cfg.seed},
              {"lexical",
               {{"repetition_window", cfg.lexical.repetition_window},
                {"rare_threshold", cfg.lexical.rare_threshold},
                {"stopwords", std::vector<std::string>(cfg.lexical.stopwords.begin(), cfg.lexical.stopwords.end())}}}};
}

std::uint64_t grid_point_key(const PerturbationConfig& point) {
  std::uint8_t buf[21];
  const std::uint64_t a = std::bit_cast<std::uint64_t>(point.alpha);
  const std::uint64_t l = std::bit_cast<std::uint64_t>(point.lambda);
  for (int i = 0; i < 8; ++i) {
    buf[i] = static_cast<std::uint8_t>(a >> (8 * i));
    buf[8 + i] = static_cast<std::uint8_t>(l >> (8 * i));
  }
  for (int i = 0; i < 4; ++i) buf[16 + i] = static_cast<std::uint8_t>(point.depth >> (8 * i));
  buf[20] = point.mode == PerturbationMode::prompt_only ? 0 : 1;
  return fnv1a64(buf);
}

std::uint64_t run_seed(std::uint64_t master, const PerturbationConfig& point, std::size_t prompt_index) {
  return mix_seed(master, grid_point_key(point), prompt_index);
}

PromptRun run_prompt(const Checkpoint& ckpt, const ExperimentConfig& cfg, const PerturbationConfig& grid_point,
                     std::size_t prompt_index, const std::string& prompt) {
  PromptRun r;
  r.prompt_index = prompt_index;
  r.prompt = prompt;
  r.seed = run_seed(cfg.seed, grid_point, prompt_index);

  const TokenSequence prompt_tokens = ckpt.vocab.encode(prompt);
  if (prompt_tokens.empty() || prompt_tokens.size() >= cfg.horizon)
    throw InvalidArgument("prompt " + std::to_string(prompt_index) + " must encode to between 1 and horizon-1 tokens");
  const std::size_t steps = cfg.horizon - prompt_tokens.size();

  SamplerConfig sampler = cfg.sampler;
  sampler.seed = r.seed;
  sampler.stop_on_eos = false;  // every run must reach the full horizon
  PerturbationConfig point = grid_point;
  point.seed = r.seed;

  const Generation clean = generate(ckpt, prompt_tokens, steps, sampler);
  auto [pert, trace] = generate_perturbed(ckpt, prompt_tokens, steps, sampler, point);
  r.clean_tokens = clean.tokens;
  r.perturbed_tokens = pert.tokens;
  r.clean_text = ckpt.vocab.decode(clean.tokens);
  r.perturbed_text = ckpt.vocab.decode(pert.tokens);

  const TokenSequence covered{{pert.tokens.ids.begin(),
                               pert.tokens.ids.begin() + static_cast<std::ptrdiff_t>(trace.perturbed.rows())}};
  r.shift = embedding_shift(trace, ckpt, covered);
  r.attention_std = attention_variance(forward(ckpt, covered), forward(ckpt, covered, &trace.perturbed));

  r.lexical_clean = lexical_profile(r.clean_text, ckpt.vocab, cfg.lexical);
  r.lexical_perturbed = lexical_profile(r.perturbed_text, ckpt.vocab, cfg.lexical);
  r.perplexity_clean = perplexity(ckpt, clean.tokens);
  r.perplexity_perturbed = perplexity(ckpt, clean.tokens, &point);

  r.drift_clean = semantic_drift(ckpt, clean.tokens, cfg.drift_window, cfg.horizon);
  r.drift_perturbed = semantic_drift(ckpt, pert.tokens, cfg.drift_window, cfg.horizon);
  return r;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  // Validation: everything that can fail on configuration alone happens before
  // the model runs and before anything is written.
  require_file(cfg.checkpoint, "checkpoint");
  require_file(cfg.prompts, "prompts file");
  check_output_dir(cfg.output_dir);
  if (cfg.drift_window == 0) throw InvalidArgument("experiment config: drift_window must be positive");
  if (cfg.horizon < 2 * cfg.drift_window)
    throw InvalidArgument("experiment config: horizon must be at least twice drift_window");
  const auto points = cfg.grid_points();
  if (points.empty()) throw InvalidArgument("experiment config: empty grid");
  for (const auto& p : points) {
    try {
      p.validate();
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("grid point (" + describe(p) + "): " + e.what());
    }
  }

  const auto ckpt_bytes = read_file_bytes(cfg.checkpoint);
  const Checkpoint ckpt = deserialize_checkpoint(ckpt_bytes);
  const auto prompts = read_prompts(cfg.prompts);
  if (cfg.horizon > ckpt.config.max_seq_len)
    throw InvalidArgument("experiment config: horizon exceeds the model's max_seq_len");
  for (const auto& p : points) {
    try {
      p.validate_for(ckpt.config);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("grid point (" + describe(p) + "): " + e.what());
    }
  }
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto n = ckpt.vocab.encode(prompts[i]).size();
    if (n == 0 || n >= cfg.horizon)
      throw InvalidArgument("prompt " + std::to_string(i) + " must encode to between 1 and horizon-1 tokens");
  }

  ExperimentReport report;
  report.config_hash = hex64(hash_string(to_json(cfg).dump()));
  report.checkpoint_hash = hex64(fnv1a64(ckpt_bytes));
  report.seed = cfg.seed;

  const std::size_t jobs = points.size() * prompts.size();
  std::vector<PromptRun> results(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      const std::size_t gi = job / prompts.size(), pi = job % prompts.size();
      try {
        log().debug("grid point {} ({}), prompt {}", gi, describe(points[gi]), pi);
        results[job] = run_prompt(ckpt, cfg, points[gi], pi, prompts[pi]);
      } catch (...) {
        errors[job] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < cfg.workers; ++w) pool.emplace_back(worker);
    worker();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t gi = 0; gi < points.size(); ++gi) {
    GridPointRun g;
    g.point = points[gi];
    for (std::size_t pi = 0; pi < prompts.size(); ++pi) g.prompts.push_back(std::move(results[gi * prompts.size() + pi]));
    report.points.push_back(std::move(g));
  }

  const ReportFiles files = render_report(report, cfg);
  fs::create_directories(cfg.output_dir);
  const std::pair<const char*, const std::string*> outputs[] = {
      {"report.json", &files.report_json}, {"shift.csv", &files.shift_csv},
      {"lexical.csv", &files.lexical_csv}, {"attention_variance.csv", &files.attention_csv},
      {"drift.csv", &files.drift_csv},     {"pca_points.csv", &files.pca_csv}};
  for (const auto& [name, content] : outputs) {
    std::ofstream out(cfg.output_dir / name, std::ios::binary | std::ios::trunc);
    out << *content;
    if (!out) throw Error(std::string("failed to write ") + name);
  }
  log().info("wrote {} grid points x {} prompts to {}", points.size(), prompts.size(), cfg.output_dir.string());
  return report;
}

ReportFiles render_report(const ExperimentReport& report, const ExperimentConfig& cfg) {
  std::ostringstream shift, lexical, attention, drift, pca;
  shift << kShiftHeader << '\n';
  lexical << kLexicalHeader << '\n';
  attention << kAttentionHeader << '\n';
  drift << kDriftHeader << '\n';
  pca << kPcaHeader << '\n';

  Json grid = Json::array();
  for (const auto& g : report.points) {
    Json prompts = Json::array();
    std::vector<double> cosines, euclids, hidden, disp_change, ttr_c, ttr_p, len_c, len_p, dens_c, dens_p, rep_c,
        rep_p, rare_c, rare_p, ppl_c, ppl_p, tail_c, tail_p;
    for (const auto& r : g.prompts) {
      const std::string pre = prefix(g.point, r.prompt_index);
      const ShiftReport& s = r.shift;
      for (std::size_t l = 0; l < s.per_layer_hidden_distance.size(); ++l) {
        shift << pre << ',' << format_number(s.mean_cosine) << ',' << format_number(s.mean_euclidean) << ',' << l
              << ',' << format_number(s.per_layer_hidden_distance[l]) << ','
              << format_number(s.per_layer_dispersion_clean[l]) << ','
              << format_number(s.per_layer_dispersion_perturbed[l]) << '\n';
      }
      lexical << pre << ",clean," << lexical_profile_csv_row(r.lexical_clean) << ','
              << format_number(r.perplexity_clean) << '\n';
      lexical << pre << ",perturbed," << lexical_profile_csv_row(r.lexical_perturbed) << ','
              << format_number(r.perplexity_perturbed) << '\n';
      for (std::size_t l = 0; l < r.attention_std.size(); ++l) {
        attention << pre << ',' << l << ',' << format_number(r.attention_std[l].first) << ','
                  << format_number(r.attention_std[l].second) << '\n';
      }
      for (std::size_t t = 0; t < r.drift_clean.similarity.size(); ++t) {
        drift << pre << ',' << (r.drift_clean.window + t) << ',' << format_number(r.drift_clean.similarity[t]) << ','
              << format_number(r.drift_perturbed.similarity[t]) << '\n';
      }
      const std::size_t n = s.pca.projections.rows() / 2;
      for (std::size_t i = 0; i < 2 * n; ++i) {
        pca << pre << ',' << (i < n ? "original" : "perturbed") << ',' << (i % n) << ','
            << format_number(s.pca.projections(i, 0)) << ',' << format_number(s.pca.projections(i, 1)) << '\n';
      }

      Json attn = Json::array();
      for (std::size_t l = 0; l < r.attention_std.size(); ++l)
        attn.push_back({{"layer", l}, {"clean", r.attention_std[l].first}, {"perturbed", r.attention_std[l].second}});
      prompts.push_back(
          {{"prompt_index", r.prompt_index},
           {"prompt", r.prompt},
           {"seed", r.seed},
           {"clean_text", r.clean_text},
           {"perturbed_text", r.perturbed_text},
           {"shift",
            {{"mean_cosine", s.mean_cosine},
             {"mean_euclidean", s.mean_euclidean},
             {"per_layer_hidden_distance", s.per_layer_hidden_distance},
             {"per_layer_dispersion_clean", s.per_layer_dispersion_clean},
             {"per_layer_dispersion_perturbed", s.per_layer_dispersion_perturbed},
             {"pca_eigenvalues", {s.pca.eigenvalues[0], s.pca.eigenvalues[1]}}}},
           {"lexical",
            {{"clean", lexical_json(r.lexical_clean, r.perplexity_clean)},
             {"perturbed", lexical_json(r.lexical_perturbed, r.perplexity_perturbed)}}},
           {"drift",
            {{"window", r.drift_clean.window},
             {"horizon", r.drift_clean.horizon},
             {"clean", r.drift_clean.similarity},
             {"perturbed", r.drift_perturbed.similarity}}},
           {"attention_std", attn}});

      cosines.push_back(s.mean_cosine);
      euclids.push_back(s.mean_euclidean);
      hidden.push_back(mean_of(s.per_layer_hidden_distance));
      const double dc = mean_of(s.per_layer_dispersion_clean);
      const double dp = mean_of(s.per_layer_dispersion_perturbed);
      disp_change.push_back(dc > 0.0 ? 100.0 * (dp / dc - 1.0) : 0.0);
      ttr_c.push_back(r.lexical_clean.ttr);
      ttr_p.push_back(r.lexical_perturbed.ttr);
      len_c.push_back(r.lexical_clean.mean_sentence_len);
      len_p.push_back(r.lexical_perturbed.mean_sentence_len);
      dens_c.push_back(r.lexical_clean.lexical_density);
      dens_p.push_back(r.lexical_perturbed.lexical_density);
      rep_c.push_back(r.lexical_clean.repetition_rate);
      rep_p.push_back(r.lexical_perturbed.repetition_rate);
      rare_c.push_back(r.lexical_clean.rare_word_rate);
      rare_p.push_back(r.lexical_perturbed.rare_word_rate);
      ppl_c.push_back(r.perplexity_clean);
      ppl_p.push_back(r.perplexity_perturbed);
      tail_c.push_back(tail_variance(r.drift_clean, 11));
      tail_p.push_back(tail_variance(r.drift_perturbed, 11));
    }
    Json summary{{"mean_cosine", mean_of(cosines)},
                 {"mean_euclidean", mean_of(euclids)},
                 {"mean_hidden_distance", mean_of(hidden)},
                 {"hidden_dispersion_change_pct", mean_of(disp_change)},
                 {"ttr", {mean_of(ttr_c), mean_of(ttr_p)}},
                 {"mean_sentence_len", {mean_of(len_c), mean_of(len_p)}},
                 {"lexical_density", {mean_of(dens_c), mean_of(dens_p)}},
                 {"repetition_rate", {mean_of(rep_c), mean_of(rep_p)}},
                 {"rare_word_rate", {mean_of(rare_c), mean_of(rare_p)}},
                 {"perplexity", {mean_of(ppl_c), mean_of(ppl_p)}},
                 {"drift_tail_variance", {mean_of(tail_c), mean_of(tail_p)}}};
    grid.push_back({{"point", to_json(g.point)}, {"summary", summary}, {"prompts", prompts}});
  }

  Json meta{{"tool_version", RSR_VERSION},
            {"checkpoint_format", kCheckpointVersion},
            {"config_hash", report.config_hash},
            {"checkpoint_hash", report.checkpoint_hash},
            {"seed", report.seed},
            {"config", to_json(cfg)}};
  Json doc{{"format", kReportFormat}, {"metadata", meta}, {"grid", grid}};

  ReportFiles f;
  f.report_json = doc.dump(2) + "\n";
  f.shift_csv = shift.str();
  f.lexical_csv = lexical.str();
  f.attention_csv = attention.str();
  f.drift_csv = drift.str();
  f.pca_csv = pca.str();
  return f;
}

}  // namespace rsr
