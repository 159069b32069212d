#include "rsr/config_json.hpp"

#include <algorithm>
#include <cstring>

#include "rsr/error.hpp"

namespace rsr {

namespace {

template <typename T>
void read_opt(const Json& j, const char* key, T& out, const char* where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw InvalidArgument(std::string(where) + ": field '" + key + "' has the wrong type");
  }
}

void read_count(const Json& j, const char* key, std::uint32_t& out, const char* where) {
  if (!j.contains(key)) return;
  const Json& v = j.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0 || v.get<std::int64_t>() > 0xFFFFFFFFLL)
    throw InvalidArgument(std::string(where) + ": field '" + key + "' must be a non-negative integer");
  out = v.get<std::uint32_t>();
}

void require_object(const Json& j, const char* where) {
  if (!j.is_object()) throw InvalidArgument(std::string(where) + ": expected a JSON object");
}

}  // namespace

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const char* where) {
  for (const auto& [key, _] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!known) throw InvalidArgument(std::string(where) + ": unknown field '" + key + "'");
  }
}

std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "linear"; }

std::string to_string(PerturbationMode m) { return m == PerturbationMode::prompt_only ? "prompt_only" : "continuous"; }

Json to_json(const PerturbationConfig& cfg) {
  Json j;
  j["alpha"] = cfg.alpha;
  j["depth"] = cfg.depth;
  j["lambda"] = cfg.lambda;
  j["activation"] = to_string(cfg.activation);
  j["attention_layer"] = cfg.attention_layer;
  if (cfg.neighborhood_k) {
    j["neighborhood_k"] = *cfg.neighborhood_k;
  } else {
    j["neighborhood_k"] = "all";
  }
  j["recompute_attention"] = cfg.recompute_attention;
  j["mode"] = to_string(cfg.mode);
  j["seed"] = cfg.seed;
  return j;
}

PerturbationConfig perturbation_from_json(const Json& j) {
  constexpr const char* where = "perturbation config";
  require_object(j, where);
  reject_unknown_keys(j, {"alpha", "depth", "lambda", "activation", "attention_layer", "neighborhood_k",
                          "recompute_attention", "mode", "seed"},
                      where);
  PerturbationConfig cfg;
  read_opt(j, "alpha", cfg.alpha, where);
  read_count(j, "depth", cfg.depth, where);
  read_opt(j, "lambda", cfg.lambda, where);
  read_count(j, "attention_layer", cfg.attention_layer, where);
  read_opt(j, "recompute_attention", cfg.recompute_attention, where);
  read_opt(j, "seed", cfg.seed, where);
  if (j.contains("activation")) {
    const Json& a = j.at("activation");
    if (a == "tanh") {
      cfg.activation = Activation::tanh;
    } else if (a == "linear") {
      cfg.activation = Activation::linear;
    } else {
      throw InvalidArgument("perturbation config: activation must be \"tanh\" or \"linear\"");
    }
  }
  if (j.contains("mode")) {
    const Json& m = j.at("mode");
    if (m == "prompt_only") {
      cfg.mode = PerturbationMode::prompt_only;
    } else if (m == "continuous") {
      cfg.mode = PerturbationMode::continuous;
    } else {
      throw InvalidArgument("perturbation config: mode must be \"prompt_only\" or \"continuous\"");
    }
  }
  if (j.contains("neighborhood_k")) {
    const Json& k = j.at("neighborhood_k");
    if (k.is_string() && (k == "all" || k == "ALL")) {
      cfg.neighborhood_k.reset();
    } else if (k.is_number_integer() && k.get<std::int64_t>() > 0) {
      cfg.neighborhood_k = k.get<std::uint32_t>();
    } else {
      throw InvalidArgument("perturbation config: neighborhood_k must be a positive integer or \"all\"");
    }
  }
  cfg.validate();
  return cfg;
}

Json to_json(const SamplerConfig& s) {
  Json j;
  if (s.kind == SamplerConfig::Kind::greedy) {
    j["kind"] = "greedy";
  } else {
    j["kind"] = "temperature";
    j["temperature"] = s.temperature;
  }
  j["stop_on_eos"] = s.stop_on_eos;
  return j;
}

SamplerConfig sampler_from_json(const Json& j) {
  constexpr const char* where = "sampler config";
  require_object(j, where);
  reject_unknown_keys(j, {"kind", "temperature", "seed", "stop_on_eos"}, where);
  SamplerConfig s;
  const std::string kind = j.value("kind", std::string("greedy"));
  if (kind == "greedy") {
    s.kind = SamplerConfig::Kind::greedy;
  } else if (kind == "temperature") {
    s.kind = SamplerConfig::Kind::temperature;
  } else {
    throw InvalidArgument("sampler config: kind must be \"greedy\" or \"temperature\"");
  }
  read_opt(j, "temperature", s.temperature, where);
  read_opt(j, "seed", s.seed, where);
  read_opt(j, "stop_on_eos", s.stop_on_eos, where);
  if (s.kind == SamplerConfig::Kind::temperature && !(s.temperature > 0.0))
    throw InvalidArgument("sampler config: temperature must be positive");
  return s;
}

TrainingSetup training_setup_from_json(const Json& j) {
  constexpr const char* where = "training config";
  require_object(j, where);
  reject_unknown_keys(j, {"model", "training"}, where);
  TrainingSetup setup;
  if (j.contains("model")) {
    const Json& m = j.at("model");
    require_object(m, "model config");
    reject_unknown_keys(m, {"d_model", "n_layers", "n_heads", "d_ff", "max_seq_len", "max_vocab"}, "model config");
    read_count(m, "d_model", setup.model.d_model, "model config");
    read_count(m, "n_layers", setup.model.n_layers, "model config");
    read_count(m, "n_heads", setup.model.n_heads, "model config");
    read_count(m, "d_ff", setup.model.d_ff, "model config");
    read_count(m, "max_seq_len", setup.model.max_seq_len, "model config");
    read_opt(m, "max_vocab", setup.hyper.max_vocab, "model config");
  }
  if (j.contains("training")) {
    const Json& t = j.at("training");
    require_object(t, "training config");
    reject_unknown_keys(t, {"lr", "steps", "batch", "seq_len", "warmup", "clip_norm", "seed"}, "training config");
    read_opt(t, "lr", setup.hyper.lr, where);
    read_count(t, "steps", setup.hyper.steps, where);
    read_count(t, "batch", setup.hyper.batch, where);
    read_count(t, "seq_len", setup.hyper.seq_len, where);
    read_count(t, "warmup", setup.hyper.warmup, where);
    read_opt(t, "clip_norm", setup.hyper.clip_norm, where);
    read_opt(t, "seed", setup.hyper.seed, where);
  }
  return setup;
}

}  // namespace rsr
