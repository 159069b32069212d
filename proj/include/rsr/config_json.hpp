#pragma once

// JSON (de)serialisation of the user-facing configuration types. Keys are
// lower_snake_case field names; unknown keys are rejected so typos surface
// as errors instead of silently falling back to defaults.

#include <json.hpp>

#include "rsr/generation.hpp"
#include "rsr/model.hpp"
#include "rsr/regeneration.hpp"
#include "rsr/trainer.hpp"

namespace rsr {

using Json = nlohmann::json;

Json to_json(const PerturbationConfig& cfg);
/// Missing keys keep their defaults. neighborhood_k accepts a positive
/// integer or the string "all".
PerturbationConfig perturbation_from_json(const Json& j);

Json to_json(const SamplerConfig& s);
SamplerConfig sampler_from_json(const Json& j);

struct TrainingSetup {
  ModelConfig model;
  TrainHyper hyper;
};

/// {"model": {d_model, n_layers, n_heads, d_ff, max_seq_len, max_vocab},
///  "training": {lr, steps, batch, seq_len, warmup, clip_norm, seed}}
TrainingSetup training_setup_from_json(const Json& j);

/// Throws InvalidArgument naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const char* where);

std::string to_string(Activation a);
std::string to_string(PerturbationMode m);

}  // namespace rsr
