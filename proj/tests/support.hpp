#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rsr/config_json.hpp"
#include "rsr/model.hpp"
#include "rsr/numerics.hpp"
#include "rsr/random.hpp"

namespace rsr::test {

inline constexpr const char* kTinyCorpus =
    "the cat sat on the mat . the dog ran to the cat . a bird sang in the tree ! "
    "did the dog see the bird ? the cat and the dog slept , then the bird flew .";

inline ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_ff = 16;
  cfg.max_seq_len = 32;
  return cfg;
}

// Weights drawn with standard deviation `scale` so attention is far from uniform.
inline Checkpoint tiny_checkpoint(std::uint64_t seed, double scale = 0.3, ModelConfig cfg = tiny_config()) {
  Checkpoint ckpt;
  ckpt.vocab = Vocab::build(kTinyCorpus, 100);
  cfg.vocab_size = static_cast<std::uint32_t>(ckpt.vocab.size());
  ckpt.config = cfg;
  ckpt.weights = ModelWeights::init(cfg, seed);
  Rng rng(seed ^ 0x5eed);
  for (Matrix* t : ckpt.weights.tensors())
    for (double& x : t->values()) x += scale * rng.normal();
  return ckpt;
}

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& x : m.values()) x = lo + (hi - lo) * rng.uniform();
  return m;
}

// Lower-triangular with positive entries, each row summing to 1.
inline Matrix random_causal_stochastic(Rng& rng, std::size_t n) {
  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j <= i; ++j) s += (w(i, j) = 0.05 + rng.uniform());
    for (std::size_t j = 0; j <= i; ++j) w(i, j) /= s;
  }
  return w;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::path(RSR_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

// Checks `doc` against the subset of JSON Schema used by report.schema.json
// (type, enum, required, properties, additionalProperties, items, minItems,
// maxItems, local $ref). Returns the first violation, or "" if valid.
inline std::string schema_violation(const Json& doc, const Json& schema, const Json& root, const std::string& at) {
  if (schema.contains("$ref")) {
    std::string ref = schema["$ref"].get<std::string>().substr(1);
    return schema_violation(doc, root.at(Json::json_pointer(ref)), root, at);
  }
  if (schema.contains("type")) {
    auto is = [&](const std::string& t) {
      if (t == "object") return doc.is_object();
      if (t == "array") return doc.is_array();
      if (t == "string") return doc.is_string();
      if (t == "integer") return doc.is_number_integer();
      if (t == "number") return doc.is_number();
      if (t == "boolean") return doc.is_boolean();
      return false;
    };
    bool ok = false;
    if (schema["type"].is_array()) {
      for (const auto& t : schema["type"]) ok = ok || is(t.get<std::string>());
    } else {
      ok = is(schema["type"].get<std::string>());
    }
    if (!ok) return at + ": wrong type";
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& v : schema["enum"]) found = found || v == doc;
    if (!found) return at + ": value not in enum";
  }
  if (doc.is_object()) {
    if (schema.contains("required"))
      for (const auto& k : schema["required"])
        if (!doc.contains(k.get<std::string>())) return at + ": missing " + k.get<std::string>();
    const bool closed = schema.contains("additionalProperties") && schema["additionalProperties"] == false;
    for (const auto& [k, v] : doc.items()) {
      if (schema.contains("properties") && schema["properties"].contains(k)) {
        auto e = schema_violation(v, schema["properties"][k], root, at + "/" + k);
        if (!e.empty()) return e;
      } else if (closed) {
        return at + ": unexpected " + k;
      }
    }
  }
  if (doc.is_array()) {
    if (schema.contains("minItems") && doc.size() < schema["minItems"].get<std::size_t>()) return at + ": too few";
    if (schema.contains("maxItems") && doc.size() > schema["maxItems"].get<std::size_t>()) return at + ": too many";
    if (schema.contains("items"))
      for (std::size_t i = 0; i < doc.size(); ++i) {
        auto e = schema_violation(doc[i], schema["items"], root, at + "/" + std::to_string(i));
        if (!e.empty()) return e;
      }
  }
  return "";
}

inline std::string schema_violation(const Json& doc, const Json& schema) { return schema_violation(doc, schema, schema, ""); }

}  // namespace rsr::test
