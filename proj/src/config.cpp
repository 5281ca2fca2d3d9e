#include "medfab/config.hpp"

#include <fstream>

#include "medfab/errors.hpp"
#include "medfab/hashing.hpp"

namespace medfab {

using nlohmann::json;

namespace {

constexpr const char* kPathKeys[] = {"embed_overrides", "cache_dir", "replay_dir", "templates_dir",
                                     "stopwords_file"};

bool same_kind(const json& expected, const json& value) {
  if (expected.is_number_integer()) return value.is_number_integer();
  if (expected.is_number()) return value.is_number();
  return expected.type() == value.type();
}

void merge_key(json& target, const std::string& key, const json& value, const std::string& origin) {
  auto it = target.find(key);
  if (it == target.end()) throw ConfigError("unknown key '" + key + "' in " + origin);
  if (!same_kind(*it, value)) {
    throw ConfigError("key '" + key + "' in " + origin + " has type " + value.type_name() +
                      ", expected " + it->type_name());
  }
  *it = value;
}

std::string compare_mode_name(CompareMode mode) {
  return mode == CompareMode::kPair ? "pair" : "original";
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  out = j.at(key).get<T>();
}

RunConfig from_json(const json& j) {
  RunConfig c;
  read(j, "tau_str", c.tau_str);
  read(j, "tau_emb", c.tau_emb);
  read(j, "max_qc_iters", c.max_qc_iters);
  read(j, "max_changed_words", c.max_changed_words);
  read(j, "aggregation_min_conflicts", c.aggregation_min_conflicts);
  const auto mode = j.at("compare_mode").get<std::string>();
  if (mode == "pair") {
    c.compare_mode = CompareMode::kPair;
  } else if (mode == "original") {
    c.compare_mode = CompareMode::kOriginal;
  } else {
    throw ConfigError("compare_mode must be 'pair' or 'original', got '" + mode + "'");
  }
  read(j, "top_k_chunks", c.top_k_chunks);
  read(j, "chunk_max_tokens", c.chunk_max_tokens);
  read(j, "chunk_overlap", c.chunk_overlap);
  read(j, "seed", c.seed);
  read(j, "temperature", c.temperature);
  read(j, "retry_temperature", c.retry_temperature);
  read(j, "max_output_tokens", c.max_output_tokens);
  read(j, "reasoning_effort", c.reasoning_effort);
  read(j, "provider_id", c.provider_id);
  read(j, "chat_provider", c.chat_provider);
  read(j, "chat_base_url", c.chat_base_url);
  read(j, "chat_model", c.chat_model);
  read(j, "embed_provider", c.embed_provider);
  read(j, "embed_base_url", c.embed_base_url);
  read(j, "embed_model", c.embed_model);
  read(j, "embed_dim", c.embed_dim);
  read(j, "embed_overrides", c.embed_overrides);
  read(j, "api_key_env", c.api_key_env);
  read(j, "cache_dir", c.cache_dir);
  read(j, "replay_dir", c.replay_dir);
  read(j, "replay_strict", c.replay_strict);
  read(j, "max_in_flight", c.max_in_flight);
  read(j, "retry_attempts", c.retry_attempts);
  read(j, "retry_initial_backoff_ms", c.retry_initial_backoff_ms);
  read(j, "request_timeout_s", c.request_timeout_s);
  read(j, "templates_dir", c.templates_dir);
  read(j, "stopwords_file", c.stopwords_file);
  read(j, "keep_raw", c.keep_raw);
  read(j, "jobs", c.jobs);
  return c;
}

}  // namespace

json to_json(const RunConfig& c) {
  return json{
      {"tau_str", c.tau_str},
      {"tau_emb", c.tau_emb},
      {"max_qc_iters", c.max_qc_iters},
      {"max_changed_words", c.max_changed_words},
      {"aggregation_min_conflicts", c.aggregation_min_conflicts},
      {"compare_mode", compare_mode_name(c.compare_mode)},
      {"top_k_chunks", c.top_k_chunks},
      {"chunk_max_tokens", c.chunk_max_tokens},
      {"chunk_overlap", c.chunk_overlap},
      {"seed", c.seed},
      {"temperature", c.temperature},
      {"retry_temperature", c.retry_temperature},
      {"max_output_tokens", c.max_output_tokens},
      {"reasoning_effort", c.reasoning_effort},
      {"provider_id", c.provider_id},
      {"chat_provider", c.chat_provider},
      {"chat_base_url", c.chat_base_url},
      {"chat_model", c.chat_model},
      {"embed_provider", c.embed_provider},
      {"embed_base_url", c.embed_base_url},
      {"embed_model", c.embed_model},
      {"embed_dim", c.embed_dim},
      {"embed_overrides", c.embed_overrides},
      {"api_key_env", c.api_key_env},
      {"cache_dir", c.cache_dir},
      {"replay_dir", c.replay_dir},
      {"replay_strict", c.replay_strict},
      {"max_in_flight", c.max_in_flight},
      {"retry_attempts", c.retry_attempts},
      {"retry_initial_backoff_ms", c.retry_initial_backoff_ms},
      {"request_timeout_s", c.request_timeout_s},
      {"templates_dir", c.templates_dir},
      {"stopwords_file", c.stopwords_file},
      {"keep_raw", c.keep_raw},
      {"jobs", c.jobs},
  };
}

void RunConfig::validate() const {
  auto unit = [](const char* name, double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0,1]");
  };
  auto positive = [](const char* name, long long v) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
  };
  unit("tau_str", tau_str);
  unit("tau_emb", tau_emb);
  positive("max_qc_iters", max_qc_iters);
  positive("max_changed_words", max_changed_words);
  positive("aggregation_min_conflicts", aggregation_min_conflicts);
  positive("top_k_chunks", top_k_chunks);
  positive("chunk_max_tokens", chunk_max_tokens);
  positive("max_output_tokens", max_output_tokens);
  positive("embed_dim", embed_dim);
  positive("max_in_flight", max_in_flight);
  positive("retry_attempts", retry_attempts);
  positive("request_timeout_s", request_timeout_s);
  positive("jobs", jobs);
  if (chunk_overlap < 0 || chunk_overlap >= chunk_max_tokens) {
    throw ConfigError("chunk_overlap must lie in [0, chunk_max_tokens)");
  }
  if (temperature < 0.0 || retry_temperature < 0.0) throw ConfigError("temperatures must be >= 0");
  if (retry_initial_backoff_ms < 0) throw ConfigError("retry_initial_backoff_ms must be >= 0");
  if (chat_provider != "openai" && chat_provider != "replay") {
    throw ConfigError("chat_provider must be 'openai' or 'replay'");
  }
  if (embed_provider != "openai" && embed_provider != "mock") {
    throw ConfigError("embed_provider must be 'openai' or 'mock'");
  }
  if (chat_provider == "replay" && replay_dir.empty()) {
    throw ConfigError("chat_provider 'replay' requires replay_dir");
  }
}

RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::string>& overrides) {
  json merged = to_json(RunConfig{});

  if (path) {
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path->string() + "'");
    json file;
    try {
      file = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("cannot parse '" + path->string() + "': " + e.what());
    }
    if (!file.is_object()) throw ConfigError("config file must hold a flat object");
    const auto base = path->parent_path();
    for (const auto& [key, value] : file.items()) {
      json v = value;
      for (const char* path_key : kPathKeys) {
        if (key == path_key && v.is_string() && !v.get<std::string>().empty()) {
          std::filesystem::path p = v.get<std::string>();
          if (p.is_relative()) v = (base / p).lexically_normal().string();
        }
      }
      merge_key(merged, key, v, "'" + path->string() + "'");
    }
  }

  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + item + "' is not key=value");
    }
    const std::string key = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);
    auto it = merged.find(key);
    if (it == merged.end()) throw ConfigError("unknown override key '" + key + "'");
    json value;
    if (it->is_string()) {
      value = text;
    } else {
      try {
        value = json::parse(text);
      } catch (const json::parse_error&) {
        throw ConfigError("override '" + item + "' has an unparseable value");
      }
    }
    merge_key(merged, key, value, "override");
  }

  RunConfig config;
  try {
    config = from_json(merged);
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
  config.validate();
  return config;
}

std::string config_digest(const RunConfig& config) { return sha256_hex(to_json(config).dump()); }

}  // namespace medfab
