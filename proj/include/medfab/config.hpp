#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace medfab {

/// Which pair of texts the embedding gate compares.
enum class CompareMode {
  kPair,      // reconstruction A against reconstruction B
  kOriginal,  // each reconstruction against the original row sentence
};

/// Run-wide settings. Field names are the config-file keys.
struct RunConfig {
  // Quality control and detection thresholds.
  double tau_str = 0.7;
  double tau_emb = 0.85;
  int max_qc_iters = 5;
  int max_changed_words = 3;
  int aggregation_min_conflicts = 1;
  CompareMode compare_mode = CompareMode::kPair;

  // Retrieval.
  int top_k_chunks = 3;
  int chunk_max_tokens = 128;
  int chunk_overlap = 32;

  // Sampling.
  std::int64_t seed = 0;
  double temperature = 0.0;
  double retry_temperature = 0.7;
  int max_output_tokens = 1024;
  std::string reasoning_effort;  // passed through verbatim when non-empty

  // Providers.
  std::string provider_id = "openai-compatible";
  std::string chat_provider = "openai";  // openai | replay
  std::string chat_base_url = "https://api.openai.com/v1";
  std::string chat_model = "gpt-5-nano";
  std::string embed_provider = "mock";  // openai | mock
  std::string embed_base_url;           // empty: same as chat_base_url
  std::string embed_model = "text-embedding-3-small";
  int embed_dim = 64;
  std::string embed_overrides;  // mock override table (JSON file)
  std::string api_key_env = "OPENAI_API_KEY";
  std::string cache_dir;
  std::string replay_dir;
  bool replay_strict = true;
  int max_in_flight = 4;
  int retry_attempts = 3;
  int retry_initial_backoff_ms = 1000;
  int request_timeout_s = 120;

  // Resources and auditing.
  std::string templates_dir;
  std::string stopwords_file;
  bool keep_raw = false;
  int jobs = 1;

  /// Throws ConfigError when a threshold or count is out of range.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);

/// Loads defaults, then the optional JSON file, then "key=value" overrides.
/// Unknown keys and type mismatches are rejected with ConfigError. Relative
/// paths in the file resolve against the file's directory.
RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::string>& overrides = {});

/// SHA-256 over the canonical JSON form of the config.
std::string config_digest(const RunConfig& config);

}  // namespace medfab
