#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace medfab {

enum class Role { kSystem, kUser, kAssistant };

std::string_view to_string(Role role);

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
  int max_output_tokens = 1024;
  /// Extra top-level body fields sent verbatim (e.g. reasoning_effort).
  nlohmann::json passthrough = nlohmann::json::object();

  /// Call-site label ("rewrite", "maskfill", ...). Local only: never sent
  /// and not part of the cache digest.
  std::string tag;
  /// Structured call context for scripted test providers. Local only.
  std::map<std::string, std::string> meta;

  /// Throws PreconditionError when messages are empty, the first role is
  /// assistant, the temperature is negative or max_output_tokens < 1.
  void validate() const;
};

/// OpenAI-compatible request body. Its compact dump is the canonical form.
nlohmann::json wire_body(const ChatRequest& req);

struct EmbedRequest {
  std::string model;
  std::vector<std::string> inputs;

  /// Throws PreconditionError on an empty list or a blank input.
  void validate() const;
};

nlohmann::json wire_body(const EmbedRequest& req);

using Embedding = std::vector<double>;

struct CacheKey {
  std::string digest;  // lowercase hex SHA-256

  bool operator==(const CacheKey&) const = default;
};

/// Canonical JSON text: sorted keys, no insignificant whitespace.
std::string canonicalize_json(std::string_view json_text);

/// SHA-256 over provider id and canonical request bytes.
CacheKey cache_key(std::string_view provider_id, std::string_view canonical_request);
CacheKey cache_key(std::string_view provider_id, const ChatRequest& req);
CacheKey cache_key(std::string_view provider_id, const EmbedRequest& req);

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  /// Returns the assistant message content.
  virtual std::string chat(const ChatRequest& req) = 0;
  virtual std::string id() const = 0;
};

class EmbedProvider {
 public:
  virtual ~EmbedProvider() = default;
  /// One vector per input, all of the same dimension.
  virtual std::vector<Embedding> embed(const EmbedRequest& req) = 0;
  virtual std::string id() const = 0;
};

/// One file per digest under a directory. Reads are lock-free; writes to the
/// same key are serialised and land atomically via rename.
class ContentStore {
 public:
  explicit ContentStore(std::filesystem::path dir);

  std::optional<std::string> get(const CacheKey& key) const;
  void put(const CacheKey& key, std::string_view content);
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::array<std::mutex, 16> stripes_;
};

/// Serves repeated requests from a ContentStore; misses go to the inner
/// provider and are recorded.
class CachingChat : public ChatProvider {
 public:
  CachingChat(std::shared_ptr<ChatProvider> inner, std::shared_ptr<ContentStore> store,
              std::string provider_id);

  std::string chat(const ChatRequest& req) override;
  std::string id() const override { return provider_id_; }

  std::uint64_t hits() const { return hits_.load(); }
  std::uint64_t misses() const { return misses_.load(); }

 private:
  std::shared_ptr<ChatProvider> inner_;
  std::shared_ptr<ContentStore> store_;
  std::string provider_id_;
  std::atomic<std::uint64_t> hits_{0}, misses_{0};
};

class CachingEmbed : public EmbedProvider {
 public:
  CachingEmbed(std::shared_ptr<EmbedProvider> inner, std::shared_ptr<ContentStore> store,
               std::string provider_id);

  std::vector<Embedding> embed(const EmbedRequest& req) override;
  std::string id() const override { return provider_id_; }

 private:
  std::shared_ptr<EmbedProvider> inner_;
  std::shared_ptr<ContentStore> store_;
  std::string provider_id_;
};

/// Answers from digest-named fixture files. In strict mode a missing fixture
/// raises ReplayMissError; otherwise the fallback provider (if any) answers.
class ReplayChat : public ChatProvider {
 public:
  ReplayChat(std::filesystem::path dir, std::string provider_id, bool strict,
             std::shared_ptr<ChatProvider> fallback = nullptr);

  std::string chat(const ChatRequest& req) override;
  std::string id() const override { return provider_id_; }

 private:
  ContentStore store_;
  std::string provider_id_;
  bool strict_;
  std::shared_ptr<ChatProvider> fallback_;
};

/// Counts calls per request tag before delegating.
class CountingChat : public ChatProvider {
 public:
  explicit CountingChat(std::shared_ptr<ChatProvider> inner);

  std::string chat(const ChatRequest& req) override;
  std::string id() const override { return inner_->id(); }

  std::uint64_t count(const std::string& tag) const;
  std::uint64_t total() const;
  std::map<std::string, std::uint64_t> counts() const;

 private:
  std::shared_ptr<ChatProvider> inner_;
  mutable std::mutex mu_;
  std::map<std::string, std::uint64_t> counts_;
};

/// Chat provider backed by a callable; used for scripted fixtures.
class ScriptedChat : public ChatProvider {
 public:
  using Handler = std::function<std::string(const ChatRequest&)>;

  explicit ScriptedChat(Handler handler, std::string provider_id = "scripted");

  std::string chat(const ChatRequest& req) override;
  std::string id() const override { return provider_id_; }
  std::uint64_t calls() const { return calls_.load(); }

 private:
  Handler handler_;
  std::string provider_id_;
  std::atomic<std::uint64_t> calls_{0};
};

/// Deterministic offline embedder.
///
/// Each text maps to a unit vector whose components come from an mt19937_64
/// stream seeded by the text's FNV-1a hash. An override table pins exact
/// vectors for chosen texts so tests can script pairwise similarities.
class MockEmbedder : public EmbedProvider {
 public:
  explicit MockEmbedder(int dim = 64);

  std::vector<Embedding> embed(const EmbedRequest& req) override;
  std::string id() const override { return "mock"; }

  /// The vector a text maps to (override first, hash-seeded otherwise).
  Embedding vector_for(const std::string& text) const;

  /// Pins the vector for `text`; it is normalised before storing.
  void set_vector(const std::string& text, Embedding v);

  /// Pins `b` so that cos(vector_for(a), vector_for(b)) == similarity, up to
  /// rounding. Requires similarity in [-1, 1] and distinct texts.
  void script_pair(const std::string& a, const std::string& b, double similarity);

  /// Reads {"vectors": {text: [...]}, "pairs": [{"a","b","similarity"}]}.
  void load_overrides(const std::filesystem::path& path);

  int dim() const { return dim_; }
  std::uint64_t calls() const { return calls_.load(); }

 private:
  int dim_;
  std::map<std::string, Embedding> overrides_;
  mutable std::mutex mu_;
  std::atomic<std::uint64_t> calls_{0};
};

/// Chat + embedding backends used by the pipelines.
struct Providers {
  std::shared_ptr<ChatProvider> chat;
  std::shared_ptr<EmbedProvider> embed;
};

struct RunConfig;

/// Builds providers from config: live OpenAI-compatible client (optionally
/// cached) or replay fixtures for chat; live client or mock for embeddings.
Providers make_providers(const RunConfig& config);

}  // namespace medfab
