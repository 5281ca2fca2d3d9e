#include "medfab/providers.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "medfab/config.hpp"
#include "medfab/errors.hpp"
#include "medfab/hashing.hpp"
#include "medfab/openai_client.hpp"

namespace medfab {

using nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

void ChatRequest::validate() const {
  if (messages.empty()) throw PreconditionError("chat request has no messages");
  if (messages.front().role == Role::kAssistant) {
    throw PreconditionError("chat request must open with a system or user message");
  }
  if (temperature < 0.0) throw PreconditionError("chat temperature must be >= 0");
  if (max_output_tokens < 1) throw PreconditionError("max_output_tokens must be >= 1");
}

json wire_body(const ChatRequest& req) {
  json messages = json::array();
  for (const auto& m : req.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  json body = req.passthrough.is_object() ? req.passthrough : json::object();
  body["model"] = req.model;
  body["messages"] = std::move(messages);
  body["temperature"] = req.temperature;
  body["max_completion_tokens"] = req.max_output_tokens;
  if (req.seed) body["seed"] = *req.seed;
  return body;
}

void EmbedRequest::validate() const {
  if (inputs.empty()) throw PreconditionError("embedding request has no inputs");
  for (const auto& text : inputs) {
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw PreconditionError("embedding input is blank");
    }
  }
}

json wire_body(const EmbedRequest& req) {
  return json{{"model", req.model}, {"input", req.inputs}};
}

std::string canonicalize_json(std::string_view json_text) {
  // nlohmann::json stores objects in a std::map, so dump() is key-sorted.
  return json::parse(json_text).dump();
}

CacheKey cache_key(std::string_view provider_id, std::string_view canonical_request) {
  std::string material;
  material.reserve(provider_id.size() + 1 + canonical_request.size());
  material.append(provider_id).append(1, '\n').append(canonical_request);
  return CacheKey{sha256_hex(material)};
}

CacheKey cache_key(std::string_view provider_id, const ChatRequest& req) {
  return cache_key(provider_id, std::string_view(wire_body(req).dump()));
}

CacheKey cache_key(std::string_view provider_id, const EmbedRequest& req) {
  return cache_key(provider_id, std::string_view(wire_body(req).dump()));
}

// ---------------------------------------------------------------------------
// ContentStore

ContentStore::ContentStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::optional<std::string> ContentStore::get(const CacheKey& key) const {
  std::ifstream in(dir_ / key.digest, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ContentStore::put(const CacheKey& key, std::string_view content) {
  std::lock_guard lock(stripes_[fnv1a64(key.digest) % stripes_.size()]);
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  const auto final_path = dir_ / key.digest;
  const auto tmp_path = dir_ / (key.digest + ".tmp");
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write cache entry '" + tmp_path.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
  }
  std::filesystem::rename(tmp_path, final_path, ec);
  if (ec) throw DataError("cannot commit cache entry '" + final_path.string() + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// Decorators

CachingChat::CachingChat(std::shared_ptr<ChatProvider> inner, std::shared_ptr<ContentStore> store,
                         std::string provider_id)
    : inner_(std::move(inner)), store_(std::move(store)), provider_id_(std::move(provider_id)) {}

std::string CachingChat::chat(const ChatRequest& req) {
  req.validate();
  const CacheKey key = cache_key(provider_id_, req);
  if (auto hit = store_->get(key)) {
    ++hits_;
    return *hit;
  }
  ++misses_;
  std::string content = inner_->chat(req);
  store_->put(key, content);
  return content;
}

CachingEmbed::CachingEmbed(std::shared_ptr<EmbedProvider> inner, std::shared_ptr<ContentStore> store,
                           std::string provider_id)
    : inner_(std::move(inner)), store_(std::move(store)), provider_id_(std::move(provider_id)) {}

std::vector<Embedding> CachingEmbed::embed(const EmbedRequest& req) {
  req.validate();
  const CacheKey key = cache_key(provider_id_, req);
  if (auto hit = store_->get(key)) {
    try {
      return json::parse(*hit).get<std::vector<Embedding>>();
    } catch (const json::exception&) {
      // Corrupt entry: fall through and overwrite it.
    }
  }
  auto vectors = inner_->embed(req);
  store_->put(key, json(vectors).dump());
  return vectors;
}

ReplayChat::ReplayChat(std::filesystem::path dir, std::string provider_id, bool strict,
                       std::shared_ptr<ChatProvider> fallback)
    : store_(std::move(dir)),
      provider_id_(std::move(provider_id)),
      strict_(strict),
      fallback_(std::move(fallback)) {}

std::string ReplayChat::chat(const ChatRequest& req) {
  req.validate();
  const CacheKey key = cache_key(provider_id_, req);
  if (auto hit = store_.get(key)) return *hit;
  if (strict_ || !fallback_) throw ReplayMissError(key.digest);
  return fallback_->chat(req);
}

CountingChat::CountingChat(std::shared_ptr<ChatProvider> inner) : inner_(std::move(inner)) {}

std::string CountingChat::chat(const ChatRequest& req) {
  {
    std::lock_guard lock(mu_);
    ++counts_[req.tag];
  }
  return inner_->chat(req);
}

std::uint64_t CountingChat::count(const std::string& tag) const {
  std::lock_guard lock(mu_);
  auto it = counts_.find(tag);
  return it == counts_.end() ? 0 : it->second;
}

std::uint64_t CountingChat::total() const {
  std::lock_guard lock(mu_);
  std::uint64_t n = 0;
  for (const auto& [tag, c] : counts_) n += c;
  return n;
}

std::map<std::string, std::uint64_t> CountingChat::counts() const {
  std::lock_guard lock(mu_);
  return counts_;
}

ScriptedChat::ScriptedChat(Handler handler, std::string provider_id)
    : handler_(std::move(handler)), provider_id_(std::move(provider_id)) {}

std::string ScriptedChat::chat(const ChatRequest& req) {
  req.validate();
  ++calls_;
  return handler_(req);
}

// ---------------------------------------------------------------------------
// Factory

namespace {

// Stands in for the live client when no API key is available, so commands
// that never reach the network (audit with the mock embedder, say) still run.
class MissingKey : public ChatProvider, public EmbedProvider {
 public:
  MissingKey(std::string env, std::string provider_id) : env_(std::move(env)), id_(std::move(provider_id)) {}
  std::string chat(const ChatRequest&) override { fail(); }
  std::vector<Embedding> embed(const EmbedRequest&) override { fail(); }
  std::string id() const override { return id_; }

 private:
  [[noreturn]] void fail() const { throw AuthError("environment variable " + env_ + " is not set"); }
  std::string env_, id_;
};

struct Live {
  std::shared_ptr<ChatProvider> chat;
  std::shared_ptr<EmbedProvider> embed;
};

}  // namespace

Providers make_providers(const RunConfig& config) {
  Providers providers;

  std::optional<Live> live;
  auto live_client = [&](const std::string& base_url) -> Live {
    const char* key = std::getenv(config.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      auto missing = std::make_shared<MissingKey>(config.api_key_env, config.provider_id);
      return {missing, missing};
    }
    OpenAIClientOptions options;
    options.base_url = base_url;
    options.provider_id = config.provider_id;
    options.retry.attempts = config.retry_attempts;
    options.retry.initial_backoff = std::chrono::milliseconds(config.retry_initial_backoff_ms);
    options.max_in_flight = config.max_in_flight;
    options.timeout = std::chrono::seconds(config.request_timeout_s);
    options.api_key = key;
    auto client = std::make_shared<OpenAIClient>(std::move(options));
    return {client, client};
  };

  if (config.chat_provider == "replay") {
    std::shared_ptr<ChatProvider> fallback;
    if (!config.replay_strict) {
      live = live_client(config.chat_base_url);
      fallback = live->chat;
    }
    providers.chat = std::make_shared<ReplayChat>(config.replay_dir, config.provider_id,
                                                  config.replay_strict, fallback);
  } else {
    live = live_client(config.chat_base_url);
    providers.chat = live->chat;
    if (!config.cache_dir.empty()) {
      providers.chat = std::make_shared<CachingChat>(
          live->chat, std::make_shared<ContentStore>(std::filesystem::path(config.cache_dir) / "chat"),
          config.provider_id);
    }
  }

  if (config.embed_provider == "mock") {
    auto mock = std::make_shared<MockEmbedder>(config.embed_dim);
    if (!config.embed_overrides.empty()) mock->load_overrides(config.embed_overrides);
    providers.embed = mock;
  } else {
    const std::string base = config.embed_base_url.empty() ? config.chat_base_url : config.embed_base_url;
    std::shared_ptr<EmbedProvider> embed =
        (live && base == config.chat_base_url) ? live->embed : live_client(base).embed;
    if (!config.cache_dir.empty()) {
      embed = std::make_shared<CachingEmbed>(
          embed, std::make_shared<ContentStore>(std::filesystem::path(config.cache_dir) / "embed"),
          config.provider_id);
    }
    providers.embed = embed;
  }
  return providers;
}

}  // namespace medfab
