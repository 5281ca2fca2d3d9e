#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <semaphore>
#include <string>

#include "medfab/providers.hpp"

namespace medfab {

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};  // doubled after each failure
};

struct OpenAIClientOptions {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;  // sent as a bearer token when non-empty
  std::string provider_id = "openai-compatible";
  RetryPolicy retry;
  int max_in_flight = 4;
  std::chrono::seconds timeout{120};
};

/// Client for OpenAI-compatible POST {base}/chat/completions and
/// {base}/embeddings. Retries only transport failures and 5xx responses.
/// Thread-safe; concurrent requests are bounded by max_in_flight.
class OpenAIClient : public ChatProvider, public EmbedProvider {
 public:
  explicit OpenAIClient(OpenAIClientOptions options);
  ~OpenAIClient() override;

  std::string chat(const ChatRequest& req) override;
  std::vector<Embedding> embed(const EmbedRequest& req) override;
  std::string id() const override { return options_.provider_id; }

  /// HTTP requests actually sent, retries included.
  std::uint64_t requests_sent() const { return requests_.load(); }

 private:
  nlohmann::json post(const std::string& endpoint, const nlohmann::json& body);

  OpenAIClientOptions options_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::counting_semaphore<1024> in_flight_;
  std::atomic<std::uint64_t> requests_{0};
};

}  // namespace medfab
