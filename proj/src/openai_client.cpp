#include "medfab/openai_client.hpp"

#include <httplib.h>

#include <algorithm>
#include <thread>

#include "medfab/errors.hpp"

namespace medfab {

using nlohmann::json;

namespace {

struct SplitUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

SplitUrl split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base url '" + url + "' has no scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.scheme_host_port = url.substr(0, path_start);
  out.path_prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

std::string error_message(const json& body, const std::string& fallback) {
  if (body.is_object()) {
    if (auto it = body.find("error"); it != body.end()) {
      if (it->is_object() && it->contains("message") && (*it)["message"].is_string()) {
        return (*it)["message"].get<std::string>();
      }
      if (it->is_string()) return it->get<std::string>();
    }
  }
  return fallback;
}

class InFlightSlot {
 public:
  explicit InFlightSlot(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
  ~InFlightSlot() { sem_.release(); }
  InFlightSlot(const InFlightSlot&) = delete;
  InFlightSlot& operator=(const InFlightSlot&) = delete;

 private:
  std::counting_semaphore<1024>& sem_;
};

}  // namespace

OpenAIClient::OpenAIClient(OpenAIClientOptions options)
    : options_(std::move(options)), in_flight_(std::clamp(options_.max_in_flight, 1, 1024)) {
  auto split = split_base_url(options_.base_url);
  scheme_host_port_ = std::move(split.scheme_host_port);
  path_prefix_ = std::move(split.path_prefix);
  if (options_.retry.attempts < 1) options_.retry.attempts = 1;
}

OpenAIClient::~OpenAIClient() = default;

json OpenAIClient::post(const std::string& endpoint, const json& body) {
  const std::string path = path_prefix_ + endpoint;
  const std::string payload = body.dump();
  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

  InFlightSlot slot(in_flight_);
  std::string last_failure;
  auto backoff = options_.retry.initial_backoff;
  for (int attempt = 1; attempt <= options_.retry.attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    ++requests_;
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_failure = "transport failure (" + httplib::to_string(res.error()) + ")";
      continue;
    }
    json parsed = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
    if (res->status >= 500) {
      last_failure = "HTTP " + std::to_string(res->status) + ": " + error_message(parsed, res->body);
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      throw AuthError("HTTP " + std::to_string(res->status) + " from " + path + ": " +
                      error_message(parsed, res->body));
    }
    if (res->status >= 400) {
      throw ProviderError("HTTP " + std::to_string(res->status) + " from " + path + ": " +
                          error_message(parsed, res->body));
    }
    if (parsed.is_discarded()) throw ProviderError("non-JSON response from " + path);
    if (parsed.is_object() && parsed.contains("error")) {
      throw ProviderError(error_message(parsed, "error payload from " + path));
    }
    return parsed;
  }
  throw ProviderError(path + " failed after " + std::to_string(options_.retry.attempts) +
                      " attempts: " + last_failure);
}

std::string OpenAIClient::chat(const ChatRequest& req) {
  req.validate();
  const json response = post("/chat/completions", wire_body(req));
  try {
    const auto& content = response.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return {};
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw ProviderError(std::string("unexpected chat completion shape: ") + e.what());
  }
}

std::vector<Embedding> OpenAIClient::embed(const EmbedRequest& req) {
  req.validate();
  const json response = post("/embeddings", wire_body(req));
  std::vector<Embedding> out(req.inputs.size());
  try {
    const auto& data = response.at("data");
    if (data.size() != req.inputs.size()) {
      throw ProviderError("embedding count " + std::to_string(data.size()) + " does not match " +
                          std::to_string(req.inputs.size()) + " inputs");
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t index = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
      if (index >= out.size()) throw ProviderError("embedding index out of range");
      out[index] = data[i].at("embedding").get<Embedding>();
    }
  } catch (const json::exception& e) {
    throw ProviderError(std::string("unexpected embeddings shape: ") + e.what());
  }
  for (const auto& v : out) {
    if (v.empty() || v.size() != out.front().size()) {
      throw ProviderError("backend returned embeddings of inconsistent dimension");
    }
  }
  return out;
}

}  // namespace medfab
