#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "medfab/prompts.hpp"
#include "medfab/providers.hpp"

namespace medfab::fixture {

/// Scripted chat behaviour for the replay fixtures.
///
///   tables        statement -> [[entity, description], ...] or a raw reply
///   fill_source   row sentence -> sentence whose words fill its masks
///                 (same token count); defaults to the row itself
///   fill_edits    source sentence -> {token: replacement} applied where masked
///   fill_invalid  row sentence -> variant ("A"/"B") that never fits its template
///   adjudications row sentence -> "CONFLICT" | "BENIGN" (default CONFLICT)
///
/// A fill answer depends only on the source sentence and the masked text,
/// so rows that send byte-identical requests must share a source. answer()
/// throws if two identical requests would get different replies, which would
/// make a recorded replay depend on request order.
class Script {
 public:
  explicit Script(nlohmann::json spec, Stopwords stopwords = Stopwords());
  Script(Script&& other) noexcept;

  static Script load(const std::filesystem::path& file);

  std::string answer(const ChatRequest& req) const;

  std::shared_ptr<ScriptedChat> provider(std::string provider_id) const;

 private:
  std::string table(const ChatRequest& req) const;
  std::string fill(const ChatRequest& req) const;
  std::string adjudicate(const ChatRequest& req) const;

  nlohmann::json spec_;
  Stopwords stopwords_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::string> answered_;  // digest -> reply
};

}  // namespace medfab::fixture
