#include "fixture_script.hpp"

#include "medfab/errors.hpp"
#include "medfab/maskfill.hpp"
#include "medfab/sample.hpp"

namespace medfab::fixture {

using nlohmann::json;

Script::Script(json spec, Stopwords stopwords) : spec_(std::move(spec)), stopwords_(std::move(stopwords)) {
  for (const char* key : {"tables", "fill_source", "fill_edits", "fill_invalid", "adjudications"}) {
    if (!spec_.contains(key)) spec_[key] = json::object();
  }
}

Script::Script(Script&& other) noexcept
    : spec_(std::move(other.spec_)), stopwords_(std::move(other.stopwords_)), answered_(std::move(other.answered_)) {}

Script Script::load(const std::filesystem::path& file) { return Script(json::parse(read_text_file(file))); }

std::string Script::answer(const ChatRequest& req) const {
  std::string reply;
  if (req.tag == "text2table") {
    reply = table(req);
  } else if (req.tag == "maskfill") {
    reply = fill(req);
  } else if (req.tag == "adjudicate") {
    reply = adjudicate(req);
  } else {
    throw DataError("fixture script has no behaviour for tag '" + req.tag + "'");
  }
  const auto digest = cache_key("fixture", req).digest;
  std::lock_guard lock(mu_);
  const auto [it, fresh] = answered_.try_emplace(digest, reply);
  if (!fresh && it->second != reply) {
    throw DataError("fixture script answers one request two ways (tag " + req.tag + "): '" + it->second +
                    "' vs '" + reply + "'");
  }
  return reply;
}

std::shared_ptr<ScriptedChat> Script::provider(std::string provider_id) const {
  return std::make_shared<ScriptedChat>([this](const ChatRequest& req) { return answer(req); },
                                        std::move(provider_id));
}

std::string Script::table(const ChatRequest& req) const {
  const auto& statement = req.meta.at("statement");
  const auto& tables = spec_["tables"];
  if (!tables.contains(statement)) throw DataError("fixture script has no table for: " + statement);
  const auto& entry = tables[statement];
  if (entry.is_string()) return entry.get<std::string>();
  json rows = json::array();
  for (const auto& r : entry) rows.push_back({{"entity", r.at(0)}, {"description", r.at(1)}});
  return rows.dump();
}

std::string Script::fill(const ChatRequest& req) const {
  const auto& sentence = req.meta.at("sentence");
  const auto& variant = req.meta.at("variant");
  std::string text = req.meta.at("masked");
  if (spec_["fill_invalid"].value(sentence, std::string()) == variant) return text;

  const auto pair = complementary_masks(sentence, stopwords_);
  if (!pair) throw DataError("fixture fill requested for a degenerate sentence: " + sentence);
  const std::string source = spec_["fill_source"].value(sentence, sentence);
  const TokenSeq words = tokenize(source);
  if (words.size() != pair->original.size()) {
    throw DataError("fixture fill source differs in length from: " + sentence);
  }
  const json edits = spec_["fill_edits"].value(source, json::object());
  const auto& ids = pair->map(variant == "A" ? Variant::kA : Variant::kB);
  for (std::size_t id = 0; id < ids.size(); ++id) {
    const auto pos = ids[id];
    const auto& token = words.tokens[pos];
    const Span span = words.offsets[pos];
    std::string filled = edits.value(token, source.substr(span.begin, span.end - span.begin));
    const auto mark = placeholder(id);
    if (const auto at = text.find(mark); at != std::string::npos) text.replace(at, mark.size(), filled);
  }
  return text;
}

std::string Script::adjudicate(const ChatRequest& req) const {
  return spec_["adjudications"].value(req.meta.at("original"), std::string("CONFLICT"));
}

}  // namespace medfab::fixture
