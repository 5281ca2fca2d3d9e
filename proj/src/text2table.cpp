#include "medfab/text2table.hpp"

#include "medfab/text_metrics.hpp"

namespace medfab {

using nlohmann::json;

namespace {

constexpr std::string_view kPronouns[] = {"he", "she", "it", "they", "this", "these", "those"};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

bool contains_pronoun(std::string_view text) {
  for (const auto& token : tokenize(text).tokens) {
    for (auto p : kPronouns) {
      if (token == p) return true;
    }
  }
  return false;
}

ParsedRows parse_entity_rows(std::string_view raw) {
  ParsedRows out;
  const auto open = raw.find('[');
  const auto close = raw.rfind(']');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    out.error = "no JSON array found";
    return out;
  }
  json doc = json::parse(raw.substr(open, close - open + 1), nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_array()) {
    out.error = "output is not a valid JSON array";
    return out;
  }
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    const std::string where = "row " + std::to_string(i);
    if (!item.is_object() || !item.contains("entity") || !item.contains("description") ||
        !item["entity"].is_string() || !item["description"].is_string()) {
      out.error = where + " is not an object with string fields \"entity\" and \"description\"";
      out.rows.clear();
      return out;
    }
    EntityRow row{trim(item["entity"].get<std::string>()), trim(item["description"].get<std::string>()), i};
    if (row.entity.empty() || row.description.empty()) {
      out.error = where + " has an empty field";
      out.rows.clear();
      return out;
    }
    if (contains_pronoun(row.entity) || contains_pronoun(row.description)) {
      out.error = where + " contains a pronoun; name the entity explicitly";
      out.rows.clear();
      return out;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

EntityTable decompose(ChatProvider& chat, const PromptLibrary& prompts, std::string_view statement,
                      std::string_view question, const DecomposeOptions& options,
                      std::string_view sample_id) {
  if (trim(statement).empty()) throw PreconditionError("decompose: statement is empty");

  const auto prompt = prompts.render("text2table", {{"question", std::string(question)},
                                                    {"statement", std::string(statement)}});
  ChatRequest req;
  req.model = options.model;
  req.temperature = options.temperature;
  req.seed = options.seed;
  req.max_output_tokens = options.max_output_tokens;
  req.passthrough = options.passthrough;
  req.tag = "text2table";
  req.meta = {{"statement", std::string(statement)}, {"sample_id", std::string(sample_id)}};
  if (!prompt.system.empty()) req.messages.push_back({Role::kSystem, prompt.system});
  req.messages.push_back({Role::kUser, prompt.user});

  EntityTable table;
  table.sample_id = std::string(sample_id);
  table.statement = std::string(statement);

  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, options.max_attempts); ++attempt) {
    if (attempt > 1) req.meta["attempt"] = std::to_string(attempt);
    std::string raw = chat.chat(req);
    table.raw_outputs.push_back(raw);
    ParsedRows parsed = parse_entity_rows(raw);
    if (parsed.ok()) {
      if (parsed.rows.empty()) {
        throw DecompositionError("decomposition produced no rows (degenerate statement)", raw);
      }
      table.rows = std::move(parsed.rows);
      return table;
    }
    last_error = parsed.error;
    req.messages.push_back({Role::kAssistant, raw});
    req.messages.push_back({Role::kUser, "Your previous reply could not be used: " + parsed.error +
                                             ". Respond with the JSON array only, in the format "
                                             "[{\"entity\": \"...\", \"description\": \"...\"}]."});
  }
  throw DecompositionError("decomposition failed after " + std::to_string(options.max_attempts) +
                               " attempts: " + last_error,
                           table.raw_outputs.empty() ? std::string() : table.raw_outputs.back());
}

std::string row_sentence(const EntityRow& row) { return row.entity + " — " + row.description; }

}  // namespace medfab
