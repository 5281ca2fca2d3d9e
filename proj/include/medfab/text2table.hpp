#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "medfab/errors.hpp"
#include "medfab/prompts.hpp"
#include "medfab/providers.hpp"

namespace medfab {

struct EntityRow {
  std::string entity;
  std::string description;
  std::size_t row_index = 0;

  bool operator==(const EntityRow&) const = default;
};

struct EntityTable {
  std::string sample_id;
  std::string statement;
  std::vector<EntityRow> rows;
  /// Raw model output of every attempt, in order.
  std::vector<std::string> raw_outputs;
};

/// Standalone tokens a row may not contain; rows must name entities.
bool contains_pronoun(std::string_view text);

/// Parses model output into rows. Accepts the array bare or wrapped in prose
/// or code fences; each element needs non-empty string "entity" and
/// "description" without pronouns. Returns an error message on rejection.
struct ParsedRows {
  std::vector<EntityRow> rows;
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};
ParsedRows parse_entity_rows(std::string_view raw);

/// Thrown when no valid table is obtained; carries the last raw output.
class DecompositionError : public FormatError {
 public:
  using FormatError::FormatError;
};

struct DecomposeOptions {
  std::string model;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
  int max_output_tokens = 1024;
  nlohmann::json passthrough = nlohmann::json::object();
  int max_attempts = 3;  // first try plus corrective re-asks
};

/// Decomposes a statement into an entity-description table via one chat
/// call, re-asking with a corrective message when the output fails to parse
/// or validate. An empty array is a degenerate statement and fails at once.
EntityTable decompose(ChatProvider& chat, const PromptLibrary& prompts, std::string_view statement,
                      std::string_view question, const DecomposeOptions& options,
                      std::string_view sample_id = {});

/// Canonical sentence for masking: "<entity> — <description>".
std::string row_sentence(const EntityRow& row);

}  // namespace medfab
