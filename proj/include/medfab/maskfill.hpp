#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medfab/prompts.hpp"
#include "medfab/providers.hpp"
#include "medfab/retrieval.hpp"
#include "medfab/text_metrics.hpp"

namespace medfab {

enum class Variant { kA, kB };

std::string_view to_string(Variant v);

/// Two complementary masked renderings of one sentence.
///
/// Maskable tokens are the non-stopword tokens, ranked left to right.
/// Variant A masks even ranks and variant B odd ranks, so each maskable
/// token is hidden in exactly one variant. Mask ids count from 0 within a
/// variant; map_x[id] is the token position the mask hides.
struct MaskedPair {
  std::size_t row_index = 0;
  std::string sentence;
  TokenSeq original;
  std::vector<std::size_t> maskable;  // token positions, ascending
  std::vector<std::string> masked_a;
  std::vector<std::string> masked_b;
  std::vector<std::size_t> map_a;
  std::vector<std::size_t> map_b;

  const std::vector<std::size_t>& map(Variant v) const { return v == Variant::kA ? map_a : map_b; }
  const std::vector<std::string>& masked(Variant v) const { return v == Variant::kA ? masked_a : masked_b; }

  /// The sentence text with each masked token span replaced by "[MASK_<id>]".
  std::string masked_text(Variant v) const;
};

std::string placeholder(std::size_t mask_id);

/// Builds the complementary masks, or nullopt when the sentence has no
/// maskable token (a degenerate row).
std::optional<MaskedPair> complementary_masks(std::string_view sentence, const Stopwords& stopwords,
                                              std::size_t row_index = 0);

struct Reconstruction {
  std::size_t row_index = 0;
  Variant variant = Variant::kA;
  std::string text;
  std::map<std::size_t, std::string> fills;  // mask id -> filled phrase
  bool valid = false;
  int attempts = 0;  // chat calls spent (0 when nothing was masked)
  std::vector<std::string> raw_outputs;
};

/// Checks that `filled` keeps every unmasked token of the variant verbatim
/// and in order, with a non-empty phrase in place of each mask, and extracts
/// the phrases. Returns nullopt when the text does not fit the template.
std::optional<std::map<std::size_t, std::string>> match_fills(const MaskedPair& pair, Variant v,
                                                              std::string_view filled);

struct FillOptions {
  std::string model;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
  int max_output_tokens = 1024;
  nlohmann::json passthrough = nlohmann::json::object();
  int max_attempts = 3;  // first try plus corrective re-asks
};

/// Asks the model to fill one variant from the evidence. A variant with no
/// masks reproduces the sentence verbatim without a call. Persistent
/// template violations yield valid == false rather than an exception.
Reconstruction fill(ChatProvider& chat, const PromptLibrary& prompts, const MaskedPair& pair, Variant v,
                    const std::vector<Chunk>& evidence, const FillOptions& options);

struct RowReconstruction {
  MaskedPair pair;
  std::vector<Chunk> evidence;
  Reconstruction a;
  Reconstruction b;
};

/// Retrieves top-k chunks using the unmasked sentence as the query, then
/// fills both variants.
RowReconstruction reconstruct_row(ChatProvider& chat, const PromptLibrary& prompts, MaskedPair pair,
                                  const std::vector<Chunk>& sample_chunks, std::size_t top_k,
                                  const FillOptions& options);

}  // namespace medfab
