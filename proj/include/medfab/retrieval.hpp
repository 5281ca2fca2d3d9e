#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "medfab/sample.hpp"

namespace medfab {

/// A window of evidence tokens from one sample's knowledge.
struct Chunk {
  std::string sample_id;
  std::size_t index = 0;  // position in the sample's chunk sequence
  std::string text;
  std::size_t token_count = 0;

  bool operator==(const Chunk&) const = default;
};

struct ChunkingOptions {
  std::size_t max_tokens = 128;
  std::size_t overlap = 32;
};

/// Sliding-window chunks over each knowledge passage, in passage order.
///
/// A passage of at most max_tokens tokens becomes one chunk holding the
/// passage verbatim. Longer passages yield windows starting every
/// (max_tokens - overlap) tokens while the start lies inside the passage;
/// window text is the source substring from the first to the last token.
/// Throws PreconditionError if overlap >= max_tokens or the knowledge holds
/// no tokens.
std::vector<Chunk> chunk_knowledge(const Sample& sample, const ChunkingOptions& options);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct ScoredChunk {
  Chunk chunk;
  double score = 0.0;
};

/// BM25 scores of every chunk against the query, ordered by descending
/// score and then ascending chunk index.
std::vector<ScoredChunk> rank_chunks(std::string_view query, const std::vector<Chunk>& chunks,
                                     const Bm25Params& params = {});

/// The top min(k, |chunks|) chunks of rank_chunks().
/// Throws PreconditionError on an empty chunk list or k == 0.
std::vector<Chunk> retrieve(std::string_view query, const std::vector<Chunk>& chunks, std::size_t k,
                            const Bm25Params& params = {});

/// Evidence block for prompts: one "[i] text" line per chunk.
std::string format_evidence(const std::vector<Chunk>& chunks);

}  // namespace medfab
