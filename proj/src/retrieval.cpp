#include "medfab/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "medfab/errors.hpp"
#include "medfab/text_metrics.hpp"

namespace medfab {

std::vector<Chunk> chunk_knowledge(const Sample& sample, const ChunkingOptions& options) {
  if (options.max_tokens == 0) throw PreconditionError("chunk max_tokens must be positive");
  if (options.overlap >= options.max_tokens) {
    throw PreconditionError("chunk overlap must be smaller than max_tokens");
  }
  const std::size_t stride = options.max_tokens - options.overlap;

  std::vector<Chunk> chunks;
  for (const auto& passage : sample.knowledge) {
    const TokenSeq seq = tokenize(passage);
    const std::size_t n = seq.size();
    if (n == 0) continue;
    if (n <= options.max_tokens) {
      chunks.push_back({sample.id, chunks.size(), passage, n});
      continue;
    }
    for (std::size_t start = 0; start < n; start += stride) {
      const std::size_t end = std::min(start + options.max_tokens, n);
      const std::size_t begin_byte = seq.offsets[start].begin;
      const std::size_t end_byte = seq.offsets[end - 1].end;
      chunks.push_back({sample.id, chunks.size(), passage.substr(begin_byte, end_byte - begin_byte),
                        end - start});
      if (end == n) break;  // a further window would sit inside this one
    }
  }
  if (chunks.empty()) throw PreconditionError("sample '" + sample.id + "' has no knowledge text");
  return chunks;
}

std::vector<ScoredChunk> rank_chunks(std::string_view query, const std::vector<Chunk>& chunks,
                                     const Bm25Params& params) {
  if (chunks.empty()) throw PreconditionError("retrieval over an empty chunk list");

  std::vector<std::map<std::string, std::size_t>> tf(chunks.size());
  std::vector<std::size_t> lengths(chunks.size());
  std::map<std::string, std::size_t> df;
  double total_length = 0.0;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const TokenSeq seq = tokenize(chunks[i].text);
    lengths[i] = seq.size();
    total_length += static_cast<double>(seq.size());
    for (const auto& t : seq.tokens) ++tf[i][t];
    for (const auto& [term, count] : tf[i]) ++df[term];
  }
  const double n_docs = static_cast<double>(chunks.size());
  const double avg_length = total_length > 0.0 ? total_length / n_docs : 1.0;

  const TokenSeq q = tokenize(query);
  const std::set<std::string> terms(q.tokens.begin(), q.tokens.end());

  std::vector<ScoredChunk> scored;
  scored.reserve(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    double score = 0.0;
    for (const auto& term : terms) {
      auto it = tf[i].find(term);
      if (it == tf[i].end()) continue;
      const double n_t = static_cast<double>(df[term]);
      const double idf = std::log(1.0 + (n_docs - n_t + 0.5) / (n_t + 0.5));
      const double f = static_cast<double>(it->second);
      const double norm = params.k1 * (1.0 - params.b + params.b * static_cast<double>(lengths[i]) / avg_length);
      score += idf * f * (params.k1 + 1.0) / (f + norm);
    }
    scored.push_back({chunks[i], score});
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredChunk& a, const ScoredChunk& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.chunk.index < b.chunk.index;
  });
  return scored;
}

std::vector<Chunk> retrieve(std::string_view query, const std::vector<Chunk>& chunks, std::size_t k,
                            const Bm25Params& params) {
  if (k == 0) throw PreconditionError("retrieval k must be positive");
  auto scored = rank_chunks(query, chunks, params);
  std::vector<Chunk> out;
  for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) out.push_back(std::move(scored[i].chunk));
  return out;
}

std::string format_evidence(const std::vector<Chunk>& chunks) {
  std::string out;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (i) out += '\n';
    out += "[" + std::to_string(i + 1) + "] " + chunks[i].text;
  }
  return out;
}

}  // namespace medfab
