#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace medfab {

/// Byte range [begin, end) of a token in its source text.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const Span&) const = default;
};

/// Lowercased word tokens with their byte offsets into the source text.
struct TokenSeq {
  std::vector<std::string> tokens;
  std::vector<Span> offsets;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

/// Splits UTF-8 text into lowercase alphanumeric word tokens.
///
/// Letters and digits of any script are word characters; everything else
/// (ASCII punctuation, Unicode punctuation and symbols such as the em dash,
/// whitespace) separates tokens and is never emitted. Case folding covers
/// ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic. Malformed UTF-8
/// bytes are treated as separators.
TokenSeq tokenize(std::string_view text);

/// Length of a longest common subsequence (O(|a|·|b|) time, O(min) memory).
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);
std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b);

/// Sentence-level ROUGE-L recall: LCS(ref, cand) / |ref| over tokenize().
/// Throws PreconditionError when the reference has no tokens.
double rouge_l_recall(std::string_view reference, std::string_view candidate);

/// Number of reference and candidate tokens outside their LCS.
std::size_t changed_token_count(std::string_view reference, std::string_view candidate);

/// Throws PreconditionError on dimension mismatch, empty or zero vectors.
/// The result is clamped to [-1, 1].
double cosine_similarity(std::span<const double> u, std::span<const double> v);

}  // namespace medfab
