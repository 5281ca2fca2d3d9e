#include "medfab/text_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "medfab/errors.hpp"

namespace medfab {

namespace {

struct Decoded {
  char32_t cp;
  std::size_t length;  // bytes consumed; cp == kInvalid on malformed input
};

constexpr char32_t kInvalid = 0xFFFFFFFF;

Decoded decode_utf8(std::string_view text, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(text[pos]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {kInvalid, 1};
  }
  if (pos + len > text.size()) return {kInvalid, 1};
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(text[pos + i]);
    if ((b & 0xC0) != 0x80) return {kInvalid, 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len};
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

bool in_range(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

bool is_word_char(char32_t cp) {
  if (cp == kInvalid) return false;
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  }
  if (cp < 0xC0) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp == 0x37E || cp == 0x387) return false;
  if (in_range(cp, 0x2000, 0x206F)) return false;  // general punctuation
  if (in_range(cp, 0x20A0, 0x20CF)) return false;  // currency
  if (in_range(cp, 0x2190, 0x2BFF)) return false;  // arrows, math, shapes, dingbats
  if (in_range(cp, 0x2E00, 0x2E7F)) return false;  // supplemental punctuation
  if (in_range(cp, 0x3000, 0x303F)) return false;  // CJK punctuation
  if (in_range(cp, 0xFE00, 0xFE6F)) return false;  // variation selectors, small forms
  if (in_range(cp, 0xFF00, 0xFF0F) || in_range(cp, 0xFF1A, 0xFF20) ||
      in_range(cp, 0xFF3B, 0xFF40) || in_range(cp, 0xFF5B, 0xFF65)) {
    return false;  // fullwidth punctuation
  }
  if (in_range(cp, 0xFFF0, 0xFFFF)) return false;
  if (in_range(cp, 0x1F000, 0x1FAFF)) return false;  // emoji and pictographs
  return true;
}

char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp < 0xC0) return cp;
  if (in_range(cp, 0xC0, 0xDE) && cp != 0xD7) return cp + 0x20;
  if (in_range(cp, 0x100, 0x137) || in_range(cp, 0x14A, 0x177)) return (cp % 2 == 0) ? cp + 1 : cp;
  if (in_range(cp, 0x139, 0x148) || in_range(cp, 0x179, 0x17E)) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp == 0x178) return 0xFF;
  if (in_range(cp, 0x391, 0x3A9) && cp != 0x3A2) return cp + 0x20;
  if (cp == 0x386) return 0x3AC;
  if (in_range(cp, 0x388, 0x38A)) return cp + 0x25;
  if (cp == 0x38C) return 0x3CC;
  if (cp == 0x38E || cp == 0x38F) return cp + 0x3F;
  if (in_range(cp, 0x410, 0x42F)) return cp + 0x20;
  if (in_range(cp, 0x400, 0x40F)) return cp + 0x50;
  return cp;
}

}  // namespace

TokenSeq tokenize(std::string_view text) {
  TokenSeq seq;
  std::string current;
  std::size_t start = 0;
  bool in_token = false;

  std::size_t pos = 0;
  while (pos < text.size()) {
    const Decoded d = decode_utf8(text, pos);
    if (is_word_char(d.cp)) {
      if (!in_token) {
        in_token = true;
        start = pos;
        current.clear();
      }
      append_utf8(current, to_lower(d.cp));
    } else if (in_token) {
      seq.tokens.push_back(current);
      seq.offsets.push_back({start, pos});
      in_token = false;
    }
    pos += d.length;
  }
  if (in_token) {
    seq.tokens.push_back(current);
    seq.offsets.push_back({start, pos});
  }
  return seq;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() < b.size()) std::swap(a, b);
  if (b.empty()) return 0;
  // Rolling rows over the shorter sequence.
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = (a[i - 1] == b[j - 1]) ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  return lcs_length(std::span<const std::string>(a.tokens), std::span<const std::string>(b.tokens));
}

double rouge_l_recall(std::string_view reference, std::string_view candidate) {
  const TokenSeq ref = tokenize(reference);
  if (ref.empty()) throw PreconditionError("ROUGE-L reference has no tokens");
  const TokenSeq cand = tokenize(candidate);
  return static_cast<double>(lcs_length(ref, cand)) / static_cast<double>(ref.size());
}

std::size_t changed_token_count(std::string_view reference, std::string_view candidate) {
  const TokenSeq ref = tokenize(reference);
  const TokenSeq cand = tokenize(candidate);
  const std::size_t lcs = lcs_length(ref, cand);
  return (ref.size() - lcs) + (cand.size() - lcs);
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw PreconditionError("cosine similarity dimension mismatch (" + std::to_string(u.size()) +
                            " vs " + std::to_string(v.size()) + ")");
  }
  if (u.empty()) throw PreconditionError("cosine similarity of empty vectors");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw PreconditionError("cosine similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

}  // namespace medfab
