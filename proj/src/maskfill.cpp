#include "medfab/maskfill.hpp"

#include <functional>
#include <set>

#include "medfab/errors.hpp"

namespace medfab {

std::string_view to_string(Variant v) { return v == Variant::kA ? "A" : "B"; }

std::string placeholder(std::size_t mask_id) { return "[MASK_" + std::to_string(mask_id) + "]"; }

std::string MaskedPair::masked_text(Variant v) const {
  const auto& ids = map(v);
  std::map<std::size_t, std::size_t> position_to_id;
  for (std::size_t id = 0; id < ids.size(); ++id) position_to_id[ids[id]] = id;

  std::string out;
  std::size_t cursor = 0;
  for (const auto& [position, id] : position_to_id) {
    const Span span = original.offsets[position];
    out.append(sentence, cursor, span.begin - cursor);
    out += placeholder(id);
    cursor = span.end;
  }
  out.append(sentence, cursor, std::string::npos);
  return out;
}

std::optional<MaskedPair> complementary_masks(std::string_view sentence, const Stopwords& stopwords,
                                              std::size_t row_index) {
  MaskedPair pair;
  pair.row_index = row_index;
  pair.sentence = std::string(sentence);
  pair.original = tokenize(sentence);
  for (std::size_t i = 0; i < pair.original.size(); ++i) {
    if (!stopwords.contains(pair.original.tokens[i])) pair.maskable.push_back(i);
  }
  if (pair.maskable.empty()) return std::nullopt;

  pair.masked_a = pair.original.tokens;
  pair.masked_b = pair.original.tokens;
  for (std::size_t rank = 0; rank < pair.maskable.size(); ++rank) {
    const std::size_t position = pair.maskable[rank];
    auto& map = (rank % 2 == 0) ? pair.map_a : pair.map_b;
    auto& masked = (rank % 2 == 0) ? pair.masked_a : pair.masked_b;
    masked[position] = placeholder(map.size());
    map.push_back(position);
  }
  return pair;
}

namespace {

// One template slot: a literal token, or a hole for mask `id`.
struct Slot {
  bool hole = false;
  std::string token;
  std::size_t id = 0;
};

std::string strip_wrapping(std::string_view raw) {
  std::string s(raw);
  auto trim = [](std::string& t) {
    const auto first = t.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
      t.clear();
      return;
    }
    t = t.substr(first, t.find_last_not_of(" \t\r\n") - first + 1);
  };
  trim(s);
  if (s.rfind("```", 0) == 0) {
    const auto nl = s.find('\n');
    s = nl == std::string::npos ? std::string() : s.substr(nl + 1);
    if (const auto fence = s.rfind("```"); fence != std::string::npos) s.resize(fence);
    trim(s);
  }
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = s.substr(1, s.size() - 2);
    trim(s);
  }
  return s;
}

}  // namespace

std::optional<std::map<std::size_t, std::string>> match_fills(const MaskedPair& pair, Variant v,
                                                              std::string_view filled) {
  if (filled.find("[MASK_") != std::string_view::npos) return std::nullopt;

  std::map<std::size_t, std::size_t> position_to_id;
  const auto& ids = pair.map(v);
  for (std::size_t id = 0; id < ids.size(); ++id) position_to_id[ids[id]] = id;

  std::vector<Slot> slots;
  for (std::size_t i = 0; i < pair.original.size(); ++i) {
    if (auto it = position_to_id.find(i); it != position_to_id.end()) {
      slots.push_back({true, {}, it->second});
    } else {
      slots.push_back({false, pair.original.tokens[i], 0});
    }
  }

  const TokenSeq out = tokenize(filled);
  const std::size_t n_slots = slots.size();
  const std::size_t n_tokens = out.size();

  // Backtracking with a memo of dead (slot, token) states; holes take the
  // shortest phrase that still lets the rest of the template match.
  std::set<std::pair<std::size_t, std::size_t>> dead;
  std::vector<std::pair<std::size_t, std::size_t>> hole_ranges(ids.size());
  std::function<bool(std::size_t, std::size_t)> match = [&](std::size_t s, std::size_t t) -> bool {
    if (s == n_slots) return t == n_tokens;
    if (dead.contains({s, t})) return false;
    const Slot& slot = slots[s];
    if (!slot.hole) {
      if (t < n_tokens && out.tokens[t] == slot.token && match(s + 1, t + 1)) return true;
    } else {
      for (std::size_t end = t + 1; end <= n_tokens; ++end) {
        if (match(s + 1, end)) {
          hole_ranges[slot.id] = {t, end};
          return true;
        }
      }
    }
    dead.insert({s, t});
    return false;
  };
  if (!match(0, 0)) return std::nullopt;

  std::map<std::size_t, std::string> fills;
  for (std::size_t id = 0; id < hole_ranges.size(); ++id) {
    const auto [first, last] = hole_ranges[id];
    const std::size_t begin = out.offsets[first].begin;
    const std::size_t end = out.offsets[last - 1].end;
    fills[id] = std::string(filled.substr(begin, end - begin));
  }
  return fills;
}

Reconstruction fill(ChatProvider& chat, const PromptLibrary& prompts, const MaskedPair& pair, Variant v,
                    const std::vector<Chunk>& evidence, const FillOptions& options) {
  Reconstruction rec;
  rec.row_index = pair.row_index;
  rec.variant = v;

  const auto& ids = pair.map(v);
  if (ids.empty()) {
    rec.text = pair.sentence;
    rec.valid = true;
    return rec;
  }

  std::string placeholders;
  for (std::size_t id = 0; id < ids.size(); ++id) {
    if (id) placeholders += ", ";
    placeholders += placeholder(id);
  }
  const std::string masked = pair.masked_text(v);
  const auto prompt = prompts.render("maskfill", {{"masked_sentence", masked},
                                                  {"evidence", format_evidence(evidence)},
                                                  {"placeholders", placeholders}});
  ChatRequest req;
  req.model = options.model;
  req.temperature = options.temperature;
  req.seed = options.seed;
  req.max_output_tokens = options.max_output_tokens;
  req.passthrough = options.passthrough;
  req.tag = "maskfill";
  req.meta = {{"sentence", pair.sentence}, {"masked", masked}, {"variant", std::string(to_string(v))}};
  if (!prompt.system.empty()) req.messages.push_back({Role::kSystem, prompt.system});
  req.messages.push_back({Role::kUser, prompt.user});

  for (int attempt = 1; attempt <= std::max(1, options.max_attempts); ++attempt) {
    const std::string raw = chat.chat(req);
    ++rec.attempts;
    rec.raw_outputs.push_back(raw);
    rec.text = strip_wrapping(raw);
    if (auto fills = match_fills(pair, v, rec.text)) {
      rec.fills = std::move(*fills);
      rec.valid = true;
      return rec;
    }
    req.messages.push_back({Role::kAssistant, raw});
    req.messages.push_back({Role::kUser,
                            "That reply changed words outside the placeholders or left a placeholder "
                            "unfilled. Return the masked sentence exactly as given, with only " +
                                placeholders + " replaced by evidence phrases."});
  }
  rec.fills.clear();
  rec.valid = false;
  return rec;
}

RowReconstruction reconstruct_row(ChatProvider& chat, const PromptLibrary& prompts, MaskedPair pair,
                                  const std::vector<Chunk>& sample_chunks, std::size_t top_k,
                                  const FillOptions& options) {
  RowReconstruction row;
  row.evidence = retrieve(pair.sentence, sample_chunks, top_k);
  row.a = fill(chat, prompts, pair, Variant::kA, row.evidence, options);
  row.b = fill(chat, prompts, pair, Variant::kB, row.evidence, options);
  row.pair = std::move(pair);
  return row;
}

}  // namespace medfab
