#include "medfab/hybrid_eval.hpp"

#include <algorithm>
#include <cctype>

#include "medfab/errors.hpp"
#include "medfab/hashing.hpp"
#include "medfab/parallel.hpp"
#include "medfab/retrieval.hpp"

namespace medfab {

using nlohmann::json;

std::string_view to_string(Adjudication a) {
  switch (a) {
    case Adjudication::kConflict: return "conflict";
    case Adjudication::kBenign: return "benign";
    case Adjudication::kSkipped: return "skipped";
    case Adjudication::kFailed: return "failed";
  }
  return "skipped";
}

std::string_view to_string(RowStatus s) {
  switch (s) {
    case RowStatus::kChecked: return "checked";
    case RowStatus::kDegenerate: return "degenerate";
    case RowStatus::kFillInvalid: return "fill_invalid";
  }
  return "checked";
}

namespace {

Adjudication parse_adjudication_name(const std::string& s) {
  if (s == "conflict") return Adjudication::kConflict;
  if (s == "benign") return Adjudication::kBenign;
  if (s == "skipped") return Adjudication::kSkipped;
  if (s == "failed") return Adjudication::kFailed;
  throw DataError("unknown adjudication '" + s + "'");
}

RowStatus parse_row_status(const std::string& s) {
  if (s == "checked") return RowStatus::kChecked;
  if (s == "degenerate") return RowStatus::kDegenerate;
  if (s == "fill_invalid") return RowStatus::kFillInvalid;
  throw DataError("unknown row status '" + s + "'");
}

}  // namespace

GateResult gate(EmbedProvider& embed, const std::string& model, const std::string& text_a,
                const std::string& text_b, double tau_emb) {
  if (text_a.empty() || text_b.empty()) throw PreconditionError("gate: empty reconstruction");
  GateResult result;
  if (text_a == text_b) {
    result.similarity = 1.0;
  } else {
    const auto vectors = embed.embed(EmbedRequest{model, {text_a, text_b}});
    if (vectors.size() != 2) throw ProviderError("embedding backend returned the wrong vector count");
    result.similarity = cosine_similarity(vectors[0], vectors[1]);
  }
  result.gated = is_gated(result.similarity, tau_emb);
  return result;
}

std::optional<Adjudication> parse_adjudication(std::string_view raw) {
  std::string s(raw);
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return std::nullopt;
  s = s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
  if (!s.empty() && s.back() == '.') s.pop_back();
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  if (s == "CONFLICT") return Adjudication::kConflict;
  if (s == "BENIGN") return Adjudication::kBenign;
  return std::nullopt;
}

Adjudication adjudicate(ChatProvider& chat, const PromptLibrary& prompts, std::string_view original,
                        std::string_view recon_a, std::string_view recon_b,
                        const std::vector<Chunk>& evidence, const AdjudicateOptions& options) {
  const auto prompt = prompts.render("adjudicate", {{"original", std::string(original)},
                                                    {"reconstruction_a", std::string(recon_a)},
                                                    {"reconstruction_b", std::string(recon_b)},
                                                    {"evidence", format_evidence(evidence)}});
  ChatRequest req;
  req.model = options.model;
  req.temperature = options.temperature;
  req.seed = options.seed;
  req.max_output_tokens = options.max_output_tokens;
  req.passthrough = options.passthrough;
  req.tag = "adjudicate";
  req.meta = {{"original", std::string(original)},
              {"reconstruction_a", std::string(recon_a)},
              {"reconstruction_b", std::string(recon_b)}};
  if (!prompt.system.empty()) req.messages.push_back({Role::kSystem, prompt.system});
  req.messages.push_back({Role::kUser, prompt.user});

  std::string raw;
  for (int attempt = 1; attempt <= std::max(1, options.max_attempts); ++attempt) {
    raw = chat.chat(req);
    if (auto verdict = parse_adjudication(raw)) return *verdict;
    req.messages.push_back({Role::kAssistant, raw});
    req.messages.push_back({Role::kUser, "Answer with exactly one word: CONFLICT or BENIGN."});
  }
  throw FormatError("adjudication answered outside CONFLICT/BENIGN after " +
                        std::to_string(options.max_attempts) + " attempts",
                    raw);
}

Label aggregate(const std::vector<PairVerdict>& verdicts, int min_conflicts) {
  if (min_conflicts < 1) throw PreconditionError("min_conflicts must be >= 1");
  const auto conflicts = std::count_if(verdicts.begin(), verdicts.end(), [](const PairVerdict& v) {
    return v.final_conflict && !v.unverifiable();
  });
  return conflicts >= min_conflicts ? Label::kFabrication : Label::kGroundTruth;
}

std::vector<PairVerdict> DetectionReport::verdicts() const {
  std::vector<PairVerdict> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.verdict);
  return out;
}

json to_json(const DetectionReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    const auto& v = r.verdict;
    json row{{"row_index", v.row_index},
             {"entity", r.row.entity},
             {"description", r.row.description},
             {"sentence", r.sentence},
             {"status", to_string(v.status)},
             {"gated", v.gated},
             {"adjudication", to_string(v.adjudication)},
             {"final_conflict", v.final_conflict}};
    if (v.embed_similarity) row["embed_similarity"] = *v.embed_similarity;
    if (v.status != RowStatus::kDegenerate) {
      row["masked_a"] = r.masked_a;
      row["masked_b"] = r.masked_b;
      row["reconstruction_a"] = r.reconstruction_a;
      row["reconstruction_b"] = r.reconstruction_b;
      row["valid_a"] = r.valid_a;
      row["valid_b"] = r.valid_b;
      row["evidence_chunks"] = r.evidence_chunks;
    }
    if (!r.raw_fills.empty()) row["raw_fills"] = r.raw_fills;
    rows.push_back(std::move(row));
  }
  json j{{"sample_id", report.sample_id},
         {"instance_id", report.instance_id},
         {"label", to_string(report.label)},
         {"rows", std::move(rows)},
         {"unverifiable_rows", report.unverifiable_rows}};
  if (report.predicted) j["predicted"] = to_string(*report.predicted);
  if (report.undetectable_reason) j["undetectable_reason"] = *report.undetectable_reason;
  if (!report.raw_table.empty()) j["raw_table"] = report.raw_table;
  return j;
}

DetectionReport detection_report_from_json(const json& j) {
  DetectionReport r;
  try {
    r.sample_id = j.at("sample_id").get<std::string>();
    r.instance_id = j.value("instance_id", std::string());
    r.label = parse_label(j.at("label").get<std::string>());
    if (j.contains("predicted") && !j["predicted"].is_null()) {
      r.predicted = parse_label(j["predicted"].get<std::string>());
    }
    if (j.contains("undetectable_reason")) r.undetectable_reason = j["undetectable_reason"].get<std::string>();
    r.unverifiable_rows = j.value("unverifiable_rows", std::size_t{0});
    for (const auto& row : j.value("rows", json::array())) {
      RowReport rr;
      rr.row.entity = row.value("entity", std::string());
      rr.row.description = row.value("description", std::string());
      rr.row.row_index = row.at("row_index").get<std::size_t>();
      rr.sentence = row.value("sentence", std::string());
      rr.masked_a = row.value("masked_a", std::string());
      rr.masked_b = row.value("masked_b", std::string());
      rr.reconstruction_a = row.value("reconstruction_a", std::string());
      rr.reconstruction_b = row.value("reconstruction_b", std::string());
      rr.valid_a = row.value("valid_a", false);
      rr.valid_b = row.value("valid_b", false);
      rr.evidence_chunks = row.value("evidence_chunks", std::vector<std::size_t>{});
      rr.raw_fills = row.value("raw_fills", std::vector<std::string>{});
      auto& v = rr.verdict;
      v.row_index = rr.row.row_index;
      v.status = parse_row_status(row.at("status").get<std::string>());
      if (row.contains("embed_similarity")) v.embed_similarity = row["embed_similarity"].get<double>();
      v.gated = row.at("gated").get<bool>();
      v.adjudication = parse_adjudication_name(row.at("adjudication").get<std::string>());
      v.final_conflict = row.at("final_conflict").get<bool>();
      r.rows.push_back(std::move(rr));
    }
    r.raw_table = j.value("raw_table", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed detection report: ") + e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Detector

Detector::Detector(RunConfig config, Providers providers, PromptLibrary prompts, Stopwords stopwords)
    : config_(std::move(config)),
      providers_(std::move(providers)),
      prompts_(std::move(prompts)),
      stopwords_(std::move(stopwords)) {
  if (!providers_.chat || !providers_.embed) throw ConfigError("detector needs chat and embedding providers");
}

DetectionReport Detector::detect(const LabeledInstance& instance, const Sample& sample) const {
  DetectionReport report;
  report.sample_id = sample.id;
  report.instance_id = instance.instance_id();
  report.label = instance.label;

  if (instance.text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw PreconditionError("instance '" + instance.instance_id() + "' has empty text");
  }
  const auto chunks = chunk_knowledge(sample, {static_cast<std::size_t>(config_.chunk_max_tokens),
                                               static_cast<std::size_t>(config_.chunk_overlap)});

  const auto seed = static_cast<std::int64_t>(derive_seed(static_cast<std::uint64_t>(config_.seed), "detect") >> 1);
  json passthrough = json::object();
  if (!config_.reasoning_effort.empty()) passthrough["reasoning_effort"] = config_.reasoning_effort;

  DecomposeOptions dopts{config_.chat_model, config_.temperature, seed, config_.max_output_tokens, passthrough};
  FillOptions fopts{config_.chat_model, config_.temperature, seed, config_.max_output_tokens, passthrough};
  AdjudicateOptions aopts{config_.chat_model, config_.temperature, seed, config_.max_output_tokens, passthrough};

  EntityTable table;
  try {
    table = decompose(*providers_.chat, prompts_, instance.text, sample.question, dopts, sample.id);
  } catch (const DecompositionError& e) {
    report.undetectable_reason = e.what();
    if (config_.keep_raw) report.raw_table = {e.raw_output()};
    return report;
  }
  if (config_.keep_raw) report.raw_table = table.raw_outputs;

  for (const auto& row : table.rows) {
    RowReport rr;
    rr.row = row;
    rr.sentence = row_sentence(row);
    rr.verdict.row_index = row.row_index;

    auto pair = complementary_masks(rr.sentence, stopwords_, row.row_index);
    if (!pair) {
      rr.verdict.status = RowStatus::kDegenerate;
      ++report.unverifiable_rows;
      report.rows.push_back(std::move(rr));
      continue;
    }
    rr.masked_a = pair->masked_text(Variant::kA);
    rr.masked_b = pair->masked_text(Variant::kB);

    auto recon = reconstruct_row(*providers_.chat, prompts_, std::move(*pair), chunks,
                                 static_cast<std::size_t>(config_.top_k_chunks), fopts);
    rr.reconstruction_a = recon.a.text;
    rr.reconstruction_b = recon.b.text;
    rr.valid_a = recon.a.valid;
    rr.valid_b = recon.b.valid;
    for (const auto& c : recon.evidence) rr.evidence_chunks.push_back(c.index);
    if (config_.keep_raw) {
      rr.raw_fills = recon.a.raw_outputs;
      rr.raw_fills.insert(rr.raw_fills.end(), recon.b.raw_outputs.begin(), recon.b.raw_outputs.end());
    }

    auto& v = rr.verdict;
    if (!recon.a.valid || !recon.b.valid) {
      v.status = RowStatus::kFillInvalid;
      ++report.unverifiable_rows;
      report.rows.push_back(std::move(rr));
      continue;
    }

    GateResult g;
    if (config_.compare_mode == CompareMode::kPair) {
      g = gate(*providers_.embed, config_.embed_model, recon.a.text, recon.b.text, config_.tau_emb);
    } else {
      const auto ga = gate(*providers_.embed, config_.embed_model, rr.sentence, recon.a.text, config_.tau_emb);
      const auto gb = gate(*providers_.embed, config_.embed_model, rr.sentence, recon.b.text, config_.tau_emb);
      g.similarity = std::min(ga.similarity, gb.similarity);
      g.gated = is_gated(g.similarity, config_.tau_emb);
    }
    v.embed_similarity = g.similarity;
    v.gated = g.gated;
    if (v.gated) {
      try {
        v.adjudication = adjudicate(*providers_.chat, prompts_, rr.sentence, recon.a.text, recon.b.text,
                                    recon.evidence, aopts);
      } catch (const FormatError&) {
        v.adjudication = Adjudication::kFailed;
        ++report.unverifiable_rows;
      }
    }
    v.final_conflict = v.gated && v.adjudication == Adjudication::kConflict;
    report.rows.push_back(std::move(rr));
  }

  report.predicted = aggregate(report.verdicts(), config_.aggregation_min_conflicts);
  return report;
}

std::vector<DetectionReport> detect_dataset(const Detector& detector, const std::vector<Sample>& samples,
                                            int jobs) {
  const auto instances = expand_instances(samples);
  std::map<std::string, const Sample*> by_id;
  for (const auto& s : samples) by_id[s.id] = &s;

  std::vector<DetectionReport> reports(instances.size());
  parallel_for(instances.size(), jobs, [&](std::size_t i) {
    const auto& inst = instances[i];
    const Sample& sample = *by_id.at(inst.sample_id);
    try {
      reports[i] = detector.detect(inst, sample);
    } catch (const PreconditionError& e) {
      DetectionReport r;
      r.sample_id = inst.sample_id;
      r.instance_id = inst.instance_id();
      r.label = inst.label;
      r.undetectable_reason = e.what();
      reports[i] = std::move(r);
    }
  });
  return reports;
}

}  // namespace medfab
