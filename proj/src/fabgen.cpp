#include "medfab/fabgen.hpp"

#include <cctype>
#include <mutex>

#include "medfab/errors.hpp"
#include "medfab/hashing.hpp"
#include "medfab/parallel.hpp"
#include "medfab/text_metrics.hpp"

namespace medfab {

using nlohmann::json;

std::string_view to_string(QcReason r) {
  switch (r) {
    case QcReason::kAccepted: return "accepted";
    case QcReason::kStructural: return "structural";
    case QcReason::kUnchanged: return "unchanged";
    case QcReason::kJudge: return "judge";
  }
  return "structural";
}

json to_json(const QcOutcome& o) {
  return json{{"iteration", o.iteration},
              {"candidate", o.candidate},
              {"rouge_recall", o.rouge_recall},
              {"structural_pass", o.structural_pass},
              {"sppo_pass", o.sppo_pass},
              {"changed_tokens", o.changed_tokens},
              {"reason", to_string(o.reason)}};
}

namespace {

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

std::string trimmed(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  return std::string(s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1));
}

std::int64_t request_seed(std::uint64_t derived) { return static_cast<std::int64_t>(derived >> 1); }

ChatRequest base_request(const RunConfig& config, const PromptLibrary::Rendered& prompt, std::string tag) {
  ChatRequest req;
  req.model = config.chat_model;
  req.temperature = config.temperature;
  req.max_output_tokens = config.max_output_tokens;
  if (!config.reasoning_effort.empty()) req.passthrough["reasoning_effort"] = config.reasoning_effort;
  req.tag = std::move(tag);
  if (!prompt.system.empty()) req.messages.push_back({Role::kSystem, prompt.system});
  req.messages.push_back({Role::kUser, prompt.user});
  return req;
}

std::vector<Chunk> evidence_for(const RunConfig& config, const Sample& sample, std::string_view query) {
  const auto chunks = chunk_knowledge(sample, {static_cast<std::size_t>(config.chunk_max_tokens),
                                               static_cast<std::size_t>(config.chunk_overlap)});
  return retrieve(query, chunks, static_cast<std::size_t>(config.top_k_chunks));
}

}  // namespace

std::string rewrite(ChatProvider& chat, const PromptLibrary& prompts, const RunConfig& config,
                    const Sample& sample) {
  if (blank(sample.question)) throw PreconditionError("rewrite: sample '" + sample.id + "' has no question");
  if (!sample.gt_human || blank(*sample.gt_human)) {
    throw PreconditionError("rewrite: sample '" + sample.id + "' has no gt_human");
  }
  const auto evidence = evidence_for(config, sample, *sample.gt_human);
  const auto prompt = prompts.render("rewrite", {{"question", sample.question},
                                                 {"knowledge", format_evidence(evidence)},
                                                 {"ground_truth", *sample.gt_human}});
  auto req = base_request(config, prompt, "rewrite");
  req.meta = {{"sample_id", sample.id}, {"ground_truth", *sample.gt_human}};

  constexpr int kRetries = 3;
  for (int attempt = 0; attempt <= kRetries; ++attempt) {
    req.seed = request_seed(derive_seed(static_cast<std::uint64_t>(config.seed), "rewrite", sample.id,
                                        static_cast<std::uint64_t>(attempt)));
    std::string out = trimmed(chat.chat(req));
    if (!out.empty()) return out;
  }
  throw FormatError("rewrite of sample '" + sample.id + "' stayed empty after retries", "");
}

std::string fabricate(ChatProvider& chat, const PromptLibrary& prompts, const RunConfig& config,
                      const Sample& sample, const std::vector<Chunk>& evidence, std::string_view gt_llm,
                      int iteration) {
  if (blank(gt_llm)) throw PreconditionError("fabricate: sample '" + sample.id + "' has no gt_llm");
  const auto prompt = prompts.render("fabricate", {{"question", sample.question},
                                                   {"knowledge", format_evidence(evidence)},
                                                   {"ground_truth", std::string(gt_llm)},
                                                   {"max_changed_words", std::to_string(config.max_changed_words)}});
  auto req = base_request(config, prompt, "fabricate");
  req.temperature = iteration <= 1 ? config.temperature : config.retry_temperature;
  req.seed = request_seed(derive_seed(static_cast<std::uint64_t>(config.seed), "qc", sample.id,
                                      static_cast<std::uint64_t>(iteration)));
  req.meta = {{"sample_id", sample.id},
              {"ground_truth", std::string(gt_llm)},
              {"iteration", std::to_string(iteration)}};
  return trimmed(chat.chat(req));
}

bool ground_truth_first(std::uint64_t order_seed) { return (derive_seed(order_seed, "slot") & 1U) == 0; }

std::optional<char> parse_judge_letter(std::string_view raw) {
  std::string s;
  for (char c : raw) {
    if (std::isalnum(static_cast<unsigned char>(c))) s += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  if (s == "A" || s == "B") return s[0];
  return std::nullopt;
}

JudgeVerdict sppo_judge(ChatProvider& chat, const PromptLibrary& prompts, const RunConfig& config,
                        const Sample& sample, const std::vector<Chunk>& evidence, std::string_view gt_llm,
                        std::string_view candidate, std::uint64_t order_seed, int iteration) {
  if (blank(gt_llm) || blank(candidate)) throw PreconditionError("sppo_judge: empty answer");
  const bool gt_in_a = ground_truth_first(order_seed);
  const std::string a(gt_in_a ? gt_llm : candidate);
  const std::string b(gt_in_a ? candidate : gt_llm);
  const auto prompt = prompts.render("sppo_judge", {{"question", sample.question},
                                                    {"knowledge", format_evidence(evidence)},
                                                    {"answer_a", a},
                                                    {"answer_b", b}});
  auto req = base_request(config, prompt, "sppo_judge");
  req.seed = request_seed(derive_seed(static_cast<std::uint64_t>(config.seed), "qc-judge", sample.id,
                                      static_cast<std::uint64_t>(iteration)));
  req.meta = {{"sample_id", sample.id},
              {"ground_truth", std::string(gt_llm)},
              {"candidate", std::string(candidate)},
              {"ground_truth_slot", gt_in_a ? "A" : "B"}};

  constexpr int kReasks = 2;
  std::string raw;
  for (int attempt = 0; attempt <= kReasks; ++attempt) {
    raw = chat.chat(req);
    if (const auto letter = parse_judge_letter(raw)) {
      const bool picked_gt = (*letter == 'A') == gt_in_a;
      return picked_gt ? JudgeVerdict::kPrefersGt : JudgeVerdict::kPrefersCandidate;
    }
    req.messages.push_back({Role::kAssistant, raw});
    req.messages.push_back({Role::kUser, "Reply with the single letter A or B."});
  }
  throw FormatError("judge answered outside A/B for sample '" + sample.id + "'", raw);
}

QcResult qc_loop(ChatProvider& chat, const PromptLibrary& prompts, const RunConfig& config,
                 const Sample& sample) {
  if (!sample.gt_llm || blank(*sample.gt_llm)) {
    throw PreconditionError("qc_loop: sample '" + sample.id + "' has no gt_llm");
  }
  if (sample.knowledge.empty()) throw PreconditionError("qc_loop: sample '" + sample.id + "' has no knowledge");
  if (config.max_qc_iters < 1) throw PreconditionError("max_qc_iters must be >= 1");

  const std::string& gt = *sample.gt_llm;
  const auto gt_tokens = tokenize(gt).tokens;
  const auto evidence = evidence_for(config, sample, gt);

  QcResult result{sample, {}};
  result.sample.fabrication.reset();
  for (int iter = 1; iter <= config.max_qc_iters; ++iter) {
    QcOutcome o;
    o.iteration = iter;
    o.candidate = fabricate(chat, prompts, config, sample, evidence, gt, iter);
    o.rouge_recall = rouge_l_recall(gt, o.candidate);
    o.changed_tokens = changed_token_count(gt, o.candidate);
    o.structural_pass = o.rouge_recall >= config.tau_str;
    if (!o.structural_pass) {
      o.reason = QcReason::kStructural;
    } else if (tokenize(o.candidate).tokens == gt_tokens) {
      o.reason = QcReason::kUnchanged;
    } else {
      const auto order_seed = derive_seed(static_cast<std::uint64_t>(config.seed), "judge-order", sample.id,
                                          static_cast<std::uint64_t>(iter));
      const auto verdict = sppo_judge(chat, prompts, config, sample, evidence, gt, o.candidate, order_seed, iter);
      o.sppo_pass = verdict == JudgeVerdict::kPrefersCandidate;
      o.reason = o.sppo_pass ? QcReason::kAccepted : QcReason::kJudge;
    }
    result.trace.push_back(o);
    if (o.reason == QcReason::kAccepted) {
      result.sample.fabrication = o.candidate;
      result.sample.qc_meta = QcMeta{o.rouge_recall, iter, QcStatus::kAccepted};
      return result;
    }
  }
  result.sample.qc_meta = QcMeta{result.trace.back().rouge_recall, config.max_qc_iters, QcStatus::kRejected};
  return result;
}

GenerationResult generate_dataset(ChatProvider& chat, const PromptLibrary& prompts, const RunConfig& config,
                                  const std::vector<Sample>& samples, int jobs) {
  GenerationResult out;
  out.samples.resize(samples.size());
  out.traces.resize(samples.size());
  std::vector<std::optional<SampleFailure>> failures(samples.size());

  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    Sample s = samples[i];
    try {
      if (s.knowledge.empty()) throw PreconditionError("sample '" + s.id + "' has no knowledge");
      s.gt_llm = rewrite(chat, prompts, config, s);
      s.rewrite_rouge_recall = rouge_l_recall(*s.gt_human, *s.gt_llm);
      auto qc = qc_loop(chat, prompts, config, s);
      out.samples[i] = std::move(qc.sample);
      out.traces[i] = std::move(qc.trace);
    } catch (const AuthError&) {
      throw;
    } catch (const Error& e) {
      Sample passed = samples[i];
      passed.fabrication.reset();
      passed.qc_meta = QcMeta{0.0, 0, QcStatus::kPending};
      out.samples[i] = std::move(passed);
      failures[i] = SampleFailure{samples[i].id, e.what()};
    }
  });

  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (failures[i]) {
      out.failures.push_back(std::move(*failures[i]));
    } else if (out.samples[i].accepted()) {
      ++out.accepted;
    } else {
      ++out.rejected;
    }
  }
  return out;
}

}  // namespace medfab
