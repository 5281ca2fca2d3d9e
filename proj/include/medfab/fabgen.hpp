#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "medfab/config.hpp"
#include "medfab/prompts.hpp"
#include "medfab/providers.hpp"
#include "medfab/retrieval.hpp"
#include "medfab/sample.hpp"

namespace medfab {

/// Why a QC iteration ended the way it did.
enum class QcReason {
  kAccepted,
  kStructural,  // rouge recall below tau_str
  kUnchanged,   // candidate token-identical to the ground truth
  kJudge,       // judge picked the ground truth
};

std::string_view to_string(QcReason r);

/// One fabricate/gate/judge round.
struct QcOutcome {
  std::string candidate;
  double rouge_recall = 0.0;
  bool structural_pass = false;
  bool sppo_pass = false;
  int iteration = 1;
  std::size_t changed_tokens = 0;  // audit only, never a rejection cause
  QcReason reason = QcReason::kStructural;
};

nlohmann::json to_json(const QcOutcome& o);

enum class JudgeVerdict { kPrefersGt, kPrefersCandidate };

/// Restyles gt_human. Empty replies are retried three times with a fresh
/// seed before giving up with a FormatError.
std::string rewrite(ChatProvider& chat, const PromptLibrary& prompts, const RunConfig& config,
                    const Sample& sample);

/// One candidate fabrication of `gt_llm` for QC iteration `iteration`
/// (1-based). The first iteration samples at config.temperature, later ones
/// at config.retry_temperature.
std::string fabricate(ChatProvider& chat, const PromptLibrary& prompts, const RunConfig& config,
                      const Sample& sample, const std::vector<Chunk>& evidence, std::string_view gt_llm,
                      int iteration);

/// Shows both answers in an order drawn from `order_seed` and maps the
/// judge's letter back. Two re-asks on unparseable output, then FormatError.
JudgeVerdict sppo_judge(ChatProvider& chat, const PromptLibrary& prompts, const RunConfig& config,
                        const Sample& sample, const std::vector<Chunk>& evidence, std::string_view gt_llm,
                        std::string_view candidate, std::uint64_t order_seed, int iteration = 1);

/// True when the order seed puts the ground truth in slot A.
bool ground_truth_first(std::uint64_t order_seed);

/// Parses a judge reply of a single letter A or B (case-insensitive,
/// surrounding whitespace and punctuation tolerated).
std::optional<char> parse_judge_letter(std::string_view raw);

struct QcResult {
  Sample sample;
  std::vector<QcOutcome> trace;
};

/// Fabricate, gate on ROUGE-L recall, then judge, up to max_qc_iters times.
/// An accepted sample carries the fabrication and qc_meta with the winning
/// round; an exhausted one is marked rejected with no fabrication and the
/// last candidate's recall.
QcResult qc_loop(ChatProvider& chat, const PromptLibrary& prompts, const RunConfig& config,
                 const Sample& sample);

struct SampleFailure {
  std::string sample_id;
  std::string message;
};

struct GenerationResult {
  std::vector<Sample> samples;  // input order
  std::vector<std::vector<QcOutcome>> traces;
  std::vector<SampleFailure> failures;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

/// Rewrite then QC for every sample. Per-sample errors are recorded and the
/// sample is passed through with pending status; provider auth errors abort.
GenerationResult generate_dataset(ChatProvider& chat, const PromptLibrary& prompts, const RunConfig& config,
                                  const std::vector<Sample>& samples, int jobs);

}  // namespace medfab
