#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "medfab/config.hpp"
#include "medfab/maskfill.hpp"
#include "medfab/prompts.hpp"
#include "medfab/providers.hpp"
#include "medfab/sample.hpp"
#include "medfab/text2table.hpp"

namespace medfab {

enum class Adjudication { kConflict, kBenign, kSkipped, kFailed };

std::string_view to_string(Adjudication a);

/// Why a row did or did not reach the gate.
enum class RowStatus {
  kChecked,      // both reconstructions valid; gate evaluated
  kDegenerate,   // no maskable token
  kFillInvalid,  // a reconstruction broke the template after all re-asks
};

std::string_view to_string(RowStatus s);

/// Per-row outcome.
///
/// For checked rows: gated == (embed_similarity < tau_emb); adjudication is
/// kSkipped exactly when the pair was not gated; final_conflict implies
/// gated and kConflict. kFailed marks an adjudication that never produced a
/// usable answer; such rows count as unverifiable, never as conflicts.
struct PairVerdict {
  std::size_t row_index = 0;
  RowStatus status = RowStatus::kChecked;
  std::optional<double> embed_similarity;
  bool gated = false;
  Adjudication adjudication = Adjudication::kSkipped;
  bool final_conflict = false;

  bool unverifiable() const {
    return status != RowStatus::kChecked || adjudication == Adjudication::kFailed;
  }
};

/// Strict threshold: a similarity equal to tau is not gated.
constexpr bool is_gated(double similarity, double tau_emb) { return similarity < tau_emb; }

struct GateResult {
  double similarity = 1.0;
  bool gated = false;
};

/// Cosine similarity of the two texts' embeddings, gated below tau_emb.
/// Identical texts score exactly 1.0 without an embedding call.
GateResult gate(EmbedProvider& embed, const std::string& model, const std::string& text_a,
                const std::string& text_b, double tau_emb);

struct AdjudicateOptions {
  std::string model;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
  int max_output_tokens = 1024;
  nlohmann::json passthrough = nlohmann::json::object();
  int max_attempts = 3;  // first try plus corrective re-asks
};

/// Parses a strict CONFLICT/BENIGN answer (case-insensitive, surrounding
/// whitespace and one trailing period tolerated).
std::optional<Adjudication> parse_adjudication(std::string_view raw);

/// LLM check of a gated pair. Throws FormatError after max_attempts
/// unusable answers.
Adjudication adjudicate(ChatProvider& chat, const PromptLibrary& prompts, std::string_view original,
                        std::string_view recon_a, std::string_view recon_b,
                        const std::vector<Chunk>& evidence, const AdjudicateOptions& options);

/// Fabrication iff at least min_conflicts rows ended in a final conflict.
Label aggregate(const std::vector<PairVerdict>& verdicts, int min_conflicts);

/// Intermediate record for one table row.
struct RowReport {
  EntityRow row;
  std::string sentence;
  std::string masked_a;
  std::string masked_b;
  std::string reconstruction_a;
  std::string reconstruction_b;
  bool valid_a = false;
  bool valid_b = false;
  std::vector<std::size_t> evidence_chunks;
  std::vector<std::string> raw_fills;  // kept when keep_raw is set
  PairVerdict verdict;
};

struct DetectionReport {
  std::string sample_id;
  std::string instance_id;
  Label label = Label::kGroundTruth;  // gold label of the instance
  std::optional<Label> predicted;     // absent when undetectable
  std::optional<std::string> undetectable_reason;
  std::vector<RowReport> rows;
  std::size_t unverifiable_rows = 0;
  std::vector<std::string> raw_table;  // kept when keep_raw is set

  bool undetectable() const { return !predicted.has_value(); }
  std::vector<PairVerdict> verdicts() const;
};

nlohmann::json to_json(const DetectionReport& report);
DetectionReport detection_report_from_json(const nlohmann::json& j);

/// Full detector: decompose, mask and fill each row against retrieved
/// evidence, gate, adjudicate gated pairs, aggregate.
class Detector {
 public:
  Detector(RunConfig config, Providers providers, PromptLibrary prompts, Stopwords stopwords);

  /// A decomposition failure yields an undetectable report; provider errors
  /// propagate.
  DetectionReport detect(const LabeledInstance& instance, const Sample& sample) const;

  const RunConfig& config() const { return config_; }

 private:
  RunConfig config_;
  Providers providers_;
  PromptLibrary prompts_;
  Stopwords stopwords_;
};

/// Runs every instance of the dataset, `jobs` at a time; output order
/// follows expand_instances(samples).
std::vector<DetectionReport> detect_dataset(const Detector& detector, const std::vector<Sample>& samples,
                                            int jobs);

}  // namespace medfab
