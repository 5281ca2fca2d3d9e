#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "medfab/config.hpp"
#include "medfab/fabgen.hpp"
#include "medfab/hybrid_eval.hpp"
#include "medfab/providers.hpp"
#include "medfab/sample.hpp"

namespace medfab {

// ---------------------------------------------------------------------------
// Splitting

/// Lowercased tokens joined by single spaces.
std::string normalize_question(std::string_view question);

struct Split {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

/// Topic-disjoint split. Samples sharing a topic or a normalized question
/// form one group; groups are shuffled from `seed` and assigned greedily so
/// the train share approaches train_ratio. Both sides are non-empty. Throws
/// DataError when the samples form fewer than two groups or lack a topic.
Split split_disjoint(const std::vector<Sample>& samples, double train_ratio, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Metrics

struct ConfusionMatrix {
  std::uint64_t tp = 0;  // positive class = fabrication
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision, recall and F1 from counts; each is 0 when its denominator is.
ClassMetrics class_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn);

struct EvalReport {
  ConfusionMatrix matrix;
  ClassMetrics fabrication;
  ClassMetrics ground_truth;
  ClassMetrics overall;  // unweighted mean of the two class rows
  std::uint64_t excluded_undetectable = 0;
};

EvalReport evaluate(const ConfusionMatrix& matrix, std::uint64_t excluded_undetectable = 0);

/// Scores (gold, predicted) pairs. Throws DataError when empty.
EvalReport score(const std::vector<std::pair<Label, Label>>& gold_predicted,
                 std::uint64_t excluded_undetectable = 0);

/// Scores detection reports; undetectable instances are counted separately.
EvalReport score(const std::vector<DetectionReport>& reports);

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

/// Population standard deviation per metric, in percentage points. Keys are
/// "<fabrication|ground_truth|overall>.<precision|recall|f1>".
using VarianceReport = std::map<std::string, double>;

VarianceReport variance(const std::vector<EvalReport>& reports);

/// Population standard deviation of `values`; exactly 0 when all are equal.
double population_std(const std::vector<double>& values);

// ---------------------------------------------------------------------------
// Ablation variant and audit

struct VariantResult {
  std::vector<Sample> samples;
  std::vector<SampleFailure> failures;
};

/// Replaces each gt_human with its restyled rewrite; the incorrect answer is
/// left untouched. Failed samples pass through unchanged and are listed.
VariantResult make_rewritten_variant(ChatProvider& chat, const PromptLibrary& prompts, const RunConfig& config,
                                     const std::vector<Sample>& samples, int jobs);

struct AuditReport {
  std::size_t pairs = 0;
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> deciles;  // p10 .. p90, linear interpolation
  double bin_width = 0.1;
  std::vector<std::uint64_t> histogram;  // bins over [-1, 1]
  double mean_rouge_recall = 0.0;
  std::vector<double> similarities;  // per pair, input order
};

/// Linear-interpolation quantile of sorted values, q in [0,1].
double quantile_sorted(const std::vector<double>& sorted, double q);

/// Cosine similarity between truthful answer and fabrication over accepted
/// samples (samples without QC metadata count when both texts exist).
AuditReport similarity_audit(EmbedProvider& embed, const std::string& model, const std::vector<Sample>& samples);

nlohmann::json to_json(const AuditReport& report);

}  // namespace medfab
