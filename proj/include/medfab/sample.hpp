#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace medfab {

enum class QcStatus { kAccepted, kRejected, kPending };

std::string_view to_string(QcStatus status);
QcStatus parse_qc_status(std::string_view text);

struct QcMeta {
  double rouge_recall = 0.0;
  int sppo_rounds = 0;
  QcStatus status = QcStatus::kPending;

  bool operator==(const QcMeta&) const = default;
};

/// One benchmark record. Optional text fields are omitted on disk when absent.
struct Sample {
  std::string id;
  std::string question;
  std::vector<std::string> knowledge;
  std::optional<std::string> gt_human;
  std::optional<std::string> gt_llm;
  std::optional<std::string> fabrication;
  std::optional<std::string> topic;
  std::optional<QcMeta> qc_meta;
  /// ROUGE-L recall of the rewritten ground truth against the human one.
  std::optional<double> rewrite_rouge_recall;
  /// Fields this version does not know about; written back verbatim.
  nlohmann::json extra = nlohmann::json::object();

  bool accepted() const { return qc_meta && qc_meta->status == QcStatus::kAccepted; }

  /// The truthful answer used for detection: the rewritten one when present.
  const std::optional<std::string>& truthful_text() const {
    return gt_llm ? gt_llm : gt_human;
  }

  bool operator==(const Sample&) const = default;
};

enum class Label { kFabrication, kGroundTruth };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

/// The unit a detector classifies.
struct LabeledInstance {
  std::string sample_id;
  std::string text;
  Label label = Label::kGroundTruth;

  /// "<sample_id>#gt" or "<sample_id>#fab".
  std::string instance_id() const;

  bool operator==(const LabeledInstance&) const = default;
};

/// Expands samples into truthful/fabricated instance pairs.
///
/// Accepted samples always contribute both instances. Samples without QC
/// metadata (externally sourced datasets such as the rewritten variant) are
/// used when both a truthful text and a fabrication are present. Rejected and
/// pending samples contribute nothing.
std::vector<LabeledInstance> expand_instances(const std::vector<Sample>& samples);

/// Checks the per-record invariants that do not depend on neighbours.
/// Throws DataError naming the sample on violation.
void validate_sample(const Sample& sample, double tau_str);

nlohmann::json to_json(const Sample& sample);
Sample sample_from_json(const nlohmann::json& j);

std::vector<Sample> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::vector<Sample>& samples, const std::filesystem::path& path);

/// Serialises one record per line, terminated by '\n'.
std::string dump_lines(const std::vector<nlohmann::json>& records);

/// Reads a JSONL file into objects; blank lines are skipped.
std::vector<nlohmann::json> read_json_lines(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace medfab
