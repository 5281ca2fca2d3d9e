#include <fstream>
#include <sstream>
#include <unordered_set>

#include "medfab/errors.hpp"
#include "medfab/sample.hpp"

namespace medfab {

using nlohmann::json;

namespace {

constexpr std::string_view kKnownFields[] = {
    "id", "question", "knowledge", "gt_human", "gt_llm", "fabrication",
    "topic", "qc_meta", "rewrite_rouge_recall"};

bool is_known_field(std::string_view key) {
  for (auto known : kKnownFields) {
    if (known == key) return true;
  }
  return false;
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw DataError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::string required_string(const json& j, const char* key) {
  auto value = optional_string(j, key);
  if (!value) throw DataError(std::string("missing field '") + key + "'");
  return *value;
}

}  // namespace

std::string_view to_string(QcStatus status) {
  switch (status) {
    case QcStatus::kAccepted: return "accepted";
    case QcStatus::kRejected: return "rejected";
    case QcStatus::kPending: return "pending";
  }
  return "pending";
}

QcStatus parse_qc_status(std::string_view text) {
  if (text == "accepted") return QcStatus::kAccepted;
  if (text == "rejected") return QcStatus::kRejected;
  if (text == "pending") return QcStatus::kPending;
  throw DataError("unknown qc status '" + std::string(text) + "'");
}

std::string_view to_string(Label label) {
  return label == Label::kFabrication ? "fabrication" : "ground_truth";
}

Label parse_label(std::string_view text) {
  if (text == "fabrication") return Label::kFabrication;
  if (text == "ground_truth") return Label::kGroundTruth;
  throw DataError("unknown label '" + std::string(text) + "'");
}

std::string LabeledInstance::instance_id() const {
  return sample_id + (label == Label::kFabrication ? "#fab" : "#gt");
}

std::vector<LabeledInstance> expand_instances(const std::vector<Sample>& samples) {
  std::vector<LabeledInstance> out;
  for (const auto& s : samples) {
    const bool usable = s.qc_meta ? s.accepted() : true;
    const auto& truthful = s.truthful_text();
    if (!usable || !truthful || !s.fabrication) continue;
    out.push_back({s.id, *truthful, Label::kGroundTruth});
    out.push_back({s.id, *s.fabrication, Label::kFabrication});
  }
  return out;
}

void validate_sample(const Sample& sample, double tau_str) {
  if (sample.id.empty()) throw DataError("sample with empty id");
  if (sample.accepted()) {
    if (!sample.fabrication) {
      throw DataError("sample '" + sample.id + "' is accepted but has no fabrication");
    }
    if (sample.qc_meta->rouge_recall < tau_str) {
      throw DataError("sample '" + sample.id + "' is accepted below the structural threshold");
    }
  }
  if (sample.qc_meta && (sample.qc_meta->rouge_recall < 0.0 || sample.qc_meta->rouge_recall > 1.0)) {
    throw DataError("sample '" + sample.id + "' has rouge_recall outside [0,1]");
  }
}

json to_json(const Sample& s) {
  json j = s.extra.is_object() ? s.extra : json::object();
  j["id"] = s.id;
  j["question"] = s.question;
  j["knowledge"] = s.knowledge;
  if (s.gt_human) j["gt_human"] = *s.gt_human;
  if (s.gt_llm) j["gt_llm"] = *s.gt_llm;
  if (s.fabrication) j["fabrication"] = *s.fabrication;
  if (s.topic) j["topic"] = *s.topic;
  if (s.qc_meta) {
    j["qc_meta"] = {{"rouge_recall", s.qc_meta->rouge_recall},
                    {"sppo_rounds", s.qc_meta->sppo_rounds},
                    {"status", to_string(s.qc_meta->status)}};
  }
  if (s.rewrite_rouge_recall) j["rewrite_rouge_recall"] = *s.rewrite_rouge_recall;
  return j;
}

Sample sample_from_json(const json& j) {
  if (!j.is_object()) throw DataError("record is not an object");
  Sample s;
  s.id = required_string(j, "id");
  s.question = required_string(j, "question");

  // Knowledge may arrive as a single passage or as pre-chunked passages.
  if (auto it = j.find("knowledge"); it != j.end() && !it->is_null()) {
    if (it->is_string()) {
      s.knowledge.push_back(it->get<std::string>());
    } else if (it->is_array()) {
      for (const auto& chunk : *it) {
        if (!chunk.is_string()) throw DataError("knowledge entries must be strings");
        s.knowledge.push_back(chunk.get<std::string>());
      }
    } else {
      throw DataError("field 'knowledge' must be a string or an array of strings");
    }
  }

  s.gt_human = optional_string(j, "gt_human");
  s.gt_llm = optional_string(j, "gt_llm");
  s.fabrication = optional_string(j, "fabrication");
  s.topic = optional_string(j, "topic");

  if (auto it = j.find("qc_meta"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw DataError("field 'qc_meta' must be an object");
    QcMeta meta;
    try {
      meta.rouge_recall = it->at("rouge_recall").get<double>();
      meta.sppo_rounds = it->at("sppo_rounds").get<int>();
      meta.status = parse_qc_status(it->at("status").get<std::string>());
    } catch (const json::exception& e) {
      throw DataError(std::string("malformed qc_meta: ") + e.what());
    }
    if (meta.sppo_rounds < 0) throw DataError("qc_meta.sppo_rounds must be non-negative");
    s.qc_meta = meta;
  }

  if (auto it = j.find("rewrite_rouge_recall"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) throw DataError("field 'rewrite_rouge_recall' must be a number");
    s.rewrite_rouge_recall = it->get<double>();
  }

  for (const auto& [key, value] : j.items()) {
    if (!is_known_field(key)) s.extra[key] = value;
  }
  return s;
}

std::vector<json> read_json_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
    }
  }
  return out;
}

std::vector<Sample> load_dataset(const std::filesystem::path& path) {
  auto records = read_json_lines(path);
  std::vector<Sample> samples;
  samples.reserve(records.size());
  std::unordered_set<std::string> seen;

  // Line numbers are recomputed so errors point at the offending line even
  // when blank lines were skipped.
  std::ifstream in(path, std::ios::binary);
  std::vector<std::size_t> line_numbers;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) line_numbers.push_back(n);
  }

  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string where = path.string() + ":" + std::to_string(line_numbers.at(i)) + ": ";
    Sample s;
    try {
      s = sample_from_json(records[i]);
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
    if (!seen.insert(s.id).second) throw DataError(where + "duplicate id '" + s.id + "'");
    samples.push_back(std::move(s));
  }
  return samples;
}

std::string dump_lines(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

void save_dataset(const std::vector<Sample>& samples, const std::filesystem::path& path) {
  std::vector<json> records;
  records.reserve(samples.size());
  for (const auto& s : samples) records.push_back(to_json(s));
  write_text_file(path, dump_lines(records));
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace medfab
