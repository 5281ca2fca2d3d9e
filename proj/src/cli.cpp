#include "medfab/cli.hpp"

#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "medfab/config.hpp"
#include "medfab/errors.hpp"
#include "medfab/fabgen.hpp"
#include "medfab/hashing.hpp"
#include "medfab/prompts.hpp"
#include "medfab/providers.hpp"

namespace medfab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path default_data_dir() {
  if (const char* env = std::getenv("MEDFAB_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return MEDFAB_DEFAULT_DATA_DIR;
}

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  int jobs = 0;

  RunConfig load() const {
    auto all = overrides;
    if (jobs > 0) all.push_back("jobs=" + std::to_string(jobs));
    std::optional<fs::path> path;
    if (!config_path.empty()) path = config_path;
    return load_config(path, all);
  }
};

PromptLibrary prompts_for(const RunConfig& c) {
  return c.templates_dir.empty() ? PromptLibrary() : PromptLibrary(c.templates_dir);
}

Stopwords stopwords_for(const RunConfig& c) {
  return c.stopwords_file.empty() ? Stopwords() : Stopwords(c.stopwords_file);
}

fs::path manifest_path(const fs::path& output) { return fs::path(output.string() + ".manifest.json"); }

// Written next to every output: enough to re-run the command against the
// same cache and get the same bytes back.
void write_manifest(const fs::path& output, const std::string& subcommand, const RunConfig& config,
                    const Providers* providers, const std::vector<fs::path>& inputs) {
  json in = json::array();
  for (const auto& p : inputs) {
    in.push_back({{"path", p.string()}, {"sha256", sha256_hex(read_text_file(p))}});
  }
  json m{{"tool", "medfab"},
         {"version", kToolVersion},
         {"subcommand", subcommand},
         {"config_digest", config_digest(config)},
         {"config", to_json(config)},
         {"seed", config.seed},
         {"inputs", std::move(in)}};
  if (providers != nullptr) {
    m["providers"] = {{"chat", providers->chat ? providers->chat->id() : ""},
                      {"embed", providers->embed ? providers->embed->id() : ""}};
  }
  write_text_file(manifest_path(output), m.dump(2) + "\n");
}

std::string pct(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * v;
  return s.str();
}

void print_eval(std::ostream& out, const EvalReport& r) {
  const auto& m = r.matrix;
  out << "confusion  tp=" << m.tp << " fp=" << m.fp << " tn=" << m.tn << " fn=" << m.fn
      << "  (excluded undetectable: " << r.excluded_undetectable << ")\n";
  out << std::left << std::setw(14) << "class" << std::right << std::setw(10) << "precision" << std::setw(10)
      << "recall" << std::setw(10) << "f1" << "\n";
  auto row = [&](const char* name, const ClassMetrics& c) {
    out << std::left << std::setw(14) << name << std::right << std::setw(10) << pct(c.precision) << std::setw(10)
        << pct(c.recall) << std::setw(10) << pct(c.f1) << "\n";
  };
  row("fabrication", r.fabrication);
  row("ground_truth", r.ground_truth);
  row("overall", r.overall);
}

std::vector<DetectionReport> load_reports(const fs::path& path) {
  std::vector<DetectionReport> reports;
  for (const auto& j : read_json_lines(path)) reports.push_back(detection_report_from_json(j));
  return reports;
}

// An evaluation report file, or a detection-report file that gets scored.
EvalReport load_eval(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    const auto j = json::parse(text);
    if (j.is_object() && j.contains("confusion")) return eval_report_from_json(j);
  } catch (const json::parse_error&) {
  }
  return score(load_reports(path));
}

std::string dump_reports(const std::vector<DetectionReport>& reports) {
  std::vector<json> lines;
  lines.reserve(reports.size());
  for (const auto& r : reports) lines.push_back(to_json(r));
  return dump_lines(lines);
}

void print_failures(std::ostream& err, const std::vector<SampleFailure>& failures) {
  for (const auto& f : failures) err << "warning: sample " << f.sample_id << ": " << f.message << "\n";
}

int cmd_generate(const Common& common, const fs::path& in, const fs::path& out, std::string trace_path,
                 std::ostream& os, std::ostream& err) {
  const auto config = common.load();
  const auto samples = load_dataset(in);
  auto providers = make_providers(config);
  const auto result = generate_dataset(*providers.chat, prompts_for(config), config, samples, config.jobs);
  save_dataset(result.samples, out);

  if (trace_path.empty()) trace_path = out.string() + ".qc.jsonl";
  std::vector<json> trace;
  for (std::size_t i = 0; i < result.samples.size(); ++i) {
    json rounds = json::array();
    for (const auto& o : result.traces[i]) rounds.push_back(to_json(o));
    trace.push_back({{"sample_id", result.samples[i].id}, {"rounds", std::move(rounds)}});
  }
  write_text_file(trace_path, dump_lines(trace));
  write_manifest(out, "generate", config, &providers, {in});

  print_failures(err, result.failures);
  const auto n = samples.size();
  os << "samples " << n << "  accepted " << result.accepted << "  rejected " << result.rejected << "  failed "
     << result.failures.size();
  if (n > 0) os << "  accepted fraction " << pct(static_cast<double>(result.accepted) / static_cast<double>(n)) << "%";
  os << "\n";
  return 0;
}

int cmd_detect(const Common& common, const fs::path& in, const fs::path& out, std::ostream& os) {
  const auto config = common.load();
  const auto samples = load_dataset(in);
  auto providers = make_providers(config);
  const Detector detector(config, providers, prompts_for(config), stopwords_for(config));
  const auto reports = detect_dataset(detector, samples, config.jobs);
  write_text_file(out, dump_reports(reports));
  write_manifest(out, "detect", config, &providers, {in});

  std::size_t undetectable = 0;
  for (const auto& r : reports) undetectable += r.undetectable() ? 1 : 0;
  os << "instances " << reports.size() << "  undetectable " << undetectable << "\n";
  if (undetectable < reports.size()) print_eval(os, score(reports));
  return 0;
}

int cmd_split(const Common& common, const fs::path& in, const fs::path& train, const fs::path& test, double ratio,
              std::ostream& os) {
  const auto config = common.load();
  const auto samples = load_dataset(in);
  const auto split = split_disjoint(samples, ratio, static_cast<std::uint64_t>(config.seed));
  save_dataset(split.train, train);
  save_dataset(split.test, test);
  write_manifest(train, "split", config, nullptr, {in});
  write_manifest(test, "split", config, nullptr, {in});
  os << "train " << split.train.size() << "  test " << split.test.size() << "\n";
  return 0;
}

int cmd_score(const Common& common, const fs::path& in, const std::string& out, std::ostream& os) {
  const auto config = common.load();
  const auto report = score(load_reports(in));
  if (!out.empty()) {
    write_text_file(out, to_json(report).dump(2) + "\n");
    write_manifest(out, "score", config, nullptr, {in});
  }
  print_eval(os, report);
  return 0;
}

int cmd_variance(const Common& common, const std::vector<std::string>& inputs, const std::string& out,
                 std::ostream& os) {
  const auto config = common.load();
  std::vector<EvalReport> reports;
  std::vector<fs::path> paths;
  for (const auto& p : inputs) {
    reports.push_back(load_eval(p));
    paths.emplace_back(p);
  }
  const auto v = variance(reports);
  if (!out.empty()) {
    write_text_file(out, json{{"runs", reports.size()}, {"std_pp", v}}.dump(2) + "\n");
    write_manifest(out, "variance", config, nullptr, paths);
  }
  os << "population std over " << reports.size() << " runs (percentage points)\n";
  os << std::left << std::setw(14) << "class" << std::right << std::setw(10) << "precision" << std::setw(10)
     << "recall" << std::setw(10) << "f1" << "\n";
  for (const char* cls : {"fabrication", "ground_truth", "overall"}) {
    const std::string c = cls;
    os << std::left << std::setw(14) << c << std::right << std::fixed << std::setprecision(2) << std::setw(10)
       << v.at(c + ".precision") << std::setw(10) << v.at(c + ".recall") << std::setw(10) << v.at(c + ".f1")
       << "\n";
  }
  return 0;
}

int cmd_variant(const Common& common, const fs::path& in, const fs::path& out, std::ostream& os, std::ostream& err) {
  const auto config = common.load();
  const auto samples = load_dataset(in);
  auto providers = make_providers(config);
  const auto result = make_rewritten_variant(*providers.chat, prompts_for(config), config, samples, config.jobs);
  save_dataset(result.samples, out);
  write_manifest(out, "variant", config, &providers, {in});
  print_failures(err, result.failures);
  os << "samples " << samples.size() << "  rewritten " << samples.size() - result.failures.size() << "  failed "
     << result.failures.size() << "\n";
  return 0;
}

int cmd_audit(const Common& common, const fs::path& in, const fs::path& out, std::string histogram,
              std::ostream& os) {
  const auto config = common.load();
  const auto samples = load_dataset(in);
  auto providers = make_providers(config);
  const auto report = similarity_audit(*providers.embed, config.embed_model, samples);
  write_text_file(out, to_json(report).dump(2) + "\n");
  if (histogram.empty()) histogram = out.string() + ".histogram.csv";
  std::ostringstream csv;
  csv << "lo,hi,count\n" << std::fixed << std::setprecision(1);
  for (std::size_t i = 0; i < report.histogram.size(); ++i) {
    const double lo = -1.0 + report.bin_width * static_cast<double>(i);
    csv << lo << "," << lo + report.bin_width << "," << report.histogram[i] << "\n";
  }
  write_text_file(histogram, csv.str());
  write_manifest(out, "audit", config, &providers, {in});

  os << std::fixed << std::setprecision(4) << "pairs " << report.pairs << "  mean cosine " << report.mean
     << "  std " << report.std << "  mean rouge-l recall " << report.mean_rouge_recall << "\n";
  os << "deciles";
  for (double d : report.deciles) os << " " << d;
  os << "\n";
  return 0;
}

int cmd_selftest(const Common& common, std::string fixtures, const std::string& out, std::ostream& os) {
  if (fixtures.empty()) fixtures = (default_data_dir() / "fixtures" / "selftest").string();
  const auto run = run_fixture(fixtures, std::max(1, common.jobs));
  if (!out.empty()) write_text_file(out, dump_reports(run.reports));
  print_eval(os, run.eval);
  os << "gated pairs " << run.gated_pairs << "  adjudication calls " << run.adjudicate_calls << "\n";
  const bool ok = run.eval.matrix == run.expected && run.gated_pairs == run.adjudicate_calls;
  os << "selftest " << (ok ? "passed" : "FAILED") << "\n";
  return ok ? 0 : 1;
}

}  // namespace

FixtureRun run_fixture(const fs::path& dir, int jobs) {
  auto config = load_config(dir / "config.json", {"jobs=" + std::to_string(std::max(1, jobs))});
  auto providers = make_providers(config);
  auto counting = std::make_shared<CountingChat>(providers.chat);
  providers.chat = counting;

  const auto samples = load_dataset(dir / "dataset.jsonl");
  const Detector detector(config, providers, prompts_for(config), stopwords_for(config));

  FixtureRun run;
  run.reports = detect_dataset(detector, samples, config.jobs);
  run.eval = score(run.reports);
  run.adjudicate_calls = counting->count("adjudicate");
  for (const auto& r : run.reports) {
    for (const auto& row : r.rows) run.gated_pairs += row.verdict.gated ? 1 : 0;
  }

  const auto expected = json::parse(read_text_file(dir / "expected.json"));
  const auto& c = expected.at("confusion");
  run.expected = {c.at("tp").get<std::uint64_t>(), c.at("fp").get<std::uint64_t>(), c.at("tn").get<std::uint64_t>(),
                  c.at("fn").get<std::uint64_t>()};
  return run;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Word-level medical fabrication benchmark generation and detection"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Run configuration (flat JSON)");
    sub->add_option("--set", common.overrides, "Override a config field: key=value")->take_all();
    sub->add_option("--jobs", common.jobs, "Worker threads")->check(CLI::PositiveNumber);
  };

  std::string in, out_path, extra, extra2;
  std::vector<std::string> inputs;
  double ratio = 0.8;

  auto* generate = app.add_subcommand("generate", "Rewrite ground truths and build QC-filtered fabrications");
  add_common(generate);
  generate->add_option("--in", in, "Input dataset")->required();
  generate->add_option("--out", out_path, "Output dataset")->required();
  generate->add_option("--trace", extra, "QC trace file (default <out>.qc.jsonl)");

  auto* detect = app.add_subcommand("detect", "Run the detector over every instance of a dataset");
  add_common(detect);
  detect->add_option("--in", in, "Input dataset")->required();
  detect->add_option("--out", out_path, "Detection reports (JSON lines)")->required();

  auto* split = app.add_subcommand("split", "Topic- and question-disjoint train/test split");
  add_common(split);
  split->add_option("--in", in, "Input dataset")->required();
  split->add_option("--train", extra, "Train output")->required();
  split->add_option("--test", extra2, "Test output")->required();
  split->add_option("--ratio", ratio, "Train share")->check(CLI::Range(0.0, 1.0));

  auto* score_cmd = app.add_subcommand("score", "Score detection reports");
  add_common(score_cmd);
  score_cmd->add_option("--in", in, "Detection reports")->required();
  score_cmd->add_option("--out", out_path, "Evaluation report (JSON)");

  auto* variance_cmd = app.add_subcommand("variance", "Spread of metrics across runs");
  add_common(variance_cmd);
  variance_cmd->add_option("--in", inputs, "Evaluation or detection report files")->required();
  variance_cmd->add_option("--out", out_path, "Variance report (JSON)");

  auto* variant = app.add_subcommand("variant", "Replace human ground truths by their restyled rewrites");
  add_common(variant);
  variant->add_option("--in", in, "Input dataset")->required();
  variant->add_option("--out", out_path, "Output dataset")->required();

  auto* audit = app.add_subcommand("audit", "Embedding similarity between ground truths and fabrications");
  add_common(audit);
  audit->add_option("--in", in, "Dataset")->required();
  audit->add_option("--out", out_path, "Audit report (JSON)")->required();
  audit->add_option("--histogram", extra, "Histogram CSV (default <out>.histogram.csv)");

  auto* selftest = app.add_subcommand("selftest", "Run the bundled replay fixture and check its oracle");
  selftest->add_option("--fixtures", extra, "Fixture directory");
  selftest->add_option("--out", out_path, "Write the detection reports here");
  selftest->add_option("--jobs", common.jobs, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : exit_code(ErrorCategory::kConfig);
  }

  try {
    if (*generate) return cmd_generate(common, in, out_path, extra, out, err);
    if (*detect) return cmd_detect(common, in, out_path, out);
    if (*split) return cmd_split(common, in, extra, extra2, ratio, out);
    if (*score_cmd) return cmd_score(common, in, out_path, out);
    if (*variance_cmd) return cmd_variance(common, inputs, out_path, out);
    if (*variant) return cmd_variant(common, in, out_path, out, err);
    if (*audit) return cmd_audit(common, in, out_path, extra, out);
    if (*selftest) return cmd_selftest(common, extra, out_path, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace medfab::cli
