#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "medfab/bench.hpp"
#include "medfab/hybrid_eval.hpp"

namespace medfab::cli {

/// Entry point behind the `medfab` binary. Returns the process exit status:
/// 0 on success, 2 for configuration errors, 3 for provider errors, 4 for
/// data errors, 1 for anything else (including a failed selftest).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Data directory holding templates, stopwords and fixtures: $MEDFAB_DATA_DIR
/// when set, the source tree's data/ otherwise.
std::filesystem::path default_data_dir();

/// Outcome of running the detector over a replay fixture directory
/// (config.json, dataset.jsonl, expected.json).
struct FixtureRun {
  std::vector<DetectionReport> reports;
  EvalReport eval;
  ConfusionMatrix expected;
  std::uint64_t adjudicate_calls = 0;
  std::uint64_t gated_pairs = 0;
};

FixtureRun run_fixture(const std::filesystem::path& dir, int jobs = 1);

}  // namespace medfab::cli
