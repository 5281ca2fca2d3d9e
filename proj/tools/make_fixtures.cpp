// Records the replay fixture of a fixture directory: runs the detector with
// the scripted chat behaviour of script.json and stores every response under
// its request digest in the configured replay directory.
#include <filesystem>
#include <iostream>

#include "fixture_script.hpp"
#include "medfab/bench.hpp"
#include "medfab/config.hpp"
#include "medfab/errors.hpp"

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  using namespace medfab;
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <fixture-dir>\n";
    return 2;
  }
  try {
    const fs::path dir = argv[1];
    const auto config = load_config(dir / "config.json");
    const auto script = fixture::Script::load(dir / "script.json");

    fs::remove_all(config.replay_dir);
    fs::create_directories(config.replay_dir);

    auto providers = make_providers(config);
    providers.chat = std::make_shared<CachingChat>(script.provider(config.provider_id),
                                                   std::make_shared<ContentStore>(config.replay_dir),
                                                   config.provider_id);
    const Detector detector(config, providers, PromptLibrary(), Stopwords());
    const auto reports = detect_dataset(detector, load_dataset(dir / "dataset.jsonl"), 1);
    const auto eval = score(reports);

    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(config.replay_dir)) ++files;
    const auto& m = eval.matrix;
    std::cout << "recorded " << files << " responses; tp=" << m.tp << " fp=" << m.fp << " tn=" << m.tn
              << " fn=" << m.fn << " undetectable=" << eval.excluded_undetectable << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.category());
  }
}
