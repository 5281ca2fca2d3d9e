#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "medfab/bench.hpp"
#include "medfab/cli.hpp"
#include "medfab/hashing.hpp"
#include "medfab/sample.hpp"
#include "test_support.hpp"

using namespace medfab;
using medfab::testing::make_sample;
using medfab::testing::TempDir;
using nlohmann::json;

namespace {

const std::filesystem::path kFixture = MEDFAB_FIXTURE_DIR;

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "medfab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Cli, MissingConfigExitsTwo) {
  TempDir dir;
  const auto r = run_cli({"score", "--config", (dir / "nope.json").string(), "--in", (dir / "x").string()});
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_NE(r.err.find("config"), std::string::npos);
}

TEST(Cli, UnknownOverrideExitsTwo) {
  TempDir dir;
  write_text_file(dir / "r.jsonl", "");
  const auto r = run_cli({"score", "--set", "no_such_key=1", "--in", (dir / "r.jsonl").string()});
  EXPECT_EQ(r.code, 2) << r.err;
}

TEST(Cli, BadArgumentsExitTwo) {
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"detect"}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
}

TEST(Cli, EmptyReportFileExitsFour) {
  TempDir dir;
  write_text_file(dir / "r.jsonl", "");
  const auto r = run_cli({"score", "--in", (dir / "r.jsonl").string()});
  EXPECT_EQ(r.code, 4) << r.err;
}

TEST(Cli, MalformedDatasetExitsFour) {
  TempDir dir;
  write_text_file(dir / "d.jsonl", "{not json\n");
  const auto r = run_cli({"split", "--in", (dir / "d.jsonl").string(), "--train", (dir / "a").string(), "--test",
                          (dir / "b").string()});
  EXPECT_EQ(r.code, 4) << r.err;
}

TEST(Cli, SelftestPasses) {
  const auto r = run_cli({"selftest", "--fixtures", kFixture.string()});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("selftest passed"), std::string::npos);
}

TEST(Cli, DetectIsByteIdenticalAndWritesManifest) {
  TempDir dir;
  std::string first;
  for (const char* jobs : {"1", "3"}) {
    const auto out = dir / (std::string("r") + jobs + ".jsonl");
    const auto r = run_cli({"detect", "--config", (kFixture / "config.json").string(), "--in",
                            (kFixture / "dataset.jsonl").string(), "--out", out.string(), "--jobs", jobs});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto text = read_text_file(out);
    if (first.empty()) first = text;
    else EXPECT_EQ(text, first);
  }

  const auto manifest = json::parse(read_text_file(dir / "r1.jsonl.manifest.json"));
  EXPECT_EQ(manifest.at("subcommand"), "detect");
  EXPECT_EQ(manifest.at("seed"), 7);
  EXPECT_EQ(manifest.at("providers").at("chat"), "selftest-fixture");
  EXPECT_EQ(manifest.at("inputs").at(0).at("sha256"), sha256_hex(read_text_file(kFixture / "dataset.jsonl")));
  EXPECT_EQ(manifest.at("config_digest").get<std::string>().size(), 64u);

  const auto scored = run_cli({"score", "--in", (dir / "r1.jsonl").string(), "--out", (dir / "e.json").string()});
  ASSERT_EQ(scored.code, 0) << scored.err;
  const auto eval = eval_report_from_json(json::parse(read_text_file(dir / "e.json")));
  EXPECT_EQ(eval.matrix, (ConfusionMatrix{15, 1, 19, 4}));

  const auto v = run_cli({"variance", "--in", (dir / "e.json").string(), (dir / "r3.jsonl").string(), "--out",
                          (dir / "v.json").string()});
  ASSERT_EQ(v.code, 0) << v.err;
  for (const auto& [key, value] : json::parse(read_text_file(dir / "v.json")).at("std_pp").items()) {
    EXPECT_EQ(value.get<double>(), 0.0) << key;
  }
}

TEST(Cli, SplitWritesDisjointFiles) {
  TempDir dir;
  std::vector<Sample> samples;
  for (int i = 0; i < 6; ++i) {
    auto s = make_sample("s" + std::to_string(i));
    s.topic = "t" + std::to_string(i % 3);
    s.question = "Question " + std::to_string(i) + "?";
    samples.push_back(s);
  }
  save_dataset(samples, dir / "d.jsonl");
  const auto r = run_cli({"split", "--in", (dir / "d.jsonl").string(), "--train", (dir / "train.jsonl").string(),
                          "--test", (dir / "test.jsonl").string(), "--ratio", "0.6", "--set", "seed=3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto train = load_dataset(dir / "train.jsonl");
  const auto test = load_dataset(dir / "test.jsonl");
  EXPECT_EQ(train.size() + test.size(), 6u);
  for (const auto& a : train) {
    for (const auto& b : test) EXPECT_NE(*a.topic, *b.topic);
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "test.jsonl.manifest.json"));
}

TEST(Cli, AuditWithMockEmbedder) {
  TempDir dir;
  auto s = make_sample("a");
  s.qc_meta = QcMeta{0.8, 1, QcStatus::kAccepted};
  save_dataset({s}, dir / "d.jsonl");
  const auto r = run_cli({"audit", "--in", (dir / "d.jsonl").string(), "--out", (dir / "a.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(read_text_file(dir / "a.json")).at("pairs"), 1);
  const auto csv = read_text_file(dir / "a.json.histogram.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);
}

// generate against a local OpenAI-compatible stub that answers every prompt
// with the same word, so QC rejects every candidate as unchanged.
TEST(Cli, GenerateAgainstLocalServerUsesCache) {
  httplib::Server server;
  std::atomic<int> calls{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    const json reply{{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", "Metformin"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  TempDir dir;
  ::setenv("MEDFAB_TEST_API_KEY", "sk-test", 1);
  auto s = make_sample("a");
  s.gt_llm.reset();
  s.fabrication.reset();
  save_dataset({s}, dir / "in.jsonl");
  std::vector<std::string> args{"generate", "--in", (dir / "in.jsonl").string(), "--set",
                                "chat_base_url=http://127.0.0.1:" + std::to_string(port) + "/v1", "--set",
                                "api_key_env=MEDFAB_TEST_API_KEY", "--set", "cache_dir=" + (dir / "cache").string(),
                                "--set", "max_qc_iters=2", "--out"};

  auto first = args;
  first.push_back((dir / "out1.jsonl").string());
  const auto r1 = run_cli(first);
  ASSERT_EQ(r1.code, 0) << r1.err;
  const int live_calls = calls.load();
  EXPECT_EQ(live_calls, 3);  // rewrite, then two unchanged candidates

  auto second = args;
  second.push_back((dir / "out2.jsonl").string());
  const auto r2 = run_cli(second);
  ASSERT_EQ(r2.code, 0) << r2.err;
  EXPECT_EQ(calls.load(), live_calls);
  server.stop();
  thread.join();

  EXPECT_EQ(read_text_file(dir / "out1.jsonl"), read_text_file(dir / "out2.jsonl"));
  const auto out = load_dataset(dir / "out1.jsonl");
  EXPECT_EQ(out[0].qc_meta->status, QcStatus::kRejected);
  const auto trace = read_json_lines(dir / "out1.jsonl.qc.jsonl");
  EXPECT_EQ(trace[0].at("rounds").size(), 2u);
  EXPECT_NE(r1.out.find("rejected 1"), std::string::npos);
}
