#include <gtest/gtest.h>

#include "fixture_script.hpp"
#include "medfab/errors.hpp"
#include "medfab/hybrid_eval.hpp"
#include "test_support.hpp"

using namespace medfab;
using nlohmann::json;

namespace {

// Returns the listed vectors verbatim, without normalising.
class FixedEmbed : public EmbedProvider {
 public:
  explicit FixedEmbed(std::map<std::string, Embedding> table) : table_(std::move(table)) {}
  std::vector<Embedding> embed(const EmbedRequest& req) override {
    std::vector<Embedding> out;
    for (const auto& t : req.inputs) out.push_back(table_.at(t));
    return out;
  }
  std::string id() const override { return "fixed"; }

 private:
  std::map<std::string, Embedding> table_;
};

PairVerdict conflict(bool yes) {
  PairVerdict v;
  v.gated = yes;
  v.adjudication = yes ? Adjudication::kConflict : Adjudication::kSkipped;
  v.final_conflict = yes;
  return v;
}

const std::string kTruth = "Metformin lowers hepatic glucose production.";
const std::string kFab = "Metformin raises hepatic glucose production.";
const std::string kTruthRow = "Metformin — lowers hepatic glucose production";
const std::string kFabRow = "Metformin — raises hepatic glucose production";

json script_spec() {
  return json{{"tables",
               {{kTruth, json::array({json::array({"Metformin", "lowers hepatic glucose production"})})},
                {kFab, json::array({json::array({"Metformin", "raises hepatic glucose production"})})},
                {"Unparseable statement.", "no table here"}}},
              {"fill_source", {{kFabRow, kTruthRow}}}};
}

struct Harness {
  fixture::Script script{script_spec()};
  std::shared_ptr<CountingChat> chat;
  std::shared_ptr<MockEmbedder> embed = std::make_shared<MockEmbedder>(64);
  RunConfig config = load_config(std::nullopt, {"chat_model=m", "seed=3"});

  Harness() { chat = std::make_shared<CountingChat>(script.provider("scripted")); }

  Detector detector() const { return Detector(config, Providers{chat, embed}, PromptLibrary(), Stopwords()); }
};

}  // namespace

TEST(Gate, IdenticalTextsSkipTheEmbedder) {
  MockEmbedder m;
  const auto g = gate(m, "e", "same text", "same text", 0.85);
  EXPECT_EQ(g.similarity, 1.0);
  EXPECT_FALSE(g.gated);
  EXPECT_EQ(m.calls(), 0u);
}

TEST(Gate, ScriptedLowSimilarityIsGated) {
  MockEmbedder m;
  m.script_pair("a text", "b text", 0.30);
  const auto g = gate(m, "e", "a text", "b text", 0.85);
  EXPECT_NEAR(g.similarity, 0.30, 1e-12);
  EXPECT_TRUE(g.gated);
}

TEST(Gate, ThresholdIsStrict) {
  EXPECT_FALSE(is_gated(0.85, 0.85));
  EXPECT_TRUE(is_gated(std::nextafter(0.85, 0.0), 0.85));
  FixedEmbed e({{"x", {3.0, 4.0}}, {"y", {4.0, 3.0}}});
  const auto g = gate(e, "e", "x", "y", 0.96);
  ASSERT_EQ(g.similarity, 0.96);
  EXPECT_FALSE(g.gated);
  EXPECT_TRUE(gate(e, "e", "x", "y", 0.9600001).gated);
}

TEST(Adjudication, Parse) {
  EXPECT_EQ(parse_adjudication("CONFLICT"), Adjudication::kConflict);
  EXPECT_EQ(parse_adjudication("  benign.\n"), Adjudication::kBenign);
  EXPECT_FALSE(parse_adjudication("It is a conflict"));
  EXPECT_FALSE(parse_adjudication(""));
}

TEST(Adjudication, ScriptedAnswers) {
  AdjudicateOptions o;
  o.model = "m";
  ScriptedChat conflict_chat([](const ChatRequest& r) {
    EXPECT_EQ(r.tag, "adjudicate");
    return std::string("CONFLICT");
  });
  EXPECT_EQ(adjudicate(conflict_chat, PromptLibrary(), "tumor grows", "tumor grows", "tumour shrinks", {}, o),
            Adjudication::kConflict);
  ScriptedChat synonym_chat([](const ChatRequest&) { return std::string("BENIGN"); });
  EXPECT_EQ(adjudicate(synonym_chat, PromptLibrary(), "tumor", "tumor", "neoplasm", {}, o), Adjudication::kBenign);
  ScriptedChat prose([](const ChatRequest&) { return std::string("Well, it depends."); });
  EXPECT_THROW(adjudicate(prose, PromptLibrary(), "a", "a", "b", {}, o), FormatError);
  EXPECT_EQ(prose.calls(), 3u);
}

TEST(Aggregate, CountingRule) {
  EXPECT_EQ(aggregate({}, 1), Label::kGroundTruth);
  EXPECT_EQ(aggregate({conflict(true)}, 1), Label::kFabrication);
  EXPECT_EQ(aggregate({conflict(false), conflict(false), conflict(true)}, 2), Label::kGroundTruth);
  EXPECT_EQ(aggregate({conflict(true), conflict(false), conflict(true)}, 2), Label::kFabrication);
  auto failed = conflict(true);
  failed.adjudication = Adjudication::kFailed;
  failed.final_conflict = false;
  EXPECT_EQ(aggregate({failed}, 1), Label::kGroundTruth);
  EXPECT_THROW(aggregate({}, 0), PreconditionError);
}

TEST(Detector, ConsistentEvidenceMeansGroundTruth) {
  Harness h;
  const auto sample = medfab::testing::make_sample("s1", kTruth, kFab);
  const auto r = h.detector().detect({"s1", kTruth, Label::kGroundTruth}, sample);
  ASSERT_TRUE(r.predicted);
  EXPECT_EQ(*r.predicted, Label::kGroundTruth);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].verdict.embed_similarity, 1.0);
  EXPECT_FALSE(r.rows[0].verdict.gated);
  EXPECT_EQ(h.chat->count("adjudicate"), 0u);
  EXPECT_EQ(h.embed->calls(), 0u);
}

TEST(Detector, FlippedWordIsCaught) {
  Harness h;
  const auto sample = medfab::testing::make_sample("s1", kTruth, kFab);
  const auto r = h.detector().detect({"s1", kFab, Label::kFabrication}, sample);
  ASSERT_TRUE(r.predicted);
  EXPECT_EQ(*r.predicted, Label::kFabrication);
  ASSERT_EQ(r.rows.size(), 1u);
  const auto& row = r.rows[0];
  EXPECT_TRUE(row.verdict.gated);
  EXPECT_EQ(row.verdict.adjudication, Adjudication::kConflict);
  EXPECT_TRUE(row.verdict.final_conflict);
  // Exactly one reconstruction restored the evidence word.
  EXPECT_NE(row.reconstruction_a == kTruthRow, row.reconstruction_b == kTruthRow);
  EXPECT_EQ(h.chat->count("adjudicate"), 1u);
}

TEST(Detector, OriginalCompareMode) {
  Harness h;
  h.config.compare_mode = CompareMode::kOriginal;
  const auto sample = medfab::testing::make_sample("s1", kTruth, kFab);
  const auto fab = h.detector().detect({"s1", kFab, Label::kFabrication}, sample);
  EXPECT_EQ(*fab.predicted, Label::kFabrication);
  EXPECT_LT(*fab.rows[0].verdict.embed_similarity, 0.85);
  const auto gt = h.detector().detect({"s1", kTruth, Label::kGroundTruth}, sample);
  EXPECT_EQ(*gt.predicted, Label::kGroundTruth);
}

TEST(Detector, UndecomposableStatementIsUndetectable) {
  Harness h;
  h.config.keep_raw = true;
  auto sample = medfab::testing::make_sample("s1", kTruth, "Unparseable statement.");
  const auto r = h.detector().detect({"s1", "Unparseable statement.", Label::kFabrication}, sample);
  EXPECT_TRUE(r.undetectable());
  ASSERT_TRUE(r.undetectable_reason);
  EXPECT_EQ(r.raw_table, std::vector<std::string>{"no table here"});
  EXPECT_EQ(h.chat->count("text2table"), 3u);
}

TEST(Detector, DatasetRunsAreDeterministicAndOrdered) {
  auto sample = medfab::testing::make_sample("s1", kTruth, kFab);
  sample.qc_meta = QcMeta{0.8, 1, QcStatus::kAccepted};
  auto no_knowledge = medfab::testing::make_sample("s2", kTruth, kFab);
  no_knowledge.knowledge.clear();
  std::string first;
  for (int run = 0; run < 2; ++run) {
    Harness h;
    const auto reports = detect_dataset(h.detector(), {sample, no_knowledge}, run + 1);
    ASSERT_EQ(reports.size(), 4u);
    EXPECT_EQ(reports[0].instance_id, "s1#gt");
    EXPECT_EQ(reports[1].instance_id, "s1#fab");
    EXPECT_TRUE(reports[2].undetectable());
    std::string dump;
    for (const auto& r : reports) dump += to_json(r).dump() + "\n";
    if (run == 0) first = dump;
    else EXPECT_EQ(dump, first);
  }
}

TEST(Report, JsonRoundTrip) {
  Harness h;
  h.config.keep_raw = true;
  const auto sample = medfab::testing::make_sample("s1", kTruth, kFab);
  const auto r = h.detector().detect({"s1", kFab, Label::kFabrication}, sample);
  const auto j = to_json(r);
  const auto back = detection_report_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.rows.size(), 1u);
  EXPECT_FALSE(back.rows[0].raw_fills.empty());
  EXPECT_THROW(detection_report_from_json(json{{"sample_id", "x"}}), DataError);
}
