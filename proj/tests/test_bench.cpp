#include <gtest/gtest.h>

#include <random>

#include "medfab/bench.hpp"
#include "medfab/errors.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace medfab;
using medfab::testing::make_sample;

namespace {

const auto F = Label::kFabrication;
const auto G = Label::kGroundTruth;

Sample topical(const std::string& id, const std::string& topic, const std::string& question = "") {
  auto s = make_sample(id);
  s.topic = topic;
  s.question = question.empty() ? "What about " + id + "?" : question;
  return s;
}

}  // namespace

TEST(Metrics, WorkedExample) {
  const auto r = evaluate({2, 1, 2, 1});
  EXPECT_DOUBLE_EQ(r.fabrication.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.fabrication.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.fabrication.f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.ground_truth.f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.overall.f1, 2.0 / 3.0);
}

TEST(Metrics, AlwaysGroundTruthPredictor) {
  std::vector<std::pair<Label, Label>> pairs{{F, G}, {F, G}, {G, G}, {G, G}};
  const auto r = score(pairs);
  EXPECT_EQ(r.fabrication.recall, 0.0);
  EXPECT_EQ(r.fabrication.precision, 0.0);
  EXPECT_EQ(r.fabrication.f1, 0.0);
  EXPECT_DOUBLE_EQ(r.ground_truth.recall, 1.0);
  EXPECT_DOUBLE_EQ(r.ground_truth.precision, 0.5);
}

TEST(Metrics, EmptyInputIsDataError) {
  EXPECT_THROW(score(std::vector<std::pair<Label, Label>>{}), DataError);
  EXPECT_THROW(evaluate({}), DataError);
}

TEST(Metrics, MatchesOracleOnRandomMatrices) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    ConfusionMatrix m{rng() % 6, rng() % 6, rng() % 6, rng() % 6};
    if (trial == 0) m = {0, 0, 3, 2};  // P + R = 0 for fabrication
    if (m.total() == 0) m.tn = 1;
    const auto pairs = oracle::pairs_from(m);
    const auto r = score(pairs);
    EXPECT_EQ(r.matrix, m);
    const auto fab = oracle::class_scores(pairs, F);
    const auto gt = oracle::class_scores(pairs, G);
    EXPECT_NEAR(r.fabrication.precision, fab.p, 1e-12);
    EXPECT_NEAR(r.fabrication.recall, fab.r, 1e-12);
    EXPECT_NEAR(r.fabrication.f1, fab.f1, 1e-12);
    EXPECT_NEAR(r.ground_truth.f1, gt.f1, 1e-12);
    EXPECT_NEAR(r.overall.f1, (fab.f1 + gt.f1) / 2, 1e-12);
    EXPECT_NEAR(r.overall.precision, (fab.p + gt.p) / 2, 1e-12);
  }
}

TEST(Metrics, JsonRoundTrip) {
  const auto r = evaluate({3, 1, 4, 2}, 5);
  const auto back = eval_report_from_json(to_json(r));
  EXPECT_EQ(back.matrix, r.matrix);
  EXPECT_EQ(back.excluded_undetectable, 5u);
  EXPECT_DOUBLE_EQ(back.overall.f1, r.overall.f1);
}

TEST(Metrics, ReportsExcludeUndetectable) {
  DetectionReport a, b, c;
  a.label = F;
  a.predicted = F;
  b.label = G;
  b.predicted = F;
  c.label = F;
  c.undetectable_reason = "decomposition failed";
  const auto r = score(std::vector<DetectionReport>{a, b, c});
  EXPECT_EQ(r.matrix, (ConfusionMatrix{1, 1, 0, 0}));
  EXPECT_EQ(r.excluded_undetectable, 1u);
  EXPECT_THROW(score(std::vector<DetectionReport>{c}), DataError);
}

TEST(Variance, PercentagePoints) {
  EXPECT_EQ(population_std({0.5, 0.5, 0.5}), 0.0);
  EXPECT_NEAR(population_std({0.60, 0.62}), 0.01, 1e-12);

  EvalReport x = evaluate({1, 1, 1, 1}), y = x;
  x.overall.f1 = 0.60;
  y.overall.f1 = 0.62;
  const auto v = variance({x, y});
  EXPECT_NEAR(v.at("overall.f1"), 1.00, 1e-9);
  EXPECT_EQ(v.at("fabrication.precision"), 0.0);
  EXPECT_EQ(v.size(), 9u);
  EXPECT_THROW(variance({x}), DataError);
}

TEST(Variance, IdenticalReportsAreExactlyZero) {
  const auto r = evaluate({7, 3, 11, 2});
  for (const auto& [key, value] : variance({r, r, r})) EXPECT_EQ(value, 0.0) << key;
}

TEST(Split, TwoTopics) {
  const std::vector<Sample> s{topical("a", "A"), topical("b", "B")};
  const auto split = split_disjoint(s, 0.5, 1);
  EXPECT_EQ(oracle::check_split(s, split), "");
  EXPECT_EQ(split.train.size(), 1u);
}

TEST(Split, TenTopicsRatio) {
  std::vector<Sample> s;
  for (int i = 0; i < 10; ++i) s.push_back(topical("s" + std::to_string(i), "t" + std::to_string(i)));
  const auto split = split_disjoint(s, 0.7, 3);
  EXPECT_EQ(oracle::check_split(s, split), "");
  EXPECT_EQ(split.train.size(), 7u);
  const auto again = split_disjoint(s, 0.7, 3);
  ASSERT_EQ(again.train.size(), split.train.size());
  for (std::size_t i = 0; i < split.train.size(); ++i) EXPECT_EQ(again.train[i].id, split.train[i].id);
}

TEST(Split, SharedQuestionJoinsGroups) {
  const std::vector<Sample> s{topical("a", "A", "Does aspirin thin blood?"),
                              topical("b", "B", "does ASPIRIN thin blood"), topical("c", "C"),
                              topical("d", "D")};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto split = split_disjoint(s, 0.5, seed);
    EXPECT_EQ(oracle::check_split(s, split), "") << seed;
  }
}

TEST(Split, Infeasible) {
  EXPECT_THROW(split_disjoint({topical("a", "A"), topical("b", "A")}, 0.8, 1), DataError);
  auto no_topic = topical("c", "C");
  no_topic.topic.reset();
  EXPECT_THROW(split_disjoint({topical("a", "A"), no_topic}, 0.8, 1), DataError);
  EXPECT_THROW(split_disjoint({topical("a", "A"), topical("b", "B")}, 1.0, 1), PreconditionError);
}

TEST(Split, RandomDatasetsStayDisjoint) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const int topics = 2 + static_cast<int>(rng() % 12);
    std::vector<Sample> s;
    for (int i = 0; i < 40; ++i) {
      s.push_back(topical("s" + std::to_string(i), "t" + std::to_string(rng() % topics),
                          "q" + std::to_string(rng() % 25)));
    }
    try {
      EXPECT_EQ(oracle::check_split(s, split_disjoint(s, 0.8, rng())), "");
    } catch (const DataError&) {
      // shared questions collapsed everything into one group
    }
  }
}

TEST(Audit, MeanOfTwoPairs) {
  MockEmbedder embed(8);
  auto a = make_sample("a", "Truth one.", "Fake one.");
  auto b = make_sample("b", "Truth two.", "Truth two.");
  a.qc_meta = QcMeta{0.8, 1, QcStatus::kAccepted};
  b.qc_meta = QcMeta{1.0, 1, QcStatus::kAccepted};
  embed.script_pair("Truth one.", "Fake one.", 0.8);
  auto rejected = make_sample("c");
  rejected.qc_meta = QcMeta{0.2, 5, QcStatus::kRejected};
  const auto r = similarity_audit(embed, "m", {a, b, rejected});
  EXPECT_EQ(r.pairs, 2u);
  EXPECT_NEAR(r.mean, 0.9, 1e-9);
  EXPECT_NEAR(r.std, 0.1, 1e-9);
  // Recall is recomputed from the texts: 1/2 for the first pair, 1 for the second.
  EXPECT_NEAR(r.mean_rouge_recall, 0.75, 1e-12);
  ASSERT_EQ(r.deciles.size(), 9u);
  EXPECT_NEAR(r.deciles[4], 0.9, 1e-9);
  ASSERT_EQ(r.histogram.size(), 20u);
  EXPECT_EQ(r.histogram[19], 1u);  // similarity 1.0 lands in the last bin
  EXPECT_THROW(similarity_audit(embed, "m", {rejected}), DataError);
}

TEST(Audit, Quantiles) {
  const std::vector<double> v{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.1), 1.4);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 1.0), 5.0);
}

TEST(Variant, EchoAndParaphrase) {
  const auto config = load_config(std::nullopt, {"chat_model=m"});
  auto s = make_sample("a");
  s.gt_llm.reset();
  ScriptedChat echo([](const ChatRequest& r) { return r.meta.at("ground_truth"); });
  auto out = make_rewritten_variant(echo, PromptLibrary(), config, {s}, 1);
  EXPECT_EQ(out.samples[0], s);
  EXPECT_TRUE(make_rewritten_variant(echo, PromptLibrary(), config, {}, 1).samples.empty());

  ScriptedChat para([](const ChatRequest&) { return std::string("Metformin reduces liver glucose output."); });
  out = make_rewritten_variant(para, PromptLibrary(), config, {s}, 1);
  EXPECT_EQ(*out.samples[0].gt_human, "Metformin reduces liver glucose output.");
  EXPECT_EQ(out.samples[0].fabrication, s.fabrication);
  EXPECT_TRUE(out.failures.empty());
  const auto instances = expand_instances(out.samples);
  ASSERT_EQ(instances.size(), 2u);
  EXPECT_EQ(instances[0].text, "Metformin reduces liver glucose output.");

  auto generated = make_sample("b");
  generated.gt_llm = "Metformin suppresses hepatic glucose output.";
  out = make_rewritten_variant(para, PromptLibrary(), config, {generated}, 1);
  EXPECT_FALSE(out.samples[0].gt_llm);

  ScriptedChat empty([](const ChatRequest&) { return std::string(); });
  out = make_rewritten_variant(empty, PromptLibrary(), config, {s}, 1);
  EXPECT_EQ(out.samples[0], s);
  EXPECT_EQ(out.failures.size(), 1u);
}
