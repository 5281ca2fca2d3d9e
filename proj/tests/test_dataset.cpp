#include <gtest/gtest.h>

#include "medfab/errors.hpp"
#include "medfab/sample.hpp"
#include "test_support.hpp"

using namespace medfab;
using medfab::testing::make_sample;
using medfab::testing::TempDir;

TEST(Dataset, EmptyFileIsEmptyList) {
  TempDir dir;
  write_text_file(dir / "d.jsonl", "");
  EXPECT_TRUE(load_dataset(dir / "d.jsonl").empty());
}

TEST(Dataset, RoundTripPreservesEverything) {
  TempDir dir;
  auto a = make_sample("s1");
  a.qc_meta = QcMeta{0.8, 2, QcStatus::kAccepted};
  a.rewrite_rouge_recall = 0.5;
  a.extra = {{"source", "external"}, {"difficulty", 3}};
  auto b = make_sample("s2");
  b.gt_llm.reset();
  b.topic.reset();
  Sample c;
  c.id = "s3";
  c.question = "q";
  save_dataset({a, b, c}, dir / "d.jsonl");
  const auto back = load_dataset(dir / "d.jsonl");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0], a);
  EXPECT_EQ(back[1], b);
  EXPECT_EQ(back[2], c);
}

TEST(Dataset, AbsentOptionalsAreOmitted) {
  Sample s;
  s.id = "s1";
  s.question = "q";
  const std::string line = to_json(s).dump();
  for (const char* key : {"gt_human", "gt_llm", "fabrication", "topic", "qc_meta", "rewrite_rouge_recall", "null"}) {
    EXPECT_EQ(line.find(key), std::string::npos) << key;
  }
}

TEST(Dataset, SaveEmptyListWritesEmptyFile) {
  TempDir dir;
  save_dataset({}, dir / "d.jsonl");
  EXPECT_EQ(read_text_file(dir / "d.jsonl"), "");
}

TEST(Dataset, DuplicateIdNamesTheId) {
  TempDir dir;
  write_text_file(dir / "d.jsonl",
                  "{\"id\":\"s1\",\"question\":\"a\"}\n\n{\"id\":\"s1\",\"question\":\"b\"}\n");
  try {
    load_dataset(dir / "d.jsonl");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("'s1'"), std::string::npos);
    EXPECT_NE(what.find(":3:"), std::string::npos);
  }
}

TEST(Dataset, MalformedLinesAreDataErrors) {
  TempDir dir;
  write_text_file(dir / "a.jsonl", "{\"id\":\"s1\",\"question\":\"a\"}\n{not json\n");
  EXPECT_THROW(load_dataset(dir / "a.jsonl"), DataError);
  write_text_file(dir / "b.jsonl", "{\"question\":\"a\"}\n");
  EXPECT_THROW(load_dataset(dir / "b.jsonl"), DataError);
  write_text_file(dir / "c.jsonl", "{\"id\":\"s\",\"question\":\"a\",\"knowledge\":3}\n");
  EXPECT_THROW(load_dataset(dir / "c.jsonl"), DataError);
  EXPECT_THROW(load_dataset(dir / "missing.jsonl"), DataError);
}

TEST(Dataset, KnowledgeAcceptsSinglePassage) {
  const auto s = sample_from_json({{"id", "s"}, {"question", "q"}, {"knowledge", "one passage"}});
  EXPECT_EQ(s.knowledge, std::vector<std::string>{"one passage"});
}

TEST(Instances, AcceptedSamplesGiveOnePairEach) {
  auto a = make_sample("a");
  a.qc_meta = QcMeta{0.9, 1, QcStatus::kAccepted};
  auto r = make_sample("r");
  r.qc_meta = QcMeta{0.3, 5, QcStatus::kRejected};
  r.fabrication.reset();
  auto p = make_sample("p");
  p.qc_meta = QcMeta{0.0, 0, QcStatus::kPending};
  auto plain = make_sample("plain");  // no QC metadata: an external benchmark
  plain.gt_llm.reset();
  const auto inst = expand_instances({a, r, p, plain});
  ASSERT_EQ(inst.size(), 4u);
  EXPECT_EQ(inst[0].instance_id(), "a#gt");
  EXPECT_EQ(inst[0].text, *a.gt_llm);
  EXPECT_EQ(inst[1].instance_id(), "a#fab");
  EXPECT_EQ(inst[1].label, Label::kFabrication);
  EXPECT_EQ(inst[2].text, *plain.gt_human);
  EXPECT_EQ(inst[3].text, *plain.fabrication);
}

TEST(Validate, AcceptedNeedsFabricationAboveThreshold) {
  auto s = make_sample("s");
  s.qc_meta = QcMeta{0.69, 1, QcStatus::kAccepted};
  EXPECT_THROW(validate_sample(s, 0.7), DataError);
  s.qc_meta->rouge_recall = 0.7;
  EXPECT_NO_THROW(validate_sample(s, 0.7));
  s.fabrication.reset();
  EXPECT_THROW(validate_sample(s, 0.7), DataError);
}

TEST(Labels, ParseAndPrint) {
  EXPECT_EQ(parse_label("fabrication"), Label::kFabrication);
  EXPECT_EQ(to_string(Label::kGroundTruth), "ground_truth");
  EXPECT_THROW(parse_label("maybe"), DataError);
  EXPECT_EQ(parse_qc_status(to_string(QcStatus::kRejected)), QcStatus::kRejected);
}
