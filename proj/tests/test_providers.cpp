#include <gtest/gtest.h>

#include "medfab/errors.hpp"
#include "medfab/providers.hpp"
#include "medfab/text_metrics.hpp"
#include "test_support.hpp"

using namespace medfab;
using medfab::testing::TempDir;

namespace {

ChatRequest request(std::string text = "hello", double temperature = 0.0) {
  ChatRequest r;
  r.model = "m";
  r.temperature = temperature;
  r.messages = {{Role::kSystem, "sys"}, {Role::kUser, std::move(text)}};
  return r;
}

}  // namespace

TEST(CacheKey, StableAndSensitive) {
  const auto a = cache_key("p", request());
  EXPECT_EQ(a, cache_key("p", request()));
  EXPECT_EQ(a.digest.size(), 64u);
  EXPECT_NE(a, cache_key("p", request("hello", 0.1)));
  EXPECT_NE(a, cache_key("q", request()));
  auto seeded = request();
  seeded.seed = 3;
  EXPECT_NE(a, cache_key("p", seeded));
}

TEST(CacheKey, IgnoresLocalFields) {
  auto tagged = request();
  tagged.tag = "maskfill";
  tagged.meta = {{"sentence", "x"}};
  EXPECT_EQ(cache_key("p", tagged), cache_key("p", request()));
}

TEST(CacheKey, KeyOrderDoesNotMatter) {
  EXPECT_EQ(canonicalize_json(R"({"b": 1, "a": {"d": 2, "c": 3}})"), R"({"a":{"c":3,"d":2},"b":1})");
  EXPECT_EQ(cache_key("p", canonicalize_json(R"({"b":1,"a":2})")),
            cache_key("p", canonicalize_json(R"({"a":2, "b":1})")));
}

TEST(WireBody, Fields) {
  auto r = request();
  r.seed = 9;
  r.max_output_tokens = 77;
  r.passthrough = {{"reasoning_effort", "low"}};
  const auto body = wire_body(r);
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["seed"], 9);
  EXPECT_EQ(body["max_completion_tokens"], 77);
  EXPECT_EQ(body["reasoning_effort"], "low");
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][1]["content"], "hello");
  EXPECT_FALSE(wire_body(request()).contains("seed"));
}

TEST(Requests, Validation) {
  ChatRequest empty;
  EXPECT_THROW(empty.validate(), PreconditionError);
  auto bad = request();
  bad.messages.front().role = Role::kAssistant;
  EXPECT_THROW(bad.validate(), PreconditionError);
  EXPECT_THROW((EmbedRequest{"m", {}}.validate()), PreconditionError);
  EXPECT_THROW((EmbedRequest{"m", {"a", "  "}}.validate()), PreconditionError);
}

TEST(CachingChat, SecondCallIsServedFromDisk) {
  TempDir dir;
  auto inner = std::make_shared<ScriptedChat>([](const ChatRequest& r) { return "echo:" + r.messages.back().content; });
  auto store = std::make_shared<ContentStore>(dir / "cache");
  CachingChat cached(inner, store, "p");
  EXPECT_EQ(cached.chat(request()), "echo:hello");
  EXPECT_EQ(cached.chat(request()), "echo:hello");
  EXPECT_EQ(inner->calls(), 1u);
  EXPECT_EQ(cached.hits(), 1u);
  EXPECT_EQ(cached.misses(), 1u);

  // A fresh process over the same directory still hits.
  CachingChat again(inner, std::make_shared<ContentStore>(dir / "cache"), "p");
  EXPECT_EQ(again.chat(request()), "echo:hello");
  EXPECT_EQ(inner->calls(), 1u);
}

TEST(ReplayChat, HitMissAndFallback) {
  TempDir dir;
  ContentStore store(dir.path());
  const auto key = cache_key("p", request());
  store.put(key, "recorded");
  ReplayChat strict(dir.path(), "p", true);
  EXPECT_EQ(strict.chat(request()), "recorded");
  try {
    strict.chat(request("other"));
    FAIL() << "expected a replay miss";
  } catch (const ReplayMissError& e) {
    EXPECT_EQ(e.digest(), cache_key("p", request("other")).digest);
    EXPECT_NE(std::string(e.what()).find(e.digest()), std::string::npos);
  }
  auto fallback = std::make_shared<ScriptedChat>([](const ChatRequest&) { return std::string("live"); });
  ReplayChat lenient(dir.path(), "p", false, fallback);
  EXPECT_EQ(lenient.chat(request("other")), "live");
  EXPECT_EQ(lenient.chat(request()), "recorded");
}

TEST(CountingChat, CountsPerTag) {
  auto inner = std::make_shared<ScriptedChat>([](const ChatRequest&) { return std::string("x"); });
  CountingChat counting(inner);
  auto r = request();
  r.tag = "adjudicate";
  counting.chat(r);
  counting.chat(r);
  r.tag = "maskfill";
  counting.chat(r);
  EXPECT_EQ(counting.count("adjudicate"), 2u);
  EXPECT_EQ(counting.count("maskfill"), 1u);
  EXPECT_EQ(counting.count("other"), 0u);
  EXPECT_EQ(counting.total(), 3u);
}

TEST(MockEmbedder, DeterministicUnitVectors) {
  MockEmbedder a(32), b(32);
  const auto va = a.embed({"m", {"alpha", "beta", "alpha"}});
  ASSERT_EQ(va.size(), 3u);
  EXPECT_EQ(va[0], va[2]);
  EXPECT_EQ(va[0], b.vector_for("alpha"));
  EXPECT_EQ(va[0].size(), 32u);
  EXPECT_NEAR(cosine_similarity(va[0], va[0]), 1.0, 1e-12);
  EXPECT_LT(cosine_similarity(va[0], va[1]), 1.0);
  EXPECT_EQ(a.calls(), 1u);
  EXPECT_THROW(a.embed({"m", {}}), PreconditionError);
}

TEST(MockEmbedder, ScriptedPairs) {
  MockEmbedder m(64);
  for (double target : {0.3, 0.85, 0.95, -0.2, 1.0}) {
    m.script_pair("original text", "variant " + std::to_string(target), target);
    const auto v = m.embed({"m", {"original text", "variant " + std::to_string(target)}});
    EXPECT_NEAR(cosine_similarity(v[0], v[1]), target, 1e-12);
  }
  EXPECT_THROW(m.script_pair("x", "x", 0.5), PreconditionError);
  EXPECT_THROW(m.script_pair("x", "y", 1.5), PreconditionError);
}

TEST(MockEmbedder, LoadsOverrideFile) {
  TempDir dir;
  write_text_file(dir / "o.json", R"({"vectors": {"e1": [1, 0, 0, 0]}, "pairs": [{"a": "e1", "b": "e2", "similarity": 0.5}]})");
  MockEmbedder m(4);
  m.load_overrides(dir / "o.json");
  EXPECT_NEAR(m.vector_for("e1")[0], 1.0, 1e-12);
  EXPECT_NEAR(cosine_similarity(m.vector_for("e1"), m.vector_for("e2")), 0.5, 1e-12);
}

TEST(CachingEmbed, RoundTripsVectorsExactly) {
  TempDir dir;
  auto mock = std::make_shared<MockEmbedder>(16);
  CachingEmbed cached(mock, std::make_shared<ContentStore>(dir.path()), "p");
  const auto first = cached.embed({"m", {"a", "b"}});
  const auto second = cached.embed({"m", {"a", "b"}});
  EXPECT_EQ(first, second);
  EXPECT_EQ(mock->calls(), 1u);
}
