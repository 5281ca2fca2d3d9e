#include "medfab/bench.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "medfab/errors.hpp"
#include "medfab/hashing.hpp"
#include "medfab/parallel.hpp"
#include "medfab/text_metrics.hpp"

namespace medfab {

using nlohmann::json;

std::string normalize_question(std::string_view question) {
  std::string out;
  for (const auto& t : tokenize(question).tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

namespace {

struct DisjointSet {
  std::vector<std::size_t> parent;

  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Unbiased draw in [0, bound) from raw engine output.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

Split split_disjoint(const std::vector<Sample>& samples, double train_ratio, std::uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw PreconditionError("train_ratio must lie in (0, 1)");

  DisjointSet sets(samples.size());
  std::map<std::string, std::size_t> first_by_topic;
  std::map<std::string, std::size_t> first_by_question;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!s.topic || s.topic->empty()) throw DataError("sample '" + s.id + "' has no topic; cannot split");
    if (auto [it, fresh] = first_by_topic.try_emplace(*s.topic, i); !fresh) sets.unite(i, it->second);
    if (auto [it, fresh] = first_by_question.try_emplace(normalize_question(s.question), i); !fresh) {
      sets.unite(i, it->second);
    }
  }

  // Groups keyed by their lowest member index, so the pre-shuffle order is
  // the input order.
  std::map<std::size_t, std::vector<std::size_t>> by_root;
  for (std::size_t i = 0; i < samples.size(); ++i) by_root[sets.find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> groups;
  for (auto& [root, members] : by_root) groups.push_back(std::move(members));
  if (groups.size() < 2) {
    throw DataError("split infeasible: samples form " + std::to_string(groups.size()) +
                    " topic group(s); at least 2 are needed");
  }

  std::mt19937_64 rng(derive_seed(seed, "split"));
  for (std::size_t i = groups.size() - 1; i > 0; --i) {
    std::swap(groups[i], groups[draw_below(rng, i + 1)]);
  }

  const double target = train_ratio * static_cast<double>(samples.size());
  std::vector<bool> in_train(groups.size(), false);
  double train_count = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double with = train_count + static_cast<double>(groups[g].size());
    if (std::abs(with - target) <= std::abs(train_count - target)) {
      in_train[g] = true;
      train_count = with;
    }
  }
  if (std::none_of(in_train.begin(), in_train.end(), [](bool b) { return b; })) in_train.front() = true;
  if (std::all_of(in_train.begin(), in_train.end(), [](bool b) { return b; })) in_train.back() = false;

  std::vector<bool> sample_in_train(samples.size(), false);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (auto i : groups[g]) sample_in_train[i] = in_train[g];
  }
  Split split;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    (sample_in_train[i] ? split.train : split.test).push_back(samples[i]);
  }
  return split;
}

ClassMetrics class_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  ClassMetrics m;
  const auto t = static_cast<double>(tp);
  if (tp + fp > 0) m.precision = t / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = t / static_cast<double>(tp + fn);
  if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

EvalReport evaluate(const ConfusionMatrix& matrix, std::uint64_t excluded_undetectable) {
  if (matrix.total() == 0) throw DataError("no scored instances");
  EvalReport r;
  r.matrix = matrix;
  r.excluded_undetectable = excluded_undetectable;
  r.fabrication = class_metrics(matrix.tp, matrix.fp, matrix.fn);
  r.ground_truth = class_metrics(matrix.tn, matrix.fn, matrix.fp);
  r.overall.precision = (r.fabrication.precision + r.ground_truth.precision) / 2.0;
  r.overall.recall = (r.fabrication.recall + r.ground_truth.recall) / 2.0;
  r.overall.f1 = (r.fabrication.f1 + r.ground_truth.f1) / 2.0;
  return r;
}

EvalReport score(const std::vector<std::pair<Label, Label>>& gold_predicted, std::uint64_t excluded_undetectable) {
  ConfusionMatrix m;
  for (const auto& [gold, predicted] : gold_predicted) {
    const bool g = gold == Label::kFabrication;
    const bool p = predicted == Label::kFabrication;
    if (g && p) ++m.tp;
    else if (!g && p) ++m.fp;
    else if (g && !p) ++m.fn;
    else ++m.tn;
  }
  return evaluate(m, excluded_undetectable);
}

EvalReport score(const std::vector<DetectionReport>& reports) {
  std::vector<std::pair<Label, Label>> pairs;
  std::uint64_t excluded = 0;
  for (const auto& r : reports) {
    if (r.predicted) {
      pairs.emplace_back(r.label, *r.predicted);
    } else {
      ++excluded;
    }
  }
  if (pairs.empty()) {
    throw DataError("nothing to score: " + std::to_string(reports.size()) + " report(s), " +
                    std::to_string(excluded) + " undetectable");
  }
  return score(pairs, excluded);
}

namespace {

json metrics_json(const ClassMetrics& m) {
  return json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

ClassMetrics metrics_from_json(const json& j) {
  return ClassMetrics{j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

}  // namespace

json to_json(const EvalReport& r) {
  return json{{"confusion", {{"tp", r.matrix.tp}, {"fp", r.matrix.fp}, {"tn", r.matrix.tn}, {"fn", r.matrix.fn}}},
              {"fabrication", metrics_json(r.fabrication)},
              {"ground_truth", metrics_json(r.ground_truth)},
              {"overall", metrics_json(r.overall)},
              {"scored", r.matrix.total()},
              {"excluded_undetectable", r.excluded_undetectable}};
}

EvalReport eval_report_from_json(const json& j) {
  try {
    EvalReport r;
    const auto& c = j.at("confusion");
    r.matrix = {c.at("tp").get<std::uint64_t>(), c.at("fp").get<std::uint64_t>(), c.at("tn").get<std::uint64_t>(),
                c.at("fn").get<std::uint64_t>()};
    r.fabrication = metrics_from_json(j.at("fabrication"));
    r.ground_truth = metrics_from_json(j.at("ground_truth"));
    r.overall = metrics_from_json(j.at("overall"));
    r.excluded_undetectable = j.value("excluded_undetectable", std::uint64_t{0});
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed evaluation report: ") + e.what());
  }
}

double population_std(const std::vector<double>& values) {
  if (values.empty()) throw PreconditionError("population_std of no values");
  // Shifted by the first value so identical inputs give exactly zero.
  const double x0 = values.front();
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double x : values) {
    const double d = x - x0;
    sum += d;
    sum_sq += d * d;
  }
  const double n = static_cast<double>(values.size());
  const double mean = sum / n;
  return std::sqrt(std::max(0.0, sum_sq / n - mean * mean));
}

VarianceReport variance(const std::vector<EvalReport>& reports) {
  if (reports.size() < 2) {
    throw DataError("variance needs at least 2 reports, got " + std::to_string(reports.size()));
  }
  VarianceReport out;
  const std::pair<const char*, ClassMetrics EvalReport::*> rows[] = {
      {"fabrication", &EvalReport::fabrication},
      {"ground_truth", &EvalReport::ground_truth},
      {"overall", &EvalReport::overall}};
  const std::pair<const char*, double ClassMetrics::*> cols[] = {
      {"precision", &ClassMetrics::precision}, {"recall", &ClassMetrics::recall}, {"f1", &ClassMetrics::f1}};
  for (const auto& [row_name, row] : rows) {
    for (const auto& [col_name, col] : cols) {
      std::vector<double> values;
      for (const auto& r : reports) values.push_back(r.*row.*col);
      out[std::string(row_name) + "." + col_name] = 100.0 * population_std(values);
    }
  }
  return out;
}

VariantResult make_rewritten_variant(ChatProvider& chat, const PromptLibrary& prompts, const RunConfig& config,
                                     const std::vector<Sample>& samples, int jobs) {
  VariantResult out;
  out.samples = samples;
  std::vector<std::optional<SampleFailure>> failures(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    try {
      const auto& s = samples[i];
      if (!s.fabrication) throw PreconditionError("sample '" + s.id + "' has no incorrect answer");
      out.samples[i].gt_human = rewrite(chat, prompts, config, s);
      // The truthful instance must be the rewrite, so a stale gt_llm goes.
      out.samples[i].gt_llm.reset();
    } catch (const AuthError&) {
      throw;
    } catch (const Error& e) {
      failures[i] = SampleFailure{samples[i].id, e.what()};
    }
  });
  for (auto& f : failures) {
    if (f) out.failures.push_back(std::move(*f));
  }
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw PreconditionError("quantile of no values");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

AuditReport similarity_audit(EmbedProvider& embed, const std::string& model, const std::vector<Sample>& samples) {
  AuditReport r;
  double rouge_sum = 0.0;
  for (const auto& s : samples) {
    const bool usable = s.qc_meta ? s.accepted() : true;
    const auto& truth = s.truthful_text();
    if (!usable || !truth || !s.fabrication) continue;
    double sim = 1.0;
    if (*truth != *s.fabrication) {
      const auto v = embed.embed(EmbedRequest{model, {*truth, *s.fabrication}});
      if (v.size() != 2) throw ProviderError("embedding backend returned the wrong vector count");
      sim = cosine_similarity(v[0], v[1]);
    }
    r.similarities.push_back(sim);
    rouge_sum += rouge_l_recall(*truth, *s.fabrication);
  }
  if (r.similarities.empty()) throw DataError("audit: no accepted ground-truth/fabrication pairs");

  r.pairs = r.similarities.size();
  const double n = static_cast<double>(r.pairs);
  r.mean = std::accumulate(r.similarities.begin(), r.similarities.end(), 0.0) / n;
  r.std = population_std(r.similarities);
  r.mean_rouge_recall = rouge_sum / n;

  auto sorted = r.similarities;
  std::sort(sorted.begin(), sorted.end());
  for (int d = 1; d <= 9; ++d) r.deciles.push_back(quantile_sorted(sorted, d / 10.0));

  const auto bins = static_cast<std::size_t>(std::lround(2.0 / r.bin_width));
  r.histogram.assign(bins, 0);
  for (double s : r.similarities) {
    auto bin = static_cast<std::size_t>(std::max(0.0, std::floor((s + 1.0) / r.bin_width)));
    ++r.histogram[std::min(bin, bins - 1)];
  }
  return r;
}

json to_json(const AuditReport& r) {
  json hist = json::array();
  for (std::size_t i = 0; i < r.histogram.size(); ++i) {
    const double lo = -1.0 + r.bin_width * static_cast<double>(i);
    hist.push_back({{"lo", lo}, {"hi", lo + r.bin_width}, {"count", r.histogram[i]}});
  }
  return json{{"pairs", r.pairs},
              {"mean", r.mean},
              {"std", r.std},
              {"deciles", r.deciles},
              {"histogram", std::move(hist)},
              {"mean_rouge_recall", r.mean_rouge_recall},
              {"similarities", r.similarities}};
}

}  // namespace medfab
