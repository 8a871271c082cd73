/*
 * Copyright 2026 The Stylometric Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Acceptance run: one PASS/FAIL line per criterion, each with its own
// runtime budget. Exit status is nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "stylometric/descriptor.hpp"
#include "stylometric/error.hpp"
#include "stylometric/eval.hpp"
#include "stylometric/feature_store.hpp"
#include "stylometric/metrics.hpp"
#include "stylometric/retrieval.hpp"
#include "test_support.hpp"

namespace {

using namespace stylometric;
using testing::RandomDescriptor;
using testing::RandomTensor;
using testing::Rng;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects the first few violations and a running verdict.
class Checker {
 public:
  void Expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_ < 5) messages_ += (messages_.empty() ? "" : "; ") + what;
    ++failures_;
  }
  Outcome Done(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    return {false, std::to_string(failures_) + " violation(s): " + messages_};
  }

 private:
  std::size_t failures_ = 0;
  std::string messages_;
};

std::string Fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string Sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

double RelErr(double got, double want) {
  if (want == 0.0) return std::abs(got);
  return std::abs(got - want) / std::abs(want);
}

// ---- criteria ------------------------------------------------------------

Outcome MetricAxioms() {
  Checker check;
  Rng rng(1001);
  const std::size_t trials = 10000;
  double worst_triangle = -1e300;
  for (std::size_t c : {1u, 2u, 64u, 1280u}) {
    for (std::size_t i = 0; i < trials; ++i) {
      const StyleDescriptor a = RandomDescriptor(rng, c, "a");
      const StyleDescriptor b = RandomDescriptor(rng, c, "b");
      const StyleDescriptor x = RandomDescriptor(rng, c, "x");
      for (MetricKind kind : kAllMetricKinds) {
        const double ab = Distance(kind, a, b);
        check.Expect(ab >= 0.0, std::string(MetricName(kind)) + " negative");
        check.Expect(Distance(kind, a, a) == 0.0, std::string(MetricName(kind)) + " d(a,a) != 0");
        if (kind != MetricKind::kKl) {
          check.Expect(ab == Distance(kind, b, a), std::string(MetricName(kind)) + " asymmetric");
        }
      }
      const double ab = std::sqrt(W2Squared(a, b));
      const double bx = std::sqrt(W2Squared(b, x));
      const double ax = std::sqrt(W2Squared(a, x));
      worst_triangle = std::max(worst_triangle, ax - ab - bx);
      check.Expect(ax <= ab + bx + 1e-9, "w2 triangle at C=" + std::to_string(c));
    }
    // Zero variances are legal for the Wasserstein family.
    for (std::size_t i = 0; i < trials / 10; ++i) {
      StyleDescriptor a = RandomDescriptor(rng, c, "a", 0.0f, 1.0f);
      StyleDescriptor b = RandomDescriptor(rng, c, "b", 0.0f, 1.0f);
      a.var[0] = 0.0f;
      b.var[c - 1] = 0.0f;
      for (MetricKind kind : {MetricKind::kW2, MetricKind::kL2, MetricKind::kGram}) {
        check.Expect(Distance(kind, a, b) == Distance(kind, b, a) && Distance(kind, a, b) >= 0.0,
                     std::string(MetricName(kind)) + " zero-variance axiom");
      }
    }
  }
  return check.Done("4 widths x 10^4 triples, 5 metrics; max(d_ac - d_ab - d_bc) = " +
                    Sci(worst_triangle));
}

Outcome OracleEquivalence() {
  Checker check;
  Rng rng(2002);

  // Descriptor moments.
  double worst_desc = 0.0;
  std::vector<std::array<std::uint32_t, 3>> shapes = {{1, 1, 1}, {3, 7, 5}, {64, 32, 32},
                                                      {640, 64, 64}, {1280, 64, 64}};
  for (int i = 0; i < 20; ++i) {
    shapes.push_back({static_cast<std::uint32_t>(1 + rng() % 1280),
                      static_cast<std::uint32_t>(1 + rng() % 64),
                      static_cast<std::uint32_t>(1 + rng() % 64)});
  }
  for (const auto& [c, h, w] : shapes) {
    const FeatureTensor t = RandomTensor(rng, c, h, w, "o", 2.0f);
    const testing::NaiveMoments oracle = testing::TwoPassMoments(t);
    const StyleDescriptor d = ComputeDescriptor(t);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double em = RelErr(d.mu[ch], oracle.mean[ch]);
      const double ev = RelErr(d.var[ch], oracle.variance[ch]);
      worst_desc = std::max({worst_desc, em, ev});
      check.Expect(em <= 1e-6 && ev <= 1e-6, "descriptor channel off oracle");
    }
  }

  // Gram closed form.
  double worst_gram = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t c = 1 + rng() % 64;
    const StyleDescriptor a = RandomDescriptor(rng, c, "a");
    const StyleDescriptor b = RandomDescriptor(rng, c, "b");
    const double e = RelErr(GramDistance(a, b), testing::MaterializedGram(a, b));
    worst_gram = std::max(worst_gram, e);
    check.Expect(e <= 1e-6, "gram off materialized oracle at C=" + std::to_string(c));
  }

  // AP@k: exhaustive to length 12, then random.
  std::size_t ap_cases = 0;
  for (std::size_t len = 0; len <= 12; ++len) {
    for (std::uint32_t mask = 0; mask < (1u << len); ++mask) {
      RelevanceVector rel;
      std::size_t hits = 0;
      for (std::size_t i = 0; i < len; ++i) {
        rel.bits.push_back((mask >> i) & 1u);
        hits += rel.bits.back();
      }
      for (std::size_t extra : {0u, 1u, 5u}) {
        rel.total_positives = hits + extra;
        for (std::size_t k = 1; k <= len + 1; ++k) {
          ++ap_cases;
          check.Expect(AveragePrecisionAtK(rel, k) == testing::BruteForceAp(rel, k),
                       "AP mismatch len=" + std::to_string(len) + " mask=" + std::to_string(mask));
        }
      }
    }
  }
  for (int i = 0; i < 10000; ++i) {
    RelevanceVector rel;
    const std::size_t len = rng() % 300;
    std::size_t hits = 0;
    for (std::size_t j = 0; j < len; ++j) {
      rel.bits.push_back(rng() % 4 == 0);
      hits += rel.bits.back();
    }
    rel.total_positives = hits + rng() % 50;
    const std::size_t k = 1 + rng() % (len + 20);
    ++ap_cases;
    check.Expect(AveragePrecisionAtK(rel, k) == testing::BruteForceAp(rel, k), "AP mismatch (random)");
  }
  return check.Done("descriptor max rel err " + Sci(worst_desc) + " over " +
                    std::to_string(shapes.size()) + " tensors; gram max rel err " +
                    Sci(worst_gram) + "; AP exact on " +
                    std::to_string(ap_cases) + " cases");
}

Outcome KlOffsetAndRanking() {
  Checker check;
  Rng rng(3003);
  const std::size_t c = 64;
  std::vector<StyleDescriptor> refs;
  std::vector<DatasetRecord> records;
  for (int i = 0; i < 1000; ++i) {
    refs.push_back(RandomDescriptor(rng, c, "r" + std::to_string(i)));
    records.push_back({refs.back().image_id, "", "s", std::nullopt});
  }
  const DescriptorIndex index = DescriptorIndex::Build(refs, DatasetManifest(records));
  std::size_t pairs = 0;
  for (int q = 0; q < 100; ++q) {
    const StyleDescriptor query = RandomDescriptor(rng, c, "q");
    std::vector<std::pair<double, std::size_t>> printed;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const double p = KlDivergenceUncorrected(query, refs[i]);
      check.Expect(p - KlDivergence(query, refs[i]) == 0.5 * static_cast<double>(c),
                   "offset not C/2");
      printed.emplace_back(p, i);
      ++pairs;
    }
    std::sort(printed.begin(), printed.end());
    const RankedList corrected = Query(index, query, MetricKind::kKl, refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
      check.Expect(corrected.entries[i].position == printed[i].second, "argsort differs");
    }
  }
  return check.Done(std::to_string(pairs) + " pairs offset exactly C/2; 100 full argsorts identical");
}

Outcome SyntheticRetrieval() {
  Checker check;
  Rng rng(4004);
  testing::SyntheticSet set = testing::ClusteredSet(rng, 20, 50, 200, 64);
  const DescriptorIndex index = DescriptorIndex::Build(set.references, set.manifest);
  const std::vector<std::size_t> ks = {1, 10};
  const EvalReport r = EvaluateRetrieval(index, set.queries, MetricKind::kW2, ks);
  check.Expect(r.map[1] >= 0.99, "mAP@10 = " + Fmt(r.map[1]));
  check.Expect(r.recall[0] >= 0.99, "Recall@1 = " + Fmt(r.recall[0]));

  // Chance level: reassign every label uniformly over 5 classes; averaged
  // over independent reassignments so the estimate is not one draw's noise.
  std::uniform_int_distribution<int> cls(0, 4);
  const int rounds = 20;
  double mean_map1 = 0.0;
  double first_map1 = 0.0;
  for (int round = 0; round < rounds; ++round) {
    std::vector<DatasetRecord> records = set.manifest.records();
    for (auto& rec : records) rec.style_label = "c" + std::to_string(cls(rng));
    std::vector<LabeledQuery> queries = set.queries;
    for (auto& q : queries) q.style_label = "c" + std::to_string(cls(rng));
    const DescriptorIndex relabeled = DescriptorIndex::Build(set.references, DatasetManifest(records));
    const EvalReport chance = EvaluateRetrieval(relabeled, queries, MetricKind::kW2, ks);
    check.Expect(chance.map[0] == chance.recall[0], "mAP@1 != Recall@1");
    if (round == 0) first_map1 = chance.map[0];
    mean_map1 += chance.map[0] / rounds;
  }
  check.Expect(std::abs(mean_map1 - 0.2) <= 0.05, "chance mAP@1 = " + Fmt(mean_map1));
  return check.Done("mAP@10 = " + Fmt(r.map[1]) + ", Recall@1 = " + Fmt(r.recall[0]) +
                    "; relabeled mAP@1 = " + Fmt(mean_map1) + " (mean of " +
                    std::to_string(rounds) + "; first draw " + Fmt(first_map1) + ")");
}

Outcome ArtSplitShape() {
  Checker check;
  Rng rng(5005);
  const std::size_t styles = 50, semantics = 100, per_pair = 12, c = 16;
  std::normal_distribution<float> unit(0.0f, 1.0f);
  std::uniform_real_distribution<float> var_profile(0.5f, 2.0f);
  std::vector<std::vector<float>> centre_mu(styles, std::vector<float>(c));
  std::vector<std::vector<float>> centre_var(styles, std::vector<float>(c));
  for (std::size_t s = 0; s < styles; ++s) {
    for (std::size_t i = 0; i < c; ++i) {
      centre_mu[s][i] = 10.0f * unit(rng);
      centre_var[s][i] = var_profile(rng);
    }
  }
  // Members of a style are i.i.d. around its centre; the semantic label is
  // assigned by draw order, so it carries no geometric signal.
  auto member = [&](std::size_t s, std::string id) {
    StyleDescriptor d{std::move(id), 25, 1, std::vector<float>(c), std::vector<float>(c)};
    for (std::size_t i = 0; i < c; ++i) {
      d.mu[i] = centre_mu[s][i] + 0.1f * unit(rng);
      d.var[i] = centre_var[s][i] * (1.0f + 0.05f * unit(rng));
    }
    return d;
  };
  std::vector<StyleDescriptor> refs;
  std::vector<DatasetRecord> records;
  refs.reserve(styles * semantics * per_pair);
  for (std::size_t s = 0; s < styles; ++s) {
    for (std::size_t m = 0; m < semantics; ++m) {
      for (std::size_t j = 0; j < per_pair; ++j) {
        std::string id = "s" + std::to_string(s) + "_m" + std::to_string(m) + "_" + std::to_string(j);
        refs.push_back(member(s, id));
        records.push_back({id, "", "style" + std::to_string(s), "sem" + std::to_string(m)});
      }
    }
  }
  const DescriptorIndex index = DescriptorIndex::Build(std::move(refs), DatasetManifest(records));
  std::vector<LabeledQuery> queries;
  std::uniform_int_distribution<std::size_t> sem(0, semantics - 1);
  for (std::size_t q = 0; q < 40 * styles; ++q) {
    const std::size_t s = q % styles;
    queries.push_back({member(s, "query" + std::to_string(q)), "style" + std::to_string(s),
                       "sem" + std::to_string(sem(rng))});
  }
  const std::vector<std::size_t> ks = {10};
  const EvalReport r = EvaluateArtSplit(index, queries, MetricKind::kW2, ks);
  check.Expect(std::abs(r.semantic_eval[0] - 0.01) <= 0.003,
               "SemanticEval@10 = " + Fmt(r.semantic_eval[0]));
  check.Expect(r.style_eval[0] >= 0.95, "StyleEval@10 = " + Fmt(r.style_eval[0]));
  return check.Done("index " + std::to_string(index.size()) + ", " +
                    std::to_string(queries.size()) + " queries: StyleEval@10 = " +
                    Fmt(r.style_eval[0]) + ", SemanticEval@10 = " + Fmt(r.semantic_eval[0]));
}

Outcome DeterminismAndFormats() {
  Checker check;
  Rng rng(6006);

  // Byte-identical round trips.
  std::size_t round_trips = 0;
  for (int i = 0; i < 300; ++i) {
    const FeatureTensor t = RandomTensor(rng, static_cast<std::uint32_t>(1 + rng() % 40),
                                         static_cast<std::uint32_t>(1 + rng() % 9),
                                         static_cast<std::uint32_t>(1 + rng() % 9),
                                         "t" + std::to_string(i));
    std::stringstream first;
    WriteFeatureTensor(t, first);
    const std::string bytes = first.str();
    std::istringstream in(bytes);
    const FeatureTensor back = ReadFeatureTensor(in);
    std::stringstream second;
    WriteFeatureTensor(back, second);
    check.Expect(back == t && second.str() == bytes, "IFT1 round trip");
    ++round_trips;
  }
  for (int i = 0; i < 100; ++i) {
    const std::size_t c = 1 + rng() % 64;
    std::vector<StyleDescriptor> ds;
    for (std::size_t j = 0; j < rng() % 50; ++j) ds.push_back(RandomDescriptor(rng, c, "d" + std::to_string(j)));
    std::stringstream first;
    WriteDescriptorStore(ds, first);
    const std::string bytes = first.str();
    std::istringstream in(bytes);
    const std::vector<StyleDescriptor> back = ReadDescriptorStore(in);
    std::stringstream second;
    WriteDescriptorStore(back, second);
    check.Expect(back == ds && second.str() == bytes, "IDS1 round trip");
    ++round_trips;
  }

  // Reports across thread counts.
  testing::SyntheticSet set = testing::ClusteredSet(rng, 10, 40, 120, 32, 3.0f, 1.0f);
  std::vector<DatasetRecord> records = set.manifest.records();
  for (std::size_t i = 0; i < records.size(); ++i) records[i].semantic_label = "m" + std::to_string(i % 7);
  for (std::size_t i = 0; i < set.queries.size(); ++i) set.queries[i].semantic_label = "m" + std::to_string(i % 7);
  const DescriptorIndex index = DescriptorIndex::Build(set.references, DatasetManifest(records));
  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  const std::vector<std::size_t> ks = {1, 10, 100};
  std::size_t reports = 0;
  for (MetricKind kind : kAllMetricKinds) {
    std::string retrieval_ref, artsplit_ref;
    // 16 oversubscribes small machines so the partitioning is exercised.
    for (std::size_t threads : {std::size_t{1}, std::size_t{4}, hw, std::size_t{16}}) {
      const std::string r = ReportToJson(EvaluateRetrieval(index, set.queries, kind, ks, {threads, "", ""})).dump();
      const std::string a = ReportToJson(EvaluateArtSplit(index, set.queries, kind, ks, {threads, "", ""})).dump();
      if (retrieval_ref.empty()) {
        retrieval_ref = r;
        artsplit_ref = a;
      }
      check.Expect(r == retrieval_ref && a == artsplit_ref,
                   std::string(MetricName(kind)) + " report differs at " + std::to_string(threads) + " threads");
      reports += 2;
    }
  }

  // Parser fuzzing: only typed errors may escape.
  const std::string tensor_bytes = [&] {
    std::stringstream s;
    WriteFeatureTensor(RandomTensor(rng, 3, 2, 2, "fuzz"), s);
    return s.str();
  }();
  const std::string store_bytes = [&] {
    std::stringstream s;
    WriteDescriptorStore({RandomDescriptor(rng, 3, "p"), RandomDescriptor(rng, 3, "q")}, s);
    return s.str();
  }();
  const std::string manifest_bytes =
      "{\"image_id\":\"a\",\"path\":\"a.png\",\"style_label\":\"x\",\"semantic_label\":\"y\"}\n";
  auto mutate = [&](std::string s) {
    for (int e = 0, n = 1 + static_cast<int>(rng() % 4); e < n; ++e) {
      switch (rng() % 3) {
        case 0: if (!s.empty()) s[rng() % s.size()] = static_cast<char>(rng()); break;
        case 1: if (!s.empty()) s.resize(rng() % s.size()); break;
        default: s.insert(s.begin() + static_cast<long>(rng() % (s.size() + 1)), static_cast<char>(rng()));
      }
    }
    return s;
  };
  std::size_t fuzzed = 0;
  for (int i = 0; i < 10000; ++i) {
    for (const std::string& input : {mutate(tensor_bytes), mutate(store_bytes), mutate(manifest_bytes)}) {
      const std::vector<std::function<void(std::istream&)>> parsers = {
          [](std::istream& s) { ReadFeatureTensor(s); },
          [](std::istream& s) { ReadDescriptorStore(s); },
          [](std::istream& s) { LoadManifest(s); }};
      for (const auto& parse : parsers) {
        ++fuzzed;
        try {
          std::istringstream s(input);
          parse(s);
        } catch (const Error&) {
        } catch (const std::exception& e) {
          check.Expect(false, std::string("untyped exception: ") + e.what());
        }
      }
    }
  }
  return check.Done(std::to_string(round_trips) + " byte-identical round trips; " +
                    std::to_string(reports) + " reports identical at 1/4/" + std::to_string(hw) +
                    "/16 threads; " + std::to_string(fuzzed) + " fuzzed parses");
}

Outcome Throughput(double& query_seconds) {
  Checker check;
  Rng rng(7007);
  const std::size_t c = 1280;
  std::vector<StyleDescriptor> refs;
  std::vector<DatasetRecord> records;
  refs.reserve(10000);
  for (int i = 0; i < 10000; ++i) {
    refs.push_back(RandomDescriptor(rng, c, "r" + std::to_string(i)));
    records.push_back({refs.back().image_id, "", "s" + std::to_string(i % 10), std::nullopt});
  }
  std::vector<StyleDescriptor> queries;
  for (int i = 0; i < 100; ++i) queries.push_back(RandomDescriptor(rng, c, "q" + std::to_string(i)));
  const DescriptorIndex index = DescriptorIndex::Build(std::move(refs), DatasetManifest(records));

  const auto start = std::chrono::steady_clock::now();
  const std::vector<RankedList> results = BatchQuery(index, queries, MetricKind::kW2, 100, 0);
  query_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  check.Expect(results.size() == 100 && results[0].entries.size() == 100, "wrong result shape");
  check.Expect(query_seconds < 10.0, "batch query took " + Fmt(query_seconds, 2) + " s");
  return check.Done("10000 x 100 at C=1280 in " + Fmt(query_seconds, 2) + " s on " +
                    std::to_string(ResolveThreads(0)) + " thread(s)");
}

struct Criterion {
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  double query_seconds = 0.0;
  const std::vector<Criterion> criteria = {
      {"metric-axioms", 30.0, MetricAxioms},
      {"oracle-equivalence", 120.0, OracleEquivalence},
      {"kl-offset-ranking", 60.0, KlOffsetAndRanking},
      {"synthetic-retrieval", 60.0, SyntheticRetrieval},
      {"artsplit-shape", 300.0, ArtSplitShape},
      {"determinism-formats", 60.0, DeterminismAndFormats},
      {"throughput", 60.0, [&] { return Throughput(query_seconds); }},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (seconds > c.budget_seconds) {
      outcome.pass = false;
      outcome.detail += " [over budget " + Fmt(c.budget_seconds, 0) + " s]";
    }
    failed += outcome.pass ? 0 : 1;
    std::printf("%s  %-20s %7.2f s  %s\n", outcome.pass ? "PASS" : "FAIL", c.name, seconds,
                outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
