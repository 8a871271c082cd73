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

// Ranking-quality evaluation.
//
// Two protocols:
//  - retrieval: per-query AP@k (normalized by min(R, k)), a flat variant
//    normalized by k, and hit-rate Recall@k; relevance is style-label
//    equality against the reference set.
//  - artsplit: StyleEval@k and SemanticEval@k, the fraction of the top-k
//    sharing the query's style / semantic label.

#ifndef STYLOMETRIC_EVAL_HPP_
#define STYLOMETRIC_EVAL_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "stylometric/feature_store.hpp"
#include "stylometric/metrics.hpp"
#include "stylometric/retrieval.hpp"

namespace stylometric {

struct RelevanceVector {
  std::vector<std::uint8_t> bits;  // bits[i] == 1 iff rank i+1 is relevant
  std::size_t total_positives = 0;
};

// (1 / min(R, k)) * sum_{i<=k} bits[i] * precision@i; 0 when R == 0.
// Ranks beyond bits.size() count as non-relevant.
double AveragePrecisionAtK(const RelevanceVector& rel, std::size_t k);
// Same sum normalized by k instead of min(R, k).
double FlatAveragePrecisionAtK(const RelevanceVector& rel, std::size_t k);
// 1 if any of the first k bits is set.
double RecallAtK(const RelevanceVector& rel, std::size_t k);
// (# set bits among the first k) / k.
double PrecisionAtK(const RelevanceVector& rel, std::size_t k);

enum class Protocol { kRetrieval, kArtSplit };

struct EvalConfig {
  Protocol protocol = Protocol::kRetrieval;
  std::uint32_t t = 25;
  std::uint32_t idx = 1;
  MetricKind metric = MetricKind::kW2;
  std::string reference_set;
  std::string query_set;

  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct EvalReport {
  EvalConfig config;
  std::vector<std::size_t> k_values;
  // Retrieval protocol; aligned with k_values.
  std::vector<double> map;
  std::vector<double> map_flat;
  std::vector<double> recall;
  // ArtSplit protocol; aligned with k_values.
  std::vector<double> style_eval;
  std::vector<double> semantic_eval;
  std::size_t query_count = 0;
  std::size_t zero_positive_queries = 0;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Stable key order: config, k_values, metrics, query_count,
// zero_positive_queries.
nlohmann::ordered_json ReportToJson(const EvalReport& report);

// Header "t,idx,metric,k,map,map_flat,recall" (or style_eval,semantic_eval).
std::string CsvHeader(Protocol protocol);
// One row per k.
std::vector<std::string> CsvRows(const EvalReport& report);

struct LabeledQuery {
  StyleDescriptor descriptor;
  std::string style_label;
  std::optional<std::string> semantic_label;
};

struct EvalOptions {
  std::size_t threads = 0;
  std::string reference_set;
  std::string query_set;
};

// Throws if `ks` is empty, not strictly increasing or contains 0, if there
// are no queries, or if a query id is also present in the index.
EvalReport EvaluateRetrieval(const DescriptorIndex& index,
                             std::span<const LabeledQuery> queries,
                             MetricKind kind, std::span<const std::size_t> ks,
                             const EvalOptions& options = {});

// Scores precomputed rankings under the retrieval protocol. `rankings[i]`
// belongs to `queries[i]` and must hold at least max(ks) entries or the
// whole index. EvaluateRetrieval is BatchQuery followed by this.
EvalReport ScoreRankings(const DescriptorIndex& index,
                         std::span<const RankedList> rankings,
                         std::span<const LabeledQuery> queries,
                         std::span<const std::size_t> ks,
                         const EvalConfig& config);

// Throws kMissingLabel naming the first reference or query without a
// semantic label.
EvalReport EvaluateArtSplit(const DescriptorIndex& index,
                            std::span<const LabeledQuery> queries,
                            MetricKind kind, std::span<const std::size_t> ks,
                            const EvalOptions& options = {});

// Ablation grid over (t, idx, metric). Cells are visited with t ascending,
// then idx ascending, then metrics in the order given.
struct SweepGrid {
  std::vector<std::uint32_t> timesteps;
  std::vector<std::uint32_t> block_indices;
  std::vector<MetricKind> metrics;
  Protocol protocol = Protocol::kRetrieval;
};

struct SweepCellData {
  DescriptorIndex index;
  std::vector<LabeledQuery> queries;
  std::string reference_set;
  std::string query_set;
};

// Returns std::nullopt when the cell's descriptors are unavailable.
using SweepCellLoader =
    std::function<std::optional<SweepCellData>(std::uint32_t t, std::uint32_t idx)>;

struct SweepEntry {
  std::uint32_t t = 0;
  std::uint32_t idx = 0;
  MetricKind metric = MetricKind::kW2;
  std::optional<EvalReport> report;  // empty for a missing cell
  std::string warning;
};

std::vector<SweepEntry> Sweep(const SweepGrid& grid, const SweepCellLoader& load,
                              std::span<const std::size_t> ks,
                              std::size_t threads = 0);

// Combined table, columns t,idx,metric,k,map,map_flat,recall. Missing cells
// produce one row per metric with the k and score columns left empty.
void WriteSweepCsv(std::span<const SweepEntry> entries, std::ostream& out);

}  // namespace stylometric

#endif  // STYLOMETRIC_EVAL_HPP_
