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

#include "stylometric/eval.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>
#include <set>
#include <unordered_map>

#include "stylometric/error.hpp"

namespace stylometric {

namespace {

std::size_t CountHits(const RelevanceVector& rel, std::size_t k) {
  const std::size_t n = std::min(k, rel.bits.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += rel.bits[i] != 0;
  return hits;
}

double PrecisionSum(const RelevanceVector& rel, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::kInvalidArgument, "k must be at least 1");
  const std::size_t n = std::min(k, rel.bits.size());
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (rel.bits[i] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  if (hits > rel.total_positives) {
    throw Error(ErrorKind::kInvalidArgument,
                "relevance vector has more hits than total positives");
  }
  return sum;
}

std::string FormatDouble(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string_view ProtocolName(Protocol p) {
  return p == Protocol::kRetrieval ? "retrieval" : "artsplit";
}

void CheckKs(std::span<const std::size_t> ks) {
  if (ks.empty()) throw Error(ErrorKind::kInvalidArgument, "no k values given");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == 0 || (i > 0 && ks[i] <= ks[i - 1])) {
      throw Error(ErrorKind::kInvalidArgument,
                  "k values must be positive and strictly increasing");
    }
  }
}

void CheckQueries(const DescriptorIndex& index,
                  std::span<const LabeledQuery> queries) {
  if (queries.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "evaluation needs at least one query");
  }
  for (const LabeledQuery& q : queries) {
    if (index.Find(q.descriptor.image_id)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "query '" + q.descriptor.image_id +
                      "' is also a reference; queries must be disjoint from the index");
    }
  }
}

std::vector<RankedList> Rank(const DescriptorIndex& index,
                             std::span<const LabeledQuery> queries,
                             MetricKind kind, std::size_t k, std::size_t threads) {
  std::vector<StyleDescriptor> descs;
  descs.reserve(queries.size());
  for (const LabeledQuery& q : queries) descs.push_back(q.descriptor);
  return BatchQuery(index, descs, kind, k, threads);
}

EvalConfig MakeConfig(Protocol protocol, const DescriptorIndex& index,
                      std::span<const LabeledQuery> queries, MetricKind kind,
                      const EvalOptions& options) {
  EvalConfig config;
  config.protocol = protocol;
  const StyleDescriptor& probe = queries.front().descriptor;
  config.t = index.empty() ? probe.t : index.t();
  config.idx = index.empty() ? probe.idx : index.idx();
  config.metric = kind;
  config.reference_set = options.reference_set;
  config.query_set = options.query_set;
  return config;
}

}  // namespace

double AveragePrecisionAtK(const RelevanceVector& rel, std::size_t k) {
  const double sum = PrecisionSum(rel, k);
  if (rel.total_positives == 0) return 0.0;
  return sum / static_cast<double>(std::min(rel.total_positives, k));
}

double FlatAveragePrecisionAtK(const RelevanceVector& rel, std::size_t k) {
  const double sum = PrecisionSum(rel, k);
  return sum / static_cast<double>(k);
}

double RecallAtK(const RelevanceVector& rel, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::kInvalidArgument, "k must be at least 1");
  return CountHits(rel, k) > 0 ? 1.0 : 0.0;
}

double PrecisionAtK(const RelevanceVector& rel, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::kInvalidArgument, "k must be at least 1");
  return static_cast<double>(CountHits(rel, k)) / static_cast<double>(k);
}

nlohmann::ordered_json ReportToJson(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["config"] = {
      {"protocol", ProtocolName(report.config.protocol)},
      {"t", report.config.t},
      {"idx", report.config.idx},
      {"metric", MetricName(report.config.metric)},
      {"reference_set", report.config.reference_set},
      {"query_set", report.config.query_set},
  };
  j["k_values"] = report.k_values;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  if (report.config.protocol == Protocol::kRetrieval) {
    metrics["map"] = report.map;
    metrics["map_flat"] = report.map_flat;
    metrics["recall"] = report.recall;
  } else {
    metrics["style_eval"] = report.style_eval;
    metrics["semantic_eval"] = report.semantic_eval;
  }
  j["metrics"] = std::move(metrics);
  j["query_count"] = report.query_count;
  j["zero_positive_queries"] = report.zero_positive_queries;
  return j;
}

std::string CsvHeader(Protocol protocol) {
  return protocol == Protocol::kRetrieval
             ? "t,idx,metric,k,map,map_flat,recall"
             : "t,idx,metric,k,style_eval,semantic_eval";
}

std::vector<std::string> CsvRows(const EvalReport& report) {
  std::vector<std::string> rows;
  const EvalConfig& c = report.config;
  const std::string prefix = std::to_string(c.t) + "," + std::to_string(c.idx) +
                             "," + std::string(MetricName(c.metric)) + ",";
  for (std::size_t i = 0; i < report.k_values.size(); ++i) {
    std::string row = prefix + std::to_string(report.k_values[i]);
    if (c.protocol == Protocol::kRetrieval) {
      row += "," + FormatDouble(report.map[i]) + "," +
             FormatDouble(report.map_flat[i]) + "," + FormatDouble(report.recall[i]);
    } else {
      row += "," + FormatDouble(report.style_eval[i]) + "," +
             FormatDouble(report.semantic_eval[i]);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

EvalReport ScoreRankings(const DescriptorIndex& index,
                         std::span<const RankedList> rankings,
                         std::span<const LabeledQuery> queries,
                         std::span<const std::size_t> ks,
                         const EvalConfig& config) {
  CheckKs(ks);
  if (rankings.size() != queries.size() || queries.empty()) {
    throw Error(ErrorKind::kInvalidArgument,
                "rankings and queries must be non-empty and of equal length");
  }
  std::unordered_map<std::string, std::size_t> positives;
  for (std::size_t i = 0; i < index.size(); ++i) ++positives[index.label(i).style_label];

  EvalReport report;
  report.config = config;
  report.config.protocol = Protocol::kRetrieval;
  report.k_values.assign(ks.begin(), ks.end());
  report.map.assign(ks.size(), 0.0);
  report.map_flat.assign(ks.size(), 0.0);
  report.recall.assign(ks.size(), 0.0);
  report.query_count = queries.size();

  RelevanceVector rel;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const std::string& label = queries[q].style_label;
    auto it = positives.find(label);
    rel.total_positives = it == positives.end() ? 0 : it->second;
    if (rel.total_positives == 0) ++report.zero_positive_queries;
    rel.bits.clear();
    for (const RankedEntry& e : rankings[q].entries) {
      rel.bits.push_back(index.label(e.position).style_label == label ? 1 : 0);
    }
    for (std::size_t i = 0; i < ks.size(); ++i) {
      report.map[i] += AveragePrecisionAtK(rel, ks[i]);
      report.map_flat[i] += FlatAveragePrecisionAtK(rel, ks[i]);
      report.recall[i] += RecallAtK(rel, ks[i]);
    }
  }
  const double n = static_cast<double>(queries.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    report.map[i] /= n;
    report.map_flat[i] /= n;
    report.recall[i] /= n;
  }
  return report;
}

EvalReport EvaluateRetrieval(const DescriptorIndex& index,
                             std::span<const LabeledQuery> queries,
                             MetricKind kind, std::span<const std::size_t> ks,
                             const EvalOptions& options) {
  CheckKs(ks);
  CheckQueries(index, queries);
  const std::vector<RankedList> rankings =
      Rank(index, queries, kind, ks.back(), options.threads);
  return ScoreRankings(
      index, rankings, queries, ks,
      MakeConfig(Protocol::kRetrieval, index, queries, kind, options));
}

EvalReport EvaluateArtSplit(const DescriptorIndex& index,
                            std::span<const LabeledQuery> queries,
                            MetricKind kind, std::span<const std::size_t> ks,
                            const EvalOptions& options) {
  CheckKs(ks);
  CheckQueries(index, queries);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (!index.label(i).semantic_label) {
      throw Error(ErrorKind::kMissingLabel,
                  "reference '" + index.descriptor(i).image_id +
                      "' has no semantic_label");
    }
  }
  for (const LabeledQuery& q : queries) {
    if (!q.semantic_label) {
      throw Error(ErrorKind::kMissingLabel,
                  "query '" + q.descriptor.image_id + "' has no semantic_label");
    }
  }
  std::unordered_map<std::string, std::size_t> style_positives;
  for (std::size_t i = 0; i < index.size(); ++i) {
    ++style_positives[index.label(i).style_label];
  }

  const std::vector<RankedList> rankings =
      Rank(index, queries, kind, ks.back(), options.threads);

  EvalReport report;
  report.config = MakeConfig(Protocol::kArtSplit, index, queries, kind, options);
  report.k_values.assign(ks.begin(), ks.end());
  report.style_eval.assign(ks.size(), 0.0);
  report.semantic_eval.assign(ks.size(), 0.0);
  report.query_count = queries.size();

  RelevanceVector style;
  RelevanceVector semantic;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    if (!style_positives.contains(queries[q].style_label)) {
      ++report.zero_positive_queries;
    }
    style.bits.clear();
    semantic.bits.clear();
    for (const RankedEntry& e : rankings[q].entries) {
      const LabelEntry& label = index.label(e.position);
      style.bits.push_back(label.style_label == queries[q].style_label);
      semantic.bits.push_back(*label.semantic_label == *queries[q].semantic_label);
    }
    for (std::size_t i = 0; i < ks.size(); ++i) {
      report.style_eval[i] += PrecisionAtK(style, ks[i]);
      report.semantic_eval[i] += PrecisionAtK(semantic, ks[i]);
    }
  }
  const double n = static_cast<double>(queries.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    report.style_eval[i] /= n;
    report.semantic_eval[i] /= n;
  }
  return report;
}

std::vector<SweepEntry> Sweep(const SweepGrid& grid, const SweepCellLoader& load,
                              std::span<const std::size_t> ks,
                              std::size_t threads) {
  CheckKs(ks);
  const std::set<std::uint32_t> timesteps(grid.timesteps.begin(),
                                          grid.timesteps.end());
  const std::set<std::uint32_t> blocks(grid.block_indices.begin(),
                                       grid.block_indices.end());
  std::vector<SweepEntry> out;
  for (std::uint32_t t : timesteps) {
    for (std::uint32_t idx : blocks) {
      std::optional<SweepCellData> cell = load(t, idx);
      for (MetricKind kind : grid.metrics) {
        SweepEntry entry{t, idx, kind, std::nullopt, {}};
        if (!cell) {
          entry.warning = "missing descriptors for cell (t=" + std::to_string(t) +
                          ", idx=" + std::to_string(idx) + ")";
        } else {
          EvalOptions options{threads, cell->reference_set, cell->query_set};
          entry.report = grid.protocol == Protocol::kRetrieval
                             ? EvaluateRetrieval(cell->index, cell->queries,
                                                 kind, ks, options)
                             : EvaluateArtSplit(cell->index, cell->queries,
                                                kind, ks, options);
        }
        out.push_back(std::move(entry));
      }
    }
  }
  return out;
}

void WriteSweepCsv(std::span<const SweepEntry> entries, std::ostream& out) {
  Protocol protocol = Protocol::kRetrieval;
  for (const SweepEntry& e : entries) {
    if (e.report) {
      protocol = e.report->config.protocol;
      break;
    }
  }
  const std::size_t score_columns = protocol == Protocol::kRetrieval ? 3 : 2;
  out << CsvHeader(protocol) << '\n';
  for (const SweepEntry& e : entries) {
    if (e.report) {
      for (const std::string& row : CsvRows(*e.report)) out << row << '\n';
    } else {
      out << e.t << ',' << e.idx << ',' << MetricName(e.metric) << ','
          << std::string(score_columns, ',') << '\n';
    }
  }
}

}  // namespace stylometric
