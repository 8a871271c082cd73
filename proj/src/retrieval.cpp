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

#include "stylometric/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>
#include <utility>

#include "parallel.hpp"
#include "stylometric/error.hpp"

namespace stylometric {

std::size_t ResolveThreads(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

DescriptorIndex DescriptorIndex::Build(std::vector<StyleDescriptor> descriptors,
                                       const DatasetManifest& manifest) {
  DescriptorIndex index;
  if (!descriptors.empty()) {
    index.channels_ = descriptors.front().channels();
    index.t_ = descriptors.front().t;
    index.idx_ = descriptors.front().idx;
  }
  index.labels_.reserve(descriptors.size());
  index.positions_.reserve(descriptors.size());
  index.stddev_.reserve(descriptors.size() * index.channels_);

  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    const StyleDescriptor& d = descriptors[i];
    ValidateDescriptor(d);
    if (d.channels() != index.channels_) {
      throw Error(ErrorKind::kMixedWidth,
                  "descriptor '" + d.image_id + "' has " +
                      std::to_string(d.channels()) + " channels, index has " +
                      std::to_string(index.channels_));
    }
    if (d.t != index.t_ || d.idx != index.idx_) {
      throw Error(ErrorKind::kProvenanceMismatch,
                  "descriptor '" + d.image_id + "' was computed at (t=" +
                      std::to_string(d.t) + ", idx=" + std::to_string(d.idx) +
                      "), index holds (t=" + std::to_string(index.t_) +
                      ", idx=" + std::to_string(index.idx_) + ")");
    }
    const DatasetRecord* record = manifest.Find(d.image_id);
    if (record == nullptr) {
      throw Error(ErrorKind::kMissingLabel,
                  "no manifest record for image_id '" + d.image_id + "'");
    }
    if (!index.positions_.emplace(d.image_id, i).second) {
      throw Error(ErrorKind::kDuplicateId,
                  "duplicate image_id '" + d.image_id + "' in index");
    }
    index.labels_.push_back({record->style_label, record->semantic_label});
    for (float v : d.var) index.stddev_.push_back(std::sqrt(static_cast<double>(v)));
  }
  index.descriptors_ = std::move(descriptors);
  return index;
}

std::optional<std::size_t> DescriptorIndex::Find(const std::string& image_id) const {
  auto it = positions_.find(image_id);
  if (it == positions_.end()) return std::nullopt;
  return it->second;
}

GaussianView DescriptorIndex::View(std::size_t position) const {
  const StyleDescriptor& d = descriptors_[position];
  return GaussianView{
      d.image_id, d.mu, d.var,
      std::span<const double>(stddev_).subspan(position * channels_, channels_)};
}

namespace {

struct QueryView {
  std::vector<double> stddev;
  GaussianView view;

  explicit QueryView(const StyleDescriptor& q) {
    stddev.reserve(q.var.size());
    for (float v : q.var) stddev.push_back(std::sqrt(static_cast<double>(v)));
    view = GaussianView{q.image_id, q.mu, q.var, stddev};
  }
  QueryView(const QueryView&) = delete;
  QueryView& operator=(const QueryView&) = delete;
};

void CheckQuery(const DescriptorIndex& index, const StyleDescriptor& q,
                std::size_t k) {
  if (k == 0) throw Error(ErrorKind::kInvalidArgument, "k must be at least 1");
  if (q.mu.size() != q.var.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "query '" + q.image_id + "' has inconsistent widths");
  }
  if (!index.empty() && q.channels() != index.channels()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "query '" + q.image_id + "' has " + std::to_string(q.channels()) +
                    " channels, index has " + std::to_string(index.channels()));
  }
}

RankedList SelectTopK(const DescriptorIndex& index, const std::string& query_id,
                      const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto before = [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b] || (scores[a] == scores[b] && a < b);
  };
  const std::size_t keep = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + keep, order.end(), before);

  RankedList out;
  out.query_id = query_id;
  out.entries.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t pos = order[i];
    out.entries.push_back({index.descriptor(pos).image_id, scores[pos], pos});
  }
  return out;
}

void ScoreRange(const DescriptorIndex& index, const GaussianView& q,
                MetricKind kind, std::size_t begin, std::size_t end,
                std::vector<double>& scores) {
  for (std::size_t i = begin; i < end; ++i) {
    scores[i] = Distance(kind, q, index.View(i));
  }
}

}  // namespace

RankedList Query(const DescriptorIndex& index, const StyleDescriptor& query,
                 MetricKind kind, std::size_t k, std::size_t threads) {
  CheckQuery(index, query, k);
  const QueryView q(query);
  std::vector<double> scores(index.size());
  internal::ParallelBlocks(index.size(), ResolveThreads(threads),
                           [&](std::size_t begin, std::size_t end) {
                             ScoreRange(index, q.view, kind, begin, end, scores);
                           });
  return SelectTopK(index, query.image_id, scores, k);
}

std::vector<RankedList> BatchQuery(const DescriptorIndex& index,
                                   std::span<const StyleDescriptor> queries,
                                   MetricKind kind, std::size_t k,
                                   std::size_t threads) {
  std::vector<RankedList> results(queries.size());
  std::vector<std::optional<Error>> failures(queries.size());
  internal::ParallelBlocks(
      queries.size(), ResolveThreads(threads),
      [&](std::size_t begin, std::size_t end) {
        std::vector<double> scores(index.size());
        for (std::size_t i = begin; i < end; ++i) {
          try {
            CheckQuery(index, queries[i], k);
            const QueryView q(queries[i]);
            ScoreRange(index, q.view, kind, 0, index.size(), scores);
            results[i] = SelectTopK(index, queries[i].image_id, scores, k);
          } catch (const Error& e) {
            failures[i] = e;
          }
        }
      });
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (failures[i]) {
      throw Error(failures[i]->kind(),
                  "query " + std::to_string(i) + " ('" + queries[i].image_id +
                      "'): " + failures[i]->what());
    }
  }
  return results;
}

}  // namespace stylometric
