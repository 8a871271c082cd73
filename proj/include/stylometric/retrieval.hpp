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

// Exact brute-force top-k retrieval over a fixed set of style descriptors.

#ifndef STYLOMETRIC_RETRIEVAL_HPP_
#define STYLOMETRIC_RETRIEVAL_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "stylometric/feature_store.hpp"
#include "stylometric/metrics.hpp"

namespace stylometric {

// 0 means "all hardware threads".
std::size_t ResolveThreads(std::size_t requested);

struct LabelEntry {
  std::string style_label;
  std::optional<std::string> semantic_label;
};

// Immutable after Build(); safe to share across threads.
class DescriptorIndex {
 public:
  // Throws kMixedWidth / kProvenanceMismatch for non-uniform descriptors,
  // kMissingLabel naming the first id absent from `manifest`, kDuplicateId.
  static DescriptorIndex Build(std::vector<StyleDescriptor> descriptors,
                               const DatasetManifest& manifest);

  std::size_t size() const { return descriptors_.size(); }
  bool empty() const { return descriptors_.empty(); }
  // 0 for an empty index.
  std::size_t channels() const { return channels_; }
  std::uint32_t t() const { return t_; }
  std::uint32_t idx() const { return idx_; }

  const StyleDescriptor& descriptor(std::size_t position) const {
    return descriptors_[position];
  }
  const LabelEntry& label(std::size_t position) const {
    return labels_[position];
  }
  std::optional<std::size_t> Find(const std::string& image_id) const;
  GaussianView View(std::size_t position) const;

 private:
  DescriptorIndex() = default;

  std::vector<StyleDescriptor> descriptors_;
  std::vector<LabelEntry> labels_;
  std::vector<double> stddev_;  // size() x channels(), row-major
  std::unordered_map<std::string, std::size_t> positions_;
  std::size_t channels_ = 0;
  std::uint32_t t_ = 0;
  std::uint32_t idx_ = 0;
};

struct RankedEntry {
  std::string image_id;
  double score = 0.0;
  std::size_t position = 0;  // insertion position in the index

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

// Ascending by score; equal scores ordered by index insertion position.
struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;

  friend bool operator==(const RankedList&, const RankedList&) = default;
};

// The k closest index entries to `query` (all of them if k >= size()).
// Self-matches are not excluded. `threads` shards the scan over the index.
RankedList Query(const DescriptorIndex& index, const StyleDescriptor& query,
                 MetricKind kind, std::size_t k, std::size_t threads = 1);

// Elementwise equal to Query(); result i belongs to queries[i] for every
// thread count. On failure, rethrows the error of the lowest failing query
// with its position prefixed to the message.
std::vector<RankedList> BatchQuery(const DescriptorIndex& index,
                                   std::span<const StyleDescriptor> queries,
                                   MetricKind kind, std::size_t k,
                                   std::size_t threads = 0);

}  // namespace stylometric

#endif  // STYLOMETRIC_RETRIEVAL_HPP_
