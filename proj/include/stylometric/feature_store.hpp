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

// Binary formats for feature tensors (IFT1) and descriptor stores (IDS1),
// plus JSON-lines dataset manifests.
//
// IFT1:  "IFT1" | version u32 | id_len u32 | image_id | t u32 | idx u32 |
//        c u32 | h u32 | w u32 | payload c*h*w f32 (channel-major)
// IDS1:  "IDS1" | version u32 | count u64 | c u32 | t u32 | idx u32 |
//        count x ( id_len u32 | image_id | mu c*f32 | var c*f32 )
//
// All integers and floats are little-endian regardless of host order.

#ifndef STYLOMETRIC_FEATURE_STORE_HPP_
#define STYLOMETRIC_FEATURE_STORE_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace stylometric {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kMaxImageIdBytes = 4096;
inline constexpr std::uint32_t kMaxTimestep = 999;
inline constexpr std::uint32_t kMaxBlockIndex = 3;
// Upper bound on c*h*w accepted by the reader (16 GiB of payload).
inline constexpr std::uint64_t kMaxTensorElements = std::uint64_t{1} << 32;

// Channel width of the up-block outputs of the reference denoiser:
// idx 0,1 -> 1280, idx 2 -> 640, idx 3 -> 320.
std::uint32_t BlockChannelWidth(std::uint32_t idx);

struct FeatureTensor {
  std::string image_id;
  std::uint32_t t = 0;
  std::uint32_t idx = 0;
  std::uint32_t c = 0;
  std::uint32_t h = 0;
  std::uint32_t w = 0;
  std::vector<float> data;  // [c][h][w]

  std::size_t spatial_size() const { return std::size_t{h} * w; }

  friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;
};

// A diagonal Gaussian over the channels of one feature tensor.
struct StyleDescriptor {
  std::string image_id;
  std::uint32_t t = 0;
  std::uint32_t idx = 0;
  std::vector<float> mu;
  std::vector<float> var;

  std::size_t channels() const { return mu.size(); }

  friend bool operator==(const StyleDescriptor&,
                         const StyleDescriptor&) = default;
};

struct DatasetRecord {
  std::string image_id;
  std::string path;
  std::string style_label;
  std::optional<std::string> semantic_label;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

class DatasetManifest {
 public:
  DatasetManifest() = default;

  // Throws Error{kDuplicateId} or Error{kInvalidArgument} (empty style label).
  explicit DatasetManifest(std::vector<DatasetRecord> records);

  const std::vector<DatasetRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const DatasetRecord* Find(const std::string& image_id) const;

 private:
  std::vector<DatasetRecord> records_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// Throws on invariant violations; used by writers and exposed for callers
// building tensors by hand.
void ValidateTensor(const FeatureTensor& tensor);
void ValidateDescriptor(const StyleDescriptor& descriptor);

std::size_t WriteFeatureTensor(const FeatureTensor& tensor, std::ostream& sink);
FeatureTensor ReadFeatureTensor(std::istream& source);

std::size_t WriteDescriptorStore(const std::vector<StyleDescriptor>& descs,
                                 std::ostream& sink);

// Header of an IDS1 store; `t` and `idx` are meaningful even when empty.
struct DescriptorStore {
  std::uint32_t c = 0;
  std::uint32_t t = 0;
  std::uint32_t idx = 0;
  std::vector<StyleDescriptor> descriptors;
};

// Writes `descs` with explicit provenance so empty stores keep t/idx.
std::size_t WriteDescriptorStore(const DescriptorStore& store,
                                 std::ostream& sink);
DescriptorStore ReadDescriptorStoreWithHeader(std::istream& source);
std::vector<StyleDescriptor> ReadDescriptorStore(std::istream& source);

DatasetManifest LoadManifest(std::istream& source);
void WriteManifest(const DatasetManifest& manifest, std::ostream& sink);

// File conveniences; I/O failures raise Error{kIo} naming the path.
FeatureTensor ReadFeatureTensorFile(const std::filesystem::path& path);
void WriteFeatureTensorFile(const FeatureTensor& tensor,
                            const std::filesystem::path& path);
DescriptorStore ReadDescriptorStoreFile(const std::filesystem::path& path);
void WriteDescriptorStoreFile(const DescriptorStore& store,
                              const std::filesystem::path& path);
DatasetManifest LoadManifestFile(const std::filesystem::path& path);

}  // namespace stylometric

#endif  // STYLOMETRIC_FEATURE_STORE_HPP_
