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

#include "stylometric/feature_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "stylometric/error.hpp"

namespace stylometric {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kBadMagic: return "bad_magic";
    case ErrorKind::kVersionMismatch: return "version_mismatch";
    case ErrorKind::kTruncated: return "truncated";
    case ErrorKind::kDimensionOverflow: return "dimension_overflow";
    case ErrorKind::kNonFinite: return "non_finite";
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kMixedWidth: return "mixed_width";
    case ErrorKind::kDuplicateId: return "duplicate_id";
    case ErrorKind::kMissingLabel: return "missing_label";
    case ErrorKind::kMalformedLine: return "malformed_line";
    case ErrorKind::kDimensionMismatch: return "dimension_mismatch";
    case ErrorKind::kDegenerateVariance: return "degenerate_variance";
    case ErrorKind::kProvenanceMismatch: return "provenance_mismatch";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

namespace {

constexpr std::array<char, 4> kTensorMagic = {'I', 'F', 'T', '1'};
constexpr std::array<char, 4> kStoreMagic = {'I', 'D', 'S', '1'};
// Payload is decoded in bounded chunks so a forged header cannot force a
// huge allocation before truncation is detected.
constexpr std::size_t kChunkFloats = std::size_t{1} << 18;

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& sink) : sink_(sink) {}

  void Bytes(const char* data, std::size_t n) {
    sink_.write(data, static_cast<std::streamsize>(n));
    if (!sink_) throw Error(ErrorKind::kIo, "write failed");
    written_ += n;
  }
  void U32(std::uint32_t v) {
    std::array<char, 4> b;
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    Bytes(b.data(), b.size());
  }
  void U64(std::uint64_t v) {
    std::array<char, 8> b;
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    Bytes(b.data(), b.size());
  }
  void String(const std::string& s) {
    U32(static_cast<std::uint32_t>(s.size()));
    Bytes(s.data(), s.size());
  }
  void Floats(const std::vector<float>& values) {
    std::vector<char> buf;
    buf.reserve(std::min(values.size(), kChunkFloats) * 4);
    for (std::size_t start = 0; start < values.size(); start += kChunkFloats) {
      const std::size_t end = std::min(values.size(), start + kChunkFloats);
      buf.clear();
      for (std::size_t i = start; i < end; ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(values[i]);
        for (int k = 0; k < 4; ++k) {
          buf.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
        }
      }
      Bytes(buf.data(), buf.size());
    }
  }

  std::size_t written() const { return written_; }

 private:
  std::ostream& sink_;
  std::size_t written_ = 0;
};

class ByteReader {
 public:
  explicit ByteReader(std::istream& source) : source_(source) {}

  void Exact(char* out, std::size_t n, const char* what) {
    source_.read(out, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(source_.gcount()) != n) {
      throw Error(ErrorKind::kTruncated,
                  std::string("truncated input while reading ") + what);
    }
  }
  std::uint32_t U32(const char* what) {
    std::array<unsigned char, 4> b;
    Exact(reinterpret_cast<char*>(b.data()), b.size(), what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[i]} << (8 * i);
    return v;
  }
  std::uint64_t U64(const char* what) {
    std::array<unsigned char, 8> b;
    Exact(reinterpret_cast<char*>(b.data()), b.size(), what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
    return v;
  }
  void Magic(const std::array<char, 4>& expected) {
    std::array<char, 4> got;
    source_.read(got.data(), 4);
    if (source_.gcount() != 4 || got != expected) {
      throw Error(ErrorKind::kBadMagic,
                  "bad magic, expected " +
                      std::string(expected.begin(), expected.end()));
    }
  }
  void Version() {
    const std::uint32_t version = U32("format version");
    if (version != kFormatVersion) {
      throw Error(ErrorKind::kVersionMismatch,
                  "unsupported format version " + std::to_string(version));
    }
  }
  std::string String(const char* what) {
    const std::uint32_t len = U32(what);
    if (len > kMaxImageIdBytes) {
      throw Error(ErrorKind::kInvalidArgument,
                  std::string(what) + " length " + std::to_string(len) +
                      " exceeds " + std::to_string(kMaxImageIdBytes));
    }
    std::string s(len, '\0');
    Exact(s.data(), len, what);
    return s;
  }
  std::vector<float> Floats(std::uint64_t count, const char* what) {
    std::vector<float> out;
    out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, kChunkFloats)));
    std::vector<unsigned char> buf;
    std::uint64_t remaining = count;
    while (remaining > 0) {
      const auto n = static_cast<std::size_t>(
          std::min<std::uint64_t>(remaining, kChunkFloats));
      buf.resize(n * 4);
      Exact(reinterpret_cast<char*>(buf.data()), buf.size(), what);
      for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits = 0;
        for (int k = 0; k < 4; ++k) bits |= std::uint32_t{buf[4 * i + k]} << (8 * k);
        const float v = std::bit_cast<float>(bits);
        if (!std::isfinite(v)) {
          throw Error(ErrorKind::kNonFinite,
                      std::string("non-finite value in ") + what + " at element " +
                          std::to_string(out.size()));
        }
        out.push_back(v);
      }
      remaining -= n;
    }
    return out;
  }

 private:
  std::istream& source_;
};

void CheckProvenance(std::uint32_t t, std::uint32_t idx) {
  if (t > kMaxTimestep) {
    throw Error(ErrorKind::kInvalidArgument,
                "timestep " + std::to_string(t) + " outside [0, 999]");
  }
  if (idx > kMaxBlockIndex) {
    throw Error(ErrorKind::kInvalidArgument,
                "up-block index " + std::to_string(idx) + " outside [0, 3]");
  }
}

void CheckImageId(const std::string& id) {
  if (id.size() > kMaxImageIdBytes) {
    throw Error(ErrorKind::kInvalidArgument,
                "image_id exceeds " + std::to_string(kMaxImageIdBytes) + " bytes");
  }
}

bool AllFinite(const std::vector<float>& values) {
  return std::all_of(values.begin(), values.end(),
                     [](float v) { return std::isfinite(v); });
}

}  // namespace

std::uint32_t BlockChannelWidth(std::uint32_t idx) {
  switch (idx) {
    case 0:
    case 1: return 1280;
    case 2: return 640;
    case 3: return 320;
    default:
      throw Error(ErrorKind::kInvalidArgument,
                  "up-block index " + std::to_string(idx) + " outside [0, 3]");
  }
}

DatasetManifest::DatasetManifest(std::vector<DatasetRecord> records)
    : records_(std::move(records)) {
  by_id_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const DatasetRecord& r = records_[i];
    if (r.style_label.empty()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "empty style_label for image_id '" + r.image_id + "'");
    }
    if (!by_id_.emplace(r.image_id, i).second) {
      throw Error(ErrorKind::kDuplicateId,
                  "duplicate image_id '" + r.image_id + "'");
    }
  }
}

const DatasetRecord* DatasetManifest::Find(const std::string& image_id) const {
  auto it = by_id_.find(image_id);
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

void ValidateTensor(const FeatureTensor& tensor) {
  CheckImageId(tensor.image_id);
  CheckProvenance(tensor.t, tensor.idx);
  if (tensor.c == 0 || tensor.h == 0 || tensor.w == 0) {
    throw Error(ErrorKind::kInvalidArgument,
                "tensor '" + tensor.image_id + "' has a zero dimension");
  }
  const std::uint64_t plane = std::uint64_t{tensor.h} * tensor.w;
  if (plane > kMaxTensorElements / tensor.c) {
    throw Error(ErrorKind::kDimensionOverflow,
                "tensor '" + tensor.image_id + "' dimensions are too large");
  }
  const std::uint64_t expected = plane * tensor.c;
  if (tensor.data.size() != expected) {
    throw Error(ErrorKind::kInvalidArgument,
                "tensor '" + tensor.image_id + "' has " +
                    std::to_string(tensor.data.size()) + " values, expected " +
                    std::to_string(expected));
  }
  if (!AllFinite(tensor.data)) {
    throw Error(ErrorKind::kNonFinite,
                "tensor '" + tensor.image_id + "' contains non-finite values");
  }
}

void ValidateDescriptor(const StyleDescriptor& d) {
  CheckImageId(d.image_id);
  CheckProvenance(d.t, d.idx);
  if (d.mu.empty() || d.mu.size() != d.var.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "descriptor '" + d.image_id + "' has inconsistent widths");
  }
  if (!AllFinite(d.mu) || !AllFinite(d.var)) {
    throw Error(ErrorKind::kNonFinite,
                "descriptor '" + d.image_id + "' contains non-finite values");
  }
  for (float v : d.var) {
    if (v < 0.0f) {
      throw Error(ErrorKind::kInvalidArgument,
                  "descriptor '" + d.image_id + "' has a negative variance");
    }
  }
}

std::size_t WriteFeatureTensor(const FeatureTensor& tensor, std::ostream& sink) {
  ValidateTensor(tensor);
  ByteWriter out(sink);
  out.Bytes(kTensorMagic.data(), kTensorMagic.size());
  out.U32(kFormatVersion);
  out.String(tensor.image_id);
  out.U32(tensor.t);
  out.U32(tensor.idx);
  out.U32(tensor.c);
  out.U32(tensor.h);
  out.U32(tensor.w);
  out.Floats(tensor.data);
  return out.written();
}

FeatureTensor ReadFeatureTensor(std::istream& source) {
  ByteReader in(source);
  in.Magic(kTensorMagic);
  in.Version();
  FeatureTensor tensor;
  tensor.image_id = in.String("image_id");
  tensor.t = in.U32("t");
  tensor.idx = in.U32("idx");
  CheckProvenance(tensor.t, tensor.idx);
  tensor.c = in.U32("c");
  tensor.h = in.U32("h");
  tensor.w = in.U32("w");
  if (tensor.c == 0 || tensor.h == 0 || tensor.w == 0) {
    throw Error(ErrorKind::kInvalidArgument, "tensor header has a zero dimension");
  }
  const std::uint64_t plane = std::uint64_t{tensor.h} * tensor.w;
  if (plane > kMaxTensorElements / tensor.c) {
    throw Error(ErrorKind::kDimensionOverflow,
                "tensor dimensions " + std::to_string(tensor.c) + "x" +
                    std::to_string(tensor.h) + "x" + std::to_string(tensor.w) +
                    " exceed the supported element count");
  }
  tensor.data = in.Floats(plane * tensor.c, "tensor payload");
  return tensor;
}

namespace {

DescriptorStore MakeStore(const std::vector<StyleDescriptor>& descs) {
  DescriptorStore store;
  if (!descs.empty()) {
    store.c = static_cast<std::uint32_t>(descs.front().channels());
    store.t = descs.front().t;
    store.idx = descs.front().idx;
  }
  store.descriptors = descs;
  return store;
}

void ValidateStore(const DescriptorStore& store) {
  CheckProvenance(store.t, store.idx);
  std::unordered_set<std::string> seen;
  seen.reserve(store.descriptors.size());
  for (const StyleDescriptor& d : store.descriptors) {
    ValidateDescriptor(d);
    if (d.channels() != store.c) {
      throw Error(ErrorKind::kMixedWidth,
                  "descriptor '" + d.image_id + "' has " +
                      std::to_string(d.channels()) + " channels, store has " +
                      std::to_string(store.c));
    }
    if (d.t != store.t || d.idx != store.idx) {
      throw Error(ErrorKind::kProvenanceMismatch,
                  "descriptor '" + d.image_id + "' has (t=" + std::to_string(d.t) +
                      ", idx=" + std::to_string(d.idx) + "), store has (t=" +
                      std::to_string(store.t) + ", idx=" +
                      std::to_string(store.idx) + ")");
    }
    if (!seen.insert(d.image_id).second) {
      throw Error(ErrorKind::kDuplicateId,
                  "duplicate image_id '" + d.image_id + "'");
    }
  }
}

}  // namespace

std::size_t WriteDescriptorStore(const std::vector<StyleDescriptor>& descs,
                                 std::ostream& sink) {
  return WriteDescriptorStore(MakeStore(descs), sink);
}

std::size_t WriteDescriptorStore(const DescriptorStore& store,
                                 std::ostream& sink) {
  ValidateStore(store);
  ByteWriter out(sink);
  out.Bytes(kStoreMagic.data(), kStoreMagic.size());
  out.U32(kFormatVersion);
  out.U64(store.descriptors.size());
  out.U32(store.c);
  out.U32(store.t);
  out.U32(store.idx);
  for (const StyleDescriptor& d : store.descriptors) {
    out.String(d.image_id);
    out.Floats(d.mu);
    out.Floats(d.var);
  }
  return out.written();
}

DescriptorStore ReadDescriptorStoreWithHeader(std::istream& source) {
  ByteReader in(source);
  in.Magic(kStoreMagic);
  in.Version();
  DescriptorStore store;
  const std::uint64_t count = in.U64("record count");
  store.c = in.U32("c");
  store.t = in.U32("t");
  store.idx = in.U32("idx");
  CheckProvenance(store.t, store.idx);
  if (count > 0 && store.c == 0) {
    throw Error(ErrorKind::kInvalidArgument, "non-empty store with zero channels");
  }
  if (store.c > kMaxTensorElements) {
    throw Error(ErrorKind::kDimensionOverflow, "store channel count too large");
  }
  store.descriptors.reserve(
      static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 16)));
  std::unordered_set<std::string> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    StyleDescriptor d;
    d.image_id = in.String("image_id");
    d.t = store.t;
    d.idx = store.idx;
    d.mu = in.Floats(store.c, "mu");
    d.var = in.Floats(store.c, "var");
    for (float v : d.var) {
      if (v < 0.0f) {
        throw Error(ErrorKind::kInvalidArgument,
                    "descriptor '" + d.image_id + "' has a negative variance");
      }
    }
    if (!seen.insert(d.image_id).second) {
      throw Error(ErrorKind::kDuplicateId,
                  "duplicate image_id '" + d.image_id + "'");
    }
    store.descriptors.push_back(std::move(d));
  }
  return store;
}

std::vector<StyleDescriptor> ReadDescriptorStore(std::istream& source) {
  return ReadDescriptorStoreWithHeader(source).descriptors;
}

namespace {

std::string LineError(std::size_t line, const std::string& what) {
  return "manifest line " + std::to_string(line) + ": " + what;
}

std::string RequiredString(const nlohmann::json& obj, const char* key,
                           std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw Error(ErrorKind::kMalformedLine,
                LineError(line, std::string("missing or non-string field '") +
                                    key + "'"));
  }
  return it->get<std::string>();
}

}  // namespace

DatasetManifest LoadManifest(std::istream& source) {
  std::vector<DatasetRecord> records;
  std::unordered_map<std::string, std::size_t> first_line;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw Error(ErrorKind::kMalformedLine,
                  LineError(line_no, "not a JSON object"));
    }
    DatasetRecord r;
    r.image_id = RequiredString(obj, "image_id", line_no);
    r.path = RequiredString(obj, "path", line_no);
    r.style_label = RequiredString(obj, "style_label", line_no);
    if (auto it = obj.find("semantic_label"); it != obj.end() && !it->is_null()) {
      if (!it->is_string()) {
        throw Error(ErrorKind::kMalformedLine,
                    LineError(line_no, "non-string field 'semantic_label'"));
      }
      r.semantic_label = it->get<std::string>();
    }
    if (r.image_id.empty() || r.image_id.size() > kMaxImageIdBytes) {
      throw Error(ErrorKind::kMalformedLine,
                  LineError(line_no, "image_id must be 1..4096 bytes"));
    }
    if (r.style_label.empty()) {
      throw Error(ErrorKind::kMalformedLine,
                  LineError(line_no, "empty style_label"));
    }
    auto [it, inserted] = first_line.emplace(r.image_id, line_no);
    if (!inserted) {
      throw Error(ErrorKind::kDuplicateId,
                  LineError(line_no, "duplicate image_id '" + r.image_id +
                                         "' (first seen on line " +
                                         std::to_string(it->second) + ")"));
    }
    records.push_back(std::move(r));
  }
  if (source.bad()) throw Error(ErrorKind::kIo, "manifest read failed");
  return DatasetManifest(std::move(records));
}

void WriteManifest(const DatasetManifest& manifest, std::ostream& sink) {
  for (const DatasetRecord& r : manifest.records()) {
    nlohmann::ordered_json obj;
    obj["image_id"] = r.image_id;
    obj["path"] = r.path;
    obj["style_label"] = r.style_label;
    if (r.semantic_label) obj["semantic_label"] = *r.semantic_label;
    sink << obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)
         << '\n';
  }
  if (!sink) throw Error(ErrorKind::kIo, "manifest write failed");
}

namespace {

std::ifstream OpenIn(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  return in;
}

std::ofstream OpenOut(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot create '" + path.string() + "'");
  return out;
}

template <class Fn>
auto WithPath(const std::filesystem::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace

FeatureTensor ReadFeatureTensorFile(const std::filesystem::path& path) {
  auto in = OpenIn(path);
  return WithPath(path, [&] { return ReadFeatureTensor(in); });
}

void WriteFeatureTensorFile(const FeatureTensor& tensor,
                            const std::filesystem::path& path) {
  auto out = OpenOut(path);
  WithPath(path, [&] { WriteFeatureTensor(tensor, out); });
  out.close();
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path.string() + "'");
}

DescriptorStore ReadDescriptorStoreFile(const std::filesystem::path& path) {
  auto in = OpenIn(path);
  return WithPath(path, [&] { return ReadDescriptorStoreWithHeader(in); });
}

void WriteDescriptorStoreFile(const DescriptorStore& store,
                              const std::filesystem::path& path) {
  auto out = OpenOut(path);
  WithPath(path, [&] { WriteDescriptorStore(store, out); });
  out.close();
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path.string() + "'");
}

DatasetManifest LoadManifestFile(const std::filesystem::path& path) {
  auto in = OpenIn(path);
  return WithPath(path, [&] { return LoadManifest(in); });
}

}  // namespace stylometric
