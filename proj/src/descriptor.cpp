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

#include "stylometric/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <span>

#include "stylometric/error.hpp"

namespace stylometric {

namespace {

// Single pass over one channel using the shifted-data formulation: values
// are taken relative to the channel's first sample, which keeps the
// sum-of-squares cancellation bounded by the channel's own spread.
void ReduceChannel(std::span<const float> plane, double& mean, double& variance) {
  const double n = static_cast<double>(plane.size());
  const double shift = plane.front();
  double s1 = 0.0;
  double s2 = 0.0;
  for (float x : plane) {
    const double d = static_cast<double>(x) - shift;
    s1 += d;
    s2 += d * d;
  }
  mean = shift + s1 / n;
  variance = std::max(0.0, (s2 - s1 * s1 / n) / n);
}

}  // namespace

ChannelMoments ComputeMoments(const FeatureTensor& tensor) {
  if (tensor.h == 0 || tensor.w == 0) {
    throw Error(ErrorKind::kInvalidArgument,
                "tensor '" + tensor.image_id + "' has empty spatial extent");
  }
  ValidateTensor(tensor);

  const std::size_t plane = tensor.spatial_size();
  ChannelMoments out;
  out.mean.resize(tensor.c);
  out.variance.resize(tensor.c);
  std::span<const float> data(tensor.data);
  for (std::size_t c = 0; c < tensor.c; ++c) {
    ReduceChannel(data.subspan(c * plane, plane), out.mean[c], out.variance[c]);
  }
  return out;
}

StyleDescriptor ComputeDescriptor(const FeatureTensor& tensor) {
  const ChannelMoments moments = ComputeMoments(tensor);
  StyleDescriptor d;
  d.image_id = tensor.image_id;
  d.t = tensor.t;
  d.idx = tensor.idx;
  d.mu.assign(moments.mean.begin(), moments.mean.end());
  d.var.assign(moments.variance.begin(), moments.variance.end());
  // Variances of extreme-magnitude inputs can exceed the f32 range.
  for (std::size_t c = 0; c < d.var.size(); ++c) {
    if (!std::isfinite(d.var[c])) {
      throw Error(ErrorKind::kNonFinite,
                  "tensor '" + tensor.image_id + "' channel " + std::to_string(c) +
                      " variance overflows 32-bit storage");
    }
  }
  return d;
}

}  // namespace stylometric
