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

#ifndef STYLOMETRIC_DESCRIPTOR_HPP_
#define STYLOMETRIC_DESCRIPTOR_HPP_

#include <vector>

#include "stylometric/feature_store.hpp"

namespace stylometric {

// Per-channel first and second moments at full 64-bit precision.
struct ChannelMoments {
  std::vector<double> mean;
  std::vector<double> variance;  // population variance, divisor H*W
};

/// Channel-wise mean and population variance of a C x H x W feature tensor.
///
/// Each channel is a contiguous H*W run, reduced in a fixed order so results
/// do not depend on threading. Variances that round below zero are clamped.
/// Throws Error for empty spatial extent or non-finite input.
ChannelMoments ComputeMoments(const FeatureTensor& tensor);

/// The style descriptor of `tensor`: its moments narrowed to 32-bit storage,
/// with image id, timestep and block index copied over.
StyleDescriptor ComputeDescriptor(const FeatureTensor& tensor);

}  // namespace stylometric

#endif  // STYLOMETRIC_DESCRIPTOR_HPP_
