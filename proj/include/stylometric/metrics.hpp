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

// Closed-form distances between diagonal Gaussians (mu, diag(var)).
// Lower values mean more similar style. All accumulation is in double, in a
// fixed lane order, so a given pair always produces the same bits.

#ifndef STYLOMETRIC_METRICS_HPP_
#define STYLOMETRIC_METRICS_HPP_

#include <array>
#include <optional>
#include <span>
#include <string_view>

#include "stylometric/feature_store.hpp"

namespace stylometric {

enum class MetricKind { kW2, kL2, kGram, kKl, kJsd };

inline constexpr std::array<MetricKind, 5> kAllMetricKinds = {
    MetricKind::kW2, MetricKind::kL2, MetricKind::kGram, MetricKind::kKl,
    MetricKind::kJsd};

std::string_view MetricName(MetricKind kind);  // "w2", "l2", ...
std::optional<MetricKind> ParseMetricKind(std::string_view name);

// KL and JSD are undefined for zero-variance channels.
bool RequiresPositiveVariance(MetricKind kind);

// Borrowed view of a descriptor with per-channel standard deviations
// precomputed as sqrt(double(var)). The retrieval index keeps these around
// so the scan does not take square roots per pair.
struct GaussianView {
  std::string_view image_id;
  std::span<const float> mu;
  std::span<const float> var;
  std::span<const double> stddev;
};

// ||mu_a - mu_b||^2 + sum_c (sd_a[c] - sd_b[c])^2
double W2Squared(const GaussianView& a, const GaussianView& b);
// ||mu_a - mu_b||^2
double L2Squared(const GaussianView& a, const GaussianView& b);
// ||mu_a mu_a^T - mu_b mu_b^T||_F without forming the C x C matrices.
double GramDistance(const GaussianView& a, const GaussianView& b);
// KL(a || b), including the -C term so that KL(a || a) == 0.
double KlDivergence(const GaussianView& a, const GaussianView& b);
// KL(a || b) without the -C term. Always KlDivergence + C/2.
double KlDivergenceUncorrected(const GaussianView& a, const GaussianView& b);
// 0.5 KL(a || b) + 0.5 KL(b || a).
double Jsd(const GaussianView& a, const GaussianView& b);
double Distance(MetricKind kind, const GaussianView& a, const GaussianView& b);

// Descriptor overloads. They compute the standard deviations on the fly and
// return exactly what the view overloads return.
double W2Squared(const StyleDescriptor& a, const StyleDescriptor& b);
double L2Squared(const StyleDescriptor& a, const StyleDescriptor& b);
double GramDistance(const StyleDescriptor& a, const StyleDescriptor& b);
double KlDivergence(const StyleDescriptor& a, const StyleDescriptor& b);
double KlDivergenceUncorrected(const StyleDescriptor& a, const StyleDescriptor& b);
double Jsd(const StyleDescriptor& a, const StyleDescriptor& b);
double Distance(MetricKind kind, const StyleDescriptor& a,
                const StyleDescriptor& b);

}  // namespace stylometric

#endif  // STYLOMETRIC_METRICS_HPP_
