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

#include "stylometric/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "stylometric/error.hpp"

namespace stylometric {

std::string_view MetricName(MetricKind kind) {
  switch (kind) {
    case MetricKind::kW2: return "w2";
    case MetricKind::kL2: return "l2";
    case MetricKind::kGram: return "gram";
    case MetricKind::kKl: return "kl";
    case MetricKind::kJsd: return "jsd";
  }
  return "unknown";
}

std::optional<MetricKind> ParseMetricKind(std::string_view name) {
  for (MetricKind kind : kAllMetricKinds) {
    if (MetricName(kind) == name) return kind;
  }
  return std::nullopt;
}

bool RequiresPositiveVariance(MetricKind kind) {
  return kind == MetricKind::kKl || kind == MetricKind::kJsd;
}

namespace {

// Sums term(c) over [0, n) in four interleaved lanes, combined as
// (l0 + l1) + (l2 + l3). Fixed order, so a pair always yields the same bits.
template <class Term>
inline double LaneSum(std::size_t n, Term term) {
  double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
  std::size_t c = 0;
  for (; c + 4 <= n; c += 4) {
    l0 += term(c);
    l1 += term(c + 1);
    l2 += term(c + 2);
    l3 += term(c + 3);
  }
  for (; c < n; ++c) l0 += term(c);
  return (l0 + l1) + (l2 + l3);
}

void CheckWidths(const GaussianView& a, const GaussianView& b) {
  if (a.mu.size() != b.mu.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "descriptor '" + std::string(a.image_id) + "' has " +
                    std::to_string(a.mu.size()) + " channels, '" +
                    std::string(b.image_id) + "' has " +
                    std::to_string(b.mu.size()));
  }
}

double MeanTerm(const GaussianView& a, const GaussianView& b) {
  const float* ma = a.mu.data();
  const float* mb = b.mu.data();
  return LaneSum(a.mu.size(), [=](std::size_t c) {
    const double d = static_cast<double>(ma[c]) - static_cast<double>(mb[c]);
    return d * d;
  });
}

void CheckPositive(const GaussianView& g) {
  for (std::size_t c = 0; c < g.var.size(); ++c) {
    if (!(g.var[c] > 0.0f)) {
      throw Error(ErrorKind::kDegenerateVariance,
                  "descriptor '" + std::string(g.image_id) +
                      "' has zero variance in channel " + std::to_string(c) +
                      "; KL/JSD need strictly positive variances");
    }
  }
}

// sum_c [ log(vb/va) + va/vb + (mb - ma)^2 / vb ]
double KlSum(const GaussianView& a, const GaussianView& b) {
  CheckWidths(a, b);
  CheckPositive(a);
  CheckPositive(b);
  const float* ma = a.mu.data();
  const float* mb = b.mu.data();
  const float* va = a.var.data();
  const float* vb = b.var.data();
  return LaneSum(a.mu.size(), [=](std::size_t c) {
    const double var_a = va[c];
    const double var_b = vb[c];
    const double dm = static_cast<double>(mb[c]) - static_cast<double>(ma[c]);
    return std::log(var_b / var_a) + var_a / var_b + dm * dm / var_b;
  });
}

struct Prepared {
  std::vector<double> stddev;
  GaussianView view;

  Prepared(const Prepared&) = delete;
  Prepared& operator=(const Prepared&) = delete;

  explicit Prepared(const StyleDescriptor& d) {
    if (d.mu.size() != d.var.size()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "descriptor '" + d.image_id + "' has inconsistent widths");
    }
    stddev.resize(d.var.size());
    for (std::size_t c = 0; c < d.var.size(); ++c) {
      stddev[c] = std::sqrt(static_cast<double>(d.var[c]));
    }
    view = GaussianView{d.image_id, d.mu, d.var, stddev};
  }
};

}  // namespace

double W2Squared(const GaussianView& a, const GaussianView& b) {
  CheckWidths(a, b);
  const double* sa = a.stddev.data();
  const double* sb = b.stddev.data();
  const double cov = LaneSum(a.stddev.size(), [=](std::size_t c) {
    const double d = sa[c] - sb[c];
    return d * d;
  });
  return MeanTerm(a, b) + cov;
}

double L2Squared(const GaussianView& a, const GaussianView& b) {
  CheckWidths(a, b);
  return MeanTerm(a, b);
}

double GramDistance(const GaussianView& a, const GaussianView& b) {
  CheckWidths(a, b);
  const float* ma = a.mu.data();
  const float* mb = b.mu.data();
  const std::size_t n = a.mu.size();
  const double norm_a = LaneSum(n, [=](std::size_t c) {
    return static_cast<double>(ma[c]) * static_cast<double>(ma[c]);
  });
  const double norm_b = LaneSum(n, [=](std::size_t c) {
    return static_cast<double>(mb[c]) * static_cast<double>(mb[c]);
  });
  const double dot = LaneSum(n, [=](std::size_t c) {
    return static_cast<double>(ma[c]) * static_cast<double>(mb[c]);
  });
  // |a|^4 + |b|^4 - 2 (a.b)^2, regrouped as (|a|^2 - |b|^2)^2 + 2 (|a|^2 |b|^2 - (a.b)^2).
  const double diff = norm_a - norm_b;
  const double radicand = diff * diff + 2.0 * (norm_a * norm_b - dot * dot);
  return std::sqrt(std::max(0.0, radicand));
}

double KlDivergence(const GaussianView& a, const GaussianView& b) {
  const double sum = KlSum(a, b);
  return std::max(0.0, 0.5 * sum - 0.5 * static_cast<double>(a.mu.size()));
}

double KlDivergenceUncorrected(const GaussianView& a, const GaussianView& b) {
  return 0.5 * KlSum(a, b);
}

double Jsd(const GaussianView& a, const GaussianView& b) {
  return 0.5 * KlDivergence(a, b) + 0.5 * KlDivergence(b, a);
}

double Distance(MetricKind kind, const GaussianView& a, const GaussianView& b) {
  switch (kind) {
    case MetricKind::kW2: return W2Squared(a, b);
    case MetricKind::kL2: return L2Squared(a, b);
    case MetricKind::kGram: return GramDistance(a, b);
    case MetricKind::kKl: return KlDivergence(a, b);
    case MetricKind::kJsd: return Jsd(a, b);
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown metric kind");
}

double W2Squared(const StyleDescriptor& a, const StyleDescriptor& b) {
  return W2Squared(Prepared(a).view, Prepared(b).view);
}

double L2Squared(const StyleDescriptor& a, const StyleDescriptor& b) {
  return L2Squared(Prepared(a).view, Prepared(b).view);
}

double GramDistance(const StyleDescriptor& a, const StyleDescriptor& b) {
  return GramDistance(Prepared(a).view, Prepared(b).view);
}

double KlDivergence(const StyleDescriptor& a, const StyleDescriptor& b) {
  return KlDivergence(Prepared(a).view, Prepared(b).view);
}

double KlDivergenceUncorrected(const StyleDescriptor& a,
                               const StyleDescriptor& b) {
  return KlDivergenceUncorrected(Prepared(a).view, Prepared(b).view);
}

double Jsd(const StyleDescriptor& a, const StyleDescriptor& b) {
  return Jsd(Prepared(a).view, Prepared(b).view);
}

double Distance(MetricKind kind, const StyleDescriptor& a,
                const StyleDescriptor& b) {
  return Distance(kind, Prepared(a).view, Prepared(b).view);
}

}  // namespace stylometric
