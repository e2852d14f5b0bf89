// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

namespace edgetrain {

/// Running (count, mean, M2) statistics. Kept in 64-bit regardless of the
/// tensor precision; variance is the population variance m2 / count.
struct WelfordState {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  double variance() const { return count > 0 ? m2 / static_cast<double>(count) : 0.0; }
  bool operator==(const WelfordState&) const = default;
};

/// Chan et al. pairwise combination. Merging with an empty state returns the
/// other operand unchanged.
inline WelfordState welford_merge(const WelfordState& a, const WelfordState& b) {
  if (a.count == 0) return b;
  if (b.count == 0) return a;
  const std::int64_t count = a.count + b.count;
  const double n = static_cast<double>(count);
  const double delta = b.mean - a.mean;
  WelfordState out;
  out.count = count;
  out.mean = a.mean + delta * static_cast<double>(b.count) / n;
  out.m2 = a.m2 + b.m2 + delta * delta * static_cast<double>(a.count) * static_cast<double>(b.count) / n;
  return out;
}

/// Statistics of one contiguous block, computed two-pass.
template <class T>
WelfordState welford_of(std::span<const T> values) {
  WelfordState s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (T v : values) sum += static_cast<double>(v);
  s.count = static_cast<std::int64_t>(values.size());
  s.mean = sum / static_cast<double>(s.count);
  for (T v : values) {
    const double d = static_cast<double>(v) - s.mean;
    s.m2 += d * d;
  }
  return s;
}

}  // namespace edgetrain
