// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <type_traits>

namespace edgetrain {

/// Dense [rows, length] slice of a [N, C, T] tensor covering the absolute
/// time range [begin, begin + length) of a sequence of length `full`.
/// Rows are (n, c) pairs, n-major. An untiled tensor is the window with
/// begin = 0 and length = full.
template <class T>
struct TimeWindow {
  T* data = nullptr;
  std::int64_t rows = 0;
  std::int64_t begin = 0;
  std::int64_t length = 0;
  std::int64_t full = 0;

  std::int64_t end() const { return begin + length; }
  bool covers(std::int64_t lo, std::int64_t hi) const { return lo >= hi || (lo >= begin && hi <= end()); }
  T& at(std::int64_t row, std::int64_t t) const { return data[row * length + (t - begin)]; }
  T* row(std::int64_t r) const { return data + r * length; }
  std::int64_t size() const { return rows * length; }

  operator TimeWindow<const T>() const  // NOLINT(google-explicit-constructor)
    requires(!std::is_const_v<T>)
  {
    return {data, rows, begin, length, full};
  }
};

template <class T>
TimeWindow<T> full_window(T* data, std::int64_t rows, std::int64_t t) {
  return {data, rows, 0, t, t};
}

}  // namespace edgetrain
