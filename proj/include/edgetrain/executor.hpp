// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "edgetrain/geometry.hpp"
#include "edgetrain/graph.hpp"
#include "edgetrain/kernels.hpp"
#include "edgetrain/welford.hpp"

namespace edgetrain {

/// Storage holding rows x [lo, hi) of an operand, row-major.
template <class T>
struct Binding {
  T* data = nullptr;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

template <class T>
struct TileArgs {
  /// One binding per geometry operand.
  std::vector<Binding<T>> operands;
  std::span<WelfordState> welford;
  std::span<double> sums;
  std::span<T> im2col;
  std::int64_t tile = 0;
  std::int64_t num_tiles = 1;
  /// Iteration range of the tile.
  std::int64_t a = 0, b = 1;
  int pass = 0;
  /// Learning rate of the current micro-step (SGD nodes).
  double lr = 0.0;
};

/// Runs one tile of a node. Used by both the simulator (bindings point into
/// L1) and the reference interpreter (bindings cover whole tensors).
template <class T>
kernels::Flops execute_tile(const Graph& g, const NodeGeometry& geo, const TileArgs<T>& args);

}  // namespace edgetrain
