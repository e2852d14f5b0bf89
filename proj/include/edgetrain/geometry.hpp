// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "edgetrain/graph.hpp"
#include "edgetrain/kernels.hpp"

// Per-node iteration space and operand access pattern. The tiler sizes L1
// buffers from it, lowering emits DMA steps from it, and the executor binds
// kernel arguments from it, so all three agree on which bytes a tile touches.

namespace edgetrain {

enum class Direction { kIn, kOut, kInOut };

/// Maps an iteration tile [a, b) to the operand range it touches.
enum class WindowRule {
  kIdentity,     // [a, b)
  kWhole,        // [0, length)
  kConvInput,    // receptive field of conv outputs [a, b)
  kConvGradDy,   // conv outputs reading any input in [a, b)
  kPoolInput,    // receptive field of pool outputs [a, b)
  kPoolGradDy,   // pool outputs reading any input in [a, b)
};

struct Operand {
  std::string tensor;
  Direction direction = Direction::kIn;
  /// Loop-invariant: transferred once around the tile loop.
  bool persistent = false;
  WindowRule rule = WindowRule::kIdentity;
  /// The operand is viewed as [rows, length]; flat tensors use rows = 1.
  std::int64_t rows = 1;
  std::int64_t length = 1;
  /// Bit p set: the operand is accessed in pass p.
  unsigned passes = 1;

  bool reads() const { return direction != Direction::kOut; }
  bool writes() const { return direction != Direction::kIn; }
  std::int64_t bytes() const { return rows * length * 4; }
};

struct NodeGeometry {
  std::size_t node = 0;
  OpKind kind = OpKind::kReLU;
  /// Length of the tiled axis; whole nodes have a single tile.
  std::int64_t iter_length = 1;
  bool tileable = true;
  int passes = 1;
  std::vector<Operand> operands;
  /// 64-bit scratch: Welford states or normalization-gradient sums.
  std::int64_t double_scratch_bytes = 0;
  /// im2col scratch per iteration unit (ConvGradW).
  std::int64_t im2col_bytes_per_unit = 0;

  kernels::ConvShape conv{};
  kernels::PoolShape pool{};
  kernels::NormShape norm{};

  /// Operand range for iteration tile [a, b); never inverted.
  std::pair<std::int64_t, std::int64_t> window(const Operand& op, std::int64_t a, std::int64_t b) const;
};

/// Throws CompileError for node kinds the backend cannot execute (fused
/// gradients, undecomposed normalization).
NodeGeometry geometry_for(const Graph& g, std::size_t node_index);

kernels::ConvShape conv_shape(const Graph& g, const Node& n);
kernels::PoolShape pool_shape(const Graph& g, const Node& n);
kernels::NormShape norm_shape(const Graph& g, const Node& n);

}  // namespace edgetrain
