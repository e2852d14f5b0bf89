// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgetrain/config.hpp"
#include "edgetrain/geometry.hpp"
#include "edgetrain/graph.hpp"

namespace edgetrain {

/// Summary of what one node needs resident in L1. Bytes per unit tile are
/// the linear growth of a streamed buffer per extra position of the tile.
struct TileConstraint {
  std::string node;
  std::int64_t halo_lo = 0;
  std::int64_t halo_hi = 0;
  std::vector<std::pair<std::string, std::int64_t>> persistent_buffers;
  std::vector<std::pair<std::string, std::int64_t>> per_tile_buffers;
  std::int64_t scratch_bytes = 0;
};

TileConstraint constraints_for(const Graph& g, std::size_t node_index);

enum class Buffering { kSingle, kDouble };

/// One reserved L1 region. Streamed operands get one slot per buffer.
struct Slot {
  std::int64_t offset = 0;
  std::int64_t capacity = 0;
};

struct NodeTiling {
  std::size_t node = 0;
  NodeGeometry geometry;
  std::int64_t tile_len = 1;
  std::int64_t num_tiles = 1;
  Buffering buffering = Buffering::kSingle;
  /// slots[i] holds one or two regions for operand i.
  std::vector<std::vector<Slot>> slots;
  Slot double_scratch;
  Slot im2col;
  std::int64_t l1_bytes = 0;
  /// Transfer volume of one execution of the node.
  std::int64_t dma_bytes = 0;

  std::pair<std::int64_t, std::int64_t> tile(std::int64_t i) const {
    const std::int64_t a = i * tile_len;
    return {a, std::min(geometry.iter_length, a + tile_len)};
  }
  const Slot& slot_for(std::size_t operand, std::int64_t tile_index) const {
    const auto& s = slots[operand];
    return s.size() > 1 ? s[static_cast<std::size_t>(tile_index % 2)] : s.front();
  }
};

struct DmaEstimate {
  std::int64_t streaming = 0;  // every micro-step
  std::int64_t update = 0;     // only when the update guard fires
  std::int64_t total(std::int64_t micro_steps, std::int64_t updates) const {
    return streaming * micro_steps + update * updates;
  }
};

struct TilingPlan {
  /// Schedule order (a topological order of the graph).
  std::vector<NodeTiling> nodes;
  std::int64_t l1_budget = 0;
  std::int64_t peak_l1 = 0;
  DmaEstimate dma;
};

/// Lays out and prices a fixed tiling of one node. `tile_len` is clamped
/// to the iteration length.
NodeTiling make_node_tiling(const Graph& g, const NodeGeometry& geo, std::int64_t tile_len, Buffering buffering,
                            std::int64_t alignment);

/// Picks, per node, the tile length with the least DMA traffic whose
/// working set fits the L1 budget; ties go to larger tiles, then double
/// buffering when it fits. Throws CompileError naming the first node that
/// does not fit even with single-position tiles.
TilingPlan solve_tiling(const Graph& g, const std::vector<std::size_t>& order, const TrainingConfig& cfg);

DmaEstimate estimate_dma(const Graph& g, const TilingPlan& plan);

/// Human-readable per-node table.
std::string format_tiling(const Graph& g, const TilingPlan& plan);

}  // namespace edgetrain
