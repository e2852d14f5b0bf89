// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgetrain/graph.hpp"
#include "edgetrain/tiler.hpp"

namespace edgetrain {

enum class StepKind { kDmaIn, kKernel, kDmaOut, kAccumulate, kUpdateParams, kBarrier };

std::string_view step_kind_name(StepKind kind);

/// One instruction of the flat program. DMA steps move rows x [lo, hi) of
/// an L2 tensor to or from an L1 slot; compute steps run one tile of a node
/// on whatever the node's slots currently hold.
struct Step {
  StepKind kind = StepKind::kKernel;
  /// Position in TilingPlan::nodes.
  std::size_t plan_node = 0;
  /// DMA: operand index within the node geometry.
  std::size_t operand = 0;
  std::string buffer;
  std::int64_t lo = 0, hi = 0;
  std::int64_t tile = 0;
  int pass = 0;
  /// Only executed on micro-steps where the accumulation guard fires.
  bool guarded = false;

  bool is_dma() const { return kind == StepKind::kDmaIn || kind == StepKind::kDmaOut; }
  bool is_compute() const {
    return kind == StepKind::kKernel || kind == StepKind::kAccumulate || kind == StepKind::kUpdateParams;
  }
};

struct Schedule {
  std::vector<Step> steps;
  /// Accumulation guard period (1 when every micro-step updates).
  std::int64_t accumulate_steps = 1;
};

/// Emits, per node: loop-invariant DmaIns, then for every pass and tile the
/// tile's DmaIns, one compute step and its DmaOuts, then loop-invariant
/// DmaOuts. Barriers separate nodes.
Schedule lower(const Graph& g, const TilingPlan& plan);

std::string format_schedule(const Graph& g, const TilingPlan& plan, const Schedule& s);

}  // namespace edgetrain
