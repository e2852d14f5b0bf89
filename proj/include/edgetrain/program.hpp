// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "edgetrain/config.hpp"
#include "edgetrain/flops.hpp"
#include "edgetrain/graph.hpp"
#include "edgetrain/memplan.hpp"
#include "edgetrain/schedule.hpp"
#include "edgetrain/tiler.hpp"

namespace edgetrain {

struct CompileOptions {
  /// Give every buffer its own address for the whole schedule, so that
  /// every tensor can be read back after a micro-step.
  bool retain_all = false;
  /// Reject plans whose L2 peak exceeds the budget.
  bool enforce_l2_budget = true;
};

/// A graph lowered to a flat schedule with static L1 and L2 layouts.
struct Program {
  Graph graph;
  TrainingConfig cfg;
  std::vector<std::size_t> order;
  TilingPlan tiling;
  Schedule schedule;
  std::vector<LiveRange> ranges;
  MemoryPlan memory;
};

/// validate_and_sort -> solve_tiling -> lower -> compute_lifetimes ->
/// allocate_static. The graph must already be decomposed.
Program compile(const Graph& g, const TrainingConfig& cfg, const CompileOptions& options = {});

enum class Strategy { kNoFineTuning, kLinearProbe, kFullBatchNorm, kEdge };

std::string_view strategy_name(Strategy s);
/// Accepts no-ft, lp, full-ft-bn and edge-ft.
Strategy strategy_from_name(std::string_view name);

struct StrategyGraph {
  /// Forward graph the strategy trains (batch and normalization adjusted).
  Graph forward;
  /// Decomposed training graph, or the decomposed forward graph for no-ft.
  Graph graph;
  TrainingConfig cfg;
  bool trains = true;
};

/// edge-ft: GroupNorm, single-sample micro-batches accumulated to the
/// effective batch. lp: same, all but the last Linear frozen. full-ft-bn:
/// BatchNorm with a real batch of `bn_batch`. no-ft: inference only.
StrategyGraph prepare_strategy(const Graph& forward, Strategy s, TrainingConfig cfg, std::int64_t bn_batch = 8);

struct PeakReport {
  Strategy strategy = Strategy::kEdge;
  std::int64_t peak_l1 = 0;
  std::int64_t peak_l2 = 0;
  std::int64_t lower_bound_l2 = 0;
  std::int64_t l1_budget = 0;
  std::int64_t l2_budget = 0;
  /// Liveness peak per MemClass.
  std::array<std::int64_t, kMemClassCount> class_peak{};
  /// Liveness peak of activations and data gradients together.
  std::int64_t activation_gradient_peak = 0;
  std::int64_t trainable_parameters = 0;
  FlopCount flops;
  DmaEstimate dma;

  bool fits() const { return peak_l1 <= l1_budget && peak_l2 <= l2_budget; }
};

PeakReport peak_report(const Graph& forward, Strategy s, const TrainingConfig& cfg, std::int64_t bn_batch = 8);

std::string format_report(const PeakReport& r);

}  // namespace edgetrain
