// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "edgetrain/graph.hpp"
#include "edgetrain/schedule.hpp"
#include "edgetrain/tiler.hpp"

namespace edgetrain {

enum class Scope { kStep, kMicroBatch, kTraining };

/// Accounting class used by the peak breakdown.
enum class MemClass { kParameters, kOptimizerState, kAccumulators, kActivations, kGradients };
inline constexpr int kMemClassCount = 5;

std::string_view mem_class_name(MemClass c);
MemClass mem_class_of(const TensorSpec& t);

/// Inclusive step interval during which an L2 buffer holds a live value.
struct LiveRange {
  std::string buffer;
  std::int64_t bytes = 0;
  std::int64_t first = 0;
  std::int64_t last = 0;
  Scope scope = Scope::kStep;
  MemClass mem_class = MemClass::kActivations;

  bool overlaps(const LiveRange& o) const { return first <= o.last && o.first <= last; }
};

/// Ranges follow DMA references. State buffers span the whole schedule,
/// inputs start at step 0 and outputs end at the last step. Throws
/// CompileError when a buffer is read before any step writes it.
std::vector<LiveRange> compute_lifetimes(const Graph& g, const Schedule& s, std::int64_t alignment = 4);

/// Every range widened to the whole schedule (no address reuse).
std::vector<LiveRange> retain_all(std::vector<LiveRange> ranges, std::int64_t steps);

struct Placement {
  LiveRange range;
  std::int64_t offset = 0;
};

struct MemoryPlan {
  std::vector<Placement> placements;
  std::int64_t peak = 0;

  const Placement* find(const std::string& buffer) const;

 private:
  friend MemoryPlan allocate_static(const std::vector<LiveRange>&, std::int64_t);
  std::unordered_map<std::string, std::size_t> index_;
};

/// Greedy best fit. Buffers are placed in order of first use, larger
/// first; each takes the smallest free gap among the time-overlapping
/// buffers that fits it (lowest address on ties), or the top otherwise.
MemoryPlan allocate_static(const std::vector<LiveRange>& ranges, std::int64_t alignment);

/// max over steps of the bytes live at that step.
std::int64_t liveness_lower_bound(const std::vector<LiveRange>& ranges);

struct LivePeak {
  std::int64_t bytes = 0;
  std::int64_t step = 0;
};

/// Liveness peak restricted to the given classes.
LivePeak class_peak(const std::vector<LiveRange>& ranges, const std::vector<MemClass>& classes);

/// Throws CompileError listing the live set at the busiest step when the
/// plan does not fit.
void check_budget(const MemoryPlan& plan, const std::vector<LiveRange>& ranges, std::int64_t budget);

/// buffer,level,offset,bytes,first,last,kind
std::string memory_csv(const Graph& g, const TilingPlan& tiling, const Schedule& s, const MemoryPlan& plan);

}  // namespace edgetrain
