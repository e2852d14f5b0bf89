// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edgetrain/program.hpp"

namespace edgetrain {

struct MachineStats {
  std::int64_t dma_in_bytes = 0;
  std::int64_t dma_out_bytes = 0;
  std::uint64_t flops = 0;
  std::int64_t l1_high_water = 0;
  std::int64_t l2_high_water = 0;
  std::int64_t steps_executed = 0;
  std::int64_t micro_steps = 0;
  std::int64_t updates = 0;

  std::int64_t dma_bytes() const { return dma_in_bytes + dma_out_bytes; }
};

/// Functional model of the two-level memory. L2 is a byte arena laid out by
/// the memory plan, with an owner tag per word: freed words are poisoned,
/// and reading a word owned by another buffer is an error. L1 is a
/// scratchpad laid out per node by the tiling plan; a write bitmap and
/// per-slot residency records are cleared at every barrier, so a kernel
/// can only see data transferred in since.
class Machine {
 public:
  explicit Machine(const Program& program);

  /// Host transfer into an L2 buffer (inputs before a micro-step, initial
  /// parameters). State buffers start zeroed.
  void write(const std::string& tensor, std::span<const float> values);
  /// Throws NumericalError if the buffer's words are not owned by it.
  std::vector<float> read(const std::string& tensor) const;

  /// Executes the schedule once. Guarded steps run only when the micro-step
  /// count reaches a multiple of the accumulation period.
  void run_micro_step(double lr);

  const MachineStats& stats() const { return stats_; }
  const Program& program() const { return program_; }

 private:
  struct Resident {
    bool valid = false;
    std::int64_t lo = 0, hi = 0;
  };

  std::int32_t buffer_id(const std::string& tensor) const;
  std::byte* l1(std::int64_t offset) { return reinterpret_cast<std::byte*>(l1_.data()) + offset; }
  void touch_l1(const Slot& slot);
  void require_written(std::int64_t offset, std::int64_t bytes, std::size_t step, const std::string& what) const;
  void barrier();
  void dma_in(std::size_t step_index, const Step& s);
  void dma_out(std::size_t step_index, const Step& s);
  void compute(std::size_t step_index, const Step& s, double lr);

  Program program_;
  std::vector<double> l1_;
  std::vector<std::uint8_t> l1_written_;
  std::vector<float> l2_;
  std::vector<std::int32_t> owner_;
  /// residency_[operand][buffer] of the current node.
  std::vector<std::vector<Resident>> residency_;
  std::size_t current_node_ = 0;
  /// Buffers whose live range ends at each step.
  std::vector<std::vector<std::int32_t>> frees_;
  MachineStats stats_;
};

}  // namespace edgetrain
