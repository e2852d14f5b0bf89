// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgetrain/machine.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "edgetrain/error.hpp"
#include "edgetrain/executor.hpp"

namespace edgetrain {
namespace {

constexpr const char* kOrigin = "execsim";

std::string at_step(std::size_t i) { return "step " + std::to_string(i) + ": "; }

}  // namespace

Machine::Machine(const Program& program) : program_(program) {
  const std::int64_t l1_bytes = program_.cfg.l1_budget_bytes;
  l1_.assign(static_cast<std::size_t>((l1_bytes + 7) / 8), 0.0);
  l1_written_.assign(static_cast<std::size_t>(l1_bytes), 0);
  const std::int64_t words = (program_.memory.peak + 3) / 4;
  l2_.assign(static_cast<std::size_t>(words), 0.0f);
  owner_.assign(static_cast<std::size_t>(words), -1);

  frees_.assign(program_.schedule.steps.size(), {});
  const auto last = static_cast<std::int64_t>(program_.schedule.steps.size()) - 1;
  for (std::size_t i = 0; i < program_.memory.placements.size(); ++i) {
    const Placement& p = program_.memory.placements[i];
    if (p.range.scope == Scope::kTraining) {
      std::fill_n(owner_.begin() + p.offset / 4, p.range.bytes / 4, static_cast<std::int32_t>(i));
      continue;
    }
    if (p.range.last < last) frees_[static_cast<std::size_t>(p.range.last)].push_back(static_cast<std::int32_t>(i));
  }
}

std::int32_t Machine::buffer_id(const std::string& tensor) const {
  const Placement* p = program_.memory.find(tensor);
  if (!p) throw CompileError(kOrigin, "buffer '" + tensor + "' has no L2 placement");
  return static_cast<std::int32_t>(p - program_.memory.placements.data());
}

void Machine::write(const std::string& tensor, std::span<const float> values) {
  const std::int32_t id = buffer_id(tensor);
  const Placement& p = program_.memory.placements[static_cast<std::size_t>(id)];
  const std::int64_t n = program_.graph.tensor(tensor).numel();
  if (static_cast<std::int64_t>(values.size()) != n)
    throw FormatError(kOrigin, "tensor '" + tensor + "' holds " + std::to_string(n) + " values, got " +
                                   std::to_string(values.size()));
  std::copy(values.begin(), values.end(), l2_.begin() + p.offset / 4);
  std::fill_n(owner_.begin() + p.offset / 4, p.range.bytes / 4, id);
}

std::vector<float> Machine::read(const std::string& tensor) const {
  const std::int32_t id = buffer_id(tensor);
  const Placement& p = program_.memory.placements[static_cast<std::size_t>(id)];
  const std::int64_t n = program_.graph.tensor(tensor).numel();
  const auto begin = static_cast<std::size_t>(p.offset / 4);
  for (std::int64_t w = 0; w < n; ++w)
    if (owner_[begin + static_cast<std::size_t>(w)] != id)
      throw NumericalError(kOrigin, "buffer '" + tensor + "' is not live");
  return {l2_.begin() + static_cast<std::ptrdiff_t>(begin), l2_.begin() + static_cast<std::ptrdiff_t>(begin + n)};
}

void Machine::touch_l1(const Slot& slot) {
  if (slot.capacity > 0) stats_.l1_high_water = std::max(stats_.l1_high_water, slot.offset + slot.capacity);
}

void Machine::require_written(std::int64_t offset, std::int64_t bytes, std::size_t step,
                              const std::string& what) const {
  const auto* b = l1_written_.data() + offset;
  if (!std::all_of(b, b + bytes, [](std::uint8_t v) { return v != 0; }))
    throw NumericalError(kOrigin, at_step(step) + what + " reads L1 bytes not written since the last barrier");
}

void Machine::barrier() {
  const NodeTiling& prev = program_.tiling.nodes[current_node_];
  std::fill_n(l1_written_.begin(), std::min<std::int64_t>(prev.l1_bytes, static_cast<std::int64_t>(l1_written_.size())),
              0);
  for (auto& r : residency_) std::fill(r.begin(), r.end(), Resident{});
}

void Machine::dma_in(std::size_t i, const Step& s) {
  const NodeTiling& nt = program_.tiling.nodes[s.plan_node];
  const Operand& op = nt.geometry.operands[s.operand];
  const Slot& slot = s.tile < 0 ? nt.slots[s.operand][0] : nt.slot_for(s.operand, s.tile);
  const std::int64_t cols = s.hi - s.lo;
  const std::int64_t bytes = op.rows * cols * 4;
  if (bytes > slot.capacity)
    throw NumericalError(kOrigin, at_step(i) + "DmaIn of '" + s.buffer + "' (" + std::to_string(bytes) +
                                      " bytes) overflows its L1 slot of " + std::to_string(slot.capacity) + " bytes");
  if (s.lo < 0 || s.hi > op.length)
    throw NumericalError(kOrigin, at_step(i) + "DmaIn of '" + s.buffer + "' is outside the tensor");
  const std::int32_t id = buffer_id(s.buffer);
  const Placement& p = program_.memory.placements[static_cast<std::size_t>(id)];
  auto* dst = reinterpret_cast<float*>(l1(slot.offset));
  for (std::int64_t r = 0; r < op.rows; ++r) {
    const std::size_t src = static_cast<std::size_t>(p.offset / 4 + r * op.length + s.lo);
    for (std::int64_t c = 0; c < cols; ++c) {
      const std::int32_t owner = owner_[src + static_cast<std::size_t>(c)];
      if (owner != id)
        throw NumericalError(kOrigin, at_step(i) + "DmaIn of '" + s.buffer + "' reads L2 words " +
                                          (owner < 0 ? std::string("that are poisoned")
                                                     : "owned by '" + program_.memory.placements[owner].range.buffer +
                                                           "'"));
    }
    std::memcpy(dst + r * cols, l2_.data() + src, static_cast<std::size_t>(cols) * 4);
  }
  std::fill_n(l1_written_.begin() + slot.offset, bytes, 1);
  const std::size_t buf = s.tile < 0 || nt.slots[s.operand].size() == 1 ? 0 : static_cast<std::size_t>(s.tile % 2);
  residency_[s.operand][buf] = {true, s.lo, s.hi};
  stats_.dma_in_bytes += bytes;
  stats_.l2_high_water = std::max(stats_.l2_high_water, p.offset + p.range.bytes);
  touch_l1(slot);
}

void Machine::dma_out(std::size_t i, const Step& s) {
  const NodeTiling& nt = program_.tiling.nodes[s.plan_node];
  const Operand& op = nt.geometry.operands[s.operand];
  const Slot& slot = s.tile < 0 ? nt.slots[s.operand][0] : nt.slot_for(s.operand, s.tile);
  const std::size_t buf = s.tile < 0 || nt.slots[s.operand].size() == 1 ? 0 : static_cast<std::size_t>(s.tile % 2);
  const Resident& res = residency_[s.operand][buf];
  if (!res.valid || res.lo != s.lo || res.hi != s.hi)
    throw NumericalError(kOrigin, at_step(i) + "DmaOut of '" + s.buffer + "' [" + std::to_string(s.lo) + "," +
                                      std::to_string(s.hi) + ") does not match the resident L1 window");
  const std::int64_t cols = s.hi - s.lo;
  const std::int64_t bytes = op.rows * cols * 4;
  require_written(slot.offset, bytes, i, "DmaOut of '" + s.buffer + "'");
  const std::int32_t id = buffer_id(s.buffer);
  const Placement& p = program_.memory.placements[static_cast<std::size_t>(id)];
  const auto* src = reinterpret_cast<const float*>(l1(slot.offset));
  for (std::int64_t r = 0; r < op.rows; ++r) {
    const std::size_t dst = static_cast<std::size_t>(p.offset / 4 + r * op.length + s.lo);
    std::memcpy(l2_.data() + dst, src + r * cols, static_cast<std::size_t>(cols) * 4);
    std::fill_n(owner_.begin() + static_cast<std::ptrdiff_t>(dst), cols, id);
  }
  stats_.dma_out_bytes += bytes;
  stats_.l2_high_water = std::max(stats_.l2_high_water, p.offset + p.range.bytes);
  touch_l1(slot);
}

void Machine::compute(std::size_t i, const Step& s, double lr) {
  const NodeTiling& nt = program_.tiling.nodes[s.plan_node];
  const NodeGeometry& geo = nt.geometry;
  const Node& node = program_.graph.nodes[nt.node];
  const bool last_tile = s.tile == nt.num_tiles - 1 && s.pass == geo.passes - 1;

  TileArgs<float> args;
  args.tile = s.tile;
  args.num_tiles = nt.num_tiles;
  args.a = s.lo;
  args.b = s.hi;
  args.pass = s.pass;
  args.lr = lr;
  args.operands.resize(geo.operands.size());

  std::vector<std::pair<std::size_t, std::int64_t>> written;  // operand, slot offset
  for (std::size_t k = 0; k < geo.operands.size(); ++k) {
    const Operand& op = geo.operands[k];
    if (!op.persistent && !(op.passes & (1u << s.pass))) continue;
    const Slot& slot = op.persistent ? nt.slots[k][0] : nt.slot_for(k, s.tile);
    const std::size_t buf = op.persistent || nt.slots[k].size() == 1 ? 0 : static_cast<std::size_t>(s.tile % 2);
    Resident& res = residency_[k][buf];
    auto* data = reinterpret_cast<float*>(l1(slot.offset));
    const auto [lo, hi] = geo.window(op, s.lo, s.hi);
    if (op.reads()) {
      if (!res.valid || lo < res.lo || hi > res.hi)
        throw NumericalError(kOrigin, at_step(i) + "node '" + node.id + "' needs '" + op.tensor + "' [" +
                                          std::to_string(lo) + "," + std::to_string(hi) +
                                          ") but it is not resident in L1");
      require_written(slot.offset, op.rows * (res.hi - res.lo) * 4, i, "node '" + node.id + "'");
      args.operands[k] = {data, res.lo, res.hi};
    } else {
      if (op.rows * (hi - lo) * 4 > slot.capacity)
        throw NumericalError(kOrigin, at_step(i) + "output '" + op.tensor + "' overflows its L1 slot");
      res = {true, lo, hi};
      args.operands[k] = {data, lo, hi};
    }
    touch_l1(slot);
    if (op.writes() && (!op.persistent || op.reads() || last_tile)) written.emplace_back(k, slot.offset);
  }
  if (nt.double_scratch.capacity > 0) {
    std::byte* base = l1(nt.double_scratch.offset);
    args.welford = {reinterpret_cast<WelfordState*>(base),
                    static_cast<std::size_t>(nt.double_scratch.capacity) / sizeof(WelfordState)};
    args.sums = {reinterpret_cast<double*>(base), static_cast<std::size_t>(nt.double_scratch.capacity) / 8};
    touch_l1(nt.double_scratch);
  }
  if (nt.im2col.capacity > 0) {
    args.im2col = {reinterpret_cast<float*>(l1(nt.im2col.offset)), static_cast<std::size_t>(nt.im2col.capacity) / 4};
    touch_l1(nt.im2col);
  }

  stats_.flops += execute_tile<float>(program_.graph, geo, args);

  for (const auto& [k, offset] : written) {
    const Operand& op = geo.operands[k];
    const Binding<float>& b = args.operands[k];
    const std::int64_t n = op.rows * (b.hi - b.lo);
    std::fill_n(l1_written_.begin() + offset, n * 4, 1);
    const float* v = b.data;
    for (std::int64_t e = 0; e < n; ++e)
      if (std::isnan(v[e]))
        throw NumericalError(kOrigin, at_step(i) + "NaN in '" + op.tensor + "' produced by node '" + node.id + "'");
  }
}

void Machine::run_micro_step(double lr) {
  ++stats_.micro_steps;
  const bool fire = stats_.micro_steps % program_.schedule.accumulate_steps == 0;
  bool fired = false;
  current_node_ = 0;
  auto enter = [&](std::size_t node) {
    barrier();
    current_node_ = node;
    const NodeTiling& nt = program_.tiling.nodes[node];
    residency_.assign(nt.slots.size(), {});
    for (std::size_t k = 0; k < nt.slots.size(); ++k) residency_[k].assign(nt.slots[k].size(), Resident{});
  };
  if (!program_.tiling.nodes.empty()) enter(0);
  const auto& steps = program_.schedule.steps;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const Step& s = steps[i];
    if (s.kind == StepKind::kBarrier) {
      enter(s.plan_node);
    } else if (!s.guarded || fire) {
      if (s.plan_node != current_node_)
        throw NumericalError(kOrigin, at_step(i) + "step belongs to a node that has not been entered");
      switch (s.kind) {
        case StepKind::kDmaIn: dma_in(i, s); break;
        case StepKind::kDmaOut: dma_out(i, s); break;
        default: compute(i, s, lr); break;
      }
      fired = fired || s.guarded;
      ++stats_.steps_executed;
    }
    for (std::int32_t id : frees_[i]) {
      const Placement& p = program_.memory.placements[static_cast<std::size_t>(id)];
      std::fill_n(owner_.begin() + p.offset / 4, p.range.bytes / 4, -1);
    }
  }
  if (fired) ++stats_.updates;
}

}  // namespace edgetrain
