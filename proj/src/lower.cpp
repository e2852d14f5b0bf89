// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgetrain/schedule.hpp"

#include <sstream>

namespace edgetrain {

std::string_view step_kind_name(StepKind kind) {
  switch (kind) {
    case StepKind::kDmaIn: return "DmaIn";
    case StepKind::kKernel: return "Kernel";
    case StepKind::kDmaOut: return "DmaOut";
    case StepKind::kAccumulate: return "Accumulate";
    case StepKind::kUpdateParams: return "UpdateParams";
    case StepKind::kBarrier: return "Barrier";
  }
  return "?";
}

Schedule lower(const Graph& g, const TilingPlan& plan) {
  Schedule s;
  for (std::size_t p = 0; p < plan.nodes.size(); ++p) {
    const NodeTiling& nt = plan.nodes[p];
    const NodeGeometry& geo = nt.geometry;
    const Node& node = g.nodes[nt.node];
    const bool guarded = node.kind == OpKind::kSGDMomentumUpdate;
    if (guarded) s.accumulate_steps = std::max(s.accumulate_steps, node.attrs.accumulate_steps);
    StepKind compute = StepKind::kKernel;
    if (node.kind == OpKind::kGradAccumulate) compute = StepKind::kAccumulate;
    if (guarded) compute = StepKind::kUpdateParams;

    if (p > 0) {
      Step b;
      b.kind = StepKind::kBarrier;
      b.plan_node = p;
      s.steps.push_back(b);
    }
    auto dma = [&](StepKind kind, std::size_t i, std::int64_t lo, std::int64_t hi, std::int64_t tile, int pass) {
      Step d;
      d.kind = kind;
      d.plan_node = p;
      d.operand = i;
      d.buffer = geo.operands[i].tensor;
      d.lo = lo;
      d.hi = hi;
      d.tile = tile;
      d.pass = pass;
      d.guarded = guarded;
      s.steps.push_back(std::move(d));
    };

    for (std::size_t i = 0; i < geo.operands.size(); ++i) {
      const Operand& op = geo.operands[i];
      if (op.persistent && op.reads()) dma(StepKind::kDmaIn, i, 0, op.length, -1, 0);
    }
    for (int pass = 0; pass < geo.passes; ++pass) {
      for (std::int64_t t = 0; t < nt.num_tiles; ++t) {
        const auto [a, b] = nt.tile(t);
        for (std::size_t i = 0; i < geo.operands.size(); ++i) {
          const Operand& op = geo.operands[i];
          if (op.persistent || !op.reads() || !(op.passes & (1u << pass))) continue;
          const auto [lo, hi] = geo.window(op, a, b);
          dma(StepKind::kDmaIn, i, lo, hi, t, pass);
        }
        Step k;
        k.kind = compute;
        k.plan_node = p;
        k.tile = t;
        k.lo = a;
        k.hi = b;
        k.pass = pass;
        k.guarded = guarded;
        s.steps.push_back(k);
        for (std::size_t i = 0; i < geo.operands.size(); ++i) {
          const Operand& op = geo.operands[i];
          if (op.persistent || !op.writes() || !(op.passes & (1u << pass))) continue;
          const auto [lo, hi] = geo.window(op, a, b);
          dma(StepKind::kDmaOut, i, lo, hi, t, pass);
        }
      }
    }
    for (std::size_t i = 0; i < geo.operands.size(); ++i) {
      const Operand& op = geo.operands[i];
      if (op.persistent && op.writes()) dma(StepKind::kDmaOut, i, 0, op.length, -1, 0);
    }
  }
  return s;
}

std::string format_schedule(const Graph& g, const TilingPlan& plan, const Schedule& s) {
  std::ostringstream os;
  for (std::size_t i = 0; i < s.steps.size(); ++i) {
    const Step& st = s.steps[i];
    os << i << ' ' << step_kind_name(st.kind) << ' ' << g.nodes[plan.nodes[st.plan_node].node].id;
    if (st.is_dma()) os << ' ' << st.buffer << " [" << st.lo << ',' << st.hi << ')';
    if (st.is_compute()) os << " tile " << st.tile << " [" << st.lo << ',' << st.hi << ") pass " << st.pass;
    if (st.guarded) os << " guarded";
    os << '\n';
  }
  return os.str();
}

}  // namespace edgetrain
