// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgetrain/tiler.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>

#include "edgetrain/error.hpp"

namespace edgetrain {
namespace {

constexpr const char* kOrigin = "tiler";

std::int64_t align_up(std::int64_t v, std::int64_t a) { return (v + a - 1) / a * a; }

bool has_halo(const NodeGeometry& geo) {
  for (const auto& op : geo.operands)
    if (!op.persistent && op.rule != WindowRule::kIdentity && op.rule != WindowRule::kWhole) return true;
  return false;
}

}  // namespace

TileConstraint constraints_for(const Graph& g, std::size_t node_index) {
  const NodeGeometry geo = geometry_for(g, node_index);
  TileConstraint c;
  c.node = g.nodes[node_index].id;
  c.scratch_bytes = geo.double_scratch_bytes;
  for (const auto& op : geo.operands) {
    if (op.persistent) {
      c.persistent_buffers.emplace_back(op.tensor, op.bytes());
      continue;
    }
    std::int64_t per_unit = op.rows * 4;
    const auto& cs = geo.conv;
    const auto& ps = geo.pool;
    switch (op.rule) {
      case WindowRule::kConvInput:
        per_unit *= cs.stride;
        c.halo_lo = cs.padding;
        c.halo_hi = std::max<std::int64_t>(0, cs.kernel - cs.stride - cs.padding);
        break;
      case WindowRule::kConvGradDy:
        c.halo_lo = std::max<std::int64_t>(0, (cs.kernel - 1 - cs.padding + cs.stride - 1) / cs.stride);
        c.halo_hi = (cs.padding + cs.stride - 1) / cs.stride;
        break;
      case WindowRule::kPoolInput:
        per_unit *= ps.stride;
        c.halo_hi = std::max<std::int64_t>(0, ps.kernel - ps.stride);
        break;
      case WindowRule::kPoolGradDy:
        c.halo_lo = std::max<std::int64_t>(0, (ps.kernel - 1 + ps.stride - 1) / ps.stride);
        break;
      case WindowRule::kWhole:
        per_unit = op.bytes();
        break;
      case WindowRule::kIdentity:
        break;
    }
    c.per_tile_buffers.emplace_back(op.tensor, per_unit);
  }
  if (geo.im2col_bytes_per_unit > 0) c.per_tile_buffers.emplace_back("im2col", geo.im2col_bytes_per_unit);
  return c;
}

NodeTiling make_node_tiling(const Graph& g, const NodeGeometry& geo, std::int64_t tile_len, Buffering buffering,
                            std::int64_t alignment) {
  (void)g;
  NodeTiling nt;
  nt.node = geo.node;
  nt.geometry = geo;
  nt.tile_len = geo.tileable ? std::clamp<std::int64_t>(tile_len, 1, geo.iter_length) : geo.iter_length;
  nt.num_tiles = (geo.iter_length + nt.tile_len - 1) / nt.tile_len;
  nt.buffering = nt.num_tiles > 1 ? buffering : Buffering::kSingle;
  const std::int64_t copies = nt.buffering == Buffering::kDouble ? 2 : 1;

  std::vector<std::int64_t> capacity(geo.operands.size(), 0);
  std::int64_t dma = 0;
  for (std::size_t i = 0; i < geo.operands.size(); ++i) {
    const Operand& op = geo.operands[i];
    const std::int64_t directions = (op.reads() ? 1 : 0) + (op.writes() ? 1 : 0);
    if (op.persistent) {
      capacity[i] = op.bytes();
      dma += directions * op.bytes();
      continue;
    }
    std::int64_t widest = 0, moved = 0;
    for (std::int64_t t = 0; t < nt.num_tiles; ++t) {
      const auto [a, b] = nt.tile(t);
      const auto [lo, hi] = geo.window(op, a, b);
      widest = std::max(widest, hi - lo);
      moved += hi - lo;
    }
    int passes = 0;
    for (int p = 0; p < geo.passes; ++p)
      if (op.passes & (1u << p)) ++passes;
    capacity[i] = widest * op.rows * 4;
    dma += directions * passes * moved * op.rows * 4;
  }
  nt.dma_bytes = dma;

  // double scratch | persistent | streamed slots | im2col
  std::int64_t offset = 0;
  nt.double_scratch = {0, geo.double_scratch_bytes};
  offset = align_up(geo.double_scratch_bytes, std::max<std::int64_t>(alignment, 8));
  nt.slots.assign(geo.operands.size(), {});
  for (std::size_t i = 0; i < geo.operands.size(); ++i) {
    if (!geo.operands[i].persistent) continue;
    nt.slots[i].push_back({offset, capacity[i]});
    offset = align_up(offset + capacity[i], alignment);
  }
  for (std::size_t i = 0; i < geo.operands.size(); ++i) {
    if (geo.operands[i].persistent) continue;
    for (std::int64_t c = 0; c < copies; ++c) {
      nt.slots[i].push_back({offset, capacity[i]});
      offset = align_up(offset + capacity[i], alignment);
    }
  }
  const std::int64_t im2col = geo.im2col_bytes_per_unit * nt.tile_len;
  nt.im2col = {offset, im2col};
  offset = align_up(offset + im2col, alignment);
  nt.l1_bytes = offset;
  return nt;
}

TilingPlan solve_tiling(const Graph& g, const std::vector<std::size_t>& order, const TrainingConfig& cfg) {
  TilingPlan plan;
  plan.l1_budget = cfg.l1_budget_bytes;
  const std::int64_t budget = cfg.l1_budget_bytes;
  for (std::size_t idx : order) {
    const NodeGeometry geo = geometry_for(g, idx);
    std::optional<NodeTiling> best;
    // Working sets grow with the tile, so scan tile counts upward from the
    // first one that fits. Without halos every tiling moves the same bytes
    // and the first fit is optimal.
    const bool exhaustive = has_halo(geo);
    std::int64_t last_len = -1;
    for (std::int64_t n = 1; n <= geo.iter_length; ++n) {
      const std::int64_t len = (geo.iter_length + n - 1) / n;
      if (len == last_len) continue;
      last_len = len;
      NodeTiling nt = make_node_tiling(g, geo, len, Buffering::kSingle, cfg.alignment_bytes);
      if (nt.l1_bytes > budget) continue;
      if (!best || nt.dma_bytes < best->dma_bytes) best = std::move(nt);
      if (!exhaustive) break;
      if (!geo.tileable) break;
    }
    if (!best) {
      const NodeTiling smallest = make_node_tiling(g, geo, 1, Buffering::kSingle, cfg.alignment_bytes);
      throw CompileError(kOrigin, "node '" + g.nodes[idx].id + "' is untileable: minimum working set " +
                                      std::to_string(smallest.l1_bytes) + " bytes exceeds the L1 budget of " +
                                      std::to_string(budget) + " bytes");
    }
    if (best->num_tiles > 1) {
      NodeTiling dbl = make_node_tiling(g, geo, best->tile_len, Buffering::kDouble, cfg.alignment_bytes);
      if (dbl.l1_bytes <= budget) best = std::move(dbl);
    }
    plan.peak_l1 = std::max(plan.peak_l1, best->l1_bytes);
    plan.nodes.push_back(std::move(*best));
  }
  plan.dma = estimate_dma(g, plan);
  return plan;
}

DmaEstimate estimate_dma(const Graph& g, const TilingPlan& plan) {
  DmaEstimate e;
  for (const auto& nt : plan.nodes)
    (g.nodes[nt.node].kind == OpKind::kSGDMomentumUpdate ? e.update : e.streaming) += nt.dma_bytes;
  return e;
}

std::string format_tiling(const Graph& g, const TilingPlan& plan) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %-20s %6s %8s %7s %9s %10s\n", "node", "op", "tiles", "tile_len", "buffers",
                "l1_bytes", "dma_bytes");
  os << line;
  for (const auto& nt : plan.nodes) {
    const Node& n = g.nodes[nt.node];
    std::snprintf(line, sizeof line, "%-28s %-20s %6lld %8lld %7s %9lld %10lld\n", n.id.c_str(),
                  std::string(op_name(n.kind)).c_str(), static_cast<long long>(nt.num_tiles),
                  static_cast<long long>(nt.tile_len), nt.buffering == Buffering::kDouble ? "double" : "single",
                  static_cast<long long>(nt.l1_bytes), static_cast<long long>(nt.dma_bytes));
    os << line;
  }
  std::snprintf(line, sizeof line, "peak_l1=%lld budget=%lld dma_per_step=%lld dma_per_update=%lld\n",
                static_cast<long long>(plan.peak_l1), static_cast<long long>(plan.l1_budget),
                static_cast<long long>(plan.dma.streaming), static_cast<long long>(plan.dma.update));
  os << line;
  return os.str();
}

}  // namespace edgetrain
