// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "edgetrain/autodiff.hpp"
#include "edgetrain/error.hpp"
#include "edgetrain/tiler.hpp"
#include "support/model_builder.hpp"
#include "support/random_graph.hpp"

namespace edgetrain {
namespace {

using testing::ModelBuilder;

std::size_t find_node(const Graph& g, OpKind kind) {
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (g.nodes[i].kind == kind) return i;
  ADD_FAILURE() << "no node of kind " << op_name(kind);
  return 0;
}

Graph training_of(const Graph& fwd) {
  TrainingConfig cfg;
  cfg.micro_batch = fwd.tensor("x").dims[0];
  cfg.effective_batch = cfg.micro_batch;
  return build_frontend(fwd, LossSpec{default_logits(fwd)}, cfg);
}

TrainingConfig with_budget(std::int64_t l1) {
  TrainingConfig cfg;
  cfg.effective_batch = 1;
  cfg.l1_budget_bytes = l1;
  return cfg;
}

TEST(Constraints, PointwiseNodeHasTwoStreamedBuffersAndNoHalo) {
  const Graph g = ModelBuilder(1, 3, 20).relu().build();
  const TileConstraint c = constraints_for(g, 0);
  EXPECT_EQ(c.per_tile_buffers.size(), 2u);
  EXPECT_TRUE(c.persistent_buffers.empty());
  EXPECT_EQ(c.halo_lo, 0);
  EXPECT_EQ(c.halo_hi, 0);
  EXPECT_EQ(c.per_tile_buffers[0].second, 3 * 4);
}

TEST(Constraints, ConvGradXWithKernelThreeCarriesTwoHaloColumns) {
  const Graph g = training_of(ModelBuilder(1, 2, 30).conv(3, 3, 1, 1).conv(4, 3, 1, 1).linear(2).build());
  const TileConstraint c = constraints_for(g, find_node(g, OpKind::kConvGradX));
  EXPECT_EQ(c.halo_lo + c.halo_hi, 2);
}

TEST(Constraints, ConvGradWKeepsWeightGradientResident) {
  const Graph g = training_of(ModelBuilder(1, 2, 30).conv(3, 5, 1, 2).linear(2).build());
  const std::size_t idx = find_node(g, OpKind::kConvGradW);
  const TileConstraint c = constraints_for(g, idx);
  const auto has = [&](const std::string& name) {
    return std::any_of(c.persistent_buffers.begin(), c.persistent_buffers.end(),
                       [&](const auto& b) { return b.first == name; });
  };
  EXPECT_TRUE(has("l0.w.grad"));
  EXPECT_TRUE(has("l0.b.grad"));
  EXPECT_GT(c.scratch_bytes, 0);
  const bool streams_im2col = std::any_of(c.per_tile_buffers.begin(), c.per_tile_buffers.end(),
                                          [](const auto& b) { return b.first == "im2col"; });
  EXPECT_TRUE(streams_im2col);
}

TEST(SolveTiling, AbsurdBudgetNamesMinimumWorkingSet) {
  const Graph g = ModelBuilder(1, 4, 64).conv(8, 5, 1, 2).relu().build();
  try {
    solve_tiling(g, validate_and_sort(g), with_budget(64));
    FAIL() << "expected an untileable node";
  } catch (const CompileError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("untileable"), std::string::npos) << what;
    EXPECT_NE(what.find("minimum working set"), std::string::npos) << what;
    EXPECT_NE(what.find("64 bytes"), std::string::npos) << what;
  }
}

TEST(SolveTiling, WholeTensorWhenBudgetIsAmple) {
  const Graph g = ModelBuilder(1, 4, 64).conv(8, 5, 1, 2).relu().max_pool(2).build();
  const TilingPlan p = solve_tiling(g, validate_and_sort(g), with_budget(1 << 20));
  for (const auto& nt : p.nodes) EXPECT_EQ(nt.num_tiles, 1);
}

TEST(SolveTiling, HalvingTheBudgetNeverReducesTraffic) {
  const Graph g = training_of(ModelBuilder(1, 4, 128).conv(6, 7, 1, 3).group_norm(2).relu().max_pool(2).conv(6, 5, 2, 2)
                                  .relu().linear(3).build());
  const auto order = validate_and_sort(g);
  const auto [lo, hi] = testing::l1_budget_range(g);
  std::int64_t prev = -1;
  for (std::int64_t b = hi; b >= lo; b /= 2) {
    const TilingPlan p = solve_tiling(g, order, with_budget(b));
    EXPECT_LE(p.peak_l1, b);
    const std::int64_t total = p.dma.streaming + p.dma.update;
    if (prev >= 0) {
      EXPECT_GE(total, prev) << "budget " << b;
    }
    prev = total;
  }
}

TEST(SolveTiling, HaloTrafficGrowsByKernelMinusOnePerExtraTile) {
  const Graph g = ModelBuilder(2, 3, 96).conv(4, 5, 1, 0).build();
  const NodeGeometry geo = geometry_for(g, 0);
  const std::int64_t rows = 2 * 3;
  const std::int64_t base = make_node_tiling(g, geo, geo.iter_length, Buffering::kSingle, 4).dma_bytes;
  for (std::int64_t n : {2, 4, 46}) {
    ASSERT_EQ(geo.iter_length % n, 0);
    const NodeTiling nt = make_node_tiling(g, geo, geo.iter_length / n, Buffering::kSingle, 4);
    EXPECT_EQ(nt.num_tiles, n);
    EXPECT_EQ(nt.dma_bytes - base, (n - 1) * (5 - 1) * rows * 4);
  }
}

// Independent model of a forward node's tiling: input window of an output
// tile [a, b), working set and traffic for every tile length.
struct Candidate {
  std::int64_t len, tiles, single_bytes, double_bytes, dma;
};

std::vector<Candidate> brute_force(const Graph& g, const Node& n) {
  const auto& x = g.tensor(n.inputs[0]).dims;
  const auto& y = g.tensor(n.outputs[0]).dims;
  const std::int64_t in_rows = x[0] * x[1], out_rows = y[0] * y[1], t_in = x[2], t_out = y[2];
  std::int64_t k = 1, s = 1, p = 0, persistent = 0;
  if (n.kind == OpKind::kConv1D) {
    k = n.attrs.kernel, s = n.attrs.stride, p = n.attrs.padding;
    for (std::size_t i = 1; i < n.inputs.size(); ++i) persistent += g.tensor(n.inputs[i]).numel() * 4;
  } else if (n.kind == OpKind::kMaxPool1D || n.kind == OpKind::kAvgPool1D) {
    k = n.attrs.kernel, s = n.attrs.stride;
  }
  const std::int64_t out_ops = static_cast<std::int64_t>(n.outputs.size());
  std::vector<Candidate> out;
  for (std::int64_t len = 1; len <= t_out; ++len) {
    Candidate c{len, (t_out + len - 1) / len, 0, 0, 0};
    std::int64_t widest_in = 0, widest_out = 0, moved_in = 0;
    for (std::int64_t a = 0; a < t_out; a += len) {
      const std::int64_t b = std::min(t_out, a + len);
      const std::int64_t lo = std::max<std::int64_t>(0, a * s - p);
      const std::int64_t hi = std::min(t_in, (b - 1) * s - p + k);
      widest_in = std::max(widest_in, hi - lo);
      widest_out = std::max(widest_out, b - a);
      moved_in += hi - lo;
    }
    const std::int64_t streamed = widest_in * in_rows * 4 + out_ops * widest_out * out_rows * 4;
    c.single_bytes = persistent + streamed;
    c.double_bytes = persistent + 2 * streamed;
    c.dma = persistent + moved_in * in_rows * 4 + out_ops * t_out * out_rows * 4;
    out.push_back(c);
  }
  return out;
}

TEST(SolveTiling, MatchesExhaustiveSearchOnSmallChains) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    const std::int64_t t = testing::pick(rng, 16, 80);
    const std::int64_t k = testing::pick(rng, 1, 7);
    ModelBuilder b(testing::pick(rng, 1, 2), testing::pick(rng, 1, 4), t);
    b.conv(testing::pick(rng, 1, 5), k, testing::pick(rng, 1, 2), testing::pick(rng, 0, k - 1)).relu();
    if (testing::pick(rng, 0, 1) == 0)
      b.max_pool(testing::pick(rng, 2, 3), testing::pick(rng, 1, 2));
    else
      b.avg_pool(testing::pick(rng, 2, 3), testing::pick(rng, 1, 2));
    const Graph g = b.build();
    const auto [lo, hi] = testing::l1_budget_range(g);
    const std::int64_t budget = testing::pick(rng, lo, hi);
    const TilingPlan plan = solve_tiling(g, validate_and_sort(g), with_budget(budget));
    ASSERT_EQ(plan.nodes.size(), 3u);
    for (const NodeTiling& nt : plan.nodes) {
      const auto cands = brute_force(g, g.nodes[nt.node]);
      std::int64_t best_dma = -1, best_tiles = 0;
      for (const auto& c : cands) {
        if (c.single_bytes > budget) continue;
        if (best_dma < 0 || c.dma < best_dma || (c.dma == best_dma && c.tiles < best_tiles)) {
          best_dma = c.dma;
          best_tiles = c.tiles;
        }
      }
      ASSERT_GE(best_dma, 0);
      const auto& chosen = cands[static_cast<std::size_t>(nt.tile_len - 1)];
      EXPECT_EQ(nt.dma_bytes, best_dma) << g.nodes[nt.node].id << " budget " << budget;
      EXPECT_EQ(nt.num_tiles, best_tiles) << g.nodes[nt.node].id << " budget " << budget;
      EXPECT_EQ(nt.dma_bytes, chosen.dma);
      const bool expect_double = nt.num_tiles > 1 && chosen.double_bytes <= budget;
      EXPECT_EQ(nt.buffering == Buffering::kDouble, expect_double) << g.nodes[nt.node].id;
      EXPECT_EQ(nt.l1_bytes, expect_double ? chosen.double_bytes : chosen.single_bytes);
    }
  }
}

TEST(SolveTiling, SlotsAreDisjointAlignedAndWithinBudget) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    auto rc = testing::random_case(rng);
    TrainingConfig cfg = rc.cfg;
    cfg.alignment_bytes = trial % 2 == 0 ? 4 : 16;
    cfg.l1_budget_bytes = testing::random_l1_budget(rc.training, rng) + 64;
    const TilingPlan plan = solve_tiling(rc.training, validate_and_sort(rc.training), cfg);
    EXPECT_LE(plan.peak_l1, cfg.l1_budget_bytes);
    for (const NodeTiling& nt : plan.nodes) {
      std::vector<Slot> all;
      for (const auto& s : nt.slots) all.insert(all.end(), s.begin(), s.end());
      all.push_back(nt.double_scratch);
      all.push_back(nt.im2col);
      std::erase_if(all, [](const Slot& s) { return s.capacity == 0; });
      std::sort(all.begin(), all.end(), [](const Slot& a, const Slot& b) { return a.offset < b.offset; });
      for (std::size_t i = 0; i < all.size(); ++i) {
        EXPECT_EQ(all[i].offset % cfg.alignment_bytes, 0);
        EXPECT_LE(all[i].offset + all[i].capacity, nt.l1_bytes);
        if (i > 0) {
          EXPECT_LE(all[i - 1].offset + all[i - 1].capacity, all[i].offset);
        }
      }
      EXPECT_LE(nt.l1_bytes, cfg.l1_budget_bytes);
      EXPECT_EQ(nt.double_scratch.offset, 0);
    }
  }
}

TEST(SolveTiling, IsDeterministic) {
  std::mt19937_64 rng(6);
  const auto rc = testing::random_case(rng);
  TrainingConfig cfg = rc.cfg;
  cfg.l1_budget_bytes = testing::l1_budget_range(rc.training).first + 100;
  const auto order = validate_and_sort(rc.training);
  EXPECT_EQ(format_tiling(rc.training, solve_tiling(rc.training, order, cfg)),
            format_tiling(rc.training, solve_tiling(rc.training, order, cfg)));
}

}  // namespace
}  // namespace edgetrain
