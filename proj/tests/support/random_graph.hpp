// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "edgetrain/autodiff.hpp"
#include "edgetrain/config.hpp"
#include "edgetrain/geometry.hpp"
#include "edgetrain/tiler.hpp"
#include "support/model_builder.hpp"

namespace edgetrain::testing {

struct RandomCase {
  Graph forward;
  Graph training;
  TrainingConfig cfg;
  bool batch_norm = false;
};

inline std::int64_t pick(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

inline std::int64_t random_divisor(std::mt19937_64& rng, std::int64_t c) {
  std::vector<std::int64_t> d;
  for (std::int64_t i = 1; i <= c; ++i)
    if (c % i == 0) d.push_back(i);
  return d[static_cast<std::size_t>(pick(rng, 0, static_cast<std::int64_t>(d.size()) - 1))];
}

/// Sequential model mixing every forward op kind: conv (strided, padded,
/// grouped), group or batch norm, ReLU, average and max pooling, and a
/// Linear head over the flattened features.
inline Graph random_forward(std::mt19937_64& rng, bool batch_norm, std::int64_t batch) {
  const std::int64_t c0 = pick(rng, 1, 4);
  std::int64_t t = pick(rng, 12, 72);
  ModelBuilder b(batch, c0, t);
  std::int64_t c = c0;
  const std::int64_t blocks = pick(rng, 1, 3);
  for (std::int64_t i = 0; i < blocks; ++i) {
    const std::int64_t k = pick(rng, 1, std::min<std::int64_t>(7, t));
    const std::int64_t s = t >= 2 * k + 2 ? pick(rng, 1, 2) : 1;
    const std::int64_t p = pick(rng, 0, k - 1);
    std::int64_t groups = 1;
    std::int64_t cout = pick(rng, 1, 6);
    if (pick(rng, 0, 3) == 0) {
      groups = random_divisor(rng, c);
      cout = groups * pick(rng, 1, 2);
    }
    b.conv(cout, k, s, p, groups, pick(rng, 0, 4) != 0);
    c = cout;
    t = b.graph().tensor(b.current()).dims[2];
    if (pick(rng, 0, 2) != 0) {
      if (batch_norm)
        b.batch_norm();
      else
        b.group_norm(random_divisor(rng, c));
    }
    if (pick(rng, 0, 3) != 0) b.relu();
    if (t >= 4 && pick(rng, 0, 2) != 0) {
      const std::int64_t k2 = pick(rng, 2, 3);
      const std::int64_t s2 = pick(rng, 1, k2);
      if (pick(rng, 0, 1) == 0)
        b.avg_pool(k2, s2);
      else
        b.max_pool(k2, s2);
      t = b.graph().tensor(b.current()).dims[2];
    }
  }
  b.linear(pick(rng, 2, 4));
  return b.build();
}

/// Random training setup: batch-norm cases train on a real batch, the others
/// accumulate micro-batches; sometimes a random subset of parameters is frozen.
inline RandomCase random_case(std::mt19937_64& rng) {
  RandomCase rc;
  rc.batch_norm = pick(rng, 0, 4) == 0;
  const std::int64_t batch = rc.batch_norm ? pick(rng, 2, 3) : pick(rng, 1, 2);
  rc.forward = random_forward(rng, rc.batch_norm, batch);
  rc.cfg.micro_batch = batch;
  rc.cfg.effective_batch = rc.batch_norm ? batch : batch * pick(rng, 1, 3);
  rc.cfg.learning_rate = 0.05;
  BuildOptions opts;
  if (pick(rng, 0, 3) == 0) {
    std::vector<std::string> params;
    for (const auto& t : rc.forward.tensors())
      if (t.kind == TensorKind::kParameter) params.push_back(t.name);
    // Keep the head trainable so a gradient always reaches the logits.
    for (const auto& p : params)
      if (pick(rng, 0, 2) == 0 && p.rfind(rc.forward.nodes.back().id + ".", 0) != 0)
        opts.frozen.push_back(p);
  }
  rc.training = build_frontend(rc.forward, LossSpec{default_logits(rc.forward)}, rc.cfg, opts);
  return rc;
}

/// Smallest L1 budget under which every node of `g` tiles, and the budget
/// at which every node runs as a single tile.
inline std::pair<std::int64_t, std::int64_t> l1_budget_range(const Graph& g, std::int64_t alignment = 4) {
  std::int64_t lo = 0, hi = 0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const NodeGeometry geo = geometry_for(g, i);
    lo = std::max(lo, make_node_tiling(g, geo, 1, Buffering::kSingle, alignment).l1_bytes);
    hi = std::max(hi, make_node_tiling(g, geo, geo.iter_length, Buffering::kSingle, alignment).l1_bytes);
  }
  return {lo, hi};
}

/// Log-uniform budget in the feasible range, so most draws force tiling.
inline std::int64_t random_l1_budget(const Graph& g, std::mt19937_64& rng, std::int64_t alignment = 4) {
  const auto [lo, hi] = l1_budget_range(g, alignment);
  std::uniform_real_distribution<double> u(std::log(static_cast<double>(lo)), std::log(static_cast<double>(hi)));
  return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::exp(u(rng))), lo, hi);
}

}  // namespace edgetrain::testing
