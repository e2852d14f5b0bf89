// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "edgetrain/graph.hpp"

// Closed-form operation counts per node, computed from shapes alone.
// A multiply-add counts 2; normalization counts 4 per element for
// statistics, 4 for normalize, 6 for the gradient reduction and 4 for the
// gradient application; ReLU and GradAccumulate count 1 per element;
// pooling counts K per output (max-pool backward 1 per output); softmax
// cross-entropy counts 4 per logit plus 1 with the gradient; the
// accumulated SGD update counts 7 per element.

namespace edgetrain {

std::uint64_t node_flops(const Graph& g, const Node& n);

/// Totals of one micro-step: `streaming` runs every micro-step, `update`
/// only when the accumulation guard fires.
struct FlopCount {
  std::uint64_t streaming = 0;
  std::uint64_t update = 0;
  std::uint64_t total(std::int64_t micro_steps, std::int64_t updates) const {
    return streaming * static_cast<std::uint64_t>(micro_steps) + update * static_cast<std::uint64_t>(updates);
  }
};

FlopCount graph_flops(const Graph& g);

}  // namespace edgetrain
