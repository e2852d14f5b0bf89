// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "edgetrain/config.hpp"
#include "edgetrain/graph.hpp"

namespace edgetrain {

/// Softmax cross-entropy over `logits` [N, classes], averaged over the
/// micro-batch. `labels` holds one class index per sample.
struct LossSpec {
  std::string logits;
  std::string labels = "labels";
};

struct GradBinding {
  std::string tensor;
  std::string gradient;
  Persistence persistence = Persistence::kEphemeral;
};

struct BuildOptions {
  /// Parameters that receive no gradient and no update.
  std::vector<std::string> frozen;
};

/// Output of the last node, which the bundled models use as logits.
std::string default_logits(const Graph& forward);

/// Every parameter except those of the last Linear node (linear probing).
std::vector<std::string> all_but_last_linear(const Graph& forward);

/// Appends LossGrad, reverse-mode backward nodes (fused ConvGrad /
/// LinearGrad form), one GradAccumulate and one SGDMomentumUpdate per
/// trainable parameter. Gradients of data inputs are never materialized.
Graph build_training_graph(const Graph& forward, const LossSpec& loss, const TrainingConfig& cfg,
                           const BuildOptions& options = {});

/// Splits ConvGrad / LinearGrad into independent GradX and GradW nodes.
Graph decompose_gradients(Graph g);

/// Splits GroupNorm / BatchNorm into Stats + Normalize and feeds the saved
/// statistics to the matching gradient node.
Graph decompose_normalization(Graph g);

/// Sets the update guard (accumulate_steps) and the gradient scale of every
/// SGDMomentumUpdate. Rejects BatchNorm when micro-batches are accumulated.
Graph insert_gradient_accumulation(Graph g, const TrainingConfig& cfg);

/// build -> decompose_gradients -> decompose_normalization -> accumulation.
Graph build_frontend(const Graph& forward, const LossSpec& loss, const TrainingConfig& cfg,
                     const BuildOptions& options = {});

std::vector<GradBinding> grad_bindings(const Graph& training);

}  // namespace edgetrain
