// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace edgetrain {

/// Operator vocabulary of the IR. Forward kinds are what a model document
/// may contain; the rest are introduced by autodiff and its rewrite passes.
enum class OpKind {
  // forward
  kConv1D,
  kLinear,
  kGroupNorm,
  kBatchNorm,
  kReLU,
  kAvgPool1D,
  kMaxPool1D,
  kSoftmaxCrossEntropy,
  // backward, fused (before decompose_gradients)
  kConvGrad,
  kLinearGrad,
  // backward, decomposed
  kLossGrad,
  kConvGradX,
  kConvGradW,
  kLinearGradX,
  kLinearGradW,
  kGroupNormStats,
  kGroupNormNormalize,
  kGroupNormGrad,
  kBatchNormStats,
  kBatchNormNormalize,
  kBatchNormGrad,
  kReLUGrad,
  kPoolGrad,
  // update
  kGradAccumulate,
  kSGDMomentumUpdate,
};

std::string_view op_name(OpKind kind);
std::optional<OpKind> op_from_name(std::string_view name);

enum class TensorKind { kInput, kParameter, kActivation, kGradient, kOptimizerState, kOutput };

std::string_view tensor_kind_name(TensorKind kind);
std::optional<TensorKind> tensor_kind_from_name(std::string_view name);

enum class Persistence { kEphemeral, kPersistentAccumulator };

enum class PoolMode { kAvg, kMax };

struct TensorSpec {
  std::string name;
  /// [N, C, T] for activations, [Cout, Cin/G, K] for conv weights, [C] for
  /// normalization affine parameters. Empty means "not yet inferred".
  std::vector<std::int64_t> dims;
  TensorKind kind = TensorKind::kActivation;
  Persistence persistence = Persistence::kEphemeral;
  /// Forward tensor retained for a backward consumer.
  bool saved = false;

  std::int64_t numel() const;
  bool operator==(const TensorSpec&) const = default;
};

/// Flat attribute record; each op reads the subset it needs.
struct Attrs {
  std::int64_t kernel = 0;
  std::int64_t stride = 1;
  std::int64_t padding = 0;
  std::int64_t groups = 1;
  std::int64_t num_groups = 0;
  double epsilon = 1e-5;
  PoolMode pool_mode = PoolMode::kAvg;
  /// Temporal length of the differentiated input (ConvGradX, PoolGrad).
  std::int64_t input_length = 0;
  double momentum = 0.0;
  double weight_decay = 0.0;
  /// Multiplier applied to the accumulated gradient at update time.
  double scale = 1.0;
  /// Micro-steps between two parameter updates.
  std::int64_t accumulate_steps = 1;

  bool operator==(const Attrs&) const = default;
};

struct Node {
  std::string id;
  OpKind kind = OpKind::kReLU;
  Attrs attrs;
  std::vector<std::string> inputs;
  /// Optional outputs of backward kinds are encoded as empty names.
  std::vector<std::string> outputs;
  /// Forward node a backward/update node was derived from.
  std::string origin;

  bool operator==(const Node&) const = default;
};

enum class Phase { kForwardOnly, kTraining };

class Graph {
 public:
  Phase phase = Phase::kForwardOnly;
  std::vector<Node> nodes;

  const std::vector<TensorSpec>& tensors() const { return tensors_; }

  bool has_tensor(std::string_view name) const;
  const TensorSpec& tensor(std::string_view name) const;
  TensorSpec& tensor(std::string_view name);
  std::size_t tensor_index(std::string_view name) const;
  /// Throws FormatError on a duplicate name.
  TensorSpec& add_tensor(TensorSpec spec);
  void remove_tensor(std::string_view name);

  const Node* find_node(std::string_view id) const;

  bool operator==(const Graph& other) const {
    return phase == other.phase && nodes == other.nodes && tensors_ == other.tensors_;
  }

 private:
  std::vector<TensorSpec> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parameters, optimizer state and persistent gradient buffers carry values
/// across micro-steps and may be updated in place.
bool is_state(const TensorSpec& t);

std::int64_t parameter_count(const Graph& g);

// ---------------------------------------------------------------------------
// Model documents

/// Parses a JSON model document and infers shapes. Every failure is a
/// FormatError whose message names the JSON location (`nodes[2].attrs.kernel`)
/// or, for syntax errors, the line and column.
Graph parse_model(std::string_view text);
Graph load_model(const std::string& path);
std::string serialize_model(const Graph& g);

// ---------------------------------------------------------------------------
// Passes

/// Computes the dims of every activation. Conv1D and pooling follow
/// T' = floor((T + 2P - K) / S) + 1. Idempotent.
Graph infer_shapes(Graph g);

/// Node indices in a deterministic topological order (ready nodes are taken
/// in declaration order). State tensors order their accesses by declaration.
std::vector<std::size_t> validate_and_sort(const Graph& g);

/// Rewrites the batch axis of every input to `n` and re-infers shapes.
Graph with_batch(const Graph& g, std::int64_t n);

/// Swaps GroupNorm for BatchNorm (or back) in a forward graph. The affine
/// parameters keep their shapes; a BatchNorm->GroupNorm swap uses `num_groups`.
Graph substitute_normalization(const Graph& g, OpKind target, std::int64_t num_groups = 1);

}  // namespace edgetrain
