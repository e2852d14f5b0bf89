// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgetrain/graph.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <functional>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "edgetrain/error.hpp"
#include "json.hpp"

namespace edgetrain {
namespace {

using Json = nlohmann::ordered_json;
constexpr const char* kOrigin = "graph_ir";

struct OpInfo {
  OpKind kind;
  std::string_view name;
  int min_in, max_in, min_out, max_out;
};

constexpr std::array<OpInfo, 25> kOps = {{
    {OpKind::kConv1D, "Conv1D", 2, 3, 1, 1},
    {OpKind::kLinear, "Linear", 2, 3, 1, 1},
    {OpKind::kGroupNorm, "GroupNorm", 3, 3, 1, 1},
    {OpKind::kBatchNorm, "BatchNorm", 3, 3, 1, 1},
    {OpKind::kReLU, "ReLU", 1, 1, 1, 1},
    {OpKind::kAvgPool1D, "AvgPool1D", 1, 1, 1, 1},
    {OpKind::kMaxPool1D, "MaxPool1D", 1, 1, 1, 2},
    {OpKind::kSoftmaxCrossEntropy, "SoftmaxCrossEntropy", 2, 2, 1, 1},
    {OpKind::kConvGrad, "ConvGrad", 3, 3, 3, 3},
    {OpKind::kLinearGrad, "LinearGrad", 3, 3, 3, 3},
    {OpKind::kLossGrad, "LossGrad", 2, 2, 2, 2},
    {OpKind::kConvGradX, "ConvGradX", 2, 2, 1, 1},
    {OpKind::kConvGradW, "ConvGradW", 2, 2, 1, 2},
    {OpKind::kLinearGradX, "LinearGradX", 2, 2, 1, 1},
    {OpKind::kLinearGradW, "LinearGradW", 2, 2, 1, 2},
    {OpKind::kGroupNormStats, "GroupNormStats", 1, 1, 2, 2},
    {OpKind::kGroupNormNormalize, "GroupNormNormalize", 5, 5, 1, 1},
    {OpKind::kGroupNormGrad, "GroupNormGrad", 3, 5, 3, 3},
    {OpKind::kBatchNormStats, "BatchNormStats", 1, 1, 2, 2},
    {OpKind::kBatchNormNormalize, "BatchNormNormalize", 5, 5, 1, 1},
    {OpKind::kBatchNormGrad, "BatchNormGrad", 3, 5, 3, 3},
    {OpKind::kReLUGrad, "ReLUGrad", 2, 2, 1, 1},
    {OpKind::kPoolGrad, "PoolGrad", 1, 2, 1, 1},
    {OpKind::kGradAccumulate, "GradAccumulate", 2, 2, 2, 2},
    {OpKind::kSGDMomentumUpdate, "SGDMomentumUpdate", 3, 3, 3, 3},
}};

const OpInfo& info(OpKind kind) {
  for (const auto& op : kOps)
    if (op.kind == kind) return op;
  throw std::logic_error("unregistered op kind");
}

constexpr std::array<std::pair<TensorKind, std::string_view>, 6> kTensorKinds = {{
    {TensorKind::kInput, "input"},
    {TensorKind::kParameter, "parameter"},
    {TensorKind::kActivation, "activation"},
    {TensorKind::kGradient, "gradient"},
    {TensorKind::kOptimizerState, "optimizer-state"},
    {TensorKind::kOutput, "output"},
}};

// Attribute keys each op accepts; serialization emits exactly these.
std::vector<std::string_view> attr_keys(OpKind kind) {
  switch (kind) {
    case OpKind::kConv1D:
    case OpKind::kConvGrad:
    case OpKind::kConvGradW:
      return {"kernel", "stride", "padding", "groups"};
    case OpKind::kConvGradX:
      return {"kernel", "stride", "padding", "groups", "input_length"};
    case OpKind::kGroupNorm:
    case OpKind::kGroupNormStats:
    case OpKind::kGroupNormNormalize:
    case OpKind::kGroupNormGrad:
      return {"num_groups", "epsilon"};
    case OpKind::kBatchNorm:
    case OpKind::kBatchNormStats:
    case OpKind::kBatchNormNormalize:
    case OpKind::kBatchNormGrad:
      return {"epsilon"};
    case OpKind::kAvgPool1D:
    case OpKind::kMaxPool1D:
      return {"kernel", "stride"};
    case OpKind::kPoolGrad:
      return {"kernel", "stride", "mode", "input_length"};
    case OpKind::kSGDMomentumUpdate:
      return {"momentum", "weight_decay", "scale", "accumulate_steps"};
    default:
      return {};
  }
}

std::vector<std::string_view> required_attrs(OpKind kind) {
  switch (kind) {
    case OpKind::kConv1D:
    case OpKind::kAvgPool1D:
    case OpKind::kMaxPool1D:
      return {"kernel"};
    case OpKind::kGroupNorm:
      return {"num_groups"};
    default:
      return {};
  }
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw FormatError(kOrigin, where + ": " + what);
}

std::string node_label(const Node& n) {
  return "node '" + n.id + "' (" + std::string(op_name(n.kind)) + ")";
}

std::string dims_str(const std::vector<std::int64_t>& d) {
  std::string s = "[";
  for (std::size_t i = 0; i < d.size(); ++i) s += (i ? "," : "") + std::to_string(d[i]);
  return s + "]";
}

void check_attr_values(const Node& n, const std::string& where) {
  const Attrs& a = n.attrs;
  switch (n.kind) {
    case OpKind::kConv1D:
    case OpKind::kConvGrad:
    case OpKind::kConvGradX:
    case OpKind::kConvGradW:
      if (a.kernel < 1) fail(where + ".kernel", "K must be >= 1");
      if (a.stride < 1) fail(where + ".stride", "S must be >= 1");
      if (a.padding < 0) fail(where + ".padding", "P must be >= 0");
      if (a.groups < 1) fail(where + ".groups", "G must be >= 1");
      break;
    case OpKind::kAvgPool1D:
    case OpKind::kMaxPool1D:
    case OpKind::kPoolGrad:
      if (a.kernel < 1) fail(where + ".kernel", "K must be >= 1");
      if (a.stride < 1) fail(where + ".stride", "S must be >= 1");
      break;
    case OpKind::kGroupNorm:
    case OpKind::kGroupNormStats:
    case OpKind::kGroupNormNormalize:
    case OpKind::kGroupNormGrad:
      if (a.num_groups < 1) fail(where + ".num_groups", "g must be >= 1");
      [[fallthrough]];
    case OpKind::kBatchNorm:
    case OpKind::kBatchNormStats:
    case OpKind::kBatchNormNormalize:
    case OpKind::kBatchNormGrad:
      if (!(a.epsilon > 0.0)) fail(where + ".epsilon", "epsilon must be > 0");
      break;
    case OpKind::kSGDMomentumUpdate:
      if (a.momentum < 0.0 || a.momentum >= 1.0) fail(where + ".momentum", "momentum must lie in [0,1)");
      if (a.weight_decay < 0.0) fail(where + ".weight_decay", "weight decay must be >= 0");
      if (a.accumulate_steps < 1) fail(where + ".accumulate_steps", "must be >= 1");
      break;
    default:
      break;
  }
}

std::int64_t conv_out_len(std::int64_t t, std::int64_t k, std::int64_t s, std::int64_t p) {
  const std::int64_t span = t + 2 * p - k;
  if (span < 0) return 0;
  return span / s + 1;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view op_name(OpKind kind) { return info(kind).name; }

std::optional<OpKind> op_from_name(std::string_view name) {
  for (const auto& op : kOps)
    if (op.name == name) return op.kind;
  return std::nullopt;
}

std::string_view tensor_kind_name(TensorKind kind) {
  for (const auto& [k, n] : kTensorKinds)
    if (k == kind) return n;
  return "?";
}

std::optional<TensorKind> tensor_kind_from_name(std::string_view name) {
  for (const auto& [k, n] : kTensorKinds)
    if (n == name) return k;
  return std::nullopt;
}

std::int64_t TensorSpec::numel() const {
  return std::accumulate(dims.begin(), dims.end(), std::int64_t{1}, std::multiplies<>());
}

bool Graph::has_tensor(std::string_view name) const { return index_.count(std::string(name)) != 0; }

std::size_t Graph::tensor_index(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw FormatError(kOrigin, "unknown tensor '" + std::string(name) + "'");
  return it->second;
}

const TensorSpec& Graph::tensor(std::string_view name) const { return tensors_[tensor_index(name)]; }
TensorSpec& Graph::tensor(std::string_view name) { return tensors_[tensor_index(name)]; }

TensorSpec& Graph::add_tensor(TensorSpec spec) {
  if (has_tensor(spec.name)) throw FormatError(kOrigin, "duplicate tensor name '" + spec.name + "'");
  index_.emplace(spec.name, tensors_.size());
  tensors_.push_back(std::move(spec));
  return tensors_.back();
}

void Graph::remove_tensor(std::string_view name) {
  const std::size_t at = tensor_index(name);
  tensors_.erase(tensors_.begin() + static_cast<std::ptrdiff_t>(at));
  index_.clear();
  for (std::size_t i = 0; i < tensors_.size(); ++i) index_.emplace(tensors_[i].name, i);
}

const Node* Graph::find_node(std::string_view id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

bool is_state(const TensorSpec& t) {
  return t.kind == TensorKind::kParameter || t.kind == TensorKind::kOptimizerState ||
         (t.kind == TensorKind::kGradient && t.persistence == Persistence::kPersistentAccumulator);
}

std::int64_t parameter_count(const Graph& g) {
  std::int64_t total = 0;
  for (const auto& t : g.tensors())
    if (t.kind == TensorKind::kParameter) total += t.numel();
  return total;
}

// ---------------------------------------------------------------------------
// validate_and_sort

std::vector<std::size_t> validate_and_sort(const Graph& g) {
  const std::size_t n = g.nodes.size();
  std::vector<std::set<std::size_t>> succ(n);
  std::unordered_map<std::string, std::size_t> producer;

  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = g.nodes[i];
    const OpInfo& oi = info(node.kind);
    const int nin = static_cast<int>(node.inputs.size());
    const int nout = static_cast<int>(node.outputs.size());
    if (nin < oi.min_in || nin > oi.max_in || nout < oi.min_out || nout > oi.max_out)
      throw FormatError(kOrigin, node_label(node) + ": arity mismatch");
    for (const auto& out : node.outputs) {
      if (out.empty()) continue;
      if (!g.has_tensor(out))
        throw FormatError(kOrigin, node_label(node) + ": dangling tensor reference '" + out + "'");
      const TensorSpec& t = g.tensor(out);
      if (is_state(t)) {
        if (g.phase == Phase::kForwardOnly && t.kind == TensorKind::kParameter)
          throw FormatError(kOrigin, "parameter '" + out + "' has a producer in a forward-only graph");
        continue;
      }
      if (t.kind == TensorKind::kInput)
        throw FormatError(kOrigin, node_label(node) + ": writes graph input '" + out + "'");
      if (!producer.emplace(out, i).second)
        throw FormatError(kOrigin, "tensor '" + out + "' has more than one producer");
    }
  }

  // State tensors: accesses are ordered by declaration (RAW after the last
  // writer, WAR before the next writer).
  struct StateTrack {
    std::optional<std::size_t> last_writer;
    std::vector<std::size_t> readers;
  };
  std::unordered_map<std::string, StateTrack> state;

  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = g.nodes[i];
    for (const auto& in : node.inputs) {
      if (in.empty() || !g.has_tensor(in))
        throw FormatError(kOrigin, node_label(node) + ": dangling tensor reference '" + in + "'");
      const TensorSpec& t = g.tensor(in);
      if (is_state(t)) continue;
      auto it = producer.find(in);
      if (it != producer.end()) {
        succ[it->second].insert(i);
      } else if (t.kind != TensorKind::kInput) {
        throw FormatError(kOrigin, node_label(node) + ": dangling tensor reference '" + in +
                                       "' (no producer)");
      }
    }
    std::set<std::string> reads, writes;
    for (const auto& in : node.inputs)
      if (is_state(g.tensor(in))) reads.insert(in);
    for (const auto& out : node.outputs)
      if (!out.empty() && is_state(g.tensor(out))) writes.insert(out);
    for (const auto& name : reads) {
      StateTrack& st = state[name];
      if (st.last_writer) succ[*st.last_writer].insert(i);
      if (!writes.count(name)) st.readers.push_back(i);
    }
    for (const auto& name : writes) {
      StateTrack& st = state[name];
      if (st.last_writer && *st.last_writer != i) succ[*st.last_writer].insert(i);
      for (std::size_t r : st.readers)
        if (r != i) succ[r].insert(i);
      st.readers.clear();
      st.last_writer = i;
    }
  }

  std::vector<int> indeg(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : succ[i]) ++indeg[j];
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.push(i);
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::size_t i = ready.top();
    ready.pop();
    order.push_back(i);
    for (std::size_t j : succ[i])
      if (--indeg[j] == 0) ready.push(j);
  }
  if (order.size() != n) {
    // Walk remaining edges from some blocked node until a node repeats.
    std::size_t cur = 0;
    while (indeg[cur] == 0) ++cur;
    std::vector<int> seen(n, -1);
    int step = 0;
    while (seen[cur] < 0) {
      seen[cur] = step++;
      std::size_t next = cur;
      for (std::size_t p = 0; p < n; ++p)
        if (indeg[p] > 0 && succ[p].count(cur)) {
          next = p;
          break;
        }
      cur = next;
    }
    throw FormatError(kOrigin, "cycle detected through " + node_label(g.nodes[cur]));
  }
  return order;
}

// ---------------------------------------------------------------------------
// infer_shapes

Graph infer_shapes(Graph g) {
  const auto order = validate_and_sort(g);

  for (std::size_t idx : order) {
    const Node& node = g.nodes[idx];
    const std::string label = node_label(node);
    check_attr_values(node, label + " attrs");

    auto in_dims = [&](std::size_t i) -> const std::vector<std::int64_t>& {
      const TensorSpec& t = g.tensor(node.inputs.at(i));
      if (t.dims.empty()) throw FormatError(kOrigin, label + ": dims of '" + t.name + "' are unknown");
      return t.dims;
    };
    auto has_in = [&](std::size_t i) { return i < node.inputs.size() && !node.inputs[i].empty(); };
    auto set_out = [&](std::size_t i, std::vector<std::int64_t> dims) {
      if (i >= node.outputs.size() || node.outputs[i].empty()) return;
      for (auto d : dims)
        if (d < 1)
          throw FormatError(kOrigin, label + ": nonpositive inferred dim " + dims_str(dims) + " for '" +
                                         node.outputs[i] + "'");
      TensorSpec& t = g.tensor(node.outputs[i]);
      if (t.dims.empty()) {
        t.dims = std::move(dims);
      } else if (t.dims != dims) {
        throw FormatError(kOrigin, label + ": shape mismatch for '" + t.name + "': declared " +
                                       dims_str(t.dims) + ", inferred " + dims_str(dims));
      }
    };
    auto expect = [&](bool ok, const std::string& what) {
      if (!ok) throw FormatError(kOrigin, label + ": shape mismatch: " + what);
    };
    auto expect_rank = [&](std::size_t i, std::size_t rank) {
      expect(in_dims(i).size() == rank, "'" + node.inputs[i] + "' must have rank " + std::to_string(rank) +
                                            ", got " + dims_str(in_dims(i)));
    };
    auto require_declared = [&](std::size_t i) {
      if (i < node.outputs.size() && !node.outputs[i].empty() && g.tensor(node.outputs[i]).dims.empty())
        throw FormatError(kOrigin, label + ": dims of '" + node.outputs[i] + "' must be declared");
    };
    const Attrs& a = node.attrs;

    switch (node.kind) {
      case OpKind::kConv1D: {
        expect_rank(0, 3);
        expect_rank(1, 3);
        const auto& x = in_dims(0);
        const auto& w = in_dims(1);
        expect(x[1] % a.groups == 0, "Cin not divisible by groups");
        expect(w[0] % a.groups == 0, "Cout not divisible by groups");
        expect(w[1] * a.groups == x[1], "weight Cin/G " + dims_str(w) + " vs input " + dims_str(x));
        expect(w[2] == a.kernel, "weight K " + std::to_string(w[2]) + " != kernel attr " + std::to_string(a.kernel));
        if (has_in(2)) expect(in_dims(2) == std::vector<std::int64_t>{w[0]}, "bias must be [Cout]");
        set_out(0, {x[0], w[0], conv_out_len(x[2], a.kernel, a.stride, a.padding)});
        break;
      }
      case OpKind::kLinear: {
        const auto& x = in_dims(0);
        expect_rank(1, 2);
        const auto& w = in_dims(1);
        std::int64_t features = 1;
        for (std::size_t i = 1; i < x.size(); ++i) features *= x[i];
        expect(x.size() >= 2 && w[1] == features, "weight " + dims_str(w) + " vs input " + dims_str(x));
        if (has_in(2)) expect(in_dims(2) == std::vector<std::int64_t>{w[0]}, "bias must be [Out]");
        set_out(0, {x[0], w[0]});
        break;
      }
      case OpKind::kGroupNorm:
      case OpKind::kBatchNorm:
      case OpKind::kGroupNormNormalize:
      case OpKind::kBatchNormNormalize:
      case OpKind::kGroupNormStats:
      case OpKind::kBatchNormStats: {
        expect_rank(0, 3);
        const auto& x = in_dims(0);
        const bool gn = node.kind == OpKind::kGroupNorm || node.kind == OpKind::kGroupNormNormalize ||
                        node.kind == OpKind::kGroupNormStats;
        if (gn && x[1] % a.num_groups != 0)
          throw FormatError(kOrigin, label + " attrs.num_groups: g does not divide C (g=" +
                                         std::to_string(a.num_groups) + ", C=" + std::to_string(x[1]) + ")");
        const std::vector<std::int64_t> stat = gn ? std::vector<std::int64_t>{x[0], a.num_groups}
                                                  : std::vector<std::int64_t>{x[1]};
        if (node.kind == OpKind::kGroupNormStats || node.kind == OpKind::kBatchNormStats) {
          set_out(0, stat);
          set_out(1, stat);
          break;
        }
        const std::size_t affine = node.inputs.size() == 5 ? 3 : 1;
        if (node.inputs.size() == 5) {
          expect(in_dims(1) == stat && in_dims(2) == stat, "statistics must be " + dims_str(stat));
        }
        expect(in_dims(affine) == std::vector<std::int64_t>{x[1]}, "gamma must be [C]");
        expect(in_dims(affine + 1) == std::vector<std::int64_t>{x[1]}, "beta must be [C]");
        set_out(0, x);
        break;
      }
      case OpKind::kReLU:
        set_out(0, in_dims(0));
        break;
      case OpKind::kAvgPool1D:
      case OpKind::kMaxPool1D: {
        expect_rank(0, 3);
        const auto& x = in_dims(0);
        const std::vector<std::int64_t> y{x[0], x[1], conv_out_len(x[2], a.kernel, a.stride, 0)};
        set_out(0, y);
        set_out(1, y);
        break;
      }
      case OpKind::kSoftmaxCrossEntropy:
      case OpKind::kLossGrad: {
        expect_rank(0, 2);
        expect(in_dims(1) == std::vector<std::int64_t>{in_dims(0)[0]}, "labels must be [N]");
        set_out(0, {1});
        if (node.kind == OpKind::kLossGrad) set_out(1, in_dims(0));
        break;
      }
      case OpKind::kConvGrad:
      case OpKind::kLinearGrad: {
        set_out(0, in_dims(0));
        set_out(1, in_dims(1));
        set_out(2, {in_dims(1)[0]});
        break;
      }
      case OpKind::kConvGradX: {
        const auto& dy = in_dims(0);
        const auto& w = in_dims(1);
        expect(a.input_length >= 1, "input_length attr required");
        set_out(0, {dy[0], w[1] * a.groups, a.input_length});
        break;
      }
      case OpKind::kConvGradW: {
        const auto& x = in_dims(0);
        const auto& dy = in_dims(1);
        expect(x[0] == dy[0], "batch mismatch between X and dY");
        set_out(0, {dy[1], x[1] / a.groups, a.kernel});
        set_out(1, {dy[1]});
        break;
      }
      case OpKind::kLinearGradX: {
        const auto& dy = in_dims(0);
        const auto& w = in_dims(1);
        if (!node.outputs[0].empty() && !g.tensor(node.outputs[0]).dims.empty()) {
          const TensorSpec& dx = g.tensor(node.outputs[0]);
          expect(dx.dims[0] == dy[0] && dx.numel() == dy[0] * w[1], "dX " + dims_str(dx.dims) + " vs W " + dims_str(w));
        } else {
          set_out(0, {dy[0], w[1]});
        }
        break;
      }
      case OpKind::kLinearGradW: {
        const auto& x = in_dims(0);
        const auto& dy = in_dims(1);
        set_out(0, {dy[1], g.tensor(node.inputs[0]).numel() / x[0]});
        set_out(1, {dy[1]});
        break;
      }
      case OpKind::kGroupNormGrad:
      case OpKind::kBatchNormGrad: {
        const auto& x = in_dims(1);
        const auto& gamma = in_dims(node.inputs.size() == 5 ? 4 : 2);
        expect(in_dims(0) == x, "dY must mirror X");
        set_out(0, x);
        set_out(1, gamma);
        set_out(2, gamma);
        break;
      }
      case OpKind::kReLUGrad:
        expect(in_dims(0) == in_dims(1), "dY must mirror X");
        set_out(0, in_dims(0));
        break;
      case OpKind::kPoolGrad: {
        const auto& dy = in_dims(0);
        expect(a.input_length >= 1, "input_length attr required");
        if (a.pool_mode == PoolMode::kMax)
          expect(node.inputs.size() == 2 && in_dims(1) == dy, "max-pool gradient needs argmax indices");
        set_out(0, {dy[0], dy[1], a.input_length});
        break;
      }
      case OpKind::kGradAccumulate:
        expect(in_dims(0) == in_dims(1), "gradient and accumulator dims differ");
        set_out(0, in_dims(0));
        set_out(1, in_dims(1));
        break;
      case OpKind::kSGDMomentumUpdate:
        expect(in_dims(0) == in_dims(1) && in_dims(0) == in_dims(2), "parameter/accumulator/velocity dims differ");
        for (std::size_t i = 0; i < 3; ++i) set_out(i, in_dims(i));
        break;
    }
    for (std::size_t i = 0; i < node.outputs.size(); ++i) require_declared(i);
  }
  return g;
}

Graph with_batch(const Graph& g, std::int64_t n) {
  if (g.phase != Phase::kForwardOnly) throw FormatError(kOrigin, "with_batch expects a forward-only graph");
  if (n < 1) throw FormatError(kOrigin, "batch must be >= 1");
  Graph out;
  out.phase = g.phase;
  out.nodes = g.nodes;
  for (TensorSpec t : g.tensors()) {
    if (t.kind == TensorKind::kInput && !t.dims.empty()) t.dims[0] = n;
    if (t.kind == TensorKind::kActivation || t.kind == TensorKind::kOutput) t.dims.clear();
    out.add_tensor(std::move(t));
  }
  return infer_shapes(std::move(out));
}

Graph substitute_normalization(const Graph& g, OpKind target, std::int64_t num_groups) {
  if (target != OpKind::kBatchNorm && target != OpKind::kGroupNorm)
    throw FormatError(kOrigin, "normalization target must be GroupNorm or BatchNorm");
  Graph out = g;
  for (Node& n : out.nodes) {
    if (n.kind != OpKind::kGroupNorm && n.kind != OpKind::kBatchNorm) continue;
    if (n.kind == target) continue;
    n.kind = target;
    n.attrs.num_groups = target == OpKind::kGroupNorm ? num_groups : 0;
  }
  return infer_shapes(std::move(out));
}

// ---------------------------------------------------------------------------
// JSON model format

namespace {

std::int64_t get_int(const Json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where, "expected an integer");
  return v.get<std::int64_t>();
}

double get_num(const Json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  return v.get<double>();
}

std::string get_str(const Json& obj, const char* key, const std::string& where, bool required = true) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) fail(where + "." + key, "missing field");
    return {};
  }
  if (!it->is_string()) fail(where + "." + key, "expected a string");
  return it->get<std::string>();
}

std::vector<std::string> get_names(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where + "." + key, "missing field");
  if (!it->is_array()) fail(where + "." + key, "expected an array of tensor names");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < it->size(); ++i) {
    const Json& v = (*it)[i];
    if (!v.is_string()) fail(where + "." + key + "[" + std::to_string(i) + "]", "expected a string");
    names.push_back(v.get<std::string>());
  }
  return names;
}

Attrs parse_attrs(OpKind kind, const Json* obj, const std::string& where) {
  Attrs a;
  const auto allowed = attr_keys(kind);
  if (obj) {
    if (!obj->is_object()) fail(where, "expected an object");
    for (auto it = obj->begin(); it != obj->end(); ++it) {
      const std::string& key = it.key();
      const std::string at = where + "." + key;
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        fail(at, "unknown attribute for " + std::string(op_name(kind)));
      const Json& v = it.value();
      if (key == "kernel") a.kernel = get_int(v, at);
      else if (key == "stride") a.stride = get_int(v, at);
      else if (key == "padding") a.padding = get_int(v, at);
      else if (key == "groups") a.groups = get_int(v, at);
      else if (key == "num_groups") a.num_groups = get_int(v, at);
      else if (key == "epsilon") a.epsilon = get_num(v, at);
      else if (key == "input_length") a.input_length = get_int(v, at);
      else if (key == "momentum") a.momentum = get_num(v, at);
      else if (key == "weight_decay") a.weight_decay = get_num(v, at);
      else if (key == "scale") a.scale = get_num(v, at);
      else if (key == "accumulate_steps") a.accumulate_steps = get_int(v, at);
      else if (key == "mode") {
        if (!v.is_string()) fail(at, "expected \"avg\" or \"max\"");
        const auto m = v.get<std::string>();
        if (m == "avg") a.pool_mode = PoolMode::kAvg;
        else if (m == "max") a.pool_mode = PoolMode::kMax;
        else fail(at, "expected \"avg\" or \"max\"");
      }
    }
  }
  for (auto key : required_attrs(kind))
    if (!obj || !obj->contains(std::string(key)))
      fail(where + "." + std::string(key), "missing attribute for " + std::string(op_name(kind)));
  if ((kind == OpKind::kAvgPool1D || kind == OpKind::kMaxPool1D) && !(obj && obj->contains("stride")))
    a.stride = a.kernel;
  return a;
}

Json attrs_json(const Node& n) {
  Json out = Json::object();
  const Attrs& a = n.attrs;
  for (auto key : attr_keys(n.kind)) {
    if (key == "kernel") out["kernel"] = a.kernel;
    else if (key == "stride") out["stride"] = a.stride;
    else if (key == "padding") out["padding"] = a.padding;
    else if (key == "groups") out["groups"] = a.groups;
    else if (key == "num_groups") out["num_groups"] = a.num_groups;
    else if (key == "epsilon") out["epsilon"] = a.epsilon;
    else if (key == "input_length") out["input_length"] = a.input_length;
    else if (key == "momentum") out["momentum"] = a.momentum;
    else if (key == "weight_decay") out["weight_decay"] = a.weight_decay;
    else if (key == "scale") out["scale"] = a.scale;
    else if (key == "accumulate_steps") out["accumulate_steps"] = a.accumulate_steps;
    else if (key == "mode") out["mode"] = a.pool_mode == PoolMode::kMax ? "max" : "avg";
  }
  return out;
}

}  // namespace

Graph parse_model(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    fail("line " + std::to_string(line) + ", column " + std::to_string(col), "malformed JSON");
  }
  if (!doc.is_object()) fail("document", "expected a JSON object");

  Graph g;
  if (auto it = doc.find("phase"); it != doc.end()) {
    if (*it == "training") g.phase = Phase::kTraining;
    else if (*it == "forward-only") g.phase = Phase::kForwardOnly;
    else fail("phase", "expected \"forward-only\" or \"training\"");
  }

  auto tit = doc.find("tensors");
  if (tit == doc.end() || !tit->is_array()) fail("tensors", "missing array");
  for (std::size_t i = 0; i < tit->size(); ++i) {
    const Json& tj = (*tit)[i];
    const std::string where = "tensors[" + std::to_string(i) + "]";
    if (!tj.is_object()) fail(where, "expected an object");
    TensorSpec t;
    t.name = get_str(tj, "name", where);
    if (t.name.empty()) fail(where + ".name", "empty tensor name");
    const std::string kind = get_str(tj, "kind", where, false);
    if (!kind.empty()) {
      auto k = tensor_kind_from_name(kind);
      if (!k) fail(where + ".kind", "unknown tensor kind '" + kind + "'");
      t.kind = *k;
    }
    if (auto d = tj.find("dims"); d != tj.end()) {
      if (!d->is_array() || d->empty()) fail(where + ".dims", "expected a non-empty integer array");
      for (std::size_t j = 0; j < d->size(); ++j) {
        const std::int64_t v = get_int((*d)[j], where + ".dims[" + std::to_string(j) + "]");
        if (v < 1) fail(where + ".dims[" + std::to_string(j) + "]", "dims must be >= 1");
        t.dims.push_back(v);
      }
    } else if (t.kind == TensorKind::kInput || t.kind == TensorKind::kParameter) {
      fail(where + ".dims", "missing field (required for inputs and parameters)");
    }
    if (auto p = tj.find("persistent"); p != tj.end() && p->is_boolean() && p->get<bool>())
      t.persistence = Persistence::kPersistentAccumulator;
    if (auto s = tj.find("saved"); s != tj.end() && s->is_boolean()) t.saved = s->get<bool>();
    if (g.has_tensor(t.name)) fail(where + ".name", "duplicate tensor name '" + t.name + "'");
    g.add_tensor(std::move(t));
  }

  auto nit = doc.find("nodes");
  if (nit == doc.end() || !nit->is_array()) fail("nodes", "missing array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < nit->size(); ++i) {
    const Json& nj = (*nit)[i];
    const std::string where = "nodes[" + std::to_string(i) + "]";
    if (!nj.is_object()) fail(where, "expected an object");
    Node n;
    n.id = get_str(nj, "id", where);
    if (!ids.insert(n.id).second) fail(where + ".id", "duplicate node id '" + n.id + "'");
    const std::string op = get_str(nj, "op", where);
    auto kind = op_from_name(op);
    if (!kind) fail(where + ".op", "unknown op kind '" + op + "'");
    n.kind = *kind;
    auto ait = nj.find("attrs");
    n.attrs = parse_attrs(n.kind, ait == nj.end() ? nullptr : &*ait, where + ".attrs");
    n.inputs = get_names(nj, "inputs", where);
    n.outputs = get_names(nj, "outputs", where);
    n.origin = get_str(nj, "origin", where, false);
    const OpInfo& oi = info(n.kind);
    if (static_cast<int>(n.inputs.size()) < oi.min_in || static_cast<int>(n.inputs.size()) > oi.max_in)
      fail(where + ".inputs", op + " expects " + std::to_string(oi.min_in) + ".." + std::to_string(oi.max_in) +
                                  " inputs, got " + std::to_string(n.inputs.size()));
    if (static_cast<int>(n.outputs.size()) < oi.min_out || static_cast<int>(n.outputs.size()) > oi.max_out)
      fail(where + ".outputs", op + " expects " + std::to_string(oi.min_out) + ".." +
                                   std::to_string(oi.max_out) + " outputs, got " + std::to_string(n.outputs.size()));
    for (std::size_t j = 0; j < n.inputs.size(); ++j)
      if (!g.has_tensor(n.inputs[j]) && n.inputs[j].empty())
        fail(where + ".inputs[" + std::to_string(j) + "]", "empty tensor name");
    for (const auto& out : n.outputs)
      if (!out.empty() && !g.has_tensor(out)) g.add_tensor(TensorSpec{out, {}, TensorKind::kActivation});
    g.nodes.push_back(std::move(n));
  }
  return infer_shapes(std::move(g));
}

Graph load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(kOrigin, "cannot open model '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

std::string serialize_model(const Graph& g) {
  Json doc = Json::object();
  if (g.phase == Phase::kTraining) doc["phase"] = "training";
  Json tensors = Json::array();
  for (const auto& t : g.tensors()) {
    Json tj = Json::object();
    tj["name"] = t.name;
    if (!t.dims.empty()) tj["dims"] = t.dims;
    tj["kind"] = std::string(tensor_kind_name(t.kind));
    if (t.persistence == Persistence::kPersistentAccumulator) tj["persistent"] = true;
    if (t.saved) tj["saved"] = true;
    tensors.push_back(std::move(tj));
  }
  doc["tensors"] = std::move(tensors);
  Json nodes = Json::array();
  for (const auto& n : g.nodes) {
    Json nj = Json::object();
    nj["id"] = n.id;
    nj["op"] = std::string(op_name(n.kind));
    Json attrs = attrs_json(n);
    if (!attrs.empty()) nj["attrs"] = std::move(attrs);
    nj["inputs"] = n.inputs;
    nj["outputs"] = n.outputs;
    if (!n.origin.empty()) nj["origin"] = n.origin;
    nodes.push_back(std::move(nj));
  }
  doc["nodes"] = std::move(nodes);
  return doc.dump(2) + "\n";
}

}  // namespace edgetrain
