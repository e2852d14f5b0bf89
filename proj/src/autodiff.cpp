// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgetrain/autodiff.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

#include "edgetrain/error.hpp"

namespace edgetrain {
namespace {

constexpr const char* kOrigin = "autodiff";

std::string grad_name(const std::string& t) { return t + ".grad"; }

bool is_batch_norm(OpKind k) {
  return k == OpKind::kBatchNorm || k == OpKind::kBatchNormStats || k == OpKind::kBatchNormNormalize ||
         k == OpKind::kBatchNormGrad;
}

}  // namespace

void TrainingConfig::validate() const {
  auto bad = [](const std::string& what) { throw FormatError("config", what); };
  if (micro_batch < 1) bad("micro_batch must be positive");
  if (effective_batch < 1) bad("effective_batch must be positive");
  if (effective_batch % micro_batch != 0) bad("effective_batch must be a multiple of micro_batch");
  if (!(learning_rate > 0.0)) bad("learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) bad("momentum must lie in [0, 1)");
  if (weight_decay < 0.0) bad("weight decay must be nonnegative");
  if (epochs < 1) bad("epochs must be positive");
  if (alignment_bytes < 1) bad("alignment must be positive");
  if (l1_budget_bytes < alignment_bytes || l1_budget_bytes < 4) bad("L1 budget below one aligned element");
  if (l2_budget_bytes < alignment_bytes || l2_budget_bytes < 4) bad("L2 budget below one aligned element");
}

std::string default_logits(const Graph& forward) {
  for (const auto& t : forward.tensors())
    if (t.kind == TensorKind::kOutput) return t.name;
  const auto order = validate_and_sort(forward);
  if (order.empty()) throw CompileError(kOrigin, "empty graph has no logits");
  return forward.nodes[order.back()].outputs.front();
}

std::vector<std::string> all_but_last_linear(const Graph& forward) {
  const auto order = validate_and_sort(forward);
  const Node* last = nullptr;
  for (std::size_t i : order)
    if (forward.nodes[i].kind == OpKind::kLinear) last = &forward.nodes[i];
  if (!last) throw CompileError(kOrigin, "linear probing needs a Linear layer");
  std::vector<std::string> frozen;
  for (const auto& t : forward.tensors()) {
    if (t.kind != TensorKind::kParameter) continue;
    if (std::find(last->inputs.begin(), last->inputs.end(), t.name) == last->inputs.end()) frozen.push_back(t.name);
  }
  return frozen;
}

Graph build_training_graph(const Graph& forward, const LossSpec& loss, const TrainingConfig& cfg,
                           const BuildOptions& options) {
  if (forward.phase != Phase::kForwardOnly)
    throw CompileError(kOrigin, "build_training_graph expects a forward-only graph");
  cfg.validate();
  Graph g = forward;
  g.phase = Phase::kTraining;
  const auto order = validate_and_sort(forward);

  const std::set<std::string> frozen(options.frozen.begin(), options.frozen.end());
  std::set<std::string> needs_grad;
  for (const auto& t : g.tensors())
    if (t.kind == TensorKind::kParameter && !frozen.count(t.name)) needs_grad.insert(t.name);

  std::unordered_map<std::string, int> consumers;
  for (std::size_t i : order) {
    const Node& n = forward.nodes[i];
    switch (n.kind) {
      case OpKind::kConv1D:
      case OpKind::kLinear:
      case OpKind::kGroupNorm:
      case OpKind::kBatchNorm:
      case OpKind::kReLU:
      case OpKind::kAvgPool1D:
      case OpKind::kMaxPool1D:
        break;
      default:
        throw CompileError(kOrigin, "no registered gradient rule for node '" + n.id + "' (" +
                                        std::string(op_name(n.kind)) + ")");
    }
    bool any = false;
    for (const auto& in : n.inputs) {
      ++consumers[in];
      any = any || needs_grad.count(in);
    }
    if (any) needs_grad.insert(n.outputs.front());
  }

  if (!g.has_tensor(loss.logits)) throw CompileError(kOrigin, "logits tensor '" + loss.logits + "' not found");
  const TensorSpec logits = g.tensor(loss.logits);
  if (logits.dims.size() != 2) throw CompileError(kOrigin, "logits must be [N, classes]");
  if (!g.has_tensor(loss.labels)) g.add_tensor({loss.labels, {logits.dims[0]}, TensorKind::kInput});

  for (const auto& [name, count] : consumers)
    if (count > 1 && needs_grad.count(name) && g.tensor(name).kind != TensorKind::kParameter)
      throw CompileError(kOrigin, "tensor '" + name + "' fans out to " + std::to_string(count) +
                                      " consumers; gradient summation is not supported");

  auto add_grad = [&](const std::string& of) -> std::string {
    const TensorSpec& src = g.tensor(of);
    TensorSpec gt{grad_name(of), src.dims, TensorKind::kGradient};
    if (src.kind == TensorKind::kParameter) gt.persistence = Persistence::kPersistentAccumulator;
    if (!g.has_tensor(gt.name)) g.add_tensor(gt);
    return gt.name;
  };
  auto grad_if = [&](const std::string& of) -> std::string {
    if (of.empty() || !needs_grad.count(of)) return {};
    return add_grad(of);
  };
  auto mark_saved = [&](const std::string& t) {
    TensorSpec& s = g.tensor(t);
    if (s.kind != TensorKind::kParameter) s.saved = true;
  };

  // MaxPool backward routes through stored argmax indices.
  for (Node& n : g.nodes) {
    if (n.kind == OpKind::kMaxPool1D && n.outputs.size() == 1 && needs_grad.count(n.outputs[0])) {
      const std::string idx = n.outputs[0] + ".argmax";
      g.add_tensor({idx, g.tensor(n.outputs[0]).dims, TensorKind::kActivation});
      n.outputs.push_back(idx);
    }
  }

  std::vector<Node> backward;
  {
    Node lg;
    lg.id = "loss_grad";
    lg.kind = OpKind::kLossGrad;
    lg.inputs = {loss.logits, loss.labels};
    if (!g.has_tensor("loss")) g.add_tensor({"loss", {1}, TensorKind::kOutput});
    lg.outputs = {"loss", needs_grad.count(loss.logits) ? add_grad(loss.logits) : std::string()};
    if (lg.outputs[1].empty()) throw CompileError(kOrigin, "no trainable parameter reaches the logits");
    mark_saved(loss.logits);
    backward.push_back(std::move(lg));
  }

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Node& f = g.nodes[*it];
    const std::string& y = f.outputs.front();
    if (!needs_grad.count(y)) continue;
    const std::string dy = grad_name(y);
    Node b;
    b.id = f.id + ".grad";
    b.origin = f.id;
    b.attrs = f.attrs;
    switch (f.kind) {
      case OpKind::kConv1D:
      case OpKind::kLinear: {
        b.kind = f.kind == OpKind::kConv1D ? OpKind::kConvGrad : OpKind::kLinearGrad;
        b.inputs = {f.inputs[0], f.inputs[1], dy};
        b.outputs = {grad_if(f.inputs[0]), grad_if(f.inputs[1]),
                     f.inputs.size() > 2 ? grad_if(f.inputs[2]) : std::string()};
        if (!b.outputs[1].empty() || !b.outputs[2].empty()) mark_saved(f.inputs[0]);
        break;
      }
      case OpKind::kGroupNorm:
      case OpKind::kBatchNorm:
        b.kind = f.kind == OpKind::kGroupNorm ? OpKind::kGroupNormGrad : OpKind::kBatchNormGrad;
        b.inputs = {dy, f.inputs[0], f.inputs[1]};
        b.outputs = {grad_if(f.inputs[0]), grad_if(f.inputs[1]), grad_if(f.inputs[2])};
        mark_saved(f.inputs[0]);
        break;
      case OpKind::kReLU:
        b.kind = OpKind::kReLUGrad;
        b.inputs = {f.inputs[0], dy};
        b.outputs = {grad_if(f.inputs[0])};
        mark_saved(f.inputs[0]);
        break;
      case OpKind::kAvgPool1D:
      case OpKind::kMaxPool1D:
        b.kind = OpKind::kPoolGrad;
        b.attrs.pool_mode = f.kind == OpKind::kMaxPool1D ? PoolMode::kMax : PoolMode::kAvg;
        b.attrs.input_length = g.tensor(f.inputs[0]).dims[2];
        b.inputs = {dy};
        if (f.kind == OpKind::kMaxPool1D) {
          b.inputs.push_back(f.outputs[1]);
          mark_saved(f.outputs[1]);
        }
        b.outputs = {grad_if(f.inputs[0])};
        break;
      default:
        break;
    }
    if (b.kind == OpKind::kReLUGrad || b.kind == OpKind::kPoolGrad) {
      if (b.outputs[0].empty()) continue;  // input is data: nothing upstream to feed
    }
    backward.push_back(std::move(b));
  }

  std::vector<Node> accumulate, update;
  for (const auto& t : forward.tensors()) {
    if (t.kind != TensorKind::kParameter || !needs_grad.count(t.name)) continue;
    const std::string gname = add_grad(t.name);
    const std::string acc = gname + ".acc";
    const std::string vel = t.name + ".velocity";
    g.add_tensor({acc, t.dims, TensorKind::kGradient, Persistence::kPersistentAccumulator});
    g.add_tensor({vel, t.dims, TensorKind::kOptimizerState});
    Node a;
    a.id = t.name + ".accumulate";
    a.kind = OpKind::kGradAccumulate;
    a.origin = t.name;
    a.inputs = {gname, acc};
    a.outputs = {gname, acc};
    accumulate.push_back(std::move(a));
    Node u;
    u.id = t.name + ".update";
    u.kind = OpKind::kSGDMomentumUpdate;
    u.origin = t.name;
    u.attrs.momentum = cfg.momentum;
    u.attrs.weight_decay = cfg.weight_decay;
    u.inputs = {t.name, acc, vel};
    u.outputs = {t.name, acc, vel};
    update.push_back(std::move(u));
  }

  for (auto& n : backward) g.nodes.push_back(std::move(n));
  for (auto& n : accumulate) g.nodes.push_back(std::move(n));
  for (auto& n : update) g.nodes.push_back(std::move(n));
  return infer_shapes(std::move(g));
}

Graph decompose_gradients(Graph g) {
  std::vector<Node> out;
  out.reserve(g.nodes.size() + 8);
  for (Node& n : g.nodes) {
    if (n.kind != OpKind::kConvGrad && n.kind != OpKind::kLinearGrad) {
      out.push_back(std::move(n));
      continue;
    }
    const bool conv = n.kind == OpKind::kConvGrad;
    const std::string& x = n.inputs[0];
    const std::string& w = n.inputs[1];
    const std::string& dy = n.inputs[2];
    if (!n.outputs[0].empty()) {
      Node gx;
      gx.id = n.id + ".x";
      gx.kind = conv ? OpKind::kConvGradX : OpKind::kLinearGradX;
      gx.origin = n.origin;
      gx.attrs = n.attrs;
      if (conv) gx.attrs.input_length = g.tensor(x).dims[2];
      gx.inputs = {dy, w};
      gx.outputs = {n.outputs[0]};
      out.push_back(std::move(gx));
    }
    if (!n.outputs[1].empty() || !n.outputs[2].empty()) {
      Node gw;
      gw.id = n.id + ".w";
      gw.kind = conv ? OpKind::kConvGradW : OpKind::kLinearGradW;
      gw.origin = n.origin;
      gw.attrs = n.attrs;
      gw.attrs.input_length = 0;
      gw.inputs = {x, dy};
      gw.outputs = {n.outputs[1]};
      if (!n.outputs[2].empty()) gw.outputs.push_back(n.outputs[2]);
      out.push_back(std::move(gw));
    }
  }
  g.nodes = std::move(out);
  return g;
}

Graph decompose_normalization(Graph g) {
  // forward node id -> (mean, var)
  std::map<std::string, std::pair<std::string, std::string>> stats;
  std::vector<Node> out;
  out.reserve(g.nodes.size() + 8);
  for (Node& n : g.nodes) {
    if (n.kind != OpKind::kGroupNorm && n.kind != OpKind::kBatchNorm) {
      out.push_back(std::move(n));
      continue;
    }
    const bool gn = n.kind == OpKind::kGroupNorm;
    const TensorSpec& x = g.tensor(n.inputs[0]);
    const std::vector<std::int64_t> sdims =
        gn ? std::vector<std::int64_t>{x.dims[0], n.attrs.num_groups} : std::vector<std::int64_t>{x.dims[1]};
    const std::string mean = n.id + ".mean";
    const std::string var = n.id + ".var";
    g.add_tensor({mean, sdims, TensorKind::kActivation});
    g.add_tensor({var, sdims, TensorKind::kActivation});
    stats[n.id] = {mean, var};

    Node s;
    s.id = n.id + ".stats";
    s.kind = gn ? OpKind::kGroupNormStats : OpKind::kBatchNormStats;
    s.attrs = n.attrs;
    s.origin = n.id;
    s.inputs = {n.inputs[0]};
    s.outputs = {mean, var};
    Node z;
    z.id = n.id + ".normalize";
    z.kind = gn ? OpKind::kGroupNormNormalize : OpKind::kBatchNormNormalize;
    z.attrs = n.attrs;
    z.origin = n.id;
    z.inputs = {n.inputs[0], mean, var, n.inputs[1], n.inputs[2]};
    z.outputs = n.outputs;
    out.push_back(std::move(s));
    out.push_back(std::move(z));
  }
  for (Node& n : out) {
    if ((n.kind == OpKind::kGroupNormGrad || n.kind == OpKind::kBatchNormGrad) && n.inputs.size() == 3) {
      auto it = stats.find(n.origin);
      if (it == stats.end()) continue;
      n.inputs = {n.inputs[0], n.inputs[1], it->second.first, it->second.second, n.inputs[2]};
      g.tensor(it->second.first).saved = true;
      g.tensor(it->second.second).saved = true;
    }
  }
  g.nodes = std::move(out);
  return g;
}

Graph insert_gradient_accumulation(Graph g, const TrainingConfig& cfg) {
  cfg.validate();
  if (cfg.effective_batch > cfg.micro_batch) {
    for (const Node& n : g.nodes)
      if (is_batch_norm(n.kind))
        throw CompileError(kOrigin, "BN incompatible with gradient accumulation: node '" + n.id +
                                        "' normalizes with cross-sample batch statistics, so micro-batches of " +
                                        std::to_string(cfg.micro_batch) + " cannot be accumulated to an effective batch of " +
                                        std::to_string(cfg.effective_batch) + " (use GroupNorm)");
  }
  const std::int64_t steps = cfg.accumulation_steps();
  for (Node& n : g.nodes) {
    if (n.kind != OpKind::kSGDMomentumUpdate) continue;
    n.attrs.accumulate_steps = steps;
    n.attrs.scale = 1.0 / static_cast<double>(steps);
  }
  for (const auto& b : grad_bindings(g))
    if (g.tensor(b.tensor).kind == TensorKind::kParameter)
      g.tensor(b.gradient).persistence = Persistence::kPersistentAccumulator;
  return g;
}

Graph build_frontend(const Graph& forward, const LossSpec& loss, const TrainingConfig& cfg,
                     const BuildOptions& options) {
  Graph g = build_training_graph(forward, loss, cfg, options);
  g = decompose_gradients(std::move(g));
  g = decompose_normalization(std::move(g));
  g = insert_gradient_accumulation(std::move(g), cfg);
  return infer_shapes(std::move(g));
}

std::vector<GradBinding> grad_bindings(const Graph& training) {
  std::vector<GradBinding> out;
  for (const auto& t : training.tensors()) {
    const std::string gname = grad_name(t.name);
    if (t.kind == TensorKind::kGradient || !training.has_tensor(gname)) continue;
    out.push_back({t.name, gname, training.tensor(gname).persistence});
  }
  return out;
}

}  // namespace edgetrain
