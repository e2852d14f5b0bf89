// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgetrain/geometry.hpp"

#include <algorithm>
#include <string>

#include "edgetrain/error.hpp"

namespace edgetrain {
namespace {

constexpr const char* kOrigin = "tiler";

const std::vector<std::int64_t>& dims_of(const Graph& g, const std::string& name) {
  const auto& d = g.tensor(name).dims;
  if (d.empty()) throw CompileError(kOrigin, "tensor '" + name + "' has no inferred shape");
  return d;
}

// [N, C, T] operand tiled along T.
Operand temporal(const Graph& g, const std::string& name, Direction dir, WindowRule rule) {
  const auto& d = dims_of(g, name);
  if (d.size() != 3) throw CompileError(kOrigin, "tensor '" + name + "' is not [N, C, T]");
  Operand op;
  op.tensor = name;
  op.direction = dir;
  op.rule = rule;
  op.rows = d[0] * d[1];
  op.length = d[2];
  return op;
}

Operand flat(const Graph& g, const std::string& name, Direction dir, bool persistent,
             WindowRule rule = WindowRule::kWhole) {
  Operand op;
  op.tensor = name;
  op.direction = dir;
  op.persistent = persistent;
  op.rule = rule;
  op.rows = 1;
  op.length = g.tensor(name).numel();
  (void)dims_of(g, name);
  return op;
}

}  // namespace

kernels::ConvShape conv_shape(const Graph& g, const Node& n) {
  kernels::ConvShape s;
  s.kernel = n.attrs.kernel;
  s.stride = n.attrs.stride;
  s.padding = n.attrs.padding;
  s.groups = n.attrs.groups;
  switch (n.kind) {
    case OpKind::kConv1D:
    case OpKind::kConvGrad: {
      const auto& x = dims_of(g, n.inputs[0]);
      const auto& w = dims_of(g, n.inputs[1]);
      s.n = x[0];
      s.cin = x[1];
      s.t_in = x[2];
      s.cout = w[0];
      s.t_out = (s.t_in + 2 * s.padding - s.kernel) / s.stride + 1;
      break;
    }
    case OpKind::kConvGradX: {
      const auto& dy = dims_of(g, n.inputs[0]);
      const auto& w = dims_of(g, n.inputs[1]);
      s.n = dy[0];
      s.cout = dy[1];
      s.t_out = dy[2];
      s.cin = w[1] * s.groups;
      s.t_in = n.attrs.input_length;
      break;
    }
    case OpKind::kConvGradW: {
      const auto& x = dims_of(g, n.inputs[0]);
      const auto& dy = dims_of(g, n.inputs[1]);
      s.n = x[0];
      s.cin = x[1];
      s.t_in = x[2];
      s.cout = dy[1];
      s.t_out = dy[2];
      break;
    }
    default:
      throw CompileError(kOrigin, "node '" + n.id + "' is not a convolution");
  }
  return s;
}

kernels::PoolShape pool_shape(const Graph& g, const Node& n) {
  kernels::PoolShape s;
  s.kernel = n.attrs.kernel;
  s.stride = n.attrs.stride;
  if (n.kind == OpKind::kPoolGrad) {
    const auto& dy = dims_of(g, n.inputs[0]);
    s.n = dy[0];
    s.c = dy[1];
    s.t_out = dy[2];
    s.t_in = n.attrs.input_length;
    s.max = n.attrs.pool_mode == PoolMode::kMax;
  } else {
    const auto& x = dims_of(g, n.inputs[0]);
    s.n = x[0];
    s.c = x[1];
    s.t_in = x[2];
    s.t_out = dims_of(g, n.outputs[0])[2];
    s.max = n.kind == OpKind::kMaxPool1D;
  }
  return s;
}

kernels::NormShape norm_shape(const Graph& g, const Node& n) {
  // X is the first input of forward / stats / normalize nodes, the second of grads.
  const bool grad = n.kind == OpKind::kGroupNormGrad || n.kind == OpKind::kBatchNormGrad;
  const auto& x = dims_of(g, n.inputs[grad ? 1 : 0]);
  kernels::NormShape s;
  s.n = x[0];
  s.c = x[1];
  s.t = x[2];
  s.epsilon = n.attrs.epsilon;
  switch (n.kind) {
    case OpKind::kGroupNorm:
    case OpKind::kGroupNormStats:
    case OpKind::kGroupNormNormalize:
    case OpKind::kGroupNormGrad:
      s.per_sample = true;
      s.groups = n.attrs.num_groups;
      break;
    default:
      s.per_sample = false;
      s.groups = 1;
  }
  return s;
}

std::pair<std::int64_t, std::int64_t> NodeGeometry::window(const Operand& op, std::int64_t a,
                                                           std::int64_t b) const {
  if (op.persistent) return {0, op.length};
  std::int64_t lo = a, hi = b;
  switch (op.rule) {
    case WindowRule::kIdentity:
      break;
    case WindowRule::kWhole:
      lo = 0;
      hi = op.length;
      break;
    case WindowRule::kConvInput:
      lo = conv.in_lo(a);
      hi = conv.in_hi(b);
      break;
    case WindowRule::kConvGradDy:
      lo = conv.out_lo(a);
      hi = conv.out_hi(b);
      break;
    case WindowRule::kPoolInput:
      lo = std::min(pool.in_lo(a), pool.t_in);
      hi = std::min(pool.in_hi(b), pool.t_in);
      break;
    case WindowRule::kPoolGradDy:
      lo = pool.out_lo(a);
      hi = pool.out_hi(b);
      break;
  }
  return {lo, std::max(lo, hi)};
}

NodeGeometry geometry_for(const Graph& g, std::size_t node_index) {
  const Node& n = g.nodes.at(node_index);
  NodeGeometry geo;
  geo.node = node_index;
  geo.kind = n.kind;
  auto whole = [&] {
    geo.tileable = false;
    geo.iter_length = 1;
  };
  auto add_optional_param = [&](const std::string& name, Direction dir) {
    if (!name.empty()) geo.operands.push_back(flat(g, name, dir, true));
  };

  switch (n.kind) {
    case OpKind::kConv1D: {
      geo.conv = conv_shape(g, n);
      geo.iter_length = geo.conv.t_out;
      geo.operands.push_back(temporal(g, n.inputs[0], Direction::kIn, WindowRule::kConvInput));
      geo.operands.push_back(flat(g, n.inputs[1], Direction::kIn, true));
      if (n.inputs.size() > 2) add_optional_param(n.inputs[2], Direction::kIn);
      geo.operands.push_back(temporal(g, n.outputs[0], Direction::kOut, WindowRule::kIdentity));
      break;
    }
    case OpKind::kConvGradX: {
      geo.conv = conv_shape(g, n);
      geo.iter_length = geo.conv.t_in;
      geo.operands.push_back(temporal(g, n.inputs[0], Direction::kIn, WindowRule::kConvGradDy));
      geo.operands.push_back(flat(g, n.inputs[1], Direction::kIn, true));
      geo.operands.push_back(temporal(g, n.outputs[0], Direction::kOut, WindowRule::kIdentity));
      break;
    }
    case OpKind::kConvGradW: {
      geo.conv = conv_shape(g, n);
      geo.iter_length = geo.conv.t_out;
      geo.operands.push_back(temporal(g, n.inputs[0], Direction::kIn, WindowRule::kConvInput));
      geo.operands.push_back(temporal(g, n.inputs[1], Direction::kIn, WindowRule::kIdentity));
      add_optional_param(n.outputs[0], Direction::kInOut);
      if (n.outputs.size() > 1) add_optional_param(n.outputs[1], Direction::kInOut);
      geo.im2col_bytes_per_unit = geo.conv.cin_per_group() * geo.conv.kernel * 4;
      geo.double_scratch_bytes = geo.conv.cout * geo.conv.cin_per_group() * geo.conv.kernel * 8;
      if (n.outputs.size() > 1 && !n.outputs[1].empty()) geo.double_scratch_bytes += geo.conv.cout * 8;
      break;
    }
    case OpKind::kLinear:
      whole();
      geo.operands.push_back(flat(g, n.inputs[0], Direction::kIn, false));
      geo.operands.push_back(flat(g, n.inputs[1], Direction::kIn, true));
      if (n.inputs.size() > 2) add_optional_param(n.inputs[2], Direction::kIn);
      geo.operands.push_back(flat(g, n.outputs[0], Direction::kOut, false));
      break;
    case OpKind::kLinearGradX:
      whole();
      geo.operands.push_back(flat(g, n.inputs[0], Direction::kIn, false));
      geo.operands.push_back(flat(g, n.inputs[1], Direction::kIn, true));
      geo.operands.push_back(flat(g, n.outputs[0], Direction::kOut, false));
      break;
    case OpKind::kLinearGradW:
      whole();
      geo.operands.push_back(flat(g, n.inputs[0], Direction::kIn, false));
      geo.operands.push_back(flat(g, n.inputs[1], Direction::kIn, false));
      add_optional_param(n.outputs[0], Direction::kInOut);
      if (n.outputs.size() > 1) add_optional_param(n.outputs[1], Direction::kInOut);
      break;
    case OpKind::kLossGrad:
    case OpKind::kSoftmaxCrossEntropy:
      whole();
      geo.operands.push_back(flat(g, n.inputs[0], Direction::kIn, false));
      geo.operands.push_back(flat(g, n.inputs[1], Direction::kIn, false));
      for (const auto& o : n.outputs)
        if (!o.empty()) geo.operands.push_back(flat(g, o, Direction::kOut, false));
      break;
    case OpKind::kGroupNormStats:
    case OpKind::kBatchNormStats:
      geo.norm = norm_shape(g, n);
      geo.iter_length = geo.norm.t;
      geo.operands.push_back(temporal(g, n.inputs[0], Direction::kIn, WindowRule::kIdentity));
      geo.operands.push_back(flat(g, n.outputs[0], Direction::kOut, true));
      geo.operands.push_back(flat(g, n.outputs[1], Direction::kOut, true));
      geo.double_scratch_bytes = geo.norm.stat_count() * static_cast<std::int64_t>(sizeof(WelfordState));
      break;
    case OpKind::kGroupNormNormalize:
    case OpKind::kBatchNormNormalize:
      geo.norm = norm_shape(g, n);
      geo.iter_length = geo.norm.t;
      geo.operands.push_back(temporal(g, n.inputs[0], Direction::kIn, WindowRule::kIdentity));
      for (std::size_t i = 1; i < 5; ++i) geo.operands.push_back(flat(g, n.inputs[i], Direction::kIn, true));
      geo.operands.push_back(temporal(g, n.outputs[0], Direction::kOut, WindowRule::kIdentity));
      break;
    case OpKind::kGroupNormGrad:
    case OpKind::kBatchNormGrad: {
      if (n.inputs.size() != 5)
        throw CompileError(kOrigin, "node '" + n.id + "' must be decomposed before tiling");
      geo.norm = norm_shape(g, n);
      geo.iter_length = geo.norm.t;
      const bool dx = !n.outputs[0].empty();
      geo.passes = dx ? 2 : 1;
      const unsigned both = dx ? 3u : 1u;
      Operand dy = temporal(g, n.inputs[0], Direction::kIn, WindowRule::kIdentity);
      Operand x = temporal(g, n.inputs[1], Direction::kIn, WindowRule::kIdentity);
      dy.passes = x.passes = both;
      geo.operands.push_back(dy);
      geo.operands.push_back(x);
      for (std::size_t i = 2; i < 5; ++i) geo.operands.push_back(flat(g, n.inputs[i], Direction::kIn, true));
      if (dx) {
        Operand out = temporal(g, n.outputs[0], Direction::kOut, WindowRule::kIdentity);
        out.passes = 2;
        geo.operands.push_back(out);
      }
      add_optional_param(n.outputs[1], Direction::kInOut);
      add_optional_param(n.outputs[2], Direction::kInOut);
      geo.double_scratch_bytes = (2 * geo.norm.stat_count() + 2 * geo.norm.c) * 8;
      break;
    }
    case OpKind::kReLU:
      geo.iter_length = dims_of(g, n.inputs[0])[2];
      geo.operands.push_back(temporal(g, n.inputs[0], Direction::kIn, WindowRule::kIdentity));
      geo.operands.push_back(temporal(g, n.outputs[0], Direction::kOut, WindowRule::kIdentity));
      break;
    case OpKind::kReLUGrad:
      geo.iter_length = dims_of(g, n.inputs[0])[2];
      geo.operands.push_back(temporal(g, n.inputs[0], Direction::kIn, WindowRule::kIdentity));
      geo.operands.push_back(temporal(g, n.inputs[1], Direction::kIn, WindowRule::kIdentity));
      geo.operands.push_back(temporal(g, n.outputs[0], Direction::kOut, WindowRule::kIdentity));
      break;
    case OpKind::kAvgPool1D:
    case OpKind::kMaxPool1D:
      geo.pool = pool_shape(g, n);
      geo.iter_length = geo.pool.t_out;
      geo.operands.push_back(temporal(g, n.inputs[0], Direction::kIn, WindowRule::kPoolInput));
      for (const auto& o : n.outputs) geo.operands.push_back(temporal(g, o, Direction::kOut, WindowRule::kIdentity));
      break;
    case OpKind::kPoolGrad:
      geo.pool = pool_shape(g, n);
      geo.iter_length = geo.pool.t_in;
      for (const auto& i : n.inputs) geo.operands.push_back(temporal(g, i, Direction::kIn, WindowRule::kPoolGradDy));
      geo.operands.push_back(temporal(g, n.outputs[0], Direction::kOut, WindowRule::kIdentity));
      break;
    case OpKind::kGradAccumulate:
    case OpKind::kSGDMomentumUpdate:
      // Elementwise over the flattened parameter.
      geo.iter_length = g.tensor(n.inputs[0]).numel();
      for (const auto& i : n.inputs) geo.operands.push_back(flat(g, i, Direction::kInOut, false, WindowRule::kIdentity));
      break;
    default:
      throw CompileError(kOrigin, "node '" + n.id + "' (" + std::string(op_name(n.kind)) +
                                      ") has no tiled lowering; run the decomposition passes first");
  }
  return geo;
}

}  // namespace edgetrain
