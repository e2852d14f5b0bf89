// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgetrain/flops.hpp"

#include <string>

#include "edgetrain/error.hpp"

namespace edgetrain {
namespace {

std::uint64_t u(std::int64_t v) { return static_cast<std::uint64_t>(v); }

const std::vector<std::int64_t>& d(const Graph& g, const std::string& name) { return g.tensor(name).dims; }

bool present(const Node& n, std::size_t out) { return n.outputs.size() > out && !n.outputs[out].empty(); }

}  // namespace

std::uint64_t node_flops(const Graph& g, const Node& n) {
  switch (n.kind) {
    case OpKind::kConv1D: {
      const auto& y = d(g, n.outputs[0]);
      const auto& w = d(g, n.inputs[1]);
      const std::uint64_t outs = u(y[0] * y[1] * y[2]);
      return 2 * outs * u(w[1] * w[2]) + (n.inputs.size() > 2 && !n.inputs[2].empty() ? outs : 0);
    }
    case OpKind::kConvGradX: {
      const auto& dx = d(g, n.outputs[0]);
      const auto& w = d(g, n.inputs[1]);
      const std::int64_t cout_g = w[0] / n.attrs.groups;
      return 2 * u(dx[0] * dx[1] * dx[2]) * u(cout_g * w[2]);
    }
    case OpKind::kConvGradW: {
      const auto& dy = d(g, n.inputs[1]);
      const auto& x = d(g, n.inputs[0]);
      const std::uint64_t outs = u(dy[0] * dy[1] * dy[2]);
      const std::int64_t cin_g = x[1] / n.attrs.groups;
      // The weight product is computed even when only the bias is trained.
      std::uint64_t f = 2 * outs * u(cin_g * n.attrs.kernel);
      if (present(n, 1)) f += outs;
      return f;
    }
    case OpKind::kConvGrad: {
      const auto& x = d(g, n.inputs[0]);
      const auto& w = d(g, n.inputs[1]);
      const auto& dy = d(g, n.inputs[2]);
      const std::uint64_t outs = u(dy[0] * dy[1] * dy[2]);
      std::uint64_t f = 0;
      if (present(n, 0)) f += 2 * u(x[0] * x[1] * x[2]) * u(w[0] / n.attrs.groups * w[2]);
      if (present(n, 1)) f += 2 * outs * u(w[1] * w[2]);
      if (present(n, 2)) f += outs;
      return f;
    }
    case OpKind::kLinear: {
      const auto& w = d(g, n.inputs[1]);
      const std::int64_t batch = d(g, n.inputs[0])[0];
      return 2 * u(batch * w[0] * w[1]) + (n.inputs.size() > 2 && !n.inputs[2].empty() ? u(batch * w[0]) : 0);
    }
    case OpKind::kLinearGradX: {
      const auto& w = d(g, n.inputs[1]);
      return 2 * u(d(g, n.inputs[0])[0] * w[0] * w[1]);
    }
    case OpKind::kLinearGradW: {
      const std::int64_t batch = d(g, n.inputs[0])[0];
      const std::int64_t in = g.tensor(n.inputs[0]).numel() / batch;
      const std::int64_t out = g.tensor(n.inputs[1]).numel() / batch;
      std::uint64_t f = 2 * u(batch * in * out);
      if (present(n, 1)) f += u(batch * out);
      return f;
    }
    case OpKind::kLinearGrad: {
      const auto& w = d(g, n.inputs[1]);
      const std::int64_t batch = d(g, n.inputs[0])[0];
      std::uint64_t f = 0;
      if (present(n, 0)) f += 2 * u(batch * w[0] * w[1]);
      if (present(n, 1)) f += 2 * u(batch * w[0] * w[1]);
      if (present(n, 2)) f += u(batch * w[0]);
      return f;
    }
    case OpKind::kGroupNormStats:
    case OpKind::kBatchNormStats:
    case OpKind::kGroupNormNormalize:
    case OpKind::kBatchNormNormalize:
      return 4 * u(g.tensor(n.inputs[0]).numel());
    case OpKind::kGroupNorm:
    case OpKind::kBatchNorm:
      return 8 * u(g.tensor(n.inputs[0]).numel());
    case OpKind::kGroupNormGrad:
    case OpKind::kBatchNormGrad: {
      const std::uint64_t e = u(g.tensor(n.inputs[1]).numel());
      // The undecomposed form recomputes the statistics.
      std::uint64_t f = 6 * e + (present(n, 0) ? 4 * e : 0);
      if (n.inputs.size() == 3) f += 4 * e;
      return f;
    }
    case OpKind::kReLU:
    case OpKind::kReLUGrad:
      return u(g.tensor(n.outputs[0]).numel());
    case OpKind::kAvgPool1D:
    case OpKind::kMaxPool1D:
      return u(g.tensor(n.outputs[0]).numel() * n.attrs.kernel);
    case OpKind::kPoolGrad: {
      const std::uint64_t outs = u(g.tensor(n.inputs[0]).numel());
      return n.attrs.pool_mode == PoolMode::kMax ? outs : outs * u(n.attrs.kernel);
    }
    case OpKind::kSoftmaxCrossEntropy:
      return 4 * u(g.tensor(n.inputs[0]).numel());
    case OpKind::kLossGrad:
      return 5 * u(g.tensor(n.inputs[0]).numel());
    case OpKind::kGradAccumulate:
      return u(g.tensor(n.inputs[0]).numel());
    case OpKind::kSGDMomentumUpdate:
      return 7 * u(g.tensor(n.inputs[0]).numel());
  }
  throw CompileError("tiler", "no operation count for node '" + n.id + "'");
}

FlopCount graph_flops(const Graph& g) {
  FlopCount c;
  for (const Node& n : g.nodes) (n.kind == OpKind::kSGDMomentumUpdate ? c.update : c.streaming) += node_flops(g, n);
  return c;
}

}  // namespace edgetrain
