// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgetrain/executor.hpp"

#include <algorithm>
#include <string>

#include "edgetrain/error.hpp"

namespace edgetrain {
namespace {

template <class T>
struct Ctx {
  const Graph& g;
  const NodeGeometry& geo;
  const TileArgs<T>& args;
  const Node& node;

  TimeWindow<T> win(std::size_t i) const {
    const Binding<T>& b = args.operands.at(i);
    const Operand& op = geo.operands[i];
    return {b.data, op.rows, b.lo, b.hi - b.lo, op.length};
  }
  std::span<T> flat(std::size_t i) const {
    const Binding<T>& b = args.operands.at(i);
    return {b.data, static_cast<std::size_t>(geo.operands[i].rows * (b.hi - b.lo))};
  }
  std::span<const T> cflat(std::size_t i) const { return flat(i); }
  bool has_output(std::size_t out) const { return node.outputs.size() > out && !node.outputs[out].empty(); }
};

template <class T>
std::span<T> optional_flat(const Ctx<T>& c, bool present, std::size_t& next) {
  if (!present) return {};
  return c.flat(next++);
}

}  // namespace

template <class T>
kernels::Flops execute_tile(const Graph& g, const NodeGeometry& geo, const TileArgs<T>& args) {
  const Node& node = g.nodes[geo.node];
  const Ctx<T> c{g, geo, args, node};
  const bool first_tile = args.tile == 0;
  const bool last_tile = args.tile == args.num_tiles - 1;

  switch (node.kind) {
    case OpKind::kConv1D: {
      const bool bias = geo.operands.size() == 4;
      return kernels::conv1d_forward<T>(geo.conv, c.win(0), c.cflat(1), bias ? c.cflat(2) : std::span<const T>{},
                                        c.win(geo.operands.size() - 1));
    }
    case OpKind::kConvGradX:
      return kernels::conv1d_grad_x<T>(geo.conv, c.win(0), c.cflat(1), c.win(2));
    case OpKind::kConvGradW: {
      std::size_t next = 2;
      std::span<T> dw = optional_flat(c, c.has_output(0), next);
      std::span<T> db = optional_flat(c, c.has_output(1), next);
      // Partial sums live in the double scratch for the whole tile loop and
      // are rounded into the gradient buffers once, after the last tile.
      const auto wn = static_cast<std::size_t>(geo.conv.cout * geo.conv.cin_per_group() * geo.conv.kernel);
      const std::span<double> acc_w = args.sums.subspan(0, wn);
      const std::span<double> acc_b = db.empty() ? std::span<double>{} : args.sums.subspan(wn, db.size());
      if (first_tile) {
        for (std::size_t i = 0; i < wn; ++i) acc_w[i] = dw.empty() ? 0.0 : static_cast<double>(dw[i]);
        std::copy(db.begin(), db.end(), acc_b.begin());
      }
      const kernels::Flops f = kernels::conv1d_grad_w_tile<T>(geo.conv, c.win(0), c.win(1), acc_w, acc_b, args.im2col);
      if (last_tile) {
        std::transform(acc_w.begin(), acc_w.begin() + static_cast<std::ptrdiff_t>(dw.size()), dw.begin(),
                       [](double v) { return static_cast<T>(v); });
        std::transform(acc_b.begin(), acc_b.end(), db.begin(), [](double v) { return static_cast<T>(v); });
      }
      return f;
    }
    case OpKind::kLinear: {
      const auto& w = g.tensor(node.inputs[1]).dims;
      const std::int64_t n = g.tensor(node.inputs[0]).dims[0];
      const bool bias = geo.operands.size() == 4;
      return kernels::linear_forward<T>(n, w[1], w[0], c.cflat(0), c.cflat(1),
                                        bias ? c.cflat(2) : std::span<const T>{}, c.flat(geo.operands.size() - 1));
    }
    case OpKind::kLinearGradX: {
      const auto& w = g.tensor(node.inputs[1]).dims;
      const std::int64_t n = g.tensor(node.inputs[0]).dims[0];
      return kernels::linear_grad_x<T>(n, w[1], w[0], c.cflat(0), c.cflat(1), c.flat(2));
    }
    case OpKind::kLinearGradW: {
      const std::int64_t n = g.tensor(node.inputs[0]).dims[0];
      const std::int64_t in = g.tensor(node.inputs[0]).numel() / n;
      const std::int64_t out = g.tensor(node.inputs[1]).numel() / n;
      std::size_t next = 2;
      std::span<T> dw = optional_flat(c, c.has_output(0), next);
      std::span<T> db = optional_flat(c, c.has_output(1), next);
      std::vector<T> discard;
      if (dw.empty()) {
        discard.assign(static_cast<std::size_t>(in * out), T(0));
        dw = discard;
      }
      return kernels::linear_grad_w<T>(n, in, out, c.cflat(0), c.cflat(1), dw, db);
    }
    case OpKind::kLossGrad:
    case OpKind::kSoftmaxCrossEntropy: {
      const auto& logits = g.tensor(node.inputs[0]).dims;
      T loss{};
      const bool grad = node.kind == OpKind::kLossGrad && c.has_output(1);
      const kernels::Flops f = kernels::softmax_xent<T>(logits[0], logits[1], c.cflat(0), c.cflat(1), loss,
                                                        grad ? c.flat(3) : std::span<T>{});
      c.flat(2)[0] = loss;
      return f;
    }
    case OpKind::kGroupNormStats:
    case OpKind::kBatchNormStats: {
      if (first_tile) std::fill(args.welford.begin(), args.welford.end(), WelfordState{});
      kernels::Flops f = kernels::norm_stats_tile<T>(geo.norm, c.win(0), args.welford);
      if (last_tile) kernels::norm_finalize<T>(args.welford, c.flat(1), c.flat(2));
      return f;
    }
    case OpKind::kGroupNormNormalize:
    case OpKind::kBatchNormNormalize:
      return kernels::norm_normalize<T>(geo.norm, c.win(0), c.cflat(1), c.cflat(2), c.cflat(3), c.cflat(4), c.win(5));
    case OpKind::kGroupNormGrad:
    case OpKind::kBatchNormGrad: {
      std::size_t next = 5;
      const bool has_dx = c.has_output(0);
      const std::size_t dx = has_dx ? next++ : 0;
      std::span<T> dgamma = optional_flat(c, c.has_output(1), next);
      std::span<T> dbeta = optional_flat(c, c.has_output(2), next);
      if (args.pass == 0) {
        // sums: two per statistic, then the dgamma and dbeta accumulators
        const auto m = static_cast<std::size_t>(2 * geo.norm.stat_count());
        const auto ch = static_cast<std::size_t>(geo.norm.c);
        const std::span<double> acc_g = dgamma.empty() ? std::span<double>{} : args.sums.subspan(m, ch);
        const std::span<double> acc_b = dbeta.empty() ? std::span<double>{} : args.sums.subspan(m + ch, ch);
        if (first_tile) {
          std::fill(args.sums.begin(), args.sums.begin() + static_cast<std::ptrdiff_t>(m), 0.0);
          std::copy(dgamma.begin(), dgamma.end(), acc_g.begin());
          std::copy(dbeta.begin(), dbeta.end(), acc_b.begin());
        }
        const kernels::Flops f = kernels::norm_grad_reduce<T>(geo.norm, c.win(1), c.win(0), c.cflat(2), c.cflat(3),
                                                              c.cflat(4), args.sums.subspan(0, m), acc_g, acc_b);
        if (last_tile) {
          std::transform(acc_g.begin(), acc_g.end(), dgamma.begin(), [](double v) { return static_cast<T>(v); });
          std::transform(acc_b.begin(), acc_b.end(), dbeta.begin(), [](double v) { return static_cast<T>(v); });
        }
        return f;
      }
      return kernels::norm_grad_apply<T>(geo.norm, c.win(1), c.win(0), c.cflat(2), c.cflat(3), c.cflat(4),
                                         args.sums, c.win(dx));
    }
    case OpKind::kReLU:
      return kernels::relu_forward<T>(c.cflat(0), c.flat(1));
    case OpKind::kReLUGrad:
      return kernels::relu_grad<T>(c.cflat(0), c.cflat(1), c.flat(2));
    case OpKind::kAvgPool1D:
    case OpKind::kMaxPool1D: {
      const TimeWindow<T> argmax = geo.operands.size() > 2 ? c.win(2) : TimeWindow<T>{};
      return kernels::pool_forward<T>(geo.pool, c.win(0), c.win(1), argmax);
    }
    case OpKind::kPoolGrad: {
      const bool idx = geo.operands.size() > 2;
      const TimeWindow<T> argmax = idx ? c.win(1) : TimeWindow<T>{};
      return kernels::pool_grad<T>(geo.pool, c.win(0), argmax, c.win(idx ? 2 : 1));
    }
    case OpKind::kGradAccumulate:
      return kernels::grad_accumulate<T>(c.flat(0), c.flat(1));
    case OpKind::kSGDMomentumUpdate:
      return kernels::sgd_apply_accumulated<T>(c.flat(0), c.flat(1), c.flat(2), static_cast<T>(args.lr),
                                               static_cast<T>(node.attrs.momentum),
                                               static_cast<T>(node.attrs.weight_decay),
                                               static_cast<T>(node.attrs.scale));
    default:
      break;
  }
  throw CompileError("execsim", "node '" + node.id + "' (" + std::string(op_name(node.kind)) + ") is not executable");
}

template kernels::Flops execute_tile<float>(const Graph&, const NodeGeometry&, const TileArgs<float>&);
template kernels::Flops execute_tile<double>(const Graph&, const NodeGeometry&, const TileArgs<double>&);

}  // namespace edgetrain
