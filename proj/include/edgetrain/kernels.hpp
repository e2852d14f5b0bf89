// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

#include "edgetrain/tensor_view.hpp"
#include "edgetrain/welford.hpp"

// Numerical kernels. Every kernel that works along time takes TimeWindow
// operands, so the same code runs on a full tensor (reference interpreter)
// and on a halo-extended tile resident in scratchpad (simulator). Each kernel
// returns the number of floating-point operations it performed under the
// counting rules of flops.hpp.
//
// Instantiated for float (product path) and double (oracle mode). Reductions
// accumulate in double for both. A window that lacks the halo its outputs
// need raises NumericalError.

namespace edgetrain::kernels {

using Flops = std::uint64_t;

struct ConvShape {
  std::int64_t n = 1, cin = 1, cout = 1, t_in = 1, t_out = 1;
  std::int64_t kernel = 1, stride = 1, padding = 0, groups = 1;

  std::int64_t cin_per_group() const { return cin / groups; }
  std::int64_t cout_per_group() const { return cout / groups; }
  /// Input range [lo, hi) read by outputs [a, b), clamped to the sequence.
  std::int64_t in_lo(std::int64_t a) const;
  std::int64_t in_hi(std::int64_t b) const;
  /// Output range [lo, hi) that reads any input in [a, b).
  std::int64_t out_lo(std::int64_t a) const;
  std::int64_t out_hi(std::int64_t b) const;
};

// --- convolution -----------------------------------------------------------

/// y[n,co,t] = b[co] + sum_{ci,k} w[co,ci,k] * x[n, g*Cin/G + ci, t*S - P + k],
/// for every t in y's window. `bias` may be empty.
template <class T>
Flops conv1d_forward(const ConvShape& s, TimeWindow<const T> x, std::span<const T> w, std::span<const T> bias,
                     TimeWindow<T> y);

/// Gradient w.r.t. the input for every t in dx's window. dy must cover
/// [out_lo(a), out_hi(b)).
template <class T>
Flops conv1d_grad_x(const ConvShape& s, TimeWindow<const T> dy, std::span<const T> w, TimeWindow<T> dx);

/// Rows t of dy's window, columns (ci, k) of group `group` for sample `n`;
/// zero where the receptive field leaves the sequence. `col` holds
/// dy.length * Cin/G * K values.
template <class T>
void im2col(const ConvShape& s, TimeWindow<const T> x, std::int64_t n, std::int64_t group, std::int64_t out_begin,
            std::int64_t out_len, std::span<T> col);

/// dw += im2col(x)^T . dy over dy's window; db += sum_t dy. `db` may be empty.
/// The accumulators are double so that the result does not depend on how
/// the time axis was split. `scratch` holds at least dy.length * Cin/G * K
/// values.
template <class T>
Flops conv1d_grad_w_tile(const ConvShape& s, TimeWindow<const T> x, TimeWindow<const T> dy, std::span<double> dw,
                         std::span<double> db, std::span<T> scratch);

// --- normalization -----------------------------------------------------------

/// Layout of group (per sample) or batch (per channel) normalization.
struct NormShape {
  std::int64_t n = 1, c = 1, t = 1;
  /// Statistic groups per sample for GroupNorm; ignored for BatchNorm.
  std::int64_t groups = 1;
  bool per_sample = true;
  double epsilon = 1e-5;

  std::int64_t stat_count() const { return per_sample ? n * groups : c; }
  std::int64_t stat_index(std::int64_t nn, std::int64_t cc) const {
    return per_sample ? nn * groups + cc / (c / groups) : cc;
  }
  /// Elements reduced into one statistic over the full sequence.
  std::int64_t extent() const { return per_sample ? (c / groups) * t : n * t; }
};

/// Merges the window's contribution into `states` (one per statistic).
template <class T>
Flops norm_stats_tile(const NormShape& s, TimeWindow<const T> x, std::span<WelfordState> states);

template <class T>
void norm_finalize(std::span<const WelfordState> states, std::span<T> mean, std::span<T> var);

/// y = gamma * (x - mean) / sqrt(var + eps) + beta
template <class T>
Flops norm_normalize(const NormShape& s, TimeWindow<const T> x, std::span<const T> mean, std::span<const T> var,
                     std::span<const T> gamma, std::span<const T> beta, TimeWindow<T> y);

/// First backward pass over a tile: sums[2s] += sum dxhat, sums[2s+1] +=
/// sum dxhat * xhat (dxhat = dy * gamma); dgamma += sum dy * xhat;
/// dbeta += sum dy. dgamma / dbeta are double accumulators and may be empty.
template <class T>
Flops norm_grad_reduce(const NormShape& s, TimeWindow<const T> x, TimeWindow<const T> dy, std::span<const T> mean,
                       std::span<const T> var, std::span<const T> gamma, std::span<double> sums, std::span<double> dgamma,
                       std::span<double> dbeta);

/// Second pass: dx = (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)) / sigma.
template <class T>
Flops norm_grad_apply(const NormShape& s, TimeWindow<const T> x, TimeWindow<const T> dy, std::span<const T> mean,
                      std::span<const T> var, std::span<const T> gamma, std::span<const double> sums,
                      TimeWindow<T> dx);

// --- pointwise, pooling, linear --------------------------------------------------

template <class T>
Flops relu_forward(std::span<const T> x, std::span<T> y);

/// dx = x > 0 ? dy : 0 (gradient 0 at x == 0).
template <class T>
Flops relu_grad(std::span<const T> x, std::span<const T> dy, std::span<T> dx);

struct PoolShape {
  std::int64_t n = 1, c = 1, t_in = 1, t_out = 1, kernel = 1, stride = 1;
  bool max = false;
  std::int64_t in_lo(std::int64_t a) const { return a * stride; }
  std::int64_t in_hi(std::int64_t b) const { return b <= 0 ? 0 : (b - 1) * stride + kernel; }
  std::int64_t out_lo(std::int64_t a) const;
  std::int64_t out_hi(std::int64_t b) const;
};

/// Average or max over each window. For max pooling `argmax` receives the
/// absolute input index of the first maximum.
template <class T>
Flops pool_forward(const PoolShape& s, TimeWindow<const T> x, TimeWindow<T> y, TimeWindow<T> argmax);

/// Average pooling spreads dy / K over the window; max pooling routes dy to
/// the stored argmax. `argmax` is ignored for average pooling.
template <class T>
Flops pool_grad(const PoolShape& s, TimeWindow<const T> dy, TimeWindow<const T> argmax, TimeWindow<T> dx);

/// y[n, o] = b[o] + sum_i w[o, i] x[n, i]. `bias` may be empty.
template <class T>
Flops linear_forward(std::int64_t n, std::int64_t in, std::int64_t out, std::span<const T> x, std::span<const T> w,
                     std::span<const T> bias, std::span<T> y);

template <class T>
Flops linear_grad_x(std::int64_t n, std::int64_t in, std::int64_t out, std::span<const T> dy, std::span<const T> w,
                    std::span<T> dx);

/// dw += dy^T x; db += sum_n dy.
template <class T>
Flops linear_grad_w(std::int64_t n, std::int64_t in, std::int64_t out, std::span<const T> x, std::span<const T> dy,
                    std::span<T> dw, std::span<T> db);

// --- loss and optimizer ----------------------------------------------------------

/// Mean over the batch of -log softmax(logits)[label]. When `dlogits` is
/// non-empty it receives (softmax - onehot) / N. Labels hold class indices.
template <class T>
Flops softmax_xent(std::int64_t n, std::int64_t classes, std::span<const T> logits, std::span<const T> labels,
                   T& loss, std::span<T> dlogits);

/// acc += g; g = 0.
template <class T>
Flops grad_accumulate(std::span<T> g, std::span<T> acc);

/// g' = g + wd * w;  v = mu * v + g';  w = w - lr * v. `g` is already scaled.
template <class T>
Flops sgd_momentum_step(std::span<T> w, std::span<const T> g, std::span<T> v, T lr, T momentum, T weight_decay);

/// Update applied by SGDMomentumUpdate: scales the accumulator, steps, and
/// clears the accumulator.
template <class T>
Flops sgd_apply_accumulated(std::span<T> w, std::span<T> acc, std::span<T> v, T lr, T momentum, T weight_decay,
                            T scale);

/// lr_min + (lr_max - lr_min) * (1 + cos(pi * t / total)) / 2
double cosine_lr(double t, double total, double lr_max, double lr_min = 0.0);

}  // namespace edgetrain::kernels
