// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgetrain/kernels.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <type_traits>
#include <vector>

#include "edgetrain/error.hpp"
#include "edgetrain/simd.hpp"

namespace edgetrain::kernels {
namespace {

constexpr const char* kOrigin = "kernels";

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

std::int64_t clamp(std::int64_t v, std::int64_t lo, std::int64_t hi) { return v < lo ? lo : (v > hi ? hi : v); }

template <class W>
void require_cover(const W& w, std::int64_t lo, std::int64_t hi, const char* what) {
  if (!w.covers(lo, hi))
    throw NumericalError(kOrigin, std::string(what) + " window [" + std::to_string(w.begin) + "," +
                                      std::to_string(w.end()) + ") does not cover [" + std::to_string(lo) + "," +
                                      std::to_string(hi) + ")");
}

template <class T>
double d(T v) {
  return static_cast<double>(v);
}

}  // namespace

std::int64_t ConvShape::in_lo(std::int64_t a) const { return clamp(a * stride - padding, 0, t_in); }

std::int64_t ConvShape::in_hi(std::int64_t b) const {
  if (b <= 0) return 0;
  return clamp((b - 1) * stride - padding + kernel, 0, t_in);
}

std::int64_t ConvShape::out_lo(std::int64_t a) const {
  return clamp(ceil_div(a + padding - kernel + 1, stride), 0, t_out);
}

std::int64_t ConvShape::out_hi(std::int64_t b) const {
  if (b <= 0) return 0;
  return clamp(floor_div(b - 1 + padding, stride) + 1, 0, t_out);
}

std::int64_t PoolShape::out_lo(std::int64_t a) const { return clamp(ceil_div(a - kernel + 1, stride), 0, t_out); }

std::int64_t PoolShape::out_hi(std::int64_t b) const {
  if (b <= 0) return 0;
  return clamp(floor_div(b - 1, stride) + 1, 0, t_out);
}

// --- convolution -----------------------------------------------------------

template <class T>
Flops conv1d_forward(const ConvShape& s, TimeWindow<const T> x, std::span<const T> w, std::span<const T> bias,
                     TimeWindow<T> y) {
  if (y.length == 0) return 0;
  require_cover(x, s.in_lo(y.begin), s.in_hi(y.end()), "conv input");
  const std::int64_t cin_g = s.cin_per_group(), cout_g = s.cout_per_group();
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t co = 0; co < s.cout; ++co) {
      const std::int64_t c0 = (co / cout_g) * cin_g;
      const T* wr = w.data() + co * cin_g * s.kernel;
      for (std::int64_t t = y.begin; t < y.end(); ++t) {
        double acc = bias.empty() ? 0.0 : d(bias[co]);
        const std::int64_t base = t * s.stride - s.padding;
        for (std::int64_t ci = 0; ci < cin_g; ++ci) {
          const std::int64_t row = n * s.cin + c0 + ci;
          for (std::int64_t k = 0; k < s.kernel; ++k) {
            const std::int64_t src = base + k;
            if (src < 0 || src >= s.t_in) continue;
            acc += d(wr[ci * s.kernel + k]) * d(x.at(row, src));
          }
        }
        y.at(n * s.cout + co, t) = static_cast<T>(acc);
      }
    }
  }
  Flops f = 2ull * s.n * s.cout * y.length * cin_g * s.kernel;
  if (!bias.empty()) f += static_cast<Flops>(s.n * s.cout * y.length);
  return f;
}

template <class T>
Flops conv1d_grad_x(const ConvShape& s, TimeWindow<const T> dy, std::span<const T> w, TimeWindow<T> dx) {
  if (dx.length == 0) return 0;
  require_cover(dy, s.out_lo(dx.begin), s.out_hi(dx.end()), "conv dY");
  const std::int64_t cin_g = s.cin_per_group(), cout_g = s.cout_per_group();
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t ci = 0; ci < s.cin; ++ci) {
      const std::int64_t g = ci / cin_g, cl = ci % cin_g;
      for (std::int64_t t = dx.begin; t < dx.end(); ++t) {
        double acc = 0.0;
        for (std::int64_t co = g * cout_g; co < (g + 1) * cout_g; ++co) {
          const T* wr = w.data() + (co * cin_g + cl) * s.kernel;
          for (std::int64_t k = 0; k < s.kernel; ++k) {
            const std::int64_t num = t + s.padding - k;
            if (num < 0 || num % s.stride != 0) continue;
            const std::int64_t to = num / s.stride;
            if (to >= s.t_out) continue;
            acc += d(wr[k]) * d(dy.at(n * s.cout + co, to));
          }
        }
        dx.at(n * s.cin + ci, t) = static_cast<T>(acc);
      }
    }
  }
  return 2ull * s.n * s.cin * dx.length * cout_g * s.kernel;
}

template <class T>
void im2col(const ConvShape& s, TimeWindow<const T> x, std::int64_t n, std::int64_t group, std::int64_t out_begin,
            std::int64_t out_len, std::span<T> col) {
  const std::int64_t cin_g = s.cin_per_group();
  const std::int64_t width = cin_g * s.kernel;
  if (static_cast<std::int64_t>(col.size()) < out_len * width)
    throw NumericalError(kOrigin, "im2col buffer too small");
  require_cover(x, s.in_lo(out_begin), s.in_hi(out_begin + out_len), "im2col input");
  for (std::int64_t r = 0; r < out_len; ++r) {
    const std::int64_t base = (out_begin + r) * s.stride - s.padding;
    T* dst = col.data() + r * width;
    for (std::int64_t ci = 0; ci < cin_g; ++ci) {
      const std::int64_t row = n * s.cin + group * cin_g + ci;
      for (std::int64_t k = 0; k < s.kernel; ++k) {
        const std::int64_t src = base + k;
        dst[ci * s.kernel + k] = (src < 0 || src >= s.t_in) ? T(0) : x.at(row, src);
      }
    }
  }
}

template <class T>
Flops conv1d_grad_w_tile(const ConvShape& s, TimeWindow<const T> x, TimeWindow<const T> dy, std::span<double> dw,
                         std::span<double> db, std::span<T> scratch) {
  if (dy.length == 0) return 0;
  const std::int64_t cin_g = s.cin_per_group(), cout_g = s.cout_per_group();
  const std::int64_t width = cin_g * s.kernel;
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t g = 0; g < s.groups; ++g) {
      im2col<T>(s, x, n, g, dy.begin, dy.length, scratch);
      for (std::int64_t co = g * cout_g; co < (g + 1) * cout_g; ++co) {
        const T* dyr = dy.row(n * s.cout + co);
        double* dwr = dw.data() + co * width;
        for (std::int64_t j = 0; j < width; ++j) {
          double acc = 0.0;
          for (std::int64_t t = 0; t < dy.length; ++t) acc += d(scratch[t * width + j]) * d(dyr[t]);
          dwr[j] += acc;
        }
        if (!db.empty()) {
          double acc = 0.0;
          for (std::int64_t t = 0; t < dy.length; ++t) acc += d(dyr[t]);
          db[co] += acc;
        }
      }
    }
  }
  Flops f = 2ull * s.n * s.cout * dy.length * cin_g * s.kernel;
  if (!db.empty()) f += static_cast<Flops>(s.n * s.cout * dy.length);
  return f;
}

// --- normalization -----------------------------------------------------------

template <class T>
Flops norm_stats_tile(const NormShape& s, TimeWindow<const T> x, std::span<WelfordState> states) {
  if (x.length == 0) return 0;
  const std::int64_t m = s.stat_count();
  std::vector<double> sum(m, 0.0), m2(m, 0.0);
  std::vector<std::int64_t> count(m, 0);
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t c = 0; c < s.c; ++c) {
      const std::int64_t k = s.stat_index(n, c);
      const T* r = x.row(n * s.c + c);
      for (std::int64_t t = 0; t < x.length; ++t) sum[k] += d(r[t]);
      count[k] += x.length;
    }
  std::vector<double> mean(m);
  for (std::int64_t k = 0; k < m; ++k) mean[k] = sum[k] / static_cast<double>(count[k]);
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t c = 0; c < s.c; ++c) {
      const std::int64_t k = s.stat_index(n, c);
      const T* r = x.row(n * s.c + c);
      for (std::int64_t t = 0; t < x.length; ++t) {
        const double dv = d(r[t]) - mean[k];
        m2[k] += dv * dv;
      }
    }
  for (std::int64_t k = 0; k < m; ++k) states[k] = welford_merge(states[k], {count[k], mean[k], m2[k]});
  return 4ull * static_cast<Flops>(x.size());
}

template <class T>
void norm_finalize(std::span<const WelfordState> states, std::span<T> mean, std::span<T> var) {
  for (std::size_t k = 0; k < states.size(); ++k) {
    mean[k] = static_cast<T>(states[k].mean);
    var[k] = static_cast<T>(states[k].variance());
  }
}

template <class T>
Flops norm_normalize(const NormShape& s, TimeWindow<const T> x, std::span<const T> mean, std::span<const T> var,
                     std::span<const T> gamma, std::span<const T> beta, TimeWindow<T> y) {
  require_cover(x, y.begin, y.end(), "normalize input");
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t c = 0; c < s.c; ++c) {
      const std::int64_t k = s.stat_index(n, c);
      const double mu = d(mean[k]);
      const double inv = 1.0 / std::sqrt(d(var[k]) + s.epsilon);
      const double ga = d(gamma[c]), be = d(beta[c]);
      const std::int64_t row = n * s.c + c;
      for (std::int64_t t = y.begin; t < y.end(); ++t)
        y.at(row, t) = static_cast<T>(ga * ((d(x.at(row, t)) - mu) * inv) + be);
    }
  return 4ull * static_cast<Flops>(y.size());
}

template <class T>
Flops norm_grad_reduce(const NormShape& s, TimeWindow<const T> x, TimeWindow<const T> dy, std::span<const T> mean,
                       std::span<const T> var, std::span<const T> gamma, std::span<double> sums,
                       std::span<double> dgamma, std::span<double> dbeta) {
  require_cover(x, dy.begin, dy.end(), "norm-grad input");
  std::vector<double> dg(s.c, 0.0), dbt(s.c, 0.0);
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t c = 0; c < s.c; ++c) {
      const std::int64_t k = s.stat_index(n, c);
      const double mu = d(mean[k]);
      const double inv = 1.0 / std::sqrt(d(var[k]) + s.epsilon);
      const double ga = d(gamma[c]);
      const std::int64_t row = n * s.c + c;
      double s0 = 0.0, s1 = 0.0, a = 0.0, b = 0.0;
      for (std::int64_t t = dy.begin; t < dy.end(); ++t) {
        const double xh = (d(x.at(row, t)) - mu) * inv;
        const double g = d(dy.at(row, t));
        s0 += g * ga;
        s1 += g * ga * xh;
        a += g * xh;
        b += g;
      }
      sums[2 * k] += s0;
      sums[2 * k + 1] += s1;
      dg[c] += a;
      dbt[c] += b;
    }
  for (std::int64_t c = 0; c < s.c; ++c) {
    if (!dgamma.empty()) dgamma[c] += dg[c];
    if (!dbeta.empty()) dbeta[c] += dbt[c];
  }
  return 6ull * static_cast<Flops>(dy.size());
}

template <class T>
Flops norm_grad_apply(const NormShape& s, TimeWindow<const T> x, TimeWindow<const T> dy, std::span<const T> mean,
                      std::span<const T> var, std::span<const T> gamma, std::span<const double> sums,
                      TimeWindow<T> dx) {
  require_cover(x, dx.begin, dx.end(), "norm-grad input");
  require_cover(dy, dx.begin, dx.end(), "norm-grad dY");
  const double m = static_cast<double>(s.extent());
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t c = 0; c < s.c; ++c) {
      const std::int64_t k = s.stat_index(n, c);
      const double mu = d(mean[k]);
      const double inv = 1.0 / std::sqrt(d(var[k]) + s.epsilon);
      const double ga = d(gamma[c]);
      const double m0 = sums[2 * k] / m, m1 = sums[2 * k + 1] / m;
      const std::int64_t row = n * s.c + c;
      for (std::int64_t t = dx.begin; t < dx.end(); ++t) {
        const double xh = (d(x.at(row, t)) - mu) * inv;
        dx.at(row, t) = static_cast<T>(inv * (d(dy.at(row, t)) * ga - m0 - xh * m1));
      }
    }
  return 4ull * static_cast<Flops>(dx.size());
}

// --- pointwise, pooling, linear --------------------------------------------------

template <class T>
Flops relu_forward(std::span<const T> x, std::span<T> y) {
  if constexpr (std::is_same_v<T, float>) {
    simd::relu_forward(x, y);
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  }
  return x.size();
}

template <class T>
Flops relu_grad(std::span<const T> x, std::span<const T> dy, std::span<T> dx) {
  if constexpr (std::is_same_v<T, float>) {
    simd::relu_grad(x, dy, dx);
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
  }
  return x.size();
}

template <class T>
Flops pool_forward(const PoolShape& s, TimeWindow<const T> x, TimeWindow<T> y, TimeWindow<T> argmax) {
  if (y.length == 0) return 0;
  require_cover(x, s.in_lo(y.begin), s.in_hi(y.end()), "pool input");
  const std::int64_t rows = s.n * s.c;
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t t = y.begin; t < y.end(); ++t) {
      const std::int64_t base = t * s.stride;
      if (s.max) {
        std::int64_t best = base;
        T v = x.at(r, base);
        for (std::int64_t k = 1; k < s.kernel; ++k)
          if (x.at(r, base + k) > v) {
            v = x.at(r, base + k);
            best = base + k;
          }
        y.at(r, t) = v;
        if (argmax.data) argmax.at(r, t) = static_cast<T>(best);
      } else {
        double acc = 0.0;
        for (std::int64_t k = 0; k < s.kernel; ++k) acc += d(x.at(r, base + k));
        y.at(r, t) = static_cast<T>(acc / static_cast<double>(s.kernel));
      }
    }
  return static_cast<Flops>(rows * y.length * s.kernel);
}

template <class T>
Flops pool_grad(const PoolShape& s, TimeWindow<const T> dy, TimeWindow<const T> argmax, TimeWindow<T> dx) {
  if (dx.length == 0) return 0;
  const std::int64_t lo = s.out_lo(dx.begin), hi = s.out_hi(dx.end());
  require_cover(dy, lo, hi, "pool dY");
  if (s.max) require_cover(argmax, lo, hi, "pool argmax");
  const std::int64_t rows = s.n * s.c;
  Flops f = 0;
  const double inv_k = 1.0 / static_cast<double>(s.kernel);
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t t = dx.begin; t < dx.end(); ++t) {
      double acc = 0.0;
      const std::int64_t o_lo = s.out_lo(t), o_hi = s.out_hi(t + 1);
      for (std::int64_t o = o_lo; o < o_hi; ++o) {
        if (s.max) {
          if (static_cast<std::int64_t>(argmax.at(r, o)) != t) continue;
          acc += d(dy.at(r, o));
        } else {
          acc += d(dy.at(r, o)) * inv_k;
        }
        ++f;
      }
      dx.at(r, t) = static_cast<T>(acc);
    }
  return f;
}

template <class T>
Flops linear_forward(std::int64_t n, std::int64_t in, std::int64_t out, std::span<const T> x, std::span<const T> w,
                     std::span<const T> bias, std::span<T> y) {
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t o = 0; o < out; ++o) {
      double acc = bias.empty() ? 0.0 : d(bias[o]);
      for (std::int64_t i = 0; i < in; ++i) acc += d(w[o * in + i]) * d(x[b * in + i]);
      y[b * out + o] = static_cast<T>(acc);
    }
  Flops f = 2ull * n * out * in;
  if (!bias.empty()) f += static_cast<Flops>(n * out);
  return f;
}

template <class T>
Flops linear_grad_x(std::int64_t n, std::int64_t in, std::int64_t out, std::span<const T> dy, std::span<const T> w,
                    std::span<T> dx) {
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t i = 0; i < in; ++i) {
      double acc = 0.0;
      for (std::int64_t o = 0; o < out; ++o) acc += d(w[o * in + i]) * d(dy[b * out + o]);
      dx[b * in + i] = static_cast<T>(acc);
    }
  return 2ull * n * out * in;
}

template <class T>
Flops linear_grad_w(std::int64_t n, std::int64_t in, std::int64_t out, std::span<const T> x, std::span<const T> dy,
                    std::span<T> dw, std::span<T> db) {
  for (std::int64_t o = 0; o < out; ++o) {
    for (std::int64_t i = 0; i < in; ++i) {
      double acc = 0.0;
      for (std::int64_t b = 0; b < n; ++b) acc += d(dy[b * out + o]) * d(x[b * in + i]);
      dw[o * in + i] = static_cast<T>(d(dw[o * in + i]) + acc);
    }
    if (!db.empty()) {
      double acc = 0.0;
      for (std::int64_t b = 0; b < n; ++b) acc += d(dy[b * out + o]);
      db[o] = static_cast<T>(d(db[o]) + acc);
    }
  }
  Flops f = 2ull * n * out * in;
  if (!db.empty()) f += static_cast<Flops>(n * out);
  return f;
}

// --- loss and optimizer ----------------------------------------------------------

template <class T>
Flops softmax_xent(std::int64_t n, std::int64_t classes, std::span<const T> logits, std::span<const T> labels,
                   T& loss, std::span<T> dlogits) {
  double total = 0.0;
  std::vector<double> p(classes);
  for (std::int64_t b = 0; b < n; ++b) {
    const double lv = d(labels[b]);
    const auto label = static_cast<std::int64_t>(lv);
    if (lv != static_cast<double>(label) || label < 0 || label >= classes)
      throw FormatError(kOrigin, "label " + std::to_string(lv) + " of sample " + std::to_string(b) +
                                     " is not a class index below " + std::to_string(classes));
    const T* z = logits.data() + b * classes;
    double mx = d(z[0]);
    for (std::int64_t c = 1; c < classes; ++c) mx = std::max(mx, d(z[c]));
    double sum = 0.0;
    for (std::int64_t c = 0; c < classes; ++c) {
      p[c] = std::exp(d(z[c]) - mx);
      sum += p[c];
    }
    total += std::log(sum) + mx - d(z[label]);
    if (!dlogits.empty()) {
      for (std::int64_t c = 0; c < classes; ++c) {
        const double onehot = c == label ? 1.0 : 0.0;
        dlogits[b * classes + c] = static_cast<T>((p[c] / sum - onehot) / static_cast<double>(n));
      }
    }
  }
  loss = static_cast<T>(total / static_cast<double>(n));
  return static_cast<Flops>((dlogits.empty() ? 4 : 5) * n * classes);
}

template <class T>
Flops grad_accumulate(std::span<T> g, std::span<T> acc) {
  if constexpr (std::is_same_v<T, float>) {
    simd::accumulate(acc, g);
  } else {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
  }
  for (auto& v : g) v = T(0);
  return acc.size();
}

template <class T>
Flops sgd_momentum_step(std::span<T> w, std::span<const T> g, std::span<T> v, T lr, T momentum, T weight_decay) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    const T gi = g[i] + weight_decay * w[i];
    v[i] = momentum * v[i] + gi;
    w[i] = w[i] - lr * v[i];
  }
  return 6ull * w.size();
}

template <class T>
Flops sgd_apply_accumulated(std::span<T> w, std::span<T> acc, std::span<T> v, T lr, T momentum, T weight_decay,
                            T scale) {
  if constexpr (std::is_same_v<T, float>) {
    simd::sgd_momentum_step(w, acc, v, {lr, momentum, weight_decay, scale});
  } else {
    for (std::size_t i = 0; i < w.size(); ++i) {
      T gi = acc[i] * scale;
      gi = gi + weight_decay * w[i];
      v[i] = momentum * v[i] + gi;
      w[i] = w[i] - lr * v[i];
    }
  }
  for (auto& a : acc) a = T(0);
  return 7ull * w.size();
}

double cosine_lr(double t, double total, double lr_max, double lr_min) {
  if (total <= 0.0) return lr_max;
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * t / total));
}

#define EDGETRAIN_INSTANTIATE(T)                                                                                   \
  template Flops conv1d_forward<T>(const ConvShape&, TimeWindow<const T>, std::span<const T>, std::span<const T>,  \
                                   TimeWindow<T>);                                                                 \
  template Flops conv1d_grad_x<T>(const ConvShape&, TimeWindow<const T>, std::span<const T>, TimeWindow<T>);       \
  template void im2col<T>(const ConvShape&, TimeWindow<const T>, std::int64_t, std::int64_t, std::int64_t,         \
                          std::int64_t, std::span<T>);                                                             \
  template Flops conv1d_grad_w_tile<T>(const ConvShape&, TimeWindow<const T>, TimeWindow<const T>,                \
                                       std::span<double>, std::span<double>, std::span<T>);                        \
  template Flops norm_stats_tile<T>(const NormShape&, TimeWindow<const T>, std::span<WelfordState>);               \
  template void norm_finalize<T>(std::span<const WelfordState>, std::span<T>, std::span<T>);                       \
  template Flops norm_normalize<T>(const NormShape&, TimeWindow<const T>, std::span<const T>, std::span<const T>,  \
                                   std::span<const T>, std::span<const T>, TimeWindow<T>);                         \
  template Flops norm_grad_reduce<T>(const NormShape&, TimeWindow<const T>, TimeWindow<const T>,                   \
                                     std::span<const T>, std::span<const T>, std::span<const T>, std::span<double>, \
                                     std::span<double>, std::span<double>);                                        \
  template Flops norm_grad_apply<T>(const NormShape&, TimeWindow<const T>, TimeWindow<const T>, std::span<const T>, \
                                    std::span<const T>, std::span<const T>, std::span<const double>,               \
                                    TimeWindow<T>);                                                                \
  template Flops relu_forward<T>(std::span<const T>, std::span<T>);                                                \
  template Flops relu_grad<T>(std::span<const T>, std::span<const T>, std::span<T>);                               \
  template Flops pool_forward<T>(const PoolShape&, TimeWindow<const T>, TimeWindow<T>, TimeWindow<T>);             \
  template Flops pool_grad<T>(const PoolShape&, TimeWindow<const T>, TimeWindow<const T>, TimeWindow<T>);          \
  template Flops linear_forward<T>(std::int64_t, std::int64_t, std::int64_t, std::span<const T>,                   \
                                   std::span<const T>, std::span<const T>, std::span<T>);                          \
  template Flops linear_grad_x<T>(std::int64_t, std::int64_t, std::int64_t, std::span<const T>, std::span<const T>, \
                                  std::span<T>);                                                                   \
  template Flops linear_grad_w<T>(std::int64_t, std::int64_t, std::int64_t, std::span<const T>, std::span<const T>, \
                                  std::span<T>, std::span<T>);                                                     \
  template Flops softmax_xent<T>(std::int64_t, std::int64_t, std::span<const T>, std::span<const T>, T&,           \
                                 std::span<T>);                                                                    \
  template Flops grad_accumulate<T>(std::span<T>, std::span<T>);                                                   \
  template Flops sgd_momentum_step<T>(std::span<T>, std::span<const T>, std::span<T>, T, T, T);                    \
  template Flops sgd_apply_accumulated<T>(std::span<T>, std::span<T>, std::span<T>, T, T, T, T);

EDGETRAIN_INSTANTIATE(float)
EDGETRAIN_INSTANTIATE(double)

#undef EDGETRAIN_INSTANTIATE

}  // namespace edgetrain::kernels
