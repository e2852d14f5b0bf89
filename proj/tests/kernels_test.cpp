// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <set>

#include "edgetrain/error.hpp"
#include "edgetrain/kernels.hpp"
#include "support/tensors.hpp"

namespace edgetrain::kernels {
namespace {

using testing::random_partition;
using testing::random_vec;
using testing::rel_err;
using testing::Tile;

// ---------------------------------------------------------------------------
// Independent oracles: direct scatter loops in double.

std::vector<double> naive_conv(const ConvShape& s, const std::vector<double>& x, const std::vector<double>& w,
                               const std::vector<double>& b) {
  std::vector<double> y(s.n * s.cout * s.t_out, 0.0);
  const auto cin_g = s.cin / s.groups, cout_g = s.cout / s.groups;
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t co = 0; co < s.cout; ++co)
      for (std::int64_t t = 0; t < s.t_out; ++t) {
        double acc = b.empty() ? 0.0 : b[co];
        for (std::int64_t ci = 0; ci < cin_g; ++ci)
          for (std::int64_t k = 0; k < s.kernel; ++k) {
            const auto src = t * s.stride - s.padding + k;
            if (src >= 0 && src < s.t_in)
              acc += w[(co * cin_g + ci) * s.kernel + k] * x[(n * s.cin + (co / cout_g) * cin_g + ci) * s.t_in + src];
          }
        y[(n * s.cout + co) * s.t_out + t] = acc;
      }
  return y;
}

void naive_conv_backward(const ConvShape& s, const std::vector<double>& x, const std::vector<double>& w,
                         const std::vector<double>& dy, std::vector<double>& dx, std::vector<double>& dw,
                         std::vector<double>& db) {
  dx.assign(s.n * s.cin * s.t_in, 0.0);
  dw.assign(w.size(), 0.0);
  db.assign(s.cout, 0.0);
  const auto cin_g = s.cin / s.groups, cout_g = s.cout / s.groups;
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t co = 0; co < s.cout; ++co)
      for (std::int64_t t = 0; t < s.t_out; ++t) {
        const double g = dy[(n * s.cout + co) * s.t_out + t];
        db[co] += g;
        for (std::int64_t ci = 0; ci < cin_g; ++ci)
          for (std::int64_t k = 0; k < s.kernel; ++k) {
            const auto src = t * s.stride - s.padding + k;
            if (src < 0 || src >= s.t_in) continue;
            const auto xi = (n * s.cin + (co / cout_g) * cin_g + ci) * s.t_in + src;
            dx[xi] += w[(co * cin_g + ci) * s.kernel + k] * g;
            dw[(co * cin_g + ci) * s.kernel + k] += x[xi] * g;
          }
      }
}

template <class T>
std::vector<T> cast(const std::vector<double>& v) {
  return std::vector<T>(v.begin(), v.end());
}

ConvShape shape(std::int64_t n, std::int64_t cin, std::int64_t cout, std::int64_t t, std::int64_t k, std::int64_t s,
                std::int64_t p, std::int64_t g) {
  ConvShape c{n, cin, cout, t, (t + 2 * p - k) / s + 1, k, s, p, g};
  return c;
}

template <class T>
std::vector<T> run_conv(const ConvShape& s, const std::vector<T>& x, const std::vector<T>& w,
                        const std::vector<T>& b) {
  std::vector<T> y(s.n * s.cout * s.t_out);
  conv1d_forward<T>(s, full_window<const T>(x.data(), s.n * s.cin, s.t_in), w, b,
                    full_window(y.data(), s.n * s.cout, s.t_out));
  return y;
}

ConvShape random_conv(std::mt19937_64& rng) {
  const std::int64_t g = 1 + static_cast<std::int64_t>(rng() % 3);
  const std::int64_t cin = g * (1 + static_cast<std::int64_t>(rng() % 3));
  const std::int64_t cout = g * (1 + static_cast<std::int64_t>(rng() % 3));
  const std::int64_t k = 1 + static_cast<std::int64_t>(rng() % 5);
  const std::int64_t s = 1 + static_cast<std::int64_t>(rng() % 3);
  const std::int64_t p = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(k));
  const std::int64_t t = k + static_cast<std::int64_t>(rng() % 30);
  return shape(1 + static_cast<std::int64_t>(rng() % 2), cin, cout, t, k, s, p, g);
}

// ---------------------------------------------------------------------------
// Convolution forward

TEST(Conv1dForward, IdentityKernel) {
  const ConvShape s = shape(1, 3, 3, 7, 1, 1, 0, 1);
  std::mt19937_64 rng(1);
  const auto x = random_vec(21, rng);
  std::vector<float> w(9, 0.0f);
  for (int c = 0; c < 3; ++c) w[c * 3 + c] = 1.0f;
  EXPECT_EQ(run_conv<float>(s, x, w, {}), x);
}

TEST(Conv1dForward, HandExample) {
  const ConvShape s = shape(1, 1, 1, 3, 2, 1, 0, 1);
  EXPECT_EQ(run_conv<float>(s, {1, 2, 3}, {1, 1}, {}), (std::vector<float>{3, 5}));
}

TEST(Conv1dForward, DepthwiseEqualsPerChannelConv) {
  std::mt19937_64 rng(2);
  const ConvShape s = shape(2, 4, 4, 20, 5, 1, 2, 4);
  const auto x = random_vec<double>(2 * 4 * 20, rng);
  const auto w = random_vec<double>(4 * 5, rng);
  const auto y = run_conv<double>(s, x, w, {});
  for (std::int64_t c = 0; c < 4; ++c) {
    const ConvShape one = shape(2, 1, 1, 20, 5, 1, 2, 1);
    std::vector<double> xc;
    for (int n = 0; n < 2; ++n) xc.insert(xc.end(), x.begin() + (n * 4 + c) * 20, x.begin() + (n * 4 + c + 1) * 20);
    const std::vector<double> wc(w.begin() + c * 5, w.begin() + (c + 1) * 5);
    const auto yc = naive_conv(one, xc, wc, {});
    for (int n = 0; n < 2; ++n)
      for (int t = 0; t < 20; ++t) EXPECT_DOUBLE_EQ(y[(n * 4 + c) * 20 + t], yc[n * 20 + t]);
  }
}

TEST(Conv1dForward, MatchesNaiveOracleOnRandomShapes) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const ConvShape s = random_conv(rng);
    const auto x = random_vec<double>(s.n * s.cin * s.t_in, rng);
    const auto w = random_vec<double>(s.cout * s.cin_per_group() * s.kernel, rng);
    const auto b = random_vec<double>(s.cout, rng);
    EXPECT_LT(rel_err(run_conv<double>(s, x, w, b), naive_conv(s, x, w, b)), 1e-14);
    EXPECT_LT(rel_err(run_conv<float>(s, cast<float>(x), cast<float>(w), cast<float>(b)), naive_conv(s, x, w, b)),
              1e-6);
  }
}

TEST(Conv1dForward, TiledEqualsUntiledBitExact) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const ConvShape s = random_conv(rng);
    const auto x = random_vec(s.n * s.cin * s.t_in, rng);
    const auto w = random_vec(s.cout * s.cin_per_group() * s.kernel, rng);
    const auto ref = run_conv<float>(s, x, w, {});
    std::vector<float> y(ref.size(), -1.0f);
    const auto cuts = random_partition(s.t_out, rng);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      Tile<float> xt(x, s.n * s.cin, s.t_in, s.in_lo(cuts[i]), s.in_hi(cuts[i + 1]));
      Tile<float> yt(s.n * s.cout, s.t_out, cuts[i], cuts[i + 1]);
      conv1d_forward<float>(s, xt.view(), w, {}, yt.window);
      yt.scatter(y);
    }
    EXPECT_EQ(y, ref);
  }
}

TEST(Conv1dForward, MissingHaloIsDetected) {
  const ConvShape s = shape(1, 1, 1, 10, 3, 1, 1, 1);
  const std::vector<float> x(10, 1.0f), w(3, 1.0f);
  Tile<float> xt(x, 1, 10, 2, 6);  // outputs [2, 6) need inputs [1, 7)
  Tile<float> yt(1, 10, 2, 6);
  EXPECT_THROW(conv1d_forward<float>(s, xt.view(), w, {}, yt.window), NumericalError);
}

TEST(Conv1dForward, FlopCount) {
  const ConvShape s = shape(2, 4, 6, 32, 5, 2, 1, 2);
  const std::vector<float> x(2 * 4 * 32), w(6 * 2 * 5), b(6);
  std::vector<float> y(2 * 6 * s.t_out);
  const auto f = conv1d_forward<float>(s, full_window<const float>(x.data(), 8, 32), w, {},
                                       full_window(y.data(), 12, s.t_out));
  EXPECT_EQ(f, 2ull * 2 * 6 * s.t_out * 2 * 5);
  const auto fb = conv1d_forward<float>(s, full_window<const float>(x.data(), 8, 32), w, b,
                                        full_window(y.data(), 12, s.t_out));
  EXPECT_EQ(fb, f + 2ull * 6 * s.t_out);
}

// ---------------------------------------------------------------------------
// Convolution input gradient

template <class T>
std::vector<T> run_grad_x(const ConvShape& s, const std::vector<T>& dy, const std::vector<T>& w) {
  std::vector<T> dx(s.n * s.cin * s.t_in);
  conv1d_grad_x<T>(s, full_window<const T>(dy.data(), s.n * s.cout, s.t_out), w,
                   full_window(dx.data(), s.n * s.cin, s.t_in));
  return dx;
}

TEST(Conv1dGradX, PointwiseNeedsNoHalo) {
  const ConvShape s = shape(1, 2, 3, 12, 1, 1, 0, 1);
  EXPECT_EQ(s.out_lo(4), 4);
  EXPECT_EQ(s.out_hi(9), 9);
  std::mt19937_64 rng(5);
  const auto dy = random_vec<double>(3 * 12, rng);
  const auto w = random_vec<double>(3 * 2, rng);
  const auto dx = run_grad_x<double>(s, dy, w);
  for (int ci = 0; ci < 2; ++ci)
    for (int t = 0; t < 12; ++t) {
      double e = 0.0;
      for (int co = 0; co < 3; ++co) e += w[co * 2 + ci] * dy[co * 12 + t];
      EXPECT_DOUBLE_EQ(dx[ci * 12 + t], e);
    }
}

// Dependency oracle: run the scatter form of the backward loop and record
// which dY positions land in dX[a, b).
std::pair<std::int64_t, std::int64_t> brute_force_dy_range(const ConvShape& s, std::int64_t a, std::int64_t b) {
  std::int64_t lo = s.t_out, hi = 0;
  for (std::int64_t t = 0; t < s.t_out; ++t)
    for (std::int64_t k = 0; k < s.kernel; ++k) {
      const auto src = t * s.stride - s.padding + k;
      if (src >= a && src < b && src >= 0 && src < s.t_in) {
        lo = std::min(lo, t);
        hi = std::max(hi, t + 1);
      }
    }
  if (lo >= hi) return {0, 0};
  return {lo, hi};
}

TEST(Conv1dGradX, HaloMatchesDependencyEnumeration) {
  const ConvShape s = shape(1, 1, 1, 40, 3, 1, 0, 1);  // T' = 38
  EXPECT_EQ(brute_force_dy_range(s, 10, 20), (std::pair<std::int64_t, std::int64_t>{8, 20}));
  EXPECT_EQ(s.out_lo(10), 8);
  EXPECT_EQ(s.out_hi(20), 20);

  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    const ConvShape r = random_conv(rng);
    const std::int64_t a = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(r.t_in));
    const std::int64_t b = a + 1 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(r.t_in - a));
    const auto [lo, hi] = brute_force_dy_range(r, a, b);
    if (lo < hi) {
      // The declared range must contain every dependency and may only add
      // positions whose contribution is zero (stride gaps).
      EXPECT_LE(r.out_lo(a), lo);
      EXPECT_GE(r.out_hi(b), hi);
      if (r.stride == 1) {
        EXPECT_EQ(r.out_lo(a), lo);
        EXPECT_EQ(r.out_hi(b), hi);
      }
    }
  }
}

TEST(Conv1dGradX, MatchesNaiveAndTilesAreBitExact) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const ConvShape s = random_conv(rng);
    const auto x = random_vec<double>(s.n * s.cin * s.t_in, rng);
    const auto w = random_vec<double>(s.cout * s.cin_per_group() * s.kernel, rng);
    const auto dy = random_vec<double>(s.n * s.cout * s.t_out, rng);
    std::vector<double> dx_ref, dw_ref, db_ref;
    naive_conv_backward(s, x, w, dy, dx_ref, dw_ref, db_ref);
    EXPECT_LT(rel_err(run_grad_x<double>(s, dy, w), dx_ref), 1e-14);

    const auto dyf = cast<float>(dy), wf = cast<float>(w);
    const auto untiled = run_grad_x<float>(s, dyf, wf);
    std::vector<float> tiled(untiled.size(), -1.0f);
    const auto cuts = random_partition(s.t_in, rng);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      Tile<float> dyt(dyf, s.n * s.cout, s.t_out, s.out_lo(cuts[i]), s.out_hi(cuts[i + 1]));
      Tile<float> dxt(s.n * s.cin, s.t_in, cuts[i], cuts[i + 1]);
      conv1d_grad_x<float>(s, dyt.view(), wf, dxt.window);
      dxt.scatter(tiled);
    }
    EXPECT_EQ(tiled, untiled);
  }
}

// ---------------------------------------------------------------------------
// Convolution weight gradient

template <class T>
void grad_w_tiled(const ConvShape& s, const std::vector<T>& x, const std::vector<T>& dy,
                  const std::vector<std::int64_t>& cuts, std::vector<T>& dw, std::vector<T>& db) {
  std::vector<double> acc_w(dw.begin(), dw.end()), acc_b(db.begin(), db.end());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    Tile<T> xt(x, s.n * s.cin, s.t_in, s.in_lo(cuts[i]), s.in_hi(cuts[i + 1]));
    Tile<T> dyt(dy, s.n * s.cout, s.t_out, cuts[i], cuts[i + 1]);
    std::vector<T> scratch((cuts[i + 1] - cuts[i]) * s.cin_per_group() * s.kernel);
    conv1d_grad_w_tile<T>(s, xt.view(), dyt.view(), acc_w, acc_b, scratch);
  }
  std::copy(acc_w.begin(), acc_w.end(), dw.begin());
  std::copy(acc_b.begin(), acc_b.end(), db.begin());
}

TEST(Conv1dGradW, SingleTileEqualsIm2colGemm) {
  std::mt19937_64 rng(8);
  const ConvShape s = shape(1, 4, 2, 16, 3, 1, 1, 2);
  const auto x = random_vec(4 * 16, rng);
  const auto dy = random_vec(2 * 16, rng);
  std::vector<float> dw(2 * 2 * 3, 0.0f), db(2, 0.0f);
  grad_w_tiled<float>(s, x, dy, {0, 16}, dw, db);
  // im2col then an explicit GEMM in the same summation order.
  const std::int64_t width = 2 * 3;
  for (std::int64_t g = 0; g < 2; ++g) {
    std::vector<float> col(16 * width);
    im2col<float>(s, full_window<const float>(x.data(), 4, 16), 0, g, 0, 16, col);
    for (std::int64_t j = 0; j < width; ++j) {
      double acc = 0.0;
      for (std::int64_t t = 0; t < 16; ++t) acc += double(col[t * width + j]) * double(dy[g * 16 + t]);
      EXPECT_EQ(dw[g * width + j], static_cast<float>(acc));
    }
  }
}

TEST(Conv1dGradW, Im2colRowsHoldReceptiveFields) {
  const ConvShape s = shape(1, 1, 1, 5, 3, 1, 1, 1);
  const std::vector<float> x{1, 2, 3, 4, 5};
  std::vector<float> col(5 * 3);
  im2col<float>(s, full_window<const float>(x.data(), 1, 5), 0, 0, 0, 5, col);
  EXPECT_EQ(col, (std::vector<float>{0, 1, 2, 1, 2, 3, 2, 3, 4, 3, 4, 5, 4, 5, 0}));
}

TEST(Conv1dGradW, TwoAndFourTilesAgreeWithUntiled) {
  std::mt19937_64 rng(9);
  const ConvShape s = shape(1, 3, 4, 16, 3, 1, 1, 1);
  const auto x = random_vec<double>(3 * 16, rng);
  const auto w = random_vec<double>(4 * 3 * 3, rng);
  const auto dy = random_vec<double>(4 * 16, rng);
  std::vector<double> dx_ref, dw_ref, db_ref;
  naive_conv_backward(s, x, w, dy, dx_ref, dw_ref, db_ref);
  for (const auto& cuts : {std::vector<std::int64_t>{0, 16}, std::vector<std::int64_t>{0, 8, 16},
                           std::vector<std::int64_t>{0, 4, 8, 12, 16}}) {
    std::vector<float> dw(dw_ref.size(), 0.0f), db(4, 0.0f);
    grad_w_tiled<float>(s, cast<float>(x), cast<float>(dy), cuts, dw, db);
    EXPECT_LT(rel_err(dw, dw_ref), 1e-6);
    EXPECT_LT(rel_err(db, db_ref), 1e-6);
  }
}

TEST(Conv1dGradW, RandomPartitionsMatchOracle) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const ConvShape s = random_conv(rng);
    const auto x = random_vec<double>(s.n * s.cin * s.t_in, rng);
    const auto w = random_vec<double>(s.cout * s.cin_per_group() * s.kernel, rng);
    const auto dy = random_vec<double>(s.n * s.cout * s.t_out, rng);
    std::vector<double> dx_ref, dw_ref, db_ref;
    naive_conv_backward(s, x, w, dy, dx_ref, dw_ref, db_ref);
    std::vector<float> dw(dw_ref.size(), 0.0f), db(s.cout, 0.0f);
    grad_w_tiled<float>(s, cast<float>(x), cast<float>(dy), random_partition(s.t_out, rng), dw, db);
    EXPECT_LT(rel_err(dw, dw_ref), 1e-6);
    EXPECT_LT(rel_err(db, db_ref), 1e-6);
    std::vector<double> dw64(dw_ref.size(), 0.0), db64(s.cout, 0.0);
    grad_w_tiled<double>(s, x, dy, random_partition(s.t_out, rng), dw64, db64);
    EXPECT_LT(rel_err(dw64, dw_ref), 1e-13);
  }
}

TEST(Conv1dGradW, ZeroGradientLeavesAccumulator) {
  std::mt19937_64 rng(11);
  const ConvShape s = shape(1, 2, 2, 10, 3, 1, 1, 1);
  const auto x = random_vec(20, rng);
  const std::vector<float> dy(20, 0.0f);
  auto dw = random_vec(12, rng);
  auto db = random_vec(2, rng);
  const auto dw0 = dw, db0 = db;
  grad_w_tiled<float>(s, x, dy, {0, 3, 10}, dw, db);
  EXPECT_EQ(dw, dw0);
  EXPECT_EQ(db, db0);
}

// ---------------------------------------------------------------------------
// Normalization statistics

TEST(NormStats, TileOfOneTwo) {
  const NormShape s{1, 1, 2, 1, true};
  const std::vector<float> x{1, 2};
  std::vector<WelfordState> st(1);
  norm_stats_tile<float>(s, full_window<const float>(x.data(), 1, 2), st);
  EXPECT_EQ(st[0].count, 2);
  EXPECT_DOUBLE_EQ(st[0].mean, 1.5);
  EXPECT_DOUBLE_EQ(st[0].m2, 0.5);
}

TEST(NormStats, ConstantTileHasZeroM2) {
  const NormShape s{1, 2, 8, 1, true};
  const std::vector<float> x(16, 3.25f);
  std::vector<WelfordState> st(1);
  norm_stats_tile<float>(s, full_window<const float>(x.data(), 2, 8), st);
  EXPECT_EQ(st[0].m2, 0.0);
  EXPECT_EQ(st[0].mean, 3.25);
}

TEST(NormStats, FullTileEqualsTwoPass) {
  std::mt19937_64 rng(12);
  const auto x = random_vec<double>(4 * 32, rng);
  const NormShape s{1, 4, 32, 1, true};
  std::vector<WelfordState> st(1);
  norm_stats_tile<double>(s, full_window<const double>(x.data(), 4, 32), st);
  const WelfordState ref = welford_of<double>(x);
  EXPECT_EQ(st[0], ref);
}

TEST(WelfordMerge, HandExamples) {
  const std::vector<double> a{1, 2}, b{3, 4};
  const auto m = welford_merge(welford_of<double>(a), welford_of<double>(b));
  EXPECT_EQ(m.count, 4);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_DOUBLE_EQ(m.m2, 5.0);
  EXPECT_DOUBLE_EQ(m.variance(), 1.25);
  const WelfordState s{3, 0.7, 1.9};
  EXPECT_EQ(welford_merge(s, {}), s);
  EXPECT_EQ(welford_merge({}, s), s);
}

TEST(WelfordMerge, OrderInsensitive) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = random_vec<double>(1 + rng() % 50, rng, -5, 5);
    const auto b = random_vec<double>(1 + rng() % 50, rng, 0, 20);
    const auto ab = welford_merge(welford_of<double>(a), welford_of<double>(b));
    const auto ba = welford_merge(welford_of<double>(b), welford_of<double>(a));
    EXPECT_EQ(ab.count, ba.count);
    EXPECT_NEAR(ab.mean, ba.mean, 1e-12 * std::max(1.0, std::abs(ab.mean)));
    EXPECT_NEAR(ab.m2, ba.m2, 1e-12 * std::max(1.0, ab.m2));
  }
}

TEST(NormStats, GroupAndBatchLayoutsOverRandomPartitions) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    const bool per_sample = trial % 2 == 0;
    const std::int64_t groups = 1 + static_cast<std::int64_t>(rng() % 3);
    NormShape s{1 + static_cast<std::int64_t>(rng() % 3), groups * (1 + static_cast<std::int64_t>(rng() % 3)),
                4 + static_cast<std::int64_t>(rng() % 60), groups, per_sample};
    const auto x = random_vec(s.n * s.c * s.t, rng, -3, 7);
    std::vector<WelfordState> st(s.stat_count());
    const auto cuts = random_partition(s.t, rng);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      Tile<float> xt(x, s.n * s.c, s.t, cuts[i], cuts[i + 1]);
      norm_stats_tile<float>(s, xt.view(), st);
    }
    // Oracle: gather the statistic's elements and run two passes.
    for (std::int64_t k = 0; k < s.stat_count(); ++k) {
      std::vector<double> vals;
      for (std::int64_t n = 0; n < s.n; ++n)
        for (std::int64_t c = 0; c < s.c; ++c)
          if (s.stat_index(n, c) == k)
            for (std::int64_t t = 0; t < s.t; ++t) vals.push_back(x[(n * s.c + c) * s.t + t]);
      const auto ref = welford_of<double>(vals);
      EXPECT_EQ(st[k].count, ref.count);
      EXPECT_NEAR(st[k].mean, ref.mean, 1e-6 * std::abs(ref.mean) + 1e-12);
      EXPECT_NEAR(st[k].variance(), ref.variance(), 1e-6 * ref.variance());
    }
  }
}

// ---------------------------------------------------------------------------
// Normalization forward / backward

template <class T>
struct NormCase {
  NormShape s;
  std::vector<T> x, gamma, beta, mean, var;
};

template <class T>
void compute_stats(NormCase<T>& c) {
  std::vector<WelfordState> st(c.s.stat_count());
  norm_stats_tile<T>(c.s, full_window<const T>(c.x.data(), c.s.n * c.s.c, c.s.t), st);
  c.mean.resize(st.size());
  c.var.resize(st.size());
  norm_finalize<T>(st, c.mean, c.var);
}

template <class T>
std::vector<T> normalize(const NormCase<T>& c) {
  std::vector<T> y(c.x.size());
  norm_normalize<T>(c.s, full_window<const T>(c.x.data(), c.s.n * c.s.c, c.s.t), c.mean, c.var, c.gamma, c.beta,
                    full_window(y.data(), c.s.n * c.s.c, c.s.t));
  return y;
}

TEST(NormNormalize, CenteredConstantIsZero) {
  NormCase<float> c{{1, 4, 8, 2, true}, std::vector<float>(32, 2.5f), std::vector<float>(4, 1.0f),
                    std::vector<float>(4, 0.0f), {}, {}};
  compute_stats(c);
  for (float v : normalize(c)) EXPECT_EQ(v, 0.0f);
}

TEST(NormNormalize, InstanceAndLayerNormalization) {
  std::mt19937_64 rng(15);
  for (const std::int64_t groups : {std::int64_t{4}, std::int64_t{1}}) {
    NormCase<double> c{{2, 4, 16, groups, true}, random_vec<double>(2 * 4 * 16, rng), random_vec<double>(4, rng),
                       random_vec<double>(4, rng), {}, {}};
    compute_stats(c);
    const auto y = normalize(c);
    // Direct oracle: instance norm (per n, c) or layer norm (per n over C, T).
    for (int n = 0; n < 2; ++n) {
      for (int c0 = 0; c0 < 4; ++c0) {
        const int lo = groups == 4 ? c0 : 0, hi = groups == 4 ? c0 + 1 : 4;
        double mu = 0.0, var = 0.0;
        const int cnt = (hi - lo) * 16;
        for (int cc = lo; cc < hi; ++cc)
          for (int t = 0; t < 16; ++t) mu += c.x[(n * 4 + cc) * 16 + t];
        mu /= cnt;
        for (int cc = lo; cc < hi; ++cc)
          for (int t = 0; t < 16; ++t) var += std::pow(c.x[(n * 4 + cc) * 16 + t] - mu, 2);
        var /= cnt;
        for (int t = 0; t < 16; ++t) {
          const double e = c.gamma[c0] * (c.x[(n * 4 + c0) * 16 + t] - mu) / std::sqrt(var + 1e-5) + c.beta[c0];
          EXPECT_NEAR(y[(n * 4 + c0) * 16 + t], e, 1e-12);
        }
      }
    }
  }
}

template <class T>
void norm_backward(const NormCase<T>& c, const std::vector<T>& dy, std::vector<T>& dx, std::vector<T>& dg,
                   std::vector<T>& db) {
  const auto rows = c.s.n * c.s.c;
  std::vector<double> sums(2 * c.s.stat_count(), 0.0);
  dx.assign(c.x.size(), T(0));
  dg.assign(c.s.c, T(0));
  db.assign(c.s.c, T(0));
  const auto xw = full_window<const T>(c.x.data(), rows, c.s.t);
  const auto dyw = full_window<const T>(dy.data(), rows, c.s.t);
  std::vector<double> acc_g(c.s.c, 0.0), acc_b(c.s.c, 0.0);
  norm_grad_reduce<T>(c.s, xw, dyw, c.mean, c.var, c.gamma, sums, acc_g, acc_b);
  std::copy(acc_g.begin(), acc_g.end(), dg.begin());
  std::copy(acc_b.begin(), acc_b.end(), db.begin());
  norm_grad_apply<T>(c.s, xw, dyw, c.mean, c.var, c.gamma, sums, full_window(dx.data(), rows, c.s.t));
}

// Loss L = sum r * normalize(x); the statistics are recomputed from x.
template <class T>
double norm_loss(NormCase<T> c, const std::vector<T>& r) {
  compute_stats(c);
  const auto y = normalize(c);
  double l = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) l += static_cast<double>(r[i]) * static_cast<double>(y[i]);
  return l;
}

// Central differences, always evaluated in 64-bit.
std::vector<double> fd(const std::function<double(const std::vector<double>&)>& f, std::vector<double> v,
                       double h) {
  std::vector<double> g(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double keep = v[i];
    v[i] = keep + h;
    const double lp = f(v);
    v[i] = keep - h;
    const double lm = f(v);
    v[i] = keep;
    g[i] = (lp - lm) / (2 * h);
  }
  return g;
}

TEST(NormGrad, ZeroUpstreamGivesZeroGradients) {
  std::mt19937_64 rng(16);
  NormCase<float> c{{1, 4, 32, 2, true}, random_vec(128, rng), random_vec(4, rng), random_vec(4, rng), {}, {}};
  compute_stats(c);
  std::vector<float> dx, dg, db;
  norm_backward(c, std::vector<float>(128, 0.0f), dx, dg, db);
  for (float v : dx) EXPECT_EQ(v, 0.0f);
  for (float v : dg) EXPECT_EQ(v, 0.0f);
  for (float v : db) EXPECT_EQ(v, 0.0f);
}

TEST(NormGrad, ZeroGammaAnnihilatesInputGradient) {
  std::mt19937_64 rng(17);
  NormCase<double> c{{1, 4, 32, 2, true}, random_vec<double>(128, rng), std::vector<double>(4, 0.0),
                     random_vec<double>(4, rng), {}, {}};
  compute_stats(c);
  const auto dy = random_vec<double>(128, rng);
  std::vector<double> dx, dg, db;
  norm_backward(c, dy, dx, dg, db);
  for (double v : dx) EXPECT_EQ(v, 0.0);
  NormCase<double> c1 = c;
  c1.gamma = random_vec<double>(4, rng);
  std::vector<double> dx1, dg1, db1;
  norm_backward(c1, dy, dx1, dg1, db1);
  EXPECT_EQ(dg, dg1);
}

// 32-bit analytic gradients are compared with 64-bit central differences:
// fp32 central differences carry a rounding floor near 1e-4 on their own.
TEST(NormGrad, FiniteDifferences) {
  std::mt19937_64 rng(18);
  for (const bool per_sample : {true, false}) {
    NormCase<double> c{{per_sample ? 1 : 3, 4, 32, 2, per_sample}, random_vec<double>(per_sample ? 128 : 384, rng),
                       random_vec<double>(4, rng, 0.5, 1.5), random_vec<double>(4, rng), {}, {}};
    const auto r = random_vec<double>(c.x.size(), rng);
    compute_stats(c);
    auto with = [&](auto field) {
      return [&, field](const std::vector<double>& v) {
        NormCase<double> cc = c;
        cc.*field = v;
        return norm_loss(cc, r);
      };
    };
    const auto fx = fd(with(&NormCase<double>::x), c.x, 1e-5);
    const auto fg = fd(with(&NormCase<double>::gamma), c.gamma, 1e-5);
    const auto fb = fd(with(&NormCase<double>::beta), c.beta, 1e-5);

    std::vector<double> dx, dg, db;
    norm_backward(c, r, dx, dg, db);
    EXPECT_LT(rel_err(dx, fx), 1e-8);
    EXPECT_LT(rel_err(dg, fg), 1e-8);
    EXPECT_LT(rel_err(db, fb), 1e-8);

    NormCase<float> cf{c.s, cast<float>(c.x), cast<float>(c.gamma), cast<float>(c.beta), {}, {}};
    compute_stats(cf);
    std::vector<float> dxf, dgf, dbf;
    norm_backward(cf, cast<float>(r), dxf, dgf, dbf);
    EXPECT_LT(rel_err(dxf, fx), 1e-4);
    EXPECT_LT(rel_err(dgf, fg), 1e-4);
    EXPECT_LT(rel_err(dbf, fb), 1e-4);
  }
}

TEST(NormGrad, TiledPassesMatchUntiled) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    const std::int64_t groups = 1 + static_cast<std::int64_t>(rng() % 2);
    NormCase<float> c{{1 + static_cast<std::int64_t>(rng() % 2), 2 * groups, 8 + static_cast<std::int64_t>(rng() % 40),
                       groups, trial % 3 != 0},
                      {}, {}, {}, {}, {}};
    const auto rows = c.s.n * c.s.c;
    c.x = random_vec(rows * c.s.t, rng);
    c.gamma = random_vec(c.s.c, rng);
    c.beta = random_vec(c.s.c, rng);
    compute_stats(c);
    const auto dy = random_vec(rows * c.s.t, rng);
    std::vector<float> dx, dg, db;
    norm_backward(c, dy, dx, dg, db);

    const auto cuts = random_partition(c.s.t, rng);
    std::vector<double> sums(2 * c.s.stat_count(), 0.0);
    std::vector<float> tdx(dx.size());
    std::vector<double> acc_g(c.s.c, 0.0), acc_b(c.s.c, 0.0);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      Tile<float> xt(c.x, rows, c.s.t, cuts[i], cuts[i + 1]), dyt(dy, rows, c.s.t, cuts[i], cuts[i + 1]);
      norm_grad_reduce<float>(c.s, xt.view(), dyt.view(), c.mean, c.var, c.gamma, sums, acc_g, acc_b);
    }
    const std::vector<float> tdg(acc_g.begin(), acc_g.end()), tdb(acc_b.begin(), acc_b.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      Tile<float> xt(c.x, rows, c.s.t, cuts[i], cuts[i + 1]), dyt(dy, rows, c.s.t, cuts[i], cuts[i + 1]);
      Tile<float> dxt(rows, c.s.t, cuts[i], cuts[i + 1]);
      norm_grad_apply<float>(c.s, xt.view(), dyt.view(), c.mean, c.var, c.gamma, sums, dxt.window);
      dxt.scatter(tdx);
    }
    EXPECT_LT(rel_err(tdx, dx), 1e-5);
    EXPECT_LT(rel_err(tdg, dg), 1e-6);
    EXPECT_LT(rel_err(tdb, db), 1e-6);
  }
}

// ---------------------------------------------------------------------------
// Pointwise, pooling, linear

TEST(Relu, GradientIsZeroAtZero) {
  const std::vector<float> x{-1, 0, 2}, dy{1, 1, 1};
  std::vector<float> dx(3), y(3);
  relu_grad<float>(x, dy, dx);
  EXPECT_EQ(dx, (std::vector<float>{0, 0, 1}));
  relu_forward<float>(x, y);
  EXPECT_EQ(y, (std::vector<float>{0, 0, 2}));
  const std::vector<double> xd{-1, 0, 2}, dyd{1, 1, 1};
  std::vector<double> dxd(3);
  relu_grad<double>(xd, dyd, dxd);
  EXPECT_EQ(dxd, (std::vector<double>{0, 0, 1}));
}

TEST(Pool, AverageHandExample) {
  const PoolShape s{1, 1, 4, 2, 2, 2, false};
  const std::vector<float> x{1, 3, 5, 7};
  std::vector<float> y(2), dx(4);
  pool_forward<float>(s, full_window<const float>(x.data(), 1, 4), full_window(y.data(), 1, 2), {});
  EXPECT_EQ(y, (std::vector<float>{2, 6}));
  const std::vector<float> dy{1, 1};
  pool_grad<float>(s, full_window<const float>(dy.data(), 1, 2), {}, full_window(dx.data(), 1, 4));
  EXPECT_EQ(dx, (std::vector<float>{0.5, 0.5, 0.5, 0.5}));
}

TEST(Pool, MaxTiesGoToLowestIndex) {
  const PoolShape s{1, 1, 6, 2, 3, 3, true};
  const std::vector<float> x{4, 4, 1, 0, 2, 2};
  std::vector<float> y(2), idx(2), dx(6);
  pool_forward<float>(s, full_window<const float>(x.data(), 1, 6), full_window(y.data(), 1, 2),
                      full_window(idx.data(), 1, 2));
  EXPECT_EQ(y, (std::vector<float>{4, 2}));
  EXPECT_EQ(idx, (std::vector<float>{0, 4}));
  const std::vector<float> dy{1, 2};
  pool_grad<float>(s, full_window<const float>(dy.data(), 1, 2), full_window<const float>(idx.data(), 1, 2),
                   full_window(dx.data(), 1, 6));
  EXPECT_EQ(dx, (std::vector<float>{1, 0, 0, 0, 2, 0}));
}

TEST(Pool, TiledEqualsUntiledAndFlops) {
  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 100; ++trial) {
    const std::int64_t k = 1 + static_cast<std::int64_t>(rng() % 5), st = 1 + static_cast<std::int64_t>(rng() % 4);
    const std::int64_t t = k + static_cast<std::int64_t>(rng() % 40);
    const PoolShape s{1 + static_cast<std::int64_t>(rng() % 2), 2, t, (t - k) / st + 1, k, st, trial % 2 == 0};
    const auto rows = s.n * s.c;
    const auto x = random_vec(rows * t, rng);
    std::vector<float> y(rows * s.t_out), idx(rows * s.t_out), dx(rows * t);
    pool_forward<float>(s, full_window<const float>(x.data(), rows, t), full_window(y.data(), rows, s.t_out),
                        full_window(idx.data(), rows, s.t_out));
    const auto dy = random_vec(rows * s.t_out, rng);
    const auto f = pool_grad<float>(s, full_window<const float>(dy.data(), rows, s.t_out),
                                    full_window<const float>(idx.data(), rows, s.t_out), full_window(dx.data(), rows, t));
    EXPECT_EQ(f, static_cast<Flops>(s.max ? rows * s.t_out : rows * s.t_out * k));

    std::vector<float> ty(y.size()), tdx(dx.size());
    const auto oc = random_partition(s.t_out, rng);
    for (std::size_t i = 0; i + 1 < oc.size(); ++i) {
      Tile<float> xt(x, rows, t, s.in_lo(oc[i]), s.in_hi(oc[i + 1]));
      Tile<float> yt(rows, s.t_out, oc[i], oc[i + 1]), it(rows, s.t_out, oc[i], oc[i + 1]);
      pool_forward<float>(s, xt.view(), yt.window, it.window);
      yt.scatter(ty);
    }
    EXPECT_EQ(ty, y);
    const auto ic = random_partition(t, rng);
    Flops tf = 0;
    for (std::size_t i = 0; i + 1 < ic.size(); ++i) {
      const auto lo = s.out_lo(ic[i]), hi = s.out_hi(ic[i + 1]);
      Tile<float> dyt(dy, rows, s.t_out, lo, hi), it(idx, rows, s.t_out, lo, hi);
      Tile<float> dxt(rows, t, ic[i], ic[i + 1]);
      tf += pool_grad<float>(s, dyt.view(), it.view(), dxt.window);
      dxt.scatter(tdx);
    }
    EXPECT_EQ(tdx, dx);
    EXPECT_EQ(tf, f);
  }
}

TEST(Linear, FiniteDifferences) {
  std::mt19937_64 rng(21);
  const std::int64_t n = 3, in = 5, out = 4;
  const auto x = random_vec<double>(n * in, rng), w = random_vec<double>(out * in, rng);
  const auto b = random_vec<double>(out, rng), r = random_vec<double>(n * out, rng);
  auto loss = [&](const std::vector<double>& xx, const std::vector<double>& ww, const std::vector<double>& bb) {
    std::vector<double> y(n * out);
    linear_forward<double>(n, in, out, xx, ww, bb, y);
    double l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) l += r[i] * y[i];
    return l;
  };
  const auto fx = fd([&](const auto& v) { return loss(v, w, b); }, x, 1e-6);
  const auto fw = fd([&](const auto& v) { return loss(x, v, b); }, w, 1e-6);
  const auto fb = fd([&](const auto& v) { return loss(x, w, v); }, b, 1e-6);
  std::vector<float> dx(n * in), dw(out * in, 0.0f), db(out, 0.0f);
  const auto rf = cast<float>(r);
  linear_grad_x<float>(n, in, out, rf, cast<float>(w), dx);
  linear_grad_w<float>(n, in, out, cast<float>(x), rf, dw, db);
  EXPECT_LT(rel_err(dx, fx), 1e-4);
  EXPECT_LT(rel_err(dw, fw), 1e-4);
  EXPECT_LT(rel_err(db, fb), 1e-4);
}

// ---------------------------------------------------------------------------
// Loss and optimizer

TEST(SoftmaxXent, UniformLogits) {
  float loss = 0.0f;
  const std::vector<float> l2(4, 0.3f), lab2{0, 1};
  std::vector<float> d2(4);
  softmax_xent<float>(2, 2, l2, lab2, loss, d2);
  EXPECT_NEAR(loss, std::numbers::ln2, 1e-6);
  const std::vector<double> l11(11, -2.0), lab11{7};
  double loss11 = 0.0;
  softmax_xent<double>(1, 11, l11, lab11, loss11, {});
  EXPECT_NEAR(loss11, std::log(11.0), 1e-12);
}

TEST(SoftmaxXent, GradientSumsToZeroAndMatchesFiniteDifferences) {
  std::mt19937_64 rng(22);
  const std::int64_t n = 4, k = 11;
  const auto z = random_vec<double>(n * k, rng, -3, 3);
  const std::vector<double> labels{0, 3, 10, 5};
  std::vector<double> dz(n * k);
  double loss = 0.0;
  softmax_xent<double>(n, k, z, labels, loss, dz);
  for (std::int64_t b = 0; b < n; ++b) {
    double s = 0.0;
    for (std::int64_t c = 0; c < k; ++c) s += dz[b * k + c];
    EXPECT_NEAR(s, 0.0, 1e-15);
  }
  const auto f = fd(
      [&](const std::vector<double>& v) {
        double l = 0.0;
        softmax_xent<double>(n, k, v, labels, l, {});
        return l;
      },
      z, 1e-6);
  EXPECT_LT(rel_err(dz, f), 1e-8);
  const std::vector<double> bad{0, 11, 0, 0};
  EXPECT_THROW(softmax_xent<double>(n, k, z, bad, loss, {}), FormatError);
}

TEST(Sgd, PlainStepWithoutMomentum) {
  std::vector<float> w{1.0f, -2.0f}, v{0.0f, 0.0f};
  const std::vector<float> g{0.5f, 0.25f};
  sgd_momentum_step<float>(w, g, v, 0.1f, 0.0f, 0.0f);
  EXPECT_FLOAT_EQ(w[0], 1.0f - 0.1f * 0.5f);
  EXPECT_FLOAT_EQ(w[1], -2.0f - 0.1f * 0.25f);
}

TEST(Sgd, TwoStepsUnrolled) {
  std::vector<double> w{3.0}, v{0.0};
  const std::vector<double> g{0.5};
  sgd_momentum_step<double>(w, g, v, 1.0, 0.9, 0.0);
  sgd_momentum_step<double>(w, g, v, 1.0, 0.9, 0.0);
  EXPECT_DOUBLE_EQ(w[0], 3.0 - (0.5 + 1.9 * 0.5));
}

TEST(Sgd, VelocityDecaysGeometrically) {
  std::vector<double> w{1.0}, v{2.0};
  const std::vector<double> g{0.0};
  for (int i = 1; i <= 5; ++i) {
    sgd_momentum_step<double>(w, g, v, 0.01, 0.9, 0.0);
    EXPECT_NEAR(v[0], 2.0 * std::pow(0.9, i), 1e-15);
  }
}

TEST(Sgd, AccumulatedUpdateScalesAndClears) {
  std::vector<float> w{1.0f, 2.0f}, acc{8.0f, -4.0f}, v{0.0f, 0.0f};
  const auto f = sgd_apply_accumulated<float>(w, acc, v, 0.5f, 0.9f, 0.1f, 0.125f);
  EXPECT_EQ(f, 14u);
  EXPECT_FLOAT_EQ(v[0], 1.0f + 0.1f);
  EXPECT_FLOAT_EQ(w[0], 1.0f - 0.5f * 1.1f);
  EXPECT_FLOAT_EQ(v[1], -0.5f + 0.2f);
  EXPECT_EQ(acc, (std::vector<float>{0.0f, 0.0f}));
}

TEST(GradAccumulate, ConsumesAndClears) {
  std::vector<float> g{1, 2, 3}, acc{10, 20, 30};
  EXPECT_EQ(grad_accumulate<float>(g, acc), 3u);
  EXPECT_EQ(acc, (std::vector<float>{11, 22, 33}));
  EXPECT_EQ(g, (std::vector<float>{0, 0, 0}));
}

TEST(CosineLr, Endpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 30, 5e-3), 5e-3);
  EXPECT_NEAR(cosine_lr(30, 30, 5e-3), 0.0, 1e-18);
  EXPECT_NEAR(cosine_lr(15, 30, 5e-3), 2.5e-3, 1e-15);
  EXPECT_NEAR(cosine_lr(30, 30, 5e-3, 1e-4), 1e-4, 1e-15);
}

}  // namespace
}  // namespace edgetrain::kernels
