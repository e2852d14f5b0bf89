// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgetrain/simd.hpp"

#include <atomic>
#include <cassert>

namespace edgetrain::simd {

namespace scalar {

void relu_forward(std::span<const float> x, std::span<float> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_grad(std::span<const float> x, std::span<const float> dy, std::span<float> dx) {
  assert(x.size() == dy.size() && x.size() == dx.size());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

void accumulate(std::span<float> acc, std::span<const float> g) {
  assert(acc.size() == g.size());
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

void sgd_momentum_step(std::span<float> w, std::span<const float> g, std::span<float> v, const SgdHyper& h) {
  assert(w.size() == g.size() && w.size() == v.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    float gi = g[i] * h.scale;
    gi = gi + h.weight_decay * w[i];
    v[i] = h.momentum * v[i] + gi;
    w[i] = w[i] - h.lr * v[i];
  }
}

}  // namespace scalar

namespace {

std::atomic<int> g_active{-1};

Isa probe() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2")) return Isa::kAvx2;
#endif
  return Isa::kScalar;
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

Isa detected_isa() {
  static const Isa isa = probe();
  return isa;
}

Isa active_isa() {
  int v = g_active.load(std::memory_order_relaxed);
  if (v < 0) {
    v = static_cast<int>(detected_isa());
    g_active.store(v, std::memory_order_relaxed);
  }
  return static_cast<Isa>(v);
}

void set_active_isa(Isa isa) {
  if (isa == Isa::kAvx2 && detected_isa() != Isa::kAvx2) isa = Isa::kScalar;
  g_active.store(static_cast<int>(isa), std::memory_order_relaxed);
}

void relu_forward(std::span<const float> x, std::span<float> y) {
  active_isa() == Isa::kAvx2 ? avx2::relu_forward(x, y) : scalar::relu_forward(x, y);
}

void relu_grad(std::span<const float> x, std::span<const float> dy, std::span<float> dx) {
  active_isa() == Isa::kAvx2 ? avx2::relu_grad(x, dy, dx) : scalar::relu_grad(x, dy, dx);
}

void accumulate(std::span<float> acc, std::span<const float> g) {
  active_isa() == Isa::kAvx2 ? avx2::accumulate(acc, g) : scalar::accumulate(acc, g);
}

void sgd_momentum_step(std::span<float> w, std::span<const float> g, std::span<float> v, const SgdHyper& h) {
  active_isa() == Isa::kAvx2 ? avx2::sgd_momentum_step(w, g, v, h) : scalar::sgd_momentum_step(w, g, v, h);
}

}  // namespace edgetrain::simd
