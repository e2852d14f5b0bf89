// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

// Built without -mavx2; each function opts in through the target attribute so
// the binary still runs on CPUs without AVX2 (dispatch never calls these).

#include "edgetrain/simd.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define EDGETRAIN_AVX2 __attribute__((target("avx2")))
#endif

namespace edgetrain::simd::avx2 {

#ifdef EDGETRAIN_AVX2

EDGETRAIN_AVX2 void relu_forward(std::span<const float> x, std::span<float> y) {
  const std::size_t n = x.size();
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(&y[i], _mm256_max_ps(_mm256_loadu_ps(&x[i]), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

EDGETRAIN_AVX2 void relu_grad(std::span<const float> x, std::span<const float> dy, std::span<float> dx) {
  const std::size_t n = x.size();
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(&x[i]), zero, _CMP_GT_OQ);
    _mm256_storeu_ps(&dx[i], _mm256_and_ps(mask, _mm256_loadu_ps(&dy[i])));
  }
  for (; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

EDGETRAIN_AVX2 void accumulate(std::span<float> acc, std::span<const float> g) {
  const std::size_t n = acc.size();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(&acc[i], _mm256_add_ps(_mm256_loadu_ps(&acc[i]), _mm256_loadu_ps(&g[i])));
  for (; i < n; ++i) acc[i] += g[i];
}

EDGETRAIN_AVX2 void sgd_momentum_step(std::span<float> w, std::span<const float> g, std::span<float> v,
                                      const SgdHyper& h) {
  const std::size_t n = w.size();
  const __m256 scale = _mm256_set1_ps(h.scale);
  const __m256 wd = _mm256_set1_ps(h.weight_decay);
  const __m256 mu = _mm256_set1_ps(h.momentum);
  const __m256 lr = _mm256_set1_ps(h.lr);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 wi = _mm256_loadu_ps(&w[i]);
    __m256 gi = _mm256_mul_ps(_mm256_loadu_ps(&g[i]), scale);
    gi = _mm256_add_ps(gi, _mm256_mul_ps(wd, wi));
    const __m256 vi = _mm256_add_ps(_mm256_mul_ps(mu, _mm256_loadu_ps(&v[i])), gi);
    _mm256_storeu_ps(&v[i], vi);
    _mm256_storeu_ps(&w[i], _mm256_sub_ps(wi, _mm256_mul_ps(lr, vi)));
  }
  for (; i < n; ++i) {
    float gi = g[i] * h.scale;
    gi = gi + h.weight_decay * w[i];
    v[i] = h.momentum * v[i] + gi;
    w[i] = w[i] - h.lr * v[i];
  }
}

#else

void relu_forward(std::span<const float> x, std::span<float> y) { scalar::relu_forward(x, y); }
void relu_grad(std::span<const float> x, std::span<const float> dy, std::span<float> dx) {
  scalar::relu_grad(x, dy, dx);
}
void accumulate(std::span<float> acc, std::span<const float> g) { scalar::accumulate(acc, g); }
void sgd_momentum_step(std::span<float> w, std::span<const float> g, std::span<float> v, const SgdHyper& h) {
  scalar::sgd_momentum_step(w, g, v, h);
}

#endif

}  // namespace edgetrain::simd::avx2
