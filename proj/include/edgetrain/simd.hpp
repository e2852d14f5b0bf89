// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string_view>

namespace edgetrain::simd {

// Elementwise FP32 kernels with a scalar reference and an AVX2 variant picked
// at runtime. Every variant performs the same IEEE operations in the same
// order (no FMA contraction), so results are bit-identical across ISAs.

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);
/// Best ISA supported by the running CPU.
Isa detected_isa();
/// ISA used by the dispatching entry points below.
Isa active_isa();
/// Overrides dispatch (tests, benchmarking). Requesting an unsupported ISA
/// falls back to scalar.
void set_active_isa(Isa isa);

struct SgdHyper {
  float lr = 0.0f;
  float momentum = 0.0f;
  float weight_decay = 0.0f;
  /// Applied to the raw gradient before weight decay.
  float scale = 1.0f;
};

/// y = x > 0 ? x : 0
void relu_forward(std::span<const float> x, std::span<float> y);
/// dx = x > 0 ? dy : 0
void relu_grad(std::span<const float> x, std::span<const float> dy, std::span<float> dx);
/// acc += g
void accumulate(std::span<float> acc, std::span<const float> g);
/// g' = scale*g + wd*w;  v = mu*v + g';  w = w - lr*v
void sgd_momentum_step(std::span<float> w, std::span<const float> g, std::span<float> v, const SgdHyper& h);

namespace scalar {
void relu_forward(std::span<const float> x, std::span<float> y);
void relu_grad(std::span<const float> x, std::span<const float> dy, std::span<float> dx);
void accumulate(std::span<float> acc, std::span<const float> g);
void sgd_momentum_step(std::span<float> w, std::span<const float> g, std::span<float> v, const SgdHyper& h);
}  // namespace scalar

namespace avx2 {
void relu_forward(std::span<const float> x, std::span<float> y);
void relu_grad(std::span<const float> x, std::span<const float> dy, std::span<float> dx);
void accumulate(std::span<float> acc, std::span<const float> g);
void sgd_momentum_step(std::span<float> w, std::span<const float> g, std::span<float> v, const SgdHyper& h);
}  // namespace avx2

}  // namespace edgetrain::simd
