// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

namespace edgetrain {

enum class LrSchedule { kConstant, kCosine };

/// Optimizer and machine settings shared by every compile and training run.
/// Defaults are the on-device fine-tuning setup: SGD with momentum 0.9,
/// lr 5e-3, weight decay 1e-3, effective batch 8 built from single-sample
/// micro-batches, 30 epochs, 128 kB L1 and 1.5 MB L2.
struct TrainingConfig {
  std::int64_t micro_batch = 1;
  std::int64_t effective_batch = 8;
  double learning_rate = 5e-3;
  double momentum = 0.9;
  double weight_decay = 1e-3;
  std::int64_t epochs = 30;
  LrSchedule lr_schedule = LrSchedule::kCosine;
  std::int64_t l1_budget_bytes = 128 * 1024;
  std::int64_t l2_budget_bytes = 1536 * 1024;
  std::int64_t alignment_bytes = 4;

  /// Throws FormatError when an invariant is violated.
  void validate() const;
  std::int64_t accumulation_steps() const { return effective_batch / micro_batch; }
};

}  // namespace edgetrain
