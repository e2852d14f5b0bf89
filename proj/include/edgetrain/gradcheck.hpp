// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "edgetrain/config.hpp"
#include "edgetrain/graph.hpp"
#include "edgetrain/program.hpp"

namespace edgetrain {

struct GradcheckOptions {
  std::uint64_t seed = 0;
  /// Bound on the 32-bit compiled pipeline's error.
  double tolerance = 1e-3;
  /// Bound on the 64-bit reference interpreter's error.
  double tolerance64 = 1e-7;
  /// Elements probed per tensor (all when the tensor is smaller); 0 probes
  /// every element.
  std::int64_t samples_per_tensor = 6;
  /// Relative step of the central differences. Smaller steps drown in the
  /// rounding of the long reductions inside the loss; larger ones cross
  /// more ReLU kinks.
  double step = 1e-5;
  /// Fault injection: called on each analytic gradient of the compiled
  /// pipeline before comparison.
  std::function<void(const std::string& tensor, std::vector<double>& grad)> corrupt;
};

struct GradcheckRow {
  std::string tensor;
  /// Node that produces the tensor's gradient.
  std::string layer;
  std::int64_t probed = 0;
  /// Candidates skipped because the difference quotient straddles a kink
  /// (ReLU at zero, max-pool tie) and does not converge.
  std::int64_t kinks = 0;
  /// max |analytic - fd| / max |fd| over the probed elements.
  double error32 = 0.0;
  double error64 = 0.0;
  bool pass = false;
};

struct GradcheckResult {
  std::vector<GradcheckRow> rows;
  double worst32 = 0.0;
  double worst64 = 0.0;
  bool pass = true;
};

/// Central differences of the training loss, evaluated in 64-bit with the
/// reference interpreter, against the parameter gradients of (a) the
/// compiled, tiled 32-bit pipeline on the simulated machine and (b) the
/// 64-bit reference interpreter. Uses one micro-batch of seeded random
/// inputs and seeded initial parameters; updates are suppressed.
GradcheckResult gradcheck(const Graph& forward, Strategy strategy, const TrainingConfig& cfg,
                          const GradcheckOptions& options = {});

std::string format_gradcheck(const GradcheckResult& r, const GradcheckOptions& options);
std::string gradcheck_csv(const GradcheckResult& r);

}  // namespace edgetrain
