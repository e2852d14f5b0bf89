// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "edgetrain/graph.hpp"

namespace edgetrain {

using TensorMap = std::map<std::string, std::vector<float>>;

/// Seeded initialization of every parameter of `g`: uniform He-style
/// fan-in scaling for weights, zero biases and betas, unit gammas.
TensorMap init_parameters(const Graph& g, std::uint64_t seed);

}  // namespace edgetrain
