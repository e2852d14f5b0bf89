// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgetrain/init.hpp"

#include <cmath>
#include <random>

namespace edgetrain {

TensorMap init_parameters(const Graph& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  // Parameter roles follow their consumers, not their names.
  std::map<std::string, std::pair<OpKind, std::size_t>> role;
  for (const Node& n : g.nodes)
    for (std::size_t i = 0; i < n.inputs.size(); ++i) role.emplace(n.inputs[i], std::make_pair(n.kind, i));

  TensorMap out;
  for (const auto& t : g.tensors()) {
    if (t.kind != TensorKind::kParameter) continue;
    std::vector<float> v(static_cast<std::size_t>(t.numel()), 0.0f);
    auto it = role.find(t.name);
    const OpKind kind = it == role.end() ? OpKind::kReLU : it->second.first;
    const std::size_t slot = it == role.end() ? 0 : it->second.second;
    const bool fused = kind == OpKind::kGroupNorm || kind == OpKind::kBatchNorm;
    const bool split = kind == OpKind::kGroupNormNormalize || kind == OpKind::kBatchNormNormalize;
    if (fused || split) {
      // gamma follows the input (and mean/var once statistics are split out)
      if (slot == (fused ? 1u : 3u)) std::fill(v.begin(), v.end(), 1.0f);
    } else if (slot == 1 && t.dims.size() >= 2) {
      std::int64_t fan_in = 1;
      for (std::size_t d = 1; d < t.dims.size(); ++d) fan_in *= t.dims[d];
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (auto& x : v) x = static_cast<float>(u(rng));
    }
    out.emplace(t.name, std::move(v));
  }
  return out;
}

}  // namespace edgetrain
