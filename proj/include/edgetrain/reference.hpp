// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "edgetrain/graph.hpp"

namespace edgetrain {

/// Untiled interpreter: every node runs as a single tile over whole
/// tensors held in host memory. Instantiated for float and double.
/// Fused gradient and undecomposed normalization nodes are split on
/// construction, so any graph the front end produces is accepted.
template <class T>
class Interpreter {
 public:
  explicit Interpreter(const Graph& g);

  const Graph& graph() const { return graph_; }

  /// Zeroed on construction. Throws FormatError for an unknown name or a
  /// size mismatch.
  void set(const std::string& name, const std::vector<T>& values);
  const std::vector<T>& get(const std::string& name) const;
  std::vector<T>& at(const std::string& name);

  /// Runs every node once; update nodes only when the accumulation guard
  /// fires. Returns the operation count of the step.
  std::uint64_t micro_step(double lr);

  /// Runs only the nodes `target` depends on.
  std::uint64_t compute(const std::string& target);

  std::int64_t micro_steps() const { return micro_steps_; }
  std::int64_t updates() const { return updates_; }

 private:
  std::uint64_t run_node(std::size_t index, double lr);

  Graph graph_;
  std::vector<std::size_t> order_;
  std::map<std::string, std::vector<T>> values_;
  std::int64_t micro_steps_ = 0;
  std::int64_t updates_ = 0;
};

extern template class Interpreter<float>;
extern template class Interpreter<double>;

}  // namespace edgetrain
