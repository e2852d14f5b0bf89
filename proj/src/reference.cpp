// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgetrain/reference.hpp"

#include <set>

#include "edgetrain/autodiff.hpp"
#include "edgetrain/error.hpp"
#include "edgetrain/executor.hpp"
#include "edgetrain/geometry.hpp"

namespace edgetrain {

template <class T>
Interpreter<T>::Interpreter(const Graph& g)
    : graph_(decompose_normalization(decompose_gradients(g))), order_(validate_and_sort(graph_)) {
  for (const auto& t : graph_.tensors()) values_[t.name].assign(static_cast<std::size_t>(t.numel()), T(0));
}

template <class T>
void Interpreter<T>::set(const std::string& name, const std::vector<T>& values) {
  auto it = values_.find(name);
  if (it == values_.end()) throw FormatError("execsim", "unknown tensor '" + name + "'");
  if (it->second.size() != values.size())
    throw FormatError("execsim", "tensor '" + name + "' holds " + std::to_string(it->second.size()) +
                                     " values, got " + std::to_string(values.size()));
  it->second = values;
}

template <class T>
const std::vector<T>& Interpreter<T>::get(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw FormatError("execsim", "unknown tensor '" + name + "'");
  return it->second;
}

template <class T>
std::vector<T>& Interpreter<T>::at(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw FormatError("execsim", "unknown tensor '" + name + "'");
  return it->second;
}

template <class T>
std::uint64_t Interpreter<T>::run_node(std::size_t index, double lr) {
  const NodeGeometry geo = geometry_for(graph_, index);
  TileArgs<T> args;
  args.a = 0;
  args.b = geo.iter_length;
  args.lr = lr;
  for (const auto& op : geo.operands) args.operands.push_back({values_.at(op.tensor).data(), 0, op.length});
  std::vector<WelfordState> welford(static_cast<std::size_t>(geo.double_scratch_bytes / sizeof(WelfordState)));
  std::vector<double> sums(static_cast<std::size_t>(geo.double_scratch_bytes / 8));
  std::vector<T> im2col(static_cast<std::size_t>(geo.im2col_bytes_per_unit / 4 * geo.iter_length));
  args.welford = welford;
  args.sums = sums;
  args.im2col = im2col;
  std::uint64_t flops = 0;
  for (int p = 0; p < geo.passes; ++p) {
    args.pass = p;
    flops += execute_tile<T>(graph_, geo, args);
  }
  return flops;
}

template <class T>
std::uint64_t Interpreter<T>::micro_step(double lr) {
  ++micro_steps_;
  bool fired = false;
  std::uint64_t flops = 0;
  for (std::size_t i : order_) {
    const Node& n = graph_.nodes[i];
    if (n.kind == OpKind::kSGDMomentumUpdate) {
      if (micro_steps_ % n.attrs.accumulate_steps != 0) continue;
      fired = true;
    }
    flops += run_node(i, lr);
  }
  if (fired) ++updates_;
  return flops;
}

template <class T>
std::uint64_t Interpreter<T>::compute(const std::string& target) {
  std::set<std::string> needed{target};
  std::vector<bool> run(graph_.nodes.size(), false);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const Node& n = graph_.nodes[*it];
    if (n.kind == OpKind::kGradAccumulate || n.kind == OpKind::kSGDMomentumUpdate) continue;
    bool produces = false;
    for (const auto& o : n.outputs) produces = produces || (!o.empty() && needed.count(o));
    if (!produces) continue;
    run[*it] = true;
    for (const auto& in : n.inputs) needed.insert(in);
  }
  std::uint64_t flops = 0;
  for (std::size_t i : order_)
    if (run[i]) flops += run_node(i, 0.0);
  return flops;
}

template class Interpreter<float>;
template class Interpreter<double>;

}  // namespace edgetrain
