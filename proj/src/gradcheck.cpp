// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgetrain/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "edgetrain/error.hpp"
#include "edgetrain/init.hpp"
#include "edgetrain/machine.hpp"
#include "edgetrain/reference.hpp"

namespace edgetrain {
namespace {

constexpr const char* kOrigin = "gradcheck";

struct Target {
  std::string param;
  std::string accumulator;
  std::string layer;
};

std::vector<Target> targets(const Graph& g) {
  std::vector<Target> out;
  for (const Node& n : g.nodes) {
    if (n.kind != OpKind::kGradAccumulate) continue;
    Target t{n.origin, n.inputs[1], {}};
    for (const Node& p : g.nodes)
      if (p.kind != OpKind::kGradAccumulate &&
          std::find(p.outputs.begin(), p.outputs.end(), n.inputs[0]) != p.outputs.end())
        t.layer = p.id;
    out.push_back(std::move(t));
  }
  return out;
}

TensorMap random_inputs(const Graph& g, std::mt19937_64& rng) {
  std::int64_t classes = 2;
  for (const Node& n : g.nodes)
    if (n.kind == OpKind::kLossGrad) classes = g.tensor(n.inputs[0]).dims[1];
  TensorMap in;
  for (const auto& t : g.tensors()) {
    if (t.kind != TensorKind::kInput) continue;
    std::vector<float> v(static_cast<std::size_t>(t.numel()));
    if (t.dims.size() == 1) {
      std::uniform_int_distribution<std::int64_t> u(0, classes - 1);
      for (auto& x : v) x = static_cast<float>(u(rng));
    } else {
      std::uniform_real_distribution<float> u(-1.0f, 1.0f);
      for (auto& x : v) x = u(rng);
    }
    in.emplace(t.name, std::move(v));
  }
  return in;
}

std::vector<double> widen(const std::vector<float>& v) { return {v.begin(), v.end()}; }

double scaled_error(const std::vector<double>& analytic, const std::vector<double>& fd,
                    const std::vector<std::size_t>& probes) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < probes.size(); ++k) {
    num = std::max(num, std::abs(analytic[probes[k]] - fd[k]));
    den = std::max(den, std::abs(fd[k]));
  }
  return den > 0.0 ? num / den : num;
}

}  // namespace

GradcheckResult gradcheck(const Graph& forward, Strategy strategy, const TrainingConfig& cfg,
                          const GradcheckOptions& options) {
  if (strategy == Strategy::kNoFineTuning) throw FormatError(kOrigin, "no-ft has no gradients to check");
  StrategyGraph sg = prepare_strategy(forward, strategy, cfg);
  // One micro-step that never reaches the update guard leaves each
  // parameter's gradient in its accumulator.
  for (Node& n : sg.graph.nodes)
    if (n.kind == OpKind::kSGDMomentumUpdate) n.attrs.accumulate_steps = std::int64_t{1} << 40;
  const Graph& g = sg.graph;

  std::mt19937_64 rng(options.seed);
  const TensorMap params = init_parameters(g, options.seed);
  const TensorMap inputs = random_inputs(g, rng);

  CompileOptions copts;
  copts.enforce_l2_budget = false;
  const Program program = compile(g, sg.cfg, copts);
  Machine machine(program);
  Interpreter<double> exact(g);
  Interpreter<double> probe(g);
  for (const auto* m : {&params, &inputs})
    for (const auto& [name, v] : *m) {
      machine.write(name, v);
      exact.set(name, widen(v));
      probe.set(name, widen(v));
    }
  machine.run_micro_step(sg.cfg.learning_rate);
  exact.micro_step(sg.cfg.learning_rate);

  auto loss_at = [&](std::vector<double>& p, std::size_t i, double value) {
    const double saved = p[i];
    p[i] = value;
    probe.compute("loss");
    p[i] = saved;
    return probe.get("loss")[0];
  };

  GradcheckResult result;
  for (const Target& t : targets(g)) {
    GradcheckRow row;
    row.tensor = t.param;
    row.layer = t.layer;
    std::vector<double> a32 = widen(machine.read(t.accumulator));
    const std::vector<double>& a64 = exact.get(t.accumulator);
    if (options.corrupt) options.corrupt(t.param, a32);

    // Probe elements in a seeded random order. A probe whose difference
    // quotient straddles a kink is replaced by the next candidate, up to
    // four candidates per requested probe.
    std::vector<std::size_t> order(a64.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t want = order.size();
    if (options.samples_per_tensor > 0 && static_cast<std::size_t>(options.samples_per_tensor) < order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      want = static_cast<std::size_t>(options.samples_per_tensor);
    }
    double scale = 0.0;
    for (const double v : a64) scale = std::max(scale, std::abs(v));

    std::vector<double>& p = probe.at(t.param);
    std::vector<std::size_t> probes;
    std::vector<double> fd;
    for (std::size_t k = 0; k < order.size() && probes.size() < want && k < 4 * want; ++k) {
      const std::size_t i = order[k];
      const double h = options.step * std::max(1.0, std::abs(p[i]));
      const double c1 = (loss_at(p, i, p[i] + h) - loss_at(p, i, p[i] - h)) / (2.0 * h);
      // A kink inside [-h, h] shows up as a quotient that moves when the
      // step shrinks; smooth points agree to O(h^2).
      if (std::abs(c1 - a64[i]) > 0.1 * options.tolerance64 * scale) {
        const double c2 = (loss_at(p, i, p[i] + h / 4) - loss_at(p, i, p[i] - h / 4)) / (h / 2);
        if (std::abs(c1 - c2) > 0.1 * options.tolerance64 * std::max(scale, std::abs(c1))) {
          ++row.kinks;
          continue;
        }
      }
      probes.push_back(i);
      fd.push_back(c1);
    }
    row.probed = static_cast<std::int64_t>(probes.size());
    row.error32 = scaled_error(a32, fd, probes);
    row.error64 = scaled_error(a64, fd, probes);
    row.pass = row.error32 <= options.tolerance && row.error64 <= options.tolerance64 && row.probed > 0;
    result.worst32 = std::max(result.worst32, row.error32);
    result.worst64 = std::max(result.worst64, row.error64);
    result.pass = result.pass && row.pass;
    result.rows.push_back(std::move(row));
  }
  if (result.rows.empty()) throw FormatError(kOrigin, "strategy has no trainable parameters");
  return result;
}

std::string format_gradcheck(const GradcheckResult& r, const GradcheckOptions& options) {
  std::size_t width = 6;
  for (const auto& row : r.rows) width = std::max(width, row.tensor.size() + 2);
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "tensor" << std::setw(16) << "layer" << std::setw(8)
     << "probed" << std::setw(7) << "kinks" << std::setw(13) << "err32" << std::setw(13) << "err64" << "result\n";
  os << std::scientific << std::setprecision(3);
  for (const auto& row : r.rows)
    os << std::setw(static_cast<int>(width)) << row.tensor << std::setw(16) << row.layer << std::setw(8) << row.probed
       << std::setw(7) << row.kinks << std::setw(13) << row.error32 << std::setw(13) << row.error64
       << (row.pass ? "pass" : "FAIL") << '\n';
  os << "worst err32 " << r.worst32 << " (tol " << options.tolerance << "), worst err64 " << r.worst64 << " (tol "
     << options.tolerance64 << "): " << (r.pass ? "pass" : "FAIL") << '\n';
  return os.str();
}

std::string gradcheck_csv(const GradcheckResult& r) {
  std::ostringstream os;
  os << std::setprecision(9);
  os << "tensor,layer,probed,kinks,err32,err64,pass\n";
  for (const auto& row : r.rows)
    os << row.tensor << ',' << row.layer << ',' << row.probed << ',' << row.kinks << ',' << row.error32 << ','
       << row.error64 << ',' << (row.pass ? 1 : 0) << '\n';
  return os.str();
}

}  // namespace edgetrain
