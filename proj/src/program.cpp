// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgetrain/program.hpp"

#include <sstream>

#include "edgetrain/autodiff.hpp"
#include "edgetrain/error.hpp"

namespace edgetrain {

Program compile(const Graph& g, const TrainingConfig& cfg, const CompileOptions& options) {
  cfg.validate();
  Program p;
  p.graph = g;
  p.cfg = cfg;
  p.order = validate_and_sort(p.graph);
  p.tiling = solve_tiling(p.graph, p.order, cfg);
  p.schedule = lower(p.graph, p.tiling);
  p.ranges = compute_lifetimes(p.graph, p.schedule, cfg.alignment_bytes);
  if (options.retain_all)
    p.ranges = retain_all(std::move(p.ranges), static_cast<std::int64_t>(p.schedule.steps.size()));
  p.memory = allocate_static(p.ranges, cfg.alignment_bytes);
  if (options.enforce_l2_budget) check_budget(p.memory, p.ranges, cfg.l2_budget_bytes);
  return p;
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kNoFineTuning: return "no-ft";
    case Strategy::kLinearProbe: return "lp";
    case Strategy::kFullBatchNorm: return "full-ft-bn";
    case Strategy::kEdge: return "edge-ft";
  }
  return "?";
}

Strategy strategy_from_name(std::string_view name) {
  for (Strategy s : {Strategy::kNoFineTuning, Strategy::kLinearProbe, Strategy::kFullBatchNorm, Strategy::kEdge})
    if (strategy_name(s) == name) return s;
  throw FormatError("cli", "unknown strategy '" + std::string(name) + "' (expected no-ft, lp, full-ft-bn or edge-ft)");
}

StrategyGraph prepare_strategy(const Graph& forward, Strategy s, TrainingConfig cfg, std::int64_t bn_batch) {
  StrategyGraph out;
  const LossSpec loss{default_logits(forward)};
  switch (s) {
    case Strategy::kNoFineTuning:
      out.forward = with_batch(forward, 1);
      out.graph = decompose_normalization(out.forward);
      out.trains = false;
      cfg.micro_batch = 1;
      break;
    case Strategy::kLinearProbe:
    case Strategy::kEdge: {
      out.forward = with_batch(forward, 1);
      cfg.micro_batch = 1;
      BuildOptions opts;
      if (s == Strategy::kLinearProbe) opts.frozen = all_but_last_linear(out.forward);
      out.graph = build_frontend(out.forward, loss, cfg, opts);
      break;
    }
    case Strategy::kFullBatchNorm:
      out.forward = substitute_normalization(with_batch(forward, bn_batch), OpKind::kBatchNorm);
      cfg.micro_batch = bn_batch;
      cfg.effective_batch = bn_batch;
      out.graph = build_frontend(out.forward, loss, cfg);
      break;
  }
  out.cfg = cfg;
  return out;
}

PeakReport peak_report(const Graph& forward, Strategy s, const TrainingConfig& cfg, std::int64_t bn_batch) {
  const StrategyGraph sg = prepare_strategy(forward, s, cfg, bn_batch);
  CompileOptions opts;
  opts.enforce_l2_budget = false;
  const Program p = compile(sg.graph, sg.cfg, opts);
  PeakReport r;
  r.strategy = s;
  r.peak_l1 = p.tiling.peak_l1;
  r.peak_l2 = p.memory.peak;
  r.lower_bound_l2 = liveness_lower_bound(p.ranges);
  r.l1_budget = sg.cfg.l1_budget_bytes;
  r.l2_budget = sg.cfg.l2_budget_bytes;
  for (int c = 0; c < kMemClassCount; ++c) r.class_peak[c] = class_peak(p.ranges, {static_cast<MemClass>(c)}).bytes;
  r.activation_gradient_peak = class_peak(p.ranges, {MemClass::kActivations, MemClass::kGradients}).bytes;
  for (const auto& b : grad_bindings(p.graph))
    if (p.graph.tensor(b.tensor).kind == TensorKind::kParameter) r.trainable_parameters += p.graph.tensor(b.tensor).numel();
  r.flops = graph_flops(p.graph);
  r.dma = p.tiling.dma;
  return r;
}

std::string format_report(const PeakReport& r) {
  std::ostringstream os;
  os << "strategy " << strategy_name(r.strategy) << '\n'
     << "  peak_l1 " << r.peak_l1 << " / " << r.l1_budget << '\n'
     << "  peak_l2 " << r.peak_l2 << " / " << r.l2_budget << " (liveness bound " << r.lower_bound_l2 << ")\n";
  for (int c = 0; c < kMemClassCount; ++c)
    os << "  " << mem_class_name(static_cast<MemClass>(c)) << ' ' << r.class_peak[c] << '\n';
  os << "  activations+gradients " << r.activation_gradient_peak << '\n'
     << "  trainable_parameters " << r.trainable_parameters << '\n'
     << "  flops_per_step " << r.flops.streaming << " flops_per_update " << r.flops.update << '\n'
     << "  dma_per_step " << r.dma.streaming << " dma_per_update " << r.dma.update << '\n'
     << "  fits " << (r.fits() ? "yes" : "no") << '\n';
  return os.str();
}

}  // namespace edgetrain
