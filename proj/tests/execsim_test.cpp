// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "edgetrain/error.hpp"
#include "edgetrain/init.hpp"
#include "edgetrain/machine.hpp"
#include "edgetrain/program.hpp"
#include "edgetrain/reference.hpp"
#include "support/equivalence.hpp"
#include "support/model_builder.hpp"
#include "support/random_graph.hpp"
#include "support/tensors.hpp"

namespace edgetrain {
namespace {

using testing::compare_with_reference;
using testing::ModelBuilder;
using testing::random_inputs;
using testing::rel_err;

Graph small_gn(std::int64_t t = 40) {
  return ModelBuilder(1, 2, t).conv(4, 5, 1, 2).group_norm(2).relu().max_pool(2).conv(6, 3, 2, 1).group_norm(3)
      .relu().avg_pool(3, 2).linear(3).build();
}

TrainingConfig small_cfg(std::int64_t l1, std::int64_t eff = 8) {
  TrainingConfig cfg;
  cfg.micro_batch = 1;
  cfg.effective_batch = eff;
  cfg.l1_budget_bytes = l1;
  return cfg;
}

// Just above the smallest feasible budget, so most nodes split into tiles.
std::int64_t tight_budget(const Graph& g) {
  const auto [lo, hi] = testing::l1_budget_range(g);
  return lo + (hi - lo) / 16;
}

Graph training_of(const Graph& fwd, const TrainingConfig& cfg, BuildOptions opts = {}) {
  return build_frontend(fwd, LossSpec{default_logits(fwd)}, cfg, opts);
}

Program compile_loose(const Graph& g, const TrainingConfig& cfg, bool retain = false) {
  CompileOptions o;
  o.retain_all = retain;
  o.enforce_l2_budget = false;
  return compile(g, cfg, o);
}

void load(Machine& m, const TensorMap& values) {
  for (const auto& [name, v] : values) m.write(name, v);
}

TEST(ExecSim, InferenceMatchesReferenceOnBundledModel) {
  const Graph fwd = load_model(std::string(EDGETRAIN_MODELS_DIR) + "/mi-bminet-like.model");
  const StrategyGraph sg = prepare_strategy(fwd, Strategy::kNoFineTuning, TrainingConfig{});
  const Program p = compile_loose(sg.graph, sg.cfg);
  Machine m(p);
  Interpreter<float> ref(sg.graph);
  std::mt19937_64 rng(3);
  TensorMap values = init_parameters(sg.graph, 3);
  values.merge(random_inputs(sg.graph, rng));
  load(m, values);
  for (const auto& [k, v] : values) ref.set(k, v);
  m.run_micro_step(0.0);
  ref.micro_step(0.0);
  const std::string logits = default_logits(sg.graph);
  EXPECT_LE(rel_err(m.read(logits), ref.get(logits)), 1e-6);
}

TEST(ExecSim, TrainingMicroStepMatchesReference) {
  const Graph fwd = load_model(std::string(EDGETRAIN_MODELS_DIR) + "/mi-bminet-like.model");
  const StrategyGraph sg = prepare_strategy(fwd, Strategy::kEdge, TrainingConfig{});
  const auto e = compare_with_reference(sg.graph, sg.cfg, 11);
  EXPECT_LE(e.worst_rel, 1e-6) << e.worst_tensor;
  EXPECT_TRUE(e.inexact_dx.empty());
}

TEST(ExecSim, RandomGraphsMatchReference) {
  std::mt19937_64 rng(2026);
  for (int i = 0; i < 25; ++i) {
    auto rc = testing::random_case(rng);
    rc.cfg.l1_budget_bytes = testing::random_l1_budget(rc.training, rng);
    const int steps = static_cast<int>(rc.cfg.accumulation_steps()) + 1;
    const auto e = compare_with_reference(rc.training, rc.cfg, 100 + i, steps);
    EXPECT_LE(e.worst_rel, 1e-6) << "case " << i << " tensor " << e.worst_tensor;
    EXPECT_TRUE(e.inexact_dx.empty()) << "case " << i << " " << (e.inexact_dx.empty() ? "" : e.inexact_dx[0]);
    EXPECT_EQ(e.dma_simulated, e.dma_estimated) << "case " << i;
    EXPECT_EQ(e.flops_simulated, e.flops_closed_form) << "case " << i;
    EXPECT_EQ(e.l1_high_water, e.l1_peak) << "case " << i;
    EXPECT_EQ(e.updates, steps / rc.cfg.accumulation_steps()) << "case " << i;
  }
}

TEST(ExecSim, HighWaterMarksEqualPlanPeaks) {
  const Graph g = training_of(small_gn(), small_cfg(4096));
  const Program p = compile_loose(g, small_cfg(tight_budget(g)));
  ASSERT_GT(p.schedule.steps.size(), 0u);
  Machine m(p);
  std::mt19937_64 rng(1);
  load(m, init_parameters(g, 1));
  load(m, random_inputs(g, rng));
  m.run_micro_step(0.01);
  EXPECT_EQ(m.stats().l1_high_water, p.tiling.peak_l1);
  EXPECT_EQ(m.stats().l2_high_water, p.memory.peak);
}

TEST(ExecSim, LedgersAreExactAcrossUpdates) {
  TrainingConfig cfg = small_cfg(4096, 4);
  const Graph g = training_of(small_gn(), cfg);
  cfg.l1_budget_bytes = tight_budget(g);
  const Program p = compile_loose(g, cfg);
  Machine m(p);
  std::mt19937_64 rng(5);
  load(m, init_parameters(g, 5));
  for (int s = 0; s < 9; ++s) {
    load(m, random_inputs(g, rng));
    m.run_micro_step(0.01);
  }
  EXPECT_EQ(m.stats().updates, 2);
  EXPECT_EQ(m.stats().dma_bytes(), p.tiling.dma.total(9, 2));
  EXPECT_EQ(m.stats().flops, graph_flops(p.graph).total(9, 2));
}

TEST(ExecSim, NaNHaltsWithProducingStep) {
  const Graph g = training_of(small_gn(), small_cfg(4096));
  const Program p = compile_loose(g, small_cfg(4096));
  Machine m(p);
  std::mt19937_64 rng(1);
  load(m, init_parameters(g, 1));
  TensorMap in = random_inputs(g, rng);
  in.at("x")[7] = std::numeric_limits<float>::quiet_NaN();
  load(m, in);
  try {
    m.run_micro_step(0.01);
    FAIL() << "expected a NaN halt";
  } catch (const NumericalError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("NaN"), std::string::npos) << what;
    EXPECT_NE(what.find("step "), std::string::npos) << what;
    EXPECT_NE(what.find("l0"), std::string::npos) << what;
  }
}

TEST(ExecSim, DroppedDmaOutIsDetectedAsPoisonRead) {
  const Graph g = training_of(small_gn(), small_cfg(4096));
  Program p = compile_loose(g, small_cfg(4096));
  auto& steps = p.schedule.steps;
  const auto it = std::find_if(steps.begin(), steps.end(),
                               [](const Step& s) { return s.kind == StepKind::kDmaOut && s.buffer == "l0.y"; });
  ASSERT_NE(it, steps.end());
  steps.erase(it);
  Machine m(p);
  std::mt19937_64 rng(1);
  load(m, init_parameters(g, 1));
  load(m, random_inputs(g, rng));
  EXPECT_THROW(m.run_micro_step(0.01), NumericalError);
}

TEST(ExecSim, MissingDmaInIsDetected) {
  const Graph g = training_of(small_gn(), small_cfg(4096));
  Program p = compile_loose(g, small_cfg(4096));
  auto& steps = p.schedule.steps;
  const auto it = std::find_if(steps.begin(), steps.end(), [](const Step& s) { return s.kind == StepKind::kDmaIn; });
  ASSERT_NE(it, steps.end());
  steps.erase(it);
  Machine m(p);
  std::mt19937_64 rng(1);
  load(m, init_parameters(g, 1));
  load(m, random_inputs(g, rng));
  EXPECT_THROW(m.run_micro_step(0.01), NumericalError);
}

TEST(ExecSim, AccumulationGuardUpdatesOnEighthStep) {
  const TrainingConfig cfg = small_cfg(2048, 8);
  const Graph g = training_of(small_gn(), cfg);
  const Program p = compile_loose(g, cfg, true);
  Machine m(p);
  std::mt19937_64 rng(9);
  const TensorMap init = init_parameters(g, 9);
  load(m, init);
  for (int s = 1; s <= 8; ++s) {
    load(m, random_inputs(g, rng));
    m.run_micro_step(0.05);
    bool changed = false;
    for (const auto& [name, v] : init) changed = changed || m.read(name) != v;
    EXPECT_EQ(changed, s == 8) << "micro-step " << s;
  }
  EXPECT_EQ(m.stats().updates, 1);
}

TEST(ExecSim, FrozenParametersStayBitIdentical) {
  const Graph fwd = small_gn();
  TrainingConfig cfg = small_cfg(4096, 1);
  BuildOptions opts;
  opts.frozen = all_but_last_linear(fwd);
  const Graph g = training_of(fwd, cfg, opts);
  const Program p = compile_loose(g, cfg, true);
  Machine m(p);
  std::mt19937_64 rng(4);
  const TensorMap init = init_parameters(g, 4);
  load(m, init);
  load(m, random_inputs(g, rng));
  m.run_micro_step(0.05);
  for (const auto& [name, v] : init) {
    const bool frozen = std::find(opts.frozen.begin(), opts.frozen.end(), name) != opts.frozen.end();
    if (frozen) {
      EXPECT_EQ(m.read(name), v) << name;
    } else if (name.find(".w") != std::string::npos) {
      EXPECT_NE(m.read(name), v) << name;
    }
  }
}

TEST(ExecSim, SeededRunsAreBitIdentical) {
  TrainingConfig cfg = small_cfg(4096, 2);
  const Graph g = training_of(small_gn(), cfg);
  cfg.l1_budget_bytes = tight_budget(g);
  const Program p = compile_loose(g, cfg);
  auto run = [&] {
    Machine m(p);
    std::mt19937_64 rng(21);
    load(m, init_parameters(g, 21));
    for (int s = 0; s < 4; ++s) {
      load(m, random_inputs(g, rng));
      m.run_micro_step(0.05);
    }
    TensorMap out;
    for (const auto& t : g.tensors())
      if (t.kind == TensorKind::kParameter) out[t.name] = m.read(t.name);
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(Reference, DoubleAndFloatAgreeOnBundledModels) {
  for (const char* model : {"mi-bminet-like.model", "epidenet-like.model"}) {
    const Graph fwd = load_model(std::string(EDGETRAIN_MODELS_DIR) + "/" + model);
    const StrategyGraph sg = prepare_strategy(fwd, Strategy::kEdge, TrainingConfig{});
    Interpreter<float> f(sg.graph);
    Interpreter<double> d(sg.graph);
    std::mt19937_64 rng(8);
    TensorMap values = init_parameters(sg.graph, 8);
    values.merge(random_inputs(sg.graph, rng));
    for (const auto& [k, v] : values) {
      f.set(k, v);
      d.set(k, std::vector<double>(v.begin(), v.end()));
    }
    f.micro_step(0.0);
    d.micro_step(0.0);
    for (const auto& b : grad_bindings(sg.graph)) {
      if (sg.graph.tensor(b.tensor).kind != TensorKind::kParameter) continue;
      EXPECT_LE(rel_err(f.get(b.gradient), d.get(b.gradient)), 1e-3) << model << " " << b.gradient;
    }
  }
}

TEST(Reference, IsDeterministic) {
  const TrainingConfig cfg = small_cfg(4096, 1);
  const Graph g = training_of(small_gn(), cfg);
  auto run = [&] {
    Interpreter<float> r(g);
    std::mt19937_64 rng(2);
    for (const auto& [k, v] : init_parameters(g, 2)) r.set(k, v);
    for (const auto& [k, v] : random_inputs(g, rng)) r.set(k, v);
    r.micro_step(0.1);
    r.micro_step(0.1);
    return r.get("l0.w");
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace edgetrain
