// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "edgetrain/config.hpp"
#include "edgetrain/data.hpp"
#include "edgetrain/init.hpp"
#include "edgetrain/machine.hpp"
#include "edgetrain/program.hpp"

namespace edgetrain {

struct EpochRecord {
  std::int64_t epoch = 0;
  double lr = 0.0;
  /// Mean micro-batch loss over the epoch.
  double loss = 0.0;
  /// Accuracy on the training set after the epoch; NaN unless requested.
  double accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct FitOptions {
  std::uint64_t seed = 0;
  bool evaluate_each_epoch = false;
  /// Stop after the first epoch whose training accuracy reaches this value
  /// (implies evaluate_each_epoch).
  double stop_at_accuracy = std::numeric_limits<double>::infinity();
};

/// Learning rate of `epoch` under the configured schedule.
double epoch_learning_rate(const TrainingConfig& cfg, std::int64_t epoch);

/// Trains one strategy of a forward model on the simulated machine and
/// evaluates with the untiled reference forward pass. no-ft compiles
/// nothing and never changes its parameters.
class Trainer {
 public:
  /// Throws CompileError when the strategy does not fit the budgets.
  Trainer(const Graph& forward, Strategy strategy, const TrainingConfig& cfg, std::int64_t bn_batch = 8);
  ~Trainer();
  Trainer(Trainer&&) noexcept;

  /// Parameters are matched by name; unknown names are ignored.
  void set_parameters(const TensorMap& params);
  TensorMap parameters() const;

  /// epochs x (seeded shuffle, micro-batches, update every effective
  /// batch). Each epoch drops the tail that does not fill an effective
  /// batch. Throws FormatError for an empty or mis-shaped dataset.
  std::vector<EpochRecord> fit(const Dataset& train, const FitOptions& options = {});

  /// Fraction of samples whose argmax logit equals the label. Batch-norm
  /// models are evaluated with batch statistics over consecutive groups of
  /// the compiled batch size; the final group is padded by repetition.
  double evaluate(const Dataset& data) const;

  Strategy strategy() const { return strategy_; }
  const Graph& forward() const { return sg_.forward; }
  const TrainingConfig& config() const { return sg_.cfg; }
  bool trains() const { return machine_ != nullptr; }
  /// Null for no-ft.
  const Program* program() const { return program_.get(); }
  MachineStats stats() const;
  std::int64_t trainable_parameters() const;

 private:
  void check(const Dataset& d) const;

  Strategy strategy_;
  StrategyGraph sg_;
  std::unique_ptr<Program> program_;
  std::unique_ptr<Machine> machine_;
  TensorMap params_;
  std::string input_;
  std::string labels_;
  std::string logits_;
};

struct ProtocolOptions {
  Strategy strategy = Strategy::kEdge;
  TrainingConfig cfg;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::int64_t bn_batch = 8;
  /// Sessions used by the longitudinal protocol; 0 takes all of them.
  std::int64_t sessions = 0;
};

struct SessionResult {
  std::int64_t session = 0;
  std::int64_t train_samples = 0;
  std::int64_t test_samples = 0;
  /// Test accuracy of the incoming parameters, before any adaptation.
  double accuracy_before = 0.0;
  double accuracy = 0.0;
  /// Loss of the last epoch; NaN when the session did not train.
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  std::vector<EpochRecord> trace;
};

struct ProtocolResult {
  std::vector<SessionResult> sessions;
  std::int64_t trainable_parameters = 0;
  std::int64_t peak_l1 = 0;
  std::int64_t peak_l2 = 0;
  std::int64_t epochs = 0;
  /// Summed over every machine the protocol ran.
  MachineStats totals;
};

/// Day-1 calibration: starting from seeded initial parameters, trains the
/// strategy on the first `train_fraction` of session 0 (temporal order)
/// and tests on the rest.
ProtocolResult run_day1(const Graph& forward, const Dataset& data, const ProtocolOptions& options);

/// Session 0 is calibrated as in run_day1 with edge-ft (full-ft-bn keeps its
/// own batch-norm model). Every later session first tests the carried
/// parameters, then adapts them with the chosen strategy on its first
/// `train_fraction` and tests again; no-ft never adapts.
ProtocolResult run_longitudinal(const Graph& forward, const Dataset& data, const ProtocolOptions& options);

/// metric,value rows: peak_l1, peak_l2, dma_bytes, flops, epochs,
/// final_loss, final_acc.
std::string metrics_csv(const ProtocolResult& r);
std::string format_protocol(const ProtocolResult& r, Strategy strategy);

}  // namespace edgetrain
