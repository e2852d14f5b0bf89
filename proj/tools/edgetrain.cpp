// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

// edgetrain: compile, train, gradcheck and report subcommands.
// Exit codes: 0 success, 1 compile infeasibility, 2 numerical check
// failure, 3 I/O or format error.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "edgetrain/data.hpp"
#include "edgetrain/error.hpp"
#include "edgetrain/gradcheck.hpp"
#include "edgetrain/program.hpp"
#include "edgetrain/train.hpp"

namespace {

using namespace edgetrain;

constexpr int kExitCompile = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitFormat = 3;

struct Shared {
  std::string model;
  std::uint64_t seed = 0;
  std::string strategy = "edge-ft";
  std::int64_t batch = 8;
  std::string format = "text";
  TrainingConfig cfg;
};

void add_shared(CLI::App* app, Shared& s) {
  app->add_option("--model", s.model, "model file (JSON graph)")->required();
  app->add_option("--seed", s.seed, "seed for initialization, data and shuffling");
  app->add_option("--l1-budget", s.cfg.l1_budget_bytes, "L1 scratchpad budget in bytes");
  app->add_option("--l2-budget", s.cfg.l2_budget_bytes, "L2 arena budget in bytes");
  app->add_option("--strategy", s.strategy, "no-ft, lp, full-ft-bn or edge-ft")
      ->check(CLI::IsMember({"no-ft", "lp", "full-ft-bn", "edge-ft"}));
  app->add_option("--batch", s.batch, "batch size of the full-ft-bn variant");
  app->add_option("--effective-batch", s.cfg.effective_batch, "samples per parameter update");
  app->add_option("--epochs", s.cfg.epochs, "epochs per training session");
  app->add_option("--lr", s.cfg.learning_rate, "peak learning rate");
  app->add_option("--alignment", s.cfg.alignment_bytes, "buffer alignment in bytes");
  app->add_option("--format", s.format, "report format")->check(CLI::IsMember({"text", "csv"}));
}

std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cli", "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("cli", "error writing '" + path.string() + "'");
}

std::string report_csv_header() {
  std::string h = "strategy,peak_l1,peak_l2,lower_bound_l2,l1_budget,l2_budget";
  for (int c = 0; c < kMemClassCount; ++c) h += "," + std::string(mem_class_name(static_cast<MemClass>(c)));
  return h + ",activation_gradient_peak,trainable_parameters,flops_per_step,dma_per_step,fits\n";
}

std::string report_csv_row(const PeakReport& r) {
  std::ostringstream os;
  os << strategy_name(r.strategy) << ',' << r.peak_l1 << ',' << r.peak_l2 << ',' << r.lower_bound_l2 << ','
     << r.l1_budget << ',' << r.l2_budget;
  for (const auto v : r.class_peak) os << ',' << v;
  os << ',' << r.activation_gradient_peak << ',' << r.trainable_parameters << ',' << r.flops.streaming << ','
     << r.dma.streaming << ',' << (r.fits() ? 1 : 0) << '\n';
  return os.str();
}

std::string memory_table(const std::string& csv) {
  std::istringstream in(csv);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (width.size() <= i) width.push_back(0);
      width[i] = std::max(width[i], r[i].size());
    }
  std::ostringstream os;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      // Numbers right-aligned, names left-aligned.
      const bool numeric = i >= 2 && i <= 5;
      os << (numeric ? std::right : std::left) << std::setw(static_cast<int>(width[i])) << r[i]
         << (i + 1 < r.size() ? "  " : "");
    }
    os << '\n';
  }
  return os.str();
}

int cmd_compile(const Shared& s, const std::string& out_dir) {
  const Graph fwd = load_model(s.model);
  const Strategy strategy = strategy_from_name(s.strategy);
  const StrategyGraph sg = prepare_strategy(fwd, strategy, s.cfg, s.batch);
  CompileOptions opts;
  opts.enforce_l2_budget = false;
  const Program p = compile(sg.graph, sg.cfg, opts);
  const PeakReport r = peak_report(fwd, strategy, s.cfg, s.batch);
  const std::string mem = memory_csv(p.graph, p.tiling, p.schedule, p.memory);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_file(std::filesystem::path(out_dir) / "tiling.txt", format_tiling(p.graph, p.tiling));
    write_file(std::filesystem::path(out_dir) / "schedule.txt", format_schedule(p.graph, p.tiling, p.schedule));
    write_file(std::filesystem::path(out_dir) / "memory.csv", mem);
  }
  if (s.format == "csv") {
    std::cout << mem;
  } else {
    std::cout << format_tiling(p.graph, p.tiling) << format_report(r);
  }
  if (!r.fits()) {
    std::ostringstream os;
    os << "strategy " << strategy_name(strategy) << " does not fit: peak L2 " << r.peak_l2 << " bytes against a budget of "
       << r.l2_budget << " bytes";
    // Re-run the budget check for its live-set diagnostic.
    try {
      check_budget(p.memory, p.ranges, sg.cfg.l2_budget_bytes);
    } catch (const CompileError& e) {
      os << "\n" << e.what();
    }
    throw CompileError("memplan", os.str());
  }
  return 0;
}

struct TrainFlags {
  std::string data = "synthetic";
  std::string layout;
  std::string protocol = "day1";
  std::int64_t sessions = 0;
  double train_fraction = 0.8;
  std::string metrics;
  SyntheticSpec synth;
  std::optional<std::uint64_t> data_seed;
};

int cmd_train(const Shared& s, TrainFlags t) {
  const Graph fwd = load_model(s.model);
  Dataset data;
  if (t.data == "synthetic") {
    const TensorSpec& x = fwd.tensor([&] {
      for (const auto& ts : fwd.tensors())
        if (ts.kind == TensorKind::kInput) return ts.name;
      throw FormatError("cli", "model has no input");
    }());
    t.synth.channels = x.dims[1];
    t.synth.length = x.dims[2];
    t.synth.seed = t.data_seed.value_or(s.seed);
    t.synth.sessions = std::max<std::int64_t>(t.sessions, t.protocol == "day1" ? 1 : 4);
    data = make_synthetic(t.synth);
  } else {
    data = ingest_csv(t.data, CsvLayout::parse(t.layout));
  }
  ProtocolOptions opts;
  opts.strategy = strategy_from_name(s.strategy);
  opts.cfg = s.cfg;
  opts.seed = s.seed;
  opts.bn_batch = s.batch;
  opts.sessions = t.sessions;
  opts.train_fraction = t.train_fraction;
  const ProtocolResult r =
      t.protocol == "day1" ? run_day1(fwd, data, opts) : run_longitudinal(fwd, data, opts);

  std::string csv = metrics_csv(r);
  csv += "trainable_parameters," + std::to_string(r.trainable_parameters) + "\n";
  for (const auto& sr : r.sessions) {
    csv += "acc_before_session_" + std::to_string(sr.session) + "," + csv_number(sr.accuracy_before) + "\n";
    csv += "acc_session_" + std::to_string(sr.session) + "," + csv_number(sr.accuracy) + "\n";
  }
  if (!t.metrics.empty()) write_file(t.metrics, csv);
  if (s.format == "csv")
    std::cout << csv;
  else
    std::cout << format_protocol(r, opts.strategy);
  return 0;
}

int cmd_gradcheck(const Shared& s, GradcheckOptions g) {
  const Graph fwd = load_model(s.model);
  g.seed = s.seed;
  TrainingConfig cfg = s.cfg;
  const GradcheckResult r = gradcheck(fwd, strategy_from_name(s.strategy), cfg, g);
  std::cout << (s.format == "csv" ? gradcheck_csv(r) : format_gradcheck(r, g));
  if (!r.pass) {
    std::string failing;
    for (const auto& row : r.rows)
      if (!row.pass) failing += (failing.empty() ? "" : ", ") + row.tensor + " (" + row.layer + ")";
    throw NumericalError("gradcheck", "tolerance exceeded for " + failing);
  }
  return 0;
}

int cmd_report(const Shared& s, bool memory, bool all) {
  const Graph fwd = load_model(s.model);
  std::vector<Strategy> strategies;
  if (all)
    strategies = {Strategy::kNoFineTuning, Strategy::kLinearProbe, Strategy::kEdge, Strategy::kFullBatchNorm};
  else
    strategies = {strategy_from_name(s.strategy)};
  if (memory) {
    const Strategy st = strategies.front();
    const StrategyGraph sg = prepare_strategy(fwd, st, s.cfg, s.batch);
    CompileOptions opts;
    opts.enforce_l2_budget = false;
    const Program p = compile(sg.graph, sg.cfg, opts);
    const std::string mem = memory_csv(p.graph, p.tiling, p.schedule, p.memory);
    if (s.format == "csv") {
      std::cout << mem;
    } else {
      std::cout << format_report(peak_report(fwd, st, s.cfg, s.batch)) << '\n' << memory_table(mem);
    }
    return 0;
  }
  if (s.format == "csv") std::cout << report_csv_header();
  for (const Strategy st : strategies) {
    const PeakReport r = peak_report(fwd, st, s.cfg, s.batch);
    std::cout << (s.format == "csv" ? report_csv_row(r) : format_report(r));
  }
  return 0;
}

int exit_code(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::kCompile: return kExitCompile;
    case ErrorCategory::kNumerical: return kExitNumerical;
    case ErrorCategory::kFormat:
    case ErrorCategory::kIo: return kExitFormat;
  }
  return kExitFormat;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edgetrain: tiled on-device training compiler and simulator"};
  app.require_subcommand(1);

  Shared compile_s, train_s, grad_s, report_s;
  std::string out_dir;
  auto* compile_cmd = app.add_subcommand("compile", "tile, lower and allocate a strategy; print the plans");
  add_shared(compile_cmd, compile_s);
  compile_cmd->add_option("--out", out_dir, "directory for tiling.txt, schedule.txt and memory.csv");

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "run a training protocol on the simulated machine");
  add_shared(train_cmd, train_s);
  train_cmd->add_option("--data", tf.data, "'synthetic' or a CSV file");
  train_cmd->add_option("--layout", tf.layout, "CSV channels: 'a,b,c' or 'eog:L,R,C'");
  train_cmd->add_option("--protocol", tf.protocol, "day1 or longitudinal")
      ->check(CLI::IsMember({"day1", "longitudinal"}));
  train_cmd->add_option("--sessions", tf.sessions, "sessions used (0: all; synthetic default 4 for longitudinal)");
  train_cmd->add_option("--train-fraction", tf.train_fraction, "leading fraction of each session used for training");
  train_cmd->add_option("--metrics", tf.metrics, "write metric,value CSV to this file");
  train_cmd->add_option("--samples-per-session", tf.synth.samples_per_session, "synthetic samples per session");
  train_cmd->add_option("--separation", tf.synth.separation, "synthetic class template scale");
  train_cmd->add_option("--noise", tf.synth.noise, "synthetic white-noise standard deviation");
  train_cmd->add_option("--drift-offset", tf.synth.drift_offset, "synthetic per-session channel offset");
  train_cmd->add_option("--drift-rotation", tf.synth.drift_rotation, "synthetic per-session channel rotation (rad)");
  train_cmd->add_option("--data-seed", tf.data_seed, "seed of the synthetic data (defaults to --seed)");
  tf.synth.separation = 0.3;
  tf.synth.drift_offset = 0.05;
  tf.synth.drift_rotation = 0.3;

  GradcheckOptions go;
  auto* grad_cmd = app.add_subcommand("gradcheck", "central differences against the compiled pipeline");
  add_shared(grad_cmd, grad_s);
  grad_cmd->add_option("--tolerance", go.tolerance, "bound for the 32-bit compiled pipeline");
  grad_cmd->add_option("--tolerance64", go.tolerance64, "bound for the 64-bit reference");
  grad_cmd->add_option("--samples", go.samples_per_tensor, "elements probed per tensor (0: all)");
  grad_cmd->add_option("--step", go.step, "relative finite-difference step");

  bool memory = false, all = false;
  auto* report_cmd = app.add_subcommand("report", "peak memory per strategy");
  add_shared(report_cmd, report_s);
  report_cmd->add_flag("--memory", memory, "per-buffer breakdown of one strategy");
  report_cmd->add_flag("--all", all, "every strategy");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitFormat;
  }

  try {
    if (*compile_cmd) return cmd_compile(compile_s, out_dir);
    if (*train_cmd) return cmd_train(train_s, tf);
    if (*grad_cmd) return cmd_gradcheck(grad_s, go);
    if (*report_cmd) return cmd_report(report_s, memory, all);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error [io]: " << e.what() << '\n';
    return kExitFormat;
  }
  return 0;
}
