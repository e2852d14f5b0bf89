// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgetrain/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "edgetrain/autodiff.hpp"
#include "edgetrain/error.hpp"
#include "edgetrain/kernels.hpp"
#include "edgetrain/reference.hpp"

namespace edgetrain {
namespace {

constexpr const char* kOrigin = "train";

void add_stats(MachineStats& into, const MachineStats& s) {
  into.dma_in_bytes += s.dma_in_bytes;
  into.dma_out_bytes += s.dma_out_bytes;
  into.flops += s.flops;
  into.l1_high_water = std::max(into.l1_high_water, s.l1_high_water);
  into.l2_high_water = std::max(into.l2_high_water, s.l2_high_water);
  into.steps_executed += s.steps_executed;
  into.micro_steps += s.micro_steps;
  into.updates += s.updates;
}

std::size_t argmax(const float* v, std::size_t n) {
  return static_cast<std::size_t>(std::max_element(v, v + n) - v);
}

}  // namespace

double epoch_learning_rate(const TrainingConfig& cfg, std::int64_t epoch) {
  if (cfg.lr_schedule == LrSchedule::kConstant) return cfg.learning_rate;
  return kernels::cosine_lr(static_cast<double>(epoch), static_cast<double>(cfg.epochs), cfg.learning_rate);
}

Trainer::Trainer(const Graph& forward, Strategy strategy, const TrainingConfig& cfg, std::int64_t bn_batch)
    : strategy_(strategy), sg_(prepare_strategy(forward, strategy, cfg, bn_batch)) {
  for (const auto& t : sg_.forward.tensors())
    if (t.kind == TensorKind::kInput && input_.empty()) input_ = t.name;
  if (input_.empty()) throw FormatError(kOrigin, "forward graph has no input tensor");
  logits_ = default_logits(sg_.forward);
  labels_ = LossSpec{}.labels;
  if (sg_.trains) {
    program_ = std::make_unique<Program>(compile(sg_.graph, sg_.cfg));
    machine_ = std::make_unique<Machine>(*program_);
  }
  set_parameters(init_parameters(sg_.forward, 0));
}

Trainer::~Trainer() = default;
Trainer::Trainer(Trainer&&) noexcept = default;

void Trainer::set_parameters(const TensorMap& params) {
  for (const auto& t : sg_.forward.tensors()) {
    if (t.kind != TensorKind::kParameter) continue;
    auto it = params.find(t.name);
    if (it == params.end()) continue;
    if (static_cast<std::int64_t>(it->second.size()) != t.numel())
      throw FormatError(kOrigin, "parameter '" + t.name + "' has " + std::to_string(it->second.size()) +
                                     " values, expected " + std::to_string(t.numel()));
    params_[t.name] = it->second;
    if (machine_) machine_->write(t.name, it->second);
  }
}

TensorMap Trainer::parameters() const {
  if (!machine_) return params_;
  TensorMap out;
  for (const auto& [name, v] : params_) out.emplace(name, machine_->read(name));
  return out;
}

void Trainer::check(const Dataset& d) const {
  d.validate();
  const TensorSpec& x = sg_.forward.tensor(input_);
  if (d.channels != x.dims[1] || d.length != x.dims[2])
    throw FormatError(kOrigin, "samples are [" + std::to_string(d.channels) + ", " + std::to_string(d.length) +
                                   "] but the model expects [" + std::to_string(x.dims[1]) + ", " +
                                   std::to_string(x.dims[2]) + "]");
  const std::int64_t classes = sg_.forward.tensor(logits_).dims[1];
  for (const auto label : d.labels)
    if (label >= classes)
      throw FormatError(kOrigin, "label " + std::to_string(label) + " out of range for " + std::to_string(classes) +
                                     " output classes");
}

std::vector<EpochRecord> Trainer::fit(const Dataset& train, const FitOptions& options) {
  if (!machine_) return {};
  check(train);
  const auto B = static_cast<std::size_t>(sg_.cfg.micro_batch);
  const auto eff = static_cast<std::size_t>(sg_.cfg.effective_batch);
  const std::size_t usable = train.size() - train.size() % eff;
  if (usable == 0)
    throw FormatError(kOrigin, "session has " + std::to_string(train.size()) +
                                   " training samples, fewer than one effective batch of " + std::to_string(eff));
  const bool evaluate_each = options.evaluate_each_epoch || std::isfinite(options.stop_at_accuracy);
  const std::size_t sample = static_cast<std::size_t>(train.channels * train.length);

  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> perm(train.size());
  std::vector<float> x(B * sample), labels(B);
  std::vector<EpochRecord> trace;
  for (std::int64_t e = 0; e < sg_.cfg.epochs; ++e) {
    EpochRecord rec;
    rec.epoch = e;
    rec.lr = epoch_learning_rate(sg_.cfg, e);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    double loss = 0.0;
    std::size_t steps = 0;
    for (std::size_t i = 0; i < usable; i += B) {
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t k = perm[i + b];
        std::copy(train.samples[k].begin(), train.samples[k].end(), x.begin() + static_cast<std::ptrdiff_t>(b * sample));
        labels[b] = static_cast<float>(train.labels[k]);
      }
      machine_->write(input_, x);
      machine_->write(labels_, labels);
      machine_->run_micro_step(rec.lr);
      loss += machine_->read("loss")[0];
      ++steps;
    }
    rec.loss = loss / static_cast<double>(steps);
    if (evaluate_each) rec.accuracy = evaluate(train);
    trace.push_back(rec);
    if (rec.accuracy >= options.stop_at_accuracy) break;
  }
  return trace;
}

double Trainer::evaluate(const Dataset& data) const {
  check(data);
  if (data.size() == 0) throw FormatError(kOrigin, "cannot evaluate an empty set");
  Interpreter<float> ref(sg_.forward);
  for (const auto& [name, v] : parameters()) ref.set(name, v);
  const auto B = static_cast<std::size_t>(sg_.forward.tensor(input_).dims[0]);
  const std::size_t sample = static_cast<std::size_t>(data.channels * data.length);
  const auto classes = static_cast<std::size_t>(sg_.forward.tensor(logits_).dims[1]);
  std::vector<float> x(B * sample);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); i += B) {
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t k = std::min(i + b, data.size() - 1);
      std::copy(data.samples[k].begin(), data.samples[k].end(), x.begin() + static_cast<std::ptrdiff_t>(b * sample));
    }
    ref.set(input_, x);
    ref.compute(logits_);
    const std::vector<float>& logits = ref.get(logits_);
    for (std::size_t b = 0; b < B && i + b < data.size(); ++b)
      correct += static_cast<std::int64_t>(argmax(logits.data() + b * classes, classes)) == data.labels[i + b];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

MachineStats Trainer::stats() const { return machine_ ? machine_->stats() : MachineStats{}; }

std::int64_t Trainer::trainable_parameters() const {
  if (!program_) return 0;
  std::int64_t n = 0;
  for (const auto& b : grad_bindings(program_->graph))
    if (program_->graph.tensor(b.tensor).kind == TensorKind::kParameter) n += program_->graph.tensor(b.tensor).numel();
  return n;
}

namespace {

struct Split {
  Dataset train, test;
};

Split split_session(const Dataset& data, std::int64_t session, double fraction) {
  auto [train, test] = data.session(session).temporal_split(fraction);
  if (train.size() == 0 || test.size() == 0)
    throw FormatError(kOrigin, "session " + std::to_string(session) + " has " + std::to_string(train.size()) +
                                   " training and " + std::to_string(test.size()) + " test samples; both must be nonempty");
  return {std::move(train), std::move(test)};
}

SessionResult run_session(Trainer& t, const Split& s, std::int64_t session, std::uint64_t seed) {
  SessionResult r;
  r.session = session;
  r.train_samples = static_cast<std::int64_t>(s.train.size());
  r.test_samples = static_cast<std::int64_t>(s.test.size());
  r.accuracy_before = t.evaluate(s.test);
  FitOptions fo;
  fo.seed = seed;
  r.trace = t.fit(s.train, fo);
  r.accuracy = r.trace.empty() ? r.accuracy_before : t.evaluate(s.test);
  if (!r.trace.empty()) r.final_loss = r.trace.back().loss;
  return r;
}

void note_program(ProtocolResult& out, const Trainer& t) {
  if (const Program* p = t.program()) {
    out.peak_l1 = std::max(out.peak_l1, p->tiling.peak_l1);
    out.peak_l2 = std::max(out.peak_l2, p->memory.peak);
  }
}

std::vector<std::int64_t> first_sessions(const Dataset& data, std::int64_t wanted) {
  std::vector<std::int64_t> ids = data.session_ids();
  if (ids.empty()) throw FormatError(kOrigin, "dataset has no sessions");
  if (wanted > 0) {
    if (static_cast<std::int64_t>(ids.size()) < wanted)
      throw FormatError(kOrigin, "requested " + std::to_string(wanted) + " sessions, data has " +
                                     std::to_string(ids.size()));
    ids.resize(static_cast<std::size_t>(wanted));
  }
  return ids;
}

}  // namespace

ProtocolResult run_day1(const Graph& forward, const Dataset& data, const ProtocolOptions& options) {
  const std::int64_t session = first_sessions(data, 0).front();
  Trainer t(forward, options.strategy, options.cfg, options.bn_batch);
  t.set_parameters(init_parameters(t.forward(), options.seed));
  ProtocolResult out;
  out.sessions.push_back(run_session(t, split_session(data, session, options.train_fraction), session, options.seed));
  out.trainable_parameters = t.trainable_parameters();
  out.epochs = t.trains() ? options.cfg.epochs : 0;
  note_program(out, t);
  add_stats(out.totals, t.stats());
  return out;
}

ProtocolResult run_longitudinal(const Graph& forward, const Dataset& data, const ProtocolOptions& options) {
  const std::vector<std::int64_t> ids = first_sessions(data, options.sessions);
  const Strategy calibration =
      options.strategy == Strategy::kFullBatchNorm ? Strategy::kFullBatchNorm : Strategy::kEdge;
  Trainer cal(forward, calibration, options.cfg, options.bn_batch);
  cal.set_parameters(init_parameters(cal.forward(), options.seed));

  ProtocolResult out;
  out.sessions.push_back(run_session(cal, split_session(data, ids[0], options.train_fraction), ids[0], options.seed));
  std::unique_ptr<Trainer> own;
  Trainer* adapt = &cal;
  if (options.strategy != calibration) {
    own = std::make_unique<Trainer>(forward, options.strategy, options.cfg, options.bn_batch);
    own->set_parameters(cal.parameters());
    adapt = own.get();
  }
  for (std::size_t i = 1; i < ids.size(); ++i)
    out.sessions.push_back(run_session(*adapt, split_session(data, ids[i], options.train_fraction), ids[i],
                                       options.seed + ids[i]));
  out.trainable_parameters = adapt->trainable_parameters();
  out.epochs = adapt->trains() ? options.cfg.epochs : 0;
  note_program(out, cal);
  add_stats(out.totals, cal.stats());
  if (own) {
    note_program(out, *own);
    add_stats(out.totals, own->stats());
  }
  return out;
}

std::string metrics_csv(const ProtocolResult& r) {
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  for (const auto& s : r.sessions)
    if (!std::isnan(s.final_loss)) final_loss = s.final_loss;
  std::ostringstream os;
  os << std::setprecision(9);
  os << "metric,value\n"
     << "peak_l1," << r.peak_l1 << '\n'
     << "peak_l2," << r.peak_l2 << '\n'
     << "dma_bytes," << r.totals.dma_bytes() << '\n'
     << "flops," << r.totals.flops << '\n'
     << "epochs," << r.epochs << '\n'
     << "final_loss," << final_loss << '\n'
     << "final_acc," << (r.sessions.empty() ? 0.0 : r.sessions.back().accuracy) << '\n';
  return os.str();
}

std::string format_protocol(const ProtocolResult& r, Strategy strategy) {
  std::ostringstream os;
  os << "strategy " << strategy_name(strategy) << " (" << r.trainable_parameters << " trainable parameters)\n";
  os << std::left << std::setw(9) << "session" << std::setw(8) << "train" << std::setw(7) << "test" << std::setw(12)
     << "acc_before" << std::setw(10) << "acc" << "final_loss\n";
  os << std::fixed;
  for (const auto& s : r.sessions) {
    os << std::setw(9) << s.session << std::setw(8) << s.train_samples << std::setw(7) << s.test_samples
       << std::setprecision(4) << std::setw(12) << s.accuracy_before << std::setw(10) << s.accuracy;
    if (std::isnan(s.final_loss))
      os << "-";
    else
      os << std::setprecision(6) << s.final_loss;
    os << '\n';
  }
  os << "peak_l1 " << r.peak_l1 << "  peak_l2 " << r.peak_l2 << "  dma_bytes " << r.totals.dma_bytes() << "  flops "
     << r.totals.flops << '\n';
  return os.str();
}

}  // namespace edgetrain
