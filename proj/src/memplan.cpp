// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgetrain/memplan.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "edgetrain/error.hpp"

namespace edgetrain {
namespace {

constexpr const char* kOrigin = "memplan";

std::int64_t align_up(std::int64_t v, std::int64_t a) { return (v + a - 1) / a * a; }

std::string_view scope_name(Scope s) {
  switch (s) {
    case Scope::kStep: return "step";
    case Scope::kMicroBatch: return "micro_batch";
    case Scope::kTraining: return "training";
  }
  return "?";
}

}  // namespace

std::string_view mem_class_name(MemClass c) {
  switch (c) {
    case MemClass::kParameters: return "parameters";
    case MemClass::kOptimizerState: return "optimizer_state";
    case MemClass::kAccumulators: return "accumulators";
    case MemClass::kActivations: return "activations";
    case MemClass::kGradients: return "gradients";
  }
  return "?";
}

MemClass mem_class_of(const TensorSpec& t) {
  switch (t.kind) {
    case TensorKind::kParameter: return MemClass::kParameters;
    case TensorKind::kOptimizerState: return MemClass::kOptimizerState;
    case TensorKind::kGradient:
      return t.persistence == Persistence::kPersistentAccumulator ? MemClass::kAccumulators : MemClass::kGradients;
    default: return MemClass::kActivations;
  }
}

std::vector<LiveRange> compute_lifetimes(const Graph& g, const Schedule& s, std::int64_t alignment) {
  const std::int64_t last_step = s.steps.empty() ? 0 : static_cast<std::int64_t>(s.steps.size()) - 1;
  std::map<std::string, LiveRange> by_name;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < s.steps.size(); ++i) {
    const Step& st = s.steps[i];
    if (!st.is_dma()) continue;
    const auto step = static_cast<std::int64_t>(i);
    auto it = by_name.find(st.buffer);
    if (it == by_name.end()) {
      const TensorSpec& t = g.tensor(st.buffer);
      const bool preset = is_state(t) || t.kind == TensorKind::kInput;
      if (st.kind == StepKind::kDmaIn && !preset)
        throw CompileError(kOrigin, "buffer '" + st.buffer + "' is read at step " + std::to_string(step) +
                                        " before any step defines it");
      LiveRange r;
      r.buffer = st.buffer;
      r.bytes = align_up(t.numel() * 4, alignment);
      r.first = step;
      r.last = step;
      r.mem_class = mem_class_of(t);
      r.scope = is_state(t) ? Scope::kTraining
                : (t.saved || t.kind == TensorKind::kInput || t.kind == TensorKind::kOutput) ? Scope::kMicroBatch
                                                                                             : Scope::kStep;
      if (preset) r.first = 0;
      if (is_state(t)) r.last = last_step;
      if (t.kind == TensorKind::kOutput) r.last = last_step;
      it = by_name.emplace(st.buffer, r).first;
      order.push_back(st.buffer);
    }
    it->second.last = std::max(it->second.last, step);
  }
  std::vector<LiveRange> out;
  out.reserve(order.size());
  for (const auto& name : order) out.push_back(by_name.at(name));
  return out;
}

std::vector<LiveRange> retain_all(std::vector<LiveRange> ranges, std::int64_t steps) {
  for (auto& r : ranges) {
    r.first = 0;
    r.last = std::max<std::int64_t>(0, steps - 1);
  }
  return ranges;
}

const Placement* MemoryPlan::find(const std::string& buffer) const {
  auto it = index_.find(buffer);
  return it == index_.end() ? nullptr : &placements[it->second];
}

MemoryPlan allocate_static(const std::vector<LiveRange>& ranges, std::int64_t alignment) {
  std::vector<std::size_t> idx(ranges.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (ranges[a].first != ranges[b].first) return ranges[a].first < ranges[b].first;
    return ranges[a].bytes > ranges[b].bytes;
  });

  MemoryPlan plan;
  std::vector<std::pair<std::int64_t, std::int64_t>> busy;
  for (std::size_t i : idx) {
    const LiveRange& r = ranges[i];
    busy.clear();
    for (const auto& p : plan.placements)
      if (p.range.overlaps(r) && p.range.bytes > 0) busy.emplace_back(p.offset, p.offset + p.range.bytes);
    std::sort(busy.begin(), busy.end());

    std::int64_t best = -1, best_gap = 0, cursor = 0;
    for (const auto& [lo, hi] : busy) {
      const std::int64_t start = align_up(cursor, alignment);
      if (lo > start) {
        const std::int64_t gap = lo - start;
        if (gap >= r.bytes && (best < 0 || gap < best_gap)) {
          best = start;
          best_gap = gap;
        }
      }
      cursor = std::max(cursor, hi);
    }
    if (best < 0) best = align_up(cursor, alignment);
    plan.index_[r.buffer] = plan.placements.size();
    plan.placements.push_back({r, best});
    plan.peak = std::max(plan.peak, best + r.bytes);
  }
  return plan;
}

namespace {

// Bytes live at every step, optionally filtered by class.
std::vector<std::int64_t> live_profile(const std::vector<LiveRange>& ranges, const std::vector<MemClass>* classes) {
  std::int64_t steps = 0;
  for (const auto& r : ranges) steps = std::max(steps, r.last + 1);
  std::vector<std::int64_t> delta(static_cast<std::size_t>(steps) + 1, 0);
  for (const auto& r : ranges) {
    if (classes && std::find(classes->begin(), classes->end(), r.mem_class) == classes->end()) continue;
    delta[static_cast<std::size_t>(r.first)] += r.bytes;
    delta[static_cast<std::size_t>(r.last) + 1] -= r.bytes;
  }
  std::vector<std::int64_t> live(static_cast<std::size_t>(steps), 0);
  std::int64_t cur = 0;
  for (std::int64_t s = 0; s < steps; ++s) {
    cur += delta[static_cast<std::size_t>(s)];
    live[static_cast<std::size_t>(s)] = cur;
  }
  return live;
}

LivePeak peak_of(const std::vector<std::int64_t>& live) {
  LivePeak p;
  for (std::size_t s = 0; s < live.size(); ++s)
    if (live[s] > p.bytes) p = {live[s], static_cast<std::int64_t>(s)};
  return p;
}

}  // namespace

std::int64_t liveness_lower_bound(const std::vector<LiveRange>& ranges) {
  return peak_of(live_profile(ranges, nullptr)).bytes;
}

LivePeak class_peak(const std::vector<LiveRange>& ranges, const std::vector<MemClass>& classes) {
  return peak_of(live_profile(ranges, &classes));
}

void check_budget(const MemoryPlan& plan, const std::vector<LiveRange>& ranges, std::int64_t budget) {
  if (plan.peak <= budget) return;
  const LivePeak busiest = peak_of(live_profile(ranges, nullptr));
  std::vector<const LiveRange*> live;
  for (const auto& r : ranges)
    if (r.first <= busiest.step && busiest.step <= r.last) live.push_back(&r);
  std::sort(live.begin(), live.end(), [](const LiveRange* a, const LiveRange* b) { return a->bytes > b->bytes; });
  std::ostringstream os;
  os << "L2 peak of " << plan.peak << " bytes exceeds the budget of " << budget << " bytes; live at step "
     << busiest.step << " (" << busiest.bytes << " bytes):";
  for (const LiveRange* r : live) os << ' ' << r->buffer << '=' << r->bytes;
  throw CompileError(kOrigin, os.str());
}

std::string memory_csv(const Graph& g, const TilingPlan& tiling, const Schedule& s, const MemoryPlan& plan) {
  std::ostringstream os;
  os << "buffer,level,offset,bytes,first,last,kind\n";
  for (const auto& p : plan.placements)
    os << p.range.buffer << ",L2," << p.offset << ',' << p.range.bytes << ',' << p.range.first << ','
       << p.range.last << ',' << mem_class_name(p.range.mem_class) << '/' << scope_name(p.range.scope) << '\n';

  // L1 regions live for the steps of their node.
  std::vector<std::int64_t> first(tiling.nodes.size(), -1), last(tiling.nodes.size(), -1);
  for (std::size_t i = 0; i < s.steps.size(); ++i) {
    const std::size_t n = s.steps[i].plan_node;
    if (s.steps[i].kind == StepKind::kBarrier) continue;
    if (first[n] < 0) first[n] = static_cast<std::int64_t>(i);
    last[n] = static_cast<std::int64_t>(i);
  }
  for (std::size_t n = 0; n < tiling.nodes.size(); ++n) {
    const NodeTiling& nt = tiling.nodes[n];
    const std::string& id = g.nodes[nt.node].id;
    auto row = [&](const std::string& name, const Slot& slot, std::string_view kind) {
      if (slot.capacity == 0) return;
      os << id << ':' << name << ",L1," << slot.offset << ',' << slot.capacity << ',' << first[n] << ',' << last[n]
         << ',' << kind << '\n';
    };
    row("scratch", nt.double_scratch, "scratch");
    for (std::size_t i = 0; i < nt.slots.size(); ++i) {
      const Operand& op = nt.geometry.operands[i];
      for (std::size_t b = 0; b < nt.slots[i].size(); ++b)
        row(op.tensor + (nt.slots[i].size() > 1 ? "#" + std::to_string(b) : std::string()), nt.slots[i][b],
            op.persistent ? "persistent" : "tile");
    }
    row("im2col", nt.im2col, "scratch");
  }
  return os.str();
}

}  // namespace edgetrain
