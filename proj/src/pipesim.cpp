#include "trip/pipesim.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "trip/error.hpp"

namespace trip::pipesim {

namespace {

bool is_roi_role(CoreRole r) { return r == CoreRole::roi_conv || r == CoreRole::roi_rnn_out; }

std::vector<CoreDesc> map_net(const net::Model& m, NetId id) {
  const bool roi = id == NetId::roi;
  std::vector<CoreDesc> cores;
  const auto& stages = m.plan.stages;
  std::vector<int> pending;  // downsample stages waiting for the next core
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const auto kind = stages[s].kind;
    if (kind == net::StageKind::downsample) {
      pending.push_back(static_cast<int>(s));
      continue;
    }
    CoreDesc c;
    c.net = id;
    c.stages = pending;
    pending.clear();
    c.stages.push_back(static_cast<int>(s));
    switch (kind) {
      case net::StageKind::conv_block:
        c.role = roi ? CoreRole::roi_conv : CoreRole::cls_conv;
        break;
      case net::StageKind::recurrent:
        c.role = roi ? CoreRole::roi_rnn_out : CoreRole::cls_out;
        if (s + 1 < stages.size() && stages[s + 1].kind == net::StageKind::output_fc) c.stages.push_back(static_cast<int>(++s));
        break;
      case net::StageKind::hidden_fc:
        c.role = roi ? CoreRole::roi_rnn_out : CoreRole::cls_fc;
        break;
      default:
        c.role = roi ? CoreRole::roi_rnn_out : CoreRole::cls_out;
        break;
    }
    cores.push_back(std::move(c));
  }
  if (!pending.empty()) {
    // A trailing downsample cannot occur: nets end in an output layer.
    throw Error(ErrorKind::MappingInvalid, "unhosted downsample stage");
  }
  return cores;
}

void check_net_cover(const std::vector<const CoreDesc*>& cores, const net::Model& m, const char* name) {
  std::vector<int> seen;
  for (const CoreDesc* c : cores) {
    if (c->stages.empty()) throw Error(ErrorKind::MappingInvalid, std::string("empty core on the ") + name + " net");
    for (int s : c->stages) seen.push_back(s);
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] != static_cast<int>(i)) {
      throw Error(ErrorKind::MappingInvalid, std::string(name) + " net stages must be hosted once each, in order");
    }
  }
  if (seen.size() != m.plan.stages.size()) {
    throw Error(ErrorKind::MappingInvalid, std::string(name) + " net has " + std::to_string(m.plan.stages.size()) +
                                               " stages, mapping covers " + std::to_string(seen.size()));
  }
}

CoreStep net_core_step(const CoreDesc& c, const net::MacCounter& counter) {
  CoreStep st;
  if (counter.stages.empty()) return st;
  for (int s : c.stages) st.macs += counter.stages[s].macs;
  st.events_in = counter.stages[c.stages.front()].events_in;
  st.events_out = counter.stages[c.stages.back()].events_out;
  return st;
}

void cost_step(CoreStep& st, const CostModel& cost) {
  const double io = static_cast<double>(st.events_in + st.events_out);
  st.busy_s = static_cast<double>(st.macs) * cost.time_per_mac + io * cost.time_per_event_io;
  st.energy_j = static_cast<double>(st.macs) * cost.energy_per_mac + io * cost.energy_per_event_io;
}

void finish(SimResult& r, const CostModel& cost) {
  std::vector<std::vector<double>> busy(static_cast<std::size_t>(r.n_cores),
                                        std::vector<double>(r.timebins.size(), 0.0));
  for (std::size_t t = 0; t < r.timebins.size(); ++t) {
    auto& tb = r.timebins[t];
    for (auto& st : tb.cores) {
      cost_step(st, cost);
      busy[st.core][t] = st.busy_s;
      tb.macs += st.macs;
      tb.busy_s += st.busy_s;
      tb.energy_j += st.energy_j;
    }
    r.total_macs += tb.macs;
    r.dynamic_energy_j += tb.energy_j;
  }
  r.latency_s = r.schedule == Schedule::sequential ? sequential_latency(busy) : pipelined_latency(busy);
  r.static_energy_j = cost.static_power_per_core * r.n_cores * r.latency_s;
  r.energy_j = r.dynamic_energy_j + r.static_energy_j;
}

struct DepGraph {
  std::vector<std::vector<int>> deps;                   // [level][event] number of inputs it waits for
  std::vector<std::vector<std::vector<int>>> children;  // [level][event] -> dependents on level + 1
};

DepGraph build_deps(const net::Model& model, const std::vector<net::SparseActivations>& levels) {
  DepGraph g;
  g.deps.resize(levels.size());
  g.children.resize(levels.size());
  for (std::size_t L = 0; L < levels.size(); ++L) {
    g.deps[L].assign(levels[L].entries.size(), 0);
    g.children[L].resize(levels[L].entries.size());
  }
  if (levels.size() > model.plan.stages.size() + 1) {
    throw Error(ErrorKind::ShapeMismatch, "more event levels than network stages");
  }
  for (std::size_t L = 1; L < levels.size(); ++L) {
    const net::Stage& st = model.plan.stages[L - 1];
    const auto& in = levels[L - 1];
    const auto& out = levels[L];
    const net::Shape s = in.shape;
    std::vector<int> lookup(static_cast<std::size_t>(s.size()), -1);
    for (std::size_t e = 0; e < in.entries.size(); ++e) {
      const auto& en = in.entries[e];
      lookup[(static_cast<std::size_t>(en.c) * s.h + en.y) * s.w + en.x] = static_cast<int>(e);
    }
    for (std::size_t o = 0; o < out.entries.size(); ++o) {
      const auto& oe = out.entries[o];
      auto link = [&](int e) {
        ++g.deps[L][o];
        g.children[L - 1][e].push_back(static_cast<int>(o));
      };
      if (st.kind == net::StageKind::downsample || st.kind == net::StageKind::conv_block) {
        int c0 = 0, c1 = s.c, y0, y1, x0, x1;
        if (st.kind == net::StageKind::downsample) {
          const auto& pl = model.spec.layers[st.pool];
          const int k = pl.kernel, sp = pl.stride > 0 ? pl.stride : k;
          y0 = oe.y * sp;
          y1 = y0 + k - 1;
          x0 = oe.x * sp;
          x1 = x0 + k - 1;
          c0 = oe.c;
          c1 = oe.c + 1;
        } else {
          const auto& cl = model.spec.layers[st.conv];
          int kp = 1, sp = 1;
          if (st.pool >= 0) {
            kp = model.spec.layers[st.pool].kernel;
            sp = model.spec.layers[st.pool].stride > 0 ? model.spec.layers[st.pool].stride : kp;
          }
          const int cs = cl.stride > 0 ? cl.stride : 1;
          y0 = oe.y * sp * cs - cl.pad;
          y1 = (oe.y * sp + kp - 1) * cs - cl.pad + cl.kernel - 1;
          x0 = oe.x * sp * cs - cl.pad;
          x1 = (oe.x * sp + kp - 1) * cs - cl.pad + cl.kernel - 1;
        }
        y0 = std::max(y0, 0);
        x0 = std::max(x0, 0);
        y1 = std::min(y1, s.h - 1);
        x1 = std::min(x1, s.w - 1);
        for (int c = c0; c < c1; ++c)
          for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
              const int e = lookup[(static_cast<std::size_t>(c) * s.h + y) * s.w + x];
              if (e >= 0) link(e);
            }
      } else {
        for (std::size_t e = 0; e < in.entries.size(); ++e) link(static_cast<int>(e));
      }
    }
  }
  return g;
}

}  // namespace

const char* to_string(CoreRole role) {
  switch (role) {
    case CoreRole::roi_conv: return "roi_conv";
    case CoreRole::roi_rnn_out: return "roi_rnn_out";
    case CoreRole::roi_gen: return "roi_gen";
    case CoreRole::cls_conv: return "cls_conv";
    case CoreRole::cls_fc: return "cls_fc";
    case CoreRole::cls_out: return "cls_out";
  }
  return "?";
}

const char* to_string(Schedule s) { return s == Schedule::sequential ? "sequential" : "pipelined"; }

Schedule parse_schedule(const std::string& name) {
  if (name == "seq" || name == "sequential") return Schedule::sequential;
  if (name == "pipe" || name == "pipelined") return Schedule::pipelined;
  throw Error(ErrorKind::ConfigInvalid, "schedule must be seq or pipe, got '" + name + "'");
}

CoreMap CoreMap::for_trip(const TripModel& model) {
  CoreMap m;
  m.cores = map_net(model.roi, NetId::roi);
  CoreDesc gen;
  gen.role = CoreRole::roi_gen;
  gen.net = NetId::roi;
  m.cores.push_back(gen);
  for (auto& c : map_net(model.classifier, NetId::classifier)) m.cores.push_back(std::move(c));
  return m;
}

CoreMap CoreMap::for_network(const net::Model& model) {
  CoreMap m;
  m.cores = map_net(model, NetId::classifier);
  return m;
}

void CoreMap::validate(const TripModel& model) const {
  std::vector<const CoreDesc*> roi, cls;
  int gens = 0;
  bool after_gen = false;
  for (const auto& c : cores) {
    if (c.role == CoreRole::roi_gen) {
      if (!c.stages.empty()) throw Error(ErrorKind::MappingInvalid, "roi generation core hosts network stages");
      ++gens;
      after_gen = true;
      continue;
    }
    const bool roi_side = c.net == NetId::roi;
    if (roi_side != is_roi_role(c.role)) throw Error(ErrorKind::MappingInvalid, "core role does not match its net");
    if (roi_side == after_gen) throw Error(ErrorKind::MappingInvalid, "roi cores must precede roi generation, classifier cores follow it");
    (roi_side ? roi : cls).push_back(&c);
  }
  if (gens != 1) throw Error(ErrorKind::MappingInvalid, "exactly one roi generation core is required");
  check_net_cover(roi, model.roi, "roi");
  check_net_cover(cls, model.classifier, "classifier");
}

void CoreMap::validate(const net::Model& model) const {
  std::vector<const CoreDesc*> cs;
  for (const auto& c : cores) {
    if (c.role == CoreRole::roi_gen || c.net != NetId::classifier) {
      throw Error(ErrorKind::MappingInvalid, "standalone network mapping may only hold classifier cores");
    }
    cs.push_back(&c);
  }
  check_net_cover(cs, model, "network");
}

CostModel CostModel::from_config(const config::KeyValues& kv) {
  kv.require_known({"time_per_mac", "time_per_event_io", "energy_per_mac", "energy_per_event_io", "static_power_per_core"});
  CostModel c;
  c.time_per_mac = kv.get_double("time_per_mac", 0);
  c.time_per_event_io = kv.get_double("time_per_event_io", 0);
  c.energy_per_mac = kv.get_double("energy_per_mac", 0);
  c.energy_per_event_io = kv.get_double("energy_per_event_io", 0);
  c.static_power_per_core = kv.get_double("static_power_per_core", 0);
  c.validate();
  return c;
}

CostModel CostModel::load(const std::string& path) { return from_config(config::KeyValues::load(path)); }

void CostModel::validate() const {
  for (double v : {time_per_mac, time_per_event_io, energy_per_mac, energy_per_event_io, static_power_per_core}) {
    if (!(v >= 0)) throw Error(ErrorKind::ConfigInvalid, "cost model parameters must be >= 0");
  }
}

double sequential_latency(const std::vector<std::vector<double>>& busy) {
  double s = 0;
  for (const auto& row : busy)
    for (double b : row) s += b;
  return s;
}

double pipelined_latency(const std::vector<std::vector<double>>& busy) {
  if (busy.empty() || busy[0].empty()) return 0;
  const std::size_t T = busy[0].size();
  std::vector<double> prev(T, 0.0), cur(T, 0.0);
  for (const auto& row : busy) {
    double last = 0;
    for (std::size_t t = 0; t < T; ++t) {
      cur[t] = std::max(prev[t], last) + row[t];
      last = cur[t];
    }
    std::swap(prev, cur);
  }
  return prev[T - 1];
}

SimResult simulate(const TripModel& model, const events::BinnedSample& sample, const CoreMap& map,
                   const CostModel& cost, Schedule schedule, CropMode mode) {
  map.validate(model);
  cost.validate();
  const InferenceResult res = infer(model, sample, {mode, true});
  SimResult r;
  r.schedule = schedule;
  r.n_cores = static_cast<int>(map.cores.size());
  for (std::size_t t = 0; t < res.steps.size(); ++t) {
    const auto& step = res.steps[t];
    TimebinTrace tb;
    tb.timebin = static_cast<int>(t);
    for (std::size_t c = 0; c < map.cores.size(); ++c) {
      const CoreDesc& cd = map.cores[c];
      CoreStep st;
      if (cd.role == CoreRole::roi_gen) {
        st.macs = step.crop_ops;
        st.events_in = step.crop_events_in;
        st.events_out = step.crop_events_out;
      } else {
        st = net_core_step(cd, cd.net == NetId::roi ? step.roi_counter : step.classifier_counter);
      }
      st.core = static_cast<int>(c);
      tb.cores.push_back(st);
    }
    r.timebins.push_back(std::move(tb));
  }
  if (schedule == Schedule::pipelined) {
    r.classes.push_back(argmax(std::vector<double>(static_cast<std::size_t>(model.classifier.plan.output_size), 0.0)));
  }
  for (std::size_t t = 0; t < res.steps.size(); ++t) r.classes.push_back(res.step_class(t));
  r.predicted = res.predicted;
  finish(r, cost);
  return r;
}

SimResult simulate_network(const net::Model& model, const events::BinnedSample& sample, const CoreMap& map,
                           const CostModel& cost, Schedule schedule) {
  map.validate(model);
  cost.validate();
  SimResult r;
  r.schedule = schedule;
  r.n_cores = static_cast<int>(map.cores.size());
  net::RecurrentState state;
  std::vector<double> total(static_cast<std::size_t>(model.plan.output_size), 0.0);
  if (schedule == Schedule::pipelined) r.classes.push_back(argmax(total));
  for (std::size_t t = 0; t < sample.frames.size(); ++t) {
    net::MacCounter counter;
    const auto out = net::forward_sparse(model, net::SparseActivations::from_dense(sample.frames[t].to_tensor()), state, counter);
    state = out.state;
    TimebinTrace tb;
    tb.timebin = static_cast<int>(t);
    for (std::size_t c = 0; c < map.cores.size(); ++c) {
      CoreStep st = net_core_step(map.cores[c], counter);
      st.core = static_cast<int>(c);
      tb.cores.push_back(st);
    }
    r.timebins.push_back(std::move(tb));
    r.classes.push_back(argmax(out.output));
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += out.output[i];
  }
  r.predicted = argmax(total);
  finish(r, cost);
  return r;
}

std::string SimResult::trace_csv() const {
  std::ostringstream os;
  os << "timebin,core_id,macs,events_in,events_out,busy_s,energy_j\n";
  char buf[64];
  for (const auto& tb : timebins) {
    for (const auto& c : tb.cores) {
      os << tb.timebin << ',' << c.core << ',' << c.macs << ',' << c.events_in << ',' << c.events_out << ',';
      std::snprintf(buf, sizeof buf, "%.9e,%.9e", c.busy_s, c.energy_j);
      os << buf << '\n';
    }
  }
  return os.str();
}

std::string SimResult::summary() const {
  nlohmann::ordered_json j;
  j["schedule"] = to_string(schedule);
  j["cores"] = n_cores;
  j["timebins"] = timebins.size();
  j["total_macs"] = total_macs;
  j["latency_s"] = latency_s;
  j["dynamic_energy_j"] = dynamic_energy_j;
  j["static_energy_j"] = static_energy_j;
  j["energy_j"] = energy_j;
  j["predicted"] = predicted;
  j["classes"] = classes;
  return j.dump(2);
}

std::vector<ScheduleOp> depth_first_schedule(const net::Model& model, const std::vector<net::SparseActivations>& levels) {
  std::vector<ScheduleOp> ops;
  if (levels.empty()) return ops;
  DepGraph g = build_deps(model, levels);
  std::vector<std::vector<char>> done(levels.size());
  for (std::size_t L = 0; L < levels.size(); ++L) done[L].assign(levels[L].entries.size(), 0);
  std::vector<std::pair<int, int>> stack;
  auto run = [&](int L0, int e0) {
    stack.emplace_back(L0, e0);
    while (!stack.empty()) {
      const auto [L, e] = stack.back();
      stack.pop_back();
      done[L][e] = 1;
      ops.push_back({ScheduleOp::produce, L, e});
      ops.push_back({ScheduleOp::consume, L, e});
      if (static_cast<std::size_t>(L + 1) >= levels.size()) continue;
      const auto& kids = g.children[L][e];
      // Reverse push keeps ready children in ascending order.
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) {
        if (--g.deps[L + 1][*it] == 0) stack.emplace_back(L + 1, *it);
      }
    }
  };
  // Outputs with nothing nonzero in their receptive field are ready at once.
  for (std::size_t L = 1; L < levels.size(); ++L)
    for (std::size_t e = 0; e < levels[L].entries.size(); ++e)
      if (g.deps[L][e] == 0 && !done[L][e]) run(static_cast<int>(L), static_cast<int>(e));
  for (std::size_t e = 0; e < levels[0].entries.size(); ++e) run(0, static_cast<int>(e));
  return ops;
}

bool validate_schedule(const net::Model& model, const std::vector<net::SparseActivations>& levels,
                       const std::vector<ScheduleOp>& ops, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (levels.empty()) return ops.empty() ? true : fail("ops for an empty input");
  DepGraph g = build_deps(model, levels);
  std::vector<std::vector<char>> produced(levels.size()), consumed(levels.size());
  for (std::size_t L = 0; L < levels.size(); ++L) {
    produced[L].assign(levels[L].entries.size(), 0);
    consumed[L].assign(levels[L].entries.size(), 0);
  }
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const auto& op = ops[i];
    if (op.level < 0 || op.level >= static_cast<int>(levels.size()) || op.event < 0 ||
        op.event >= static_cast<int>(levels[op.level].entries.size())) {
      return fail("op " + std::to_string(i) + " references a missing event");
    }
    if (op.kind == ScheduleOp::produce) {
      if (produced[op.level][op.event]) return fail("op " + std::to_string(i) + " produces an event twice");
      if (g.deps[op.level][op.event] != 0) return fail("op " + std::to_string(i) + " produces before its inputs were consumed");
      produced[op.level][op.event] = 1;
    } else {
      if (!produced[op.level][op.event]) return fail("op " + std::to_string(i) + " consumes an unproduced event");
      if (consumed[op.level][op.event]) return fail("op " + std::to_string(i) + " consumes an event twice");
      consumed[op.level][op.event] = 1;
      if (static_cast<std::size_t>(op.level + 1) < levels.size()) {
        for (int k : g.children[op.level][op.event]) --g.deps[op.level + 1][k];
      }
    }
  }
  for (std::size_t L = 0; L < levels.size(); ++L)
    for (std::size_t e = 0; e < levels[L].entries.size(); ++e)
      if (!produced[L][e] || !consumed[L][e]) return fail("event " + std::to_string(e) + " on level " + std::to_string(L) + " never handled");
  return true;
}

}  // namespace trip::pipesim
