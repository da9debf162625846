#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trip/config.hpp"
#include "trip/pipeline.hpp"

namespace trip::pipesim {

enum class CoreRole { roi_conv, roi_rnn_out, roi_gen, cls_conv, cls_fc, cls_out };

const char* to_string(CoreRole role);

enum class NetId { roi, classifier };

/// One core: the plan stages of one net it hosts, or the ROI generator.
struct CoreDesc {
  CoreRole role = CoreRole::cls_conv;
  NetId net = NetId::classifier;
  std::vector<int> stages;
};

struct CoreMap {
  std::vector<CoreDesc> cores;

  /// Default mapping: the input downsample shares the first conv core, each conv
  /// block gets a core, a recurrent layer shares its core with the output layer
  /// that follows it, every other FC layer gets its own core, and the ROI
  /// generator occupies one core between the two nets.
  static CoreMap for_trip(const TripModel& model);
  /// The same rules for a standalone network (no ROI generation).
  static CoreMap for_network(const net::Model& model);

  /// Throws MappingInvalid unless every stage is hosted exactly once, in chain order.
  void validate(const TripModel& model) const;
  void validate(const net::Model& model) const;
};

struct CostModel {
  double time_per_mac = 0;
  double time_per_event_io = 0;
  double energy_per_mac = 0;
  double energy_per_event_io = 0;
  double static_power_per_core = 0;

  static CostModel from_config(const config::KeyValues& kv);
  static CostModel load(const std::string& path);
  void validate() const;
};

enum class Schedule { sequential, pipelined };

const char* to_string(Schedule s);
Schedule parse_schedule(const std::string& name);

struct CoreStep {
  int core = 0;
  std::uint64_t macs = 0;
  std::uint64_t events_in = 0;
  std::uint64_t events_out = 0;
  double busy_s = 0;
  double energy_j = 0;
};

struct TimebinTrace {
  int timebin = 0;
  std::vector<CoreStep> cores;
  std::uint64_t macs = 0;
  double busy_s = 0;
  double energy_j = 0;
};

struct SimResult {
  Schedule schedule = Schedule::sequential;
  std::vector<TimebinTrace> timebins;
  int n_cores = 0;
  double latency_s = 0;
  double dynamic_energy_j = 0;
  double static_energy_j = 0;
  double energy_j = 0;
  std::uint64_t total_macs = 0;
  /// Class emitted at each pipeline step. The pipelined sequence has one extra
  /// leading entry from the classifier's all-zero warm-up input.
  std::vector<int> classes;
  int predicted = 0;

  std::string trace_csv() const;
  std::string summary() const;
};

/// Busy time of a chain of stages over T timebins; busy[s][t].
double sequential_latency(const std::vector<std::vector<double>>& busy);
/// finish[s][t] = max(finish[s-1][t], finish[s][t-1]) + busy[s][t]; returns the last finish.
double pipelined_latency(const std::vector<std::vector<double>>& busy);

SimResult simulate(const TripModel& model, const events::BinnedSample& sample, const CoreMap& map,
                   const CostModel& cost, Schedule schedule, CropMode mode = CropMode::dap);

SimResult simulate_network(const net::Model& model, const events::BinnedSample& sample, const CoreMap& map,
                           const CostModel& cost, Schedule schedule);

struct ScheduleOp {
  enum Kind : std::uint8_t { produce, consume };
  Kind kind = produce;
  int level = 0;  // 0: input events, s + 1: output events of plan stage s
  int event = 0;  // index into that level's event list
  friend bool operator==(const ScheduleOp&, const ScheduleOp&) = default;
};

/// Event-level depth-first order: each event is consumed right after it is
/// produced, and an output event is produced as soon as every input event in
/// its receptive field has been consumed. `levels` holds the input events
/// followed by every stage's output events (see forward_sparse).
std::vector<ScheduleOp> depth_first_schedule(const net::Model& model, const std::vector<net::SparseActivations>& levels);

/// Replays a trace: every event produced and consumed exactly once, consumed
/// after production, produced only after its dependencies were consumed.
bool validate_schedule(const net::Model& model, const std::vector<net::SparseActivations>& levels,
                       const std::vector<ScheduleOp>& ops, std::string* why = nullptr);

}  // namespace trip::pipesim
