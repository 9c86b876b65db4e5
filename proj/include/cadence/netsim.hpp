#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cadence/features.hpp"
#include "cadence/kvconfig.hpp"
#include "cadence/nids.hpp"
#include "cadence/reshaper.hpp"
#include "cadence/trace.hpp"

namespace cadence {

// Reply behaviour of the simulated target: every k-th matching packet
// triggers one response after `delay` seconds. A packet matches when its
// size is >= min_size and, if `protocol` is set, the protocol agrees.
struct ResponseRule {
  std::size_t every_k = 1;
  std::uint32_t min_size = 0;
  std::optional<std::uint16_t> protocol;
  double delay = 0.0;          // seconds from arrival to response emission
  std::uint32_t response_size = 64;
};

struct NetworkModel {
  double base_latency = 0.0;   // seconds, one way
  double jitter = 0.0;         // uniform [0, jitter) added per hop
  std::vector<ResponseRule> rules;
  std::uint64_t seed = 0;
  std::size_t event_cap = 1'000'000;

  // Reads "<prefix>base_latency", "<prefix>jitter", "<prefix>seed",
  // "<prefix>event_cap" and rule groups "<prefix>rule.<name>.*".
  static NetworkModel from_config(const KvConfig& cfg,
                                  const std::string& prefix = "net.");
};

// Event kinds in tie-break order at equal sim_time. proxy_receive marks a
// response reaching the proxy, which is the moment its observed delay
// enters the reshaper's history.
enum class SimEventKind : std::uint8_t {
  proxy_send = 0,
  target_receive = 1,
  target_respond = 2,
  proxy_receive = 3,
  nids_score = 4,
};

std::string to_string(SimEventKind kind);

struct SimEvent {
  double sim_time = 0.0;
  SimEventKind kind = SimEventKind::proxy_send;
  std::uint64_t seq_index = 0;  // responses get indices n, n+1, ...
  std::optional<double> score;  // nids_score events only
};

struct E2eOptions {
  std::vector<double> lambdas = kDefaultLambdas;
  // Non-owning. When set, the detector's extractor is warmed on this benign
  // stream before the run and sim timestamps are offset to follow it after
  // a `warm_gap` pause: the detector has been watching the network all
  // along instead of booting up alongside the attack.
  const TrafficTrace* warm_prefix = nullptr;
  double warm_gap = 0.010;
};

struct E2eResult {
  DetectionReport report;
  std::vector<SimEvent> events;            // in processing order
  std::vector<double> malicious_scores;    // in arrival order
  std::vector<double> response_scores;     // in emission order
};

// Discrete-event run of the live scenario: a proxy paces the malicious
// trace with reshape_step, the target echoes responses per the network
// model, and the detector featurizes and scores every packet at the moment
// it crosses the wire (malicious packets on target arrival, responses on
// emission). Response arrivals at the proxy are injected into the
// reshaper's history. Throws when the event count exceeds net.event_cap.
E2eResult run_e2e(const ReshaperModel& reshaper, const TrafficTrace& malicious,
                  const NetworkModel& net, const AnomalyModel& nids,
                  double threshold, const E2eOptions& options = {});

void write_events_jsonl(const std::vector<SimEvent>& events,
                        const std::string& path);

// (seq_index, send_at) rows for a physical transmitter; requires monotone
// timestamps.
std::vector<std::pair<std::uint64_t, double>> replay_schedule(
    const TrafficTrace& trace);

}  // namespace cadence
