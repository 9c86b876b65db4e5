#include <cstdio>
#include <fstream>
#include <queue>
#include <stdexcept>

#include "cadence/features.hpp"
#include "cadence/netsim.hpp"
#include "cadence/rng.hpp"

namespace cadence {

NetworkModel NetworkModel::from_config(const KvConfig& cfg,
                                       const std::string& prefix) {
  NetworkModel net;
  net.base_latency = cfg.get_double_or(prefix + "base_latency", 0.0);
  net.jitter = cfg.get_double_or(prefix + "jitter", 0.0);
  net.seed = cfg.get_u64_or(prefix + "seed", 0);
  net.event_cap = static_cast<std::size_t>(
      cfg.get_int_or(prefix + "event_cap", 1'000'000));
  if (net.base_latency < 0 || net.jitter < 0) {
    throw std::runtime_error("latency and jitter must be >= 0");
  }
  for (const std::string& name : cfg.group_names(prefix + "rule")) {
    const std::string rp = prefix + "rule." + name + ".";
    ResponseRule rule;
    rule.every_k =
        static_cast<std::size_t>(cfg.get_int_or(rp + "every_k", 1));
    rule.min_size =
        static_cast<std::uint32_t>(cfg.get_int_or(rp + "min_size", 0));
    if (cfg.has(rp + "protocol")) {
      rule.protocol =
          static_cast<std::uint16_t>(cfg.get_int(rp + "protocol"));
    }
    rule.delay = cfg.get_double_or(rp + "delay", 0.0);
    rule.response_size =
        static_cast<std::uint32_t>(cfg.get_int_or(rp + "response_size", 64));
    if (rule.every_k == 0) throw std::runtime_error("every_k must be >= 1");
    if (rule.delay < 0) throw std::runtime_error("response delay must be >= 0");
    net.rules.push_back(rule);
  }
  return net;
}

std::string to_string(SimEventKind kind) {
  switch (kind) {
    case SimEventKind::proxy_send: return "proxy_send";
    case SimEventKind::target_receive: return "target_receive";
    case SimEventKind::target_respond: return "target_respond";
    case SimEventKind::proxy_receive: return "proxy_receive";
    case SimEventKind::nids_score: return "nids_score";
  }
  return "unknown";
}

namespace {

struct QueuedEvent {
  double time;
  SimEventKind kind;
  std::uint64_t seq;
  PacketRecord packet;  // meaningful for all kinds here
};

struct LaterFirst {
  bool operator()(const QueuedEvent& a, const QueuedEvent& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.kind != b.kind) return a.kind > b.kind;
    return a.seq > b.seq;
  }
};

PacketRecord make_response(const PacketRecord& trigger, std::uint64_t seq,
                           std::uint32_t size) {
  PacketRecord resp;
  resp.seq_index = seq;
  resp.src_mac = trigger.dst_mac;
  resp.dst_mac = trigger.src_mac;
  resp.src_ip = trigger.dst_ip;
  resp.dst_ip = trigger.src_ip;
  resp.protocol = trigger.protocol;
  resp.ip_type = trigger.ip_type;
  resp.size = size;
  resp.label = Label::benign;
  return resp;
}

}  // namespace

E2eResult run_e2e(const ReshaperModel& reshaper, const TrafficTrace& malicious,
                  const NetworkModel& net, const AnomalyModel& nids,
                  double threshold, const E2eOptions& options) {
  if (malicious.empty()) throw std::runtime_error("empty malicious trace");

  E2eResult result;
  FeatureExtractor extractor(options.lambdas);
  double nids_time_offset = 0.0;
  if (options.warm_prefix && !options.warm_prefix->records.empty()) {
    if (options.warm_gap < 0) throw std::runtime_error("warm_gap must be >= 0");
    for (const PacketRecord& rec : options.warm_prefix->records) {
      extractor.update(rec);
    }
    nids_time_offset = quantize_timestamp(
        options.warm_prefix->records.back().timestamp + options.warm_gap);
  }
  Rng jitter_rng(net.seed);
  ReshapeState state = reshaper.seed_state();
  std::vector<std::size_t> rule_counters(net.rules.size(), 0);

  std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, LaterFirst> queue;
  const std::uint64_t n = malicious.size();
  std::uint64_t next_response_seq = n;

  std::vector<double> scores;
  std::vector<Label> labels;

  auto hop = [&](double from) {
    double t = from + net.base_latency;
    if (net.jitter > 0) t += jitter_rng.uniform(0.0, net.jitter);
    return quantize_timestamp(t);
  };

  // The proxy decides each send time when it emits the previous packet;
  // send times never move backwards even if an observation lands between
  // two sends.
  {
    const double t0 = reshaper.reshape_step(state, malicious.records[0]);
    queue.push({t0, SimEventKind::proxy_send, 0, malicious.records[0]});
  }

  std::size_t processed = 0;
  while (!queue.empty()) {
    if (++processed > net.event_cap) {
      throw std::runtime_error(
          "event cap exceeded (" + std::to_string(net.event_cap) +
          "); response rules may be generating unbounded traffic");
    }
    const QueuedEvent ev = queue.top();
    queue.pop();

    switch (ev.kind) {
      case SimEventKind::proxy_send: {
        result.events.push_back({ev.time, ev.kind, ev.seq, std::nullopt});
        queue.push({hop(ev.time), SimEventKind::target_receive, ev.seq,
                    ev.packet});
        const std::uint64_t next = ev.seq + 1;
        if (next < n) {
          if (state.prev_timestamp < ev.time) state.prev_timestamp = ev.time;
          const double t =
              reshaper.reshape_step(state, malicious.records[next]);
          queue.push({t, SimEventKind::proxy_send, next,
                      malicious.records[next]});
        }
        break;
      }
      case SimEventKind::target_receive: {
        result.events.push_back({ev.time, ev.kind, ev.seq, std::nullopt});
        queue.push({ev.time, SimEventKind::nids_score, ev.seq, ev.packet});
        for (std::size_t r = 0; r < net.rules.size(); ++r) {
          const ResponseRule& rule = net.rules[r];
          if (ev.packet.size < rule.min_size) continue;
          if (rule.protocol && *rule.protocol != ev.packet.protocol) continue;
          if (++rule_counters[r] % rule.every_k != 0) continue;
          const PacketRecord resp =
              make_response(ev.packet, next_response_seq++, rule.response_size);
          queue.push({quantize_timestamp(ev.time + rule.delay),
                      SimEventKind::target_respond, resp.seq_index, resp});
        }
        break;
      }
      case SimEventKind::target_respond: {
        result.events.push_back({ev.time, ev.kind, ev.seq, std::nullopt});
        queue.push({ev.time, SimEventKind::nids_score, ev.seq, ev.packet});
        queue.push({hop(ev.time), SimEventKind::proxy_receive, ev.seq,
                    ev.packet});
        break;
      }
      case SimEventKind::proxy_receive: {
        result.events.push_back({ev.time, ev.kind, ev.seq, std::nullopt});
        double delta = ev.time - state.prev_timestamp;
        if (delta < 0) delta = 0;  // already overtaken by a later send
        reshaper.inject_observation(state, delta, ev.packet.size);
        break;
      }
      case SimEventKind::nids_score: {
        PacketRecord rec = ev.packet;
        rec.timestamp = quantize_timestamp(ev.time + nids_time_offset);
        const std::vector<double> row = extractor.update(rec);
        const double s = nids.score(Eigen::Map<const Eigen::VectorXd>(
            row.data(), static_cast<Eigen::Index>(row.size())));
        result.events.push_back({ev.time, ev.kind, ev.seq, s});
        scores.push_back(s);
        labels.push_back(rec.label);
        if (ev.seq < n) {
          result.malicious_scores.push_back(s);
        } else {
          result.response_scores.push_back(s);
        }
        break;
      }
    }
  }

  result.report = detect(scores, labels, threshold);
  return result;
}

void write_events_jsonl(const std::vector<SimEvent>& events,
                        const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write event log: " + path);
  char buf[64];
  for (const SimEvent& ev : events) {
    std::snprintf(buf, sizeof(buf), "%.9f", ev.sim_time);
    os << "{\"sim_time\":" << buf << ",\"kind\":\"" << to_string(ev.kind)
       << "\",\"seq_index\":" << ev.seq_index;
    if (ev.score) {
      std::snprintf(buf, sizeof(buf), "%.17g", *ev.score);
      os << ",\"score\":" << buf;
    }
    os << "}\n";
  }
  if (!os.good()) throw std::runtime_error("short write: " + path);
}

std::vector<std::pair<std::uint64_t, double>> replay_schedule(
    const TrafficTrace& trace) {
  std::vector<std::pair<std::uint64_t, double>> rows;
  rows.reserve(trace.size());
  double prev = -1.0;
  for (const PacketRecord& rec : trace.records) {
    if (!rows.empty() && rec.timestamp < prev) {
      throw std::runtime_error("trace is not monotone at seq " +
                               std::to_string(rec.seq_index));
    }
    prev = rec.timestamp;
    rows.emplace_back(rec.seq_index, rec.timestamp);
  }
  return rows;
}

}  // namespace cadence
