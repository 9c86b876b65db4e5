#include "cadence/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cadence/rng.hpp"

namespace cadence {

namespace {

constexpr std::uint32_t kMinSize = 64;
constexpr std::uint32_t kMaxSize = 1514;

struct Endpoint {
  std::uint64_t mac;
  IpAddr ip;
};

// Locally-administered MACs and 10.x.y.z addresses drawn from the endpoint
// seed, so profiles with different seeds use disjoint endpoints with high
// probability while profiles sharing an endpoint_seed reuse the same ones.
std::vector<Endpoint> make_pool(Rng& rng, std::size_t count) {
  std::vector<Endpoint> pool;
  pool.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Endpoint ep;
    ep.mac = 0x020000000000ull | (rng.next_u64() & 0xffffffffffull);
    ep.ip.bytes[0] = 10;
    ep.ip.bytes[1] = static_cast<std::uint8_t>(rng.below(256));
    ep.ip.bytes[2] = static_cast<std::uint8_t>(rng.below(256));
    ep.ip.bytes[3] = static_cast<std::uint8_t>(1 + rng.below(254));
    pool.push_back(ep);
  }
  return pool;
}

std::uint32_t draw_size(Rng& rng, const TrafficProfile& p) {
  const double s = rng.normal(p.size_mean, p.size_std);
  const auto i = static_cast<std::int64_t>(std::llround(s));
  return static_cast<std::uint32_t>(std::clamp<std::int64_t>(i, kMinSize, kMaxSize));
}

// delta scaled by (1 + jitter * u), u in [-1, 1); strictly positive for
// jitter < 1.
double jittered(Rng& rng, double delta, double jitter) {
  if (jitter <= 0) return delta;
  return delta * (1.0 + jitter * rng.uniform(-1.0, 1.0));
}

}  // namespace

ProfileKind parse_profile_kind(const std::string& text) {
  if (text == "periodic_benign") return ProfileKind::periodic_benign;
  if (text == "bursty_benign") return ProfileKind::bursty_benign;
  if (text == "flood_attack") return ProfileKind::flood_attack;
  if (text == "scan_attack") return ProfileKind::scan_attack;
  if (text == "mitm_like") return ProfileKind::mitm_like;
  throw std::runtime_error("unknown profile kind: " + text);
}

std::string to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::periodic_benign: return "periodic_benign";
    case ProfileKind::bursty_benign: return "bursty_benign";
    case ProfileKind::flood_attack: return "flood_attack";
    case ProfileKind::scan_attack: return "scan_attack";
    case ProfileKind::mitm_like: return "mitm_like";
  }
  return "periodic_benign";
}

TrafficProfile TrafficProfile::from_config(const KvConfig& cfg,
                                           const std::string& prefix) {
  TrafficProfile p;
  p.kind = parse_profile_kind(cfg.get(prefix + "kind"));
  p.n_packets = static_cast<std::size_t>(cfg.get_int(prefix + "n"));
  p.base_delta = cfg.get_double(prefix + "base_delta");
  p.jitter = cfg.get_double_or(prefix + "jitter", 0.0);
  p.size_mean = cfg.get_double_or(prefix + "size_mean", 512.0);
  p.size_std = cfg.get_double_or(prefix + "size_std", 128.0);
  p.endpoint_pool =
      static_cast<std::size_t>(cfg.get_int_or(prefix + "endpoints", 4));
  p.seed = cfg.get_u64_or(prefix + "seed", 0);
  if (cfg.has(prefix + "endpoint_seed")) {
    p.endpoint_seed = cfg.get_u64_or(prefix + "endpoint_seed", 0);
  }
  return p;
}

TrafficTrace generate(const TrafficProfile& profile) {
  if (profile.n_packets < 2) throw std::runtime_error("n_packets must be >= 2");
  if (profile.base_delta <= 0) throw std::runtime_error("base_delta must be > 0");
  if (profile.jitter < 0 || profile.jitter >= 1) {
    throw std::runtime_error("jitter must be in [0, 1)");
  }
  if (profile.endpoint_pool < 2) {
    throw std::runtime_error("endpoint_pool must be >= 2");
  }

  Rng rng(profile.seed);
  Rng pool_rng(
      derive_seed(profile.endpoint_seed.value_or(profile.seed), "endpoints"));
  const auto pool = make_pool(pool_rng, profile.endpoint_pool);
  const bool benign = profile.kind == ProfileKind::periodic_benign ||
                      profile.kind == ProfileKind::bursty_benign;

  TrafficTrace trace;
  trace.origin = TraceOrigin::synthetic;
  trace.records.reserve(profile.n_packets);

  // The working rate drifts between regimes: a level held for 1500-4500
  // packets, then a jump, amplitude 15% of the jitter setting. Gives the
  // long-horizon rate statistics genuine excursions (a capture looks like a
  // link under varying load, not a metronome) while jitter=0 still means
  // exact periodicity. Drawn from a separate stream so per-packet draws
  // stay aligned across kinds.
  Rng regime_rng(derive_seed(profile.seed, "rate-regimes"));
  double regime = 1.0;
  std::size_t regime_left = 0;
  std::int64_t now_us = 0;
  std::size_t burst_left = 0;
  std::uint32_t scan_counter = 0;

  auto push = [&](const Endpoint& src, const Endpoint& dst, IpAddr dst_ip,
                  double delta, std::uint32_t size) {
    if (!trace.records.empty()) {
      now_us += std::max<std::int64_t>(1, std::llround(delta * 1e6));
    }
    PacketRecord rec;
    rec.seq_index = trace.records.size();
    rec.timestamp = static_cast<double>(now_us) / 1e6;
    rec.src_mac = src.mac;
    rec.dst_mac = dst.mac;
    rec.src_ip = src.ip;
    rec.dst_ip = dst_ip;
    rec.protocol = 6;  // TCP-coded traffic is enough structure for channels
    rec.ip_type = IpType::v4;
    rec.size = size;
    rec.label = benign ? Label::benign : Label::malicious;
    trace.records.push_back(rec);
  };

  while (trace.records.size() < profile.n_packets) {
    if (regime_left == 0) {
      regime = 1.0 + 0.15 * profile.jitter * regime_rng.uniform(-1.0, 1.0);
      regime_left =
          static_cast<std::size_t>(regime_rng.uniform(1500.0, 4500.0));
    }
    --regime_left;

    switch (profile.kind) {
      case ProfileKind::periodic_benign: {
        // One steady point-to-point flow: the timing, not the endpoint mix,
        // carries the structure.
        push(pool[0], pool[1], pool[1].ip,
             jittered(rng, profile.base_delta, profile.jitter) * regime,
             draw_size(rng, profile));
        break;
      }
      case ProfileKind::bursty_benign: {
        double delta;
        if (burst_left == 0) {
          burst_left = 2 + rng.below(7);  // burst of 2..8 packets
          delta = jittered(rng, profile.base_delta * 3.0, profile.jitter);
        } else {
          delta = jittered(rng, profile.base_delta / 5.0, profile.jitter);
        }
        --burst_left;
        const std::size_t si = rng.below(pool.size());
        std::size_t di = rng.below(pool.size() - 1);
        if (di >= si) ++di;
        push(pool[si], pool[di], pool[di].ip, delta * regime,
             draw_size(rng, profile));
        break;
      }
      case ProfileKind::flood_attack: {
        // Single channel hammered at 1/20th of the benign period; with
        // jitter < 1 every delta stays under base_delta / 10.
        push(pool[0], pool[1], pool[1].ip,
             jittered(rng, profile.base_delta / 20.0, profile.jitter) * regime,
             draw_size(rng, profile));
        break;
      }
      case ProfileKind::scan_attack: {
        IpAddr dst = pool[1].ip;
        dst.bytes[2] = static_cast<std::uint8_t>(scan_counter >> 8);
        dst.bytes[3] = static_cast<std::uint8_t>(scan_counter & 0xff);
        ++scan_counter;
        push(pool[0], pool[1], dst,
             jittered(rng, profile.base_delta / 5.0, profile.jitter) * regime,
             draw_size(rng, profile));
        break;
      }
      case ProfileKind::mitm_like: {
        // A -> M, then M relays to B after a short fixed gap.
        const Endpoint& a = pool[0];
        const Endpoint& m = pool[1];
        const Endpoint& b = pool[pool.size() > 2 ? 2 : 0];
        const std::uint32_t size = draw_size(rng, profile);
        push(a, m, m.ip,
             jittered(rng, profile.base_delta, profile.jitter) * regime, size);
        if (trace.records.size() < profile.n_packets) {
          push(m, b, b.ip, profile.base_delta * 0.05, size);
        }
        break;
      }
    }
  }
  return trace;
}

}  // namespace cadence
