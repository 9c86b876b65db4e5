#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cadence/kvconfig.hpp"
#include "cadence/trace.hpp"

namespace cadence {

enum class ProfileKind : std::uint8_t {
  periodic_benign,
  bursty_benign,
  flood_attack,
  scan_attack,
  mitm_like,
};

ProfileKind parse_profile_kind(const std::string& text);
std::string to_string(ProfileKind kind);

/// Declarative description of a generated trace. Timing structure per kind:
///  - periodic_benign: one steady point-to-point flow, deltas
///                     base_delta * (1 +- jitter)
///  - bursty_benign:   short bursts at base_delta/5 separated by ~3x gaps
///  - flood_attack:    one hammered channel, deltas base_delta/20
///  - scan_attack:     one source fanning out to a fresh address per packet,
///                     deltas base_delta/5
///  - mitm_like:       relayed pairs A->M, M->B with a small relay gap
/// On top of the per-packet jitter, every kind drifts through rate regimes:
/// a multiplier of amplitude 0.15 * jitter held for 1500-4500 packets, the
/// way a real link's load varies on tens-of-seconds scales. jitter = 0 turns
/// both effects off, leaving exact periodicity.
struct TrafficProfile {
  ProfileKind kind = ProfileKind::periodic_benign;
  std::size_t n_packets = 0;
  double base_delta = 0.0;      // seconds
  double jitter = 0.0;          // fraction of base_delta, in [0, 1)
  double size_mean = 512.0;     // bytes
  double size_std = 128.0;
  std::size_t endpoint_pool = 4;  // distinct (MAC, IP) endpoint pairs
  std::uint64_t seed = 0;
  // Endpoint addresses are drawn from this seed, timing and sizes from
  // `seed`. Two profiles sharing an endpoint_seed (and pool size) talk on
  // the same channels, e.g. an attack riding a known benign flow.
  std::optional<std::uint64_t> endpoint_seed;

  /// Reads "<prefix>kind", "<prefix>n", "<prefix>base_delta", ... from a
  /// key-value config; prefix may be empty or e.g. "attack.flood.".
  static TrafficProfile from_config(const KvConfig& cfg,
                                    const std::string& prefix = "");
};

/// Deterministic for a fixed profile (seed included). Benign kinds emit
/// benign-labeled records, attack kinds malicious ones. Sizes are clamped to
/// [64, 1514]; timestamps are accumulated in integer microseconds.
TrafficTrace generate(const TrafficProfile& profile);

}  // namespace cadence
