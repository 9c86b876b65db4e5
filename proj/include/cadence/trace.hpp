#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace cadence {

enum class IpType : std::uint8_t { v4, v6, other };
enum class Label : std::uint8_t { benign, malicious, unlabeled };
enum class TraceOrigin : std::uint8_t { pcap, canonical, synthetic };
enum class SplitRole : std::uint8_t {
  nids_train_benign,
  reshaper_train_benign,
  malicious_test,
  mixed,
};

/// IPv4 addresses occupy the first 4 bytes, IPv6 all 16. Non-IP packets
/// carry an all-zero address.
struct IpAddr {
  std::array<std::uint8_t, 16> bytes{};
  bool operator==(const IpAddr&) const = default;
};

/// One captured packet reduced to the nine problem-space attributes the
/// feature extractor consumes. Timestamps are seconds since trace start on a
/// microsecond grid (see quantize_timestamp).
struct PacketRecord {
  std::uint64_t seq_index = 0;
  double timestamp = 0.0;
  std::uint64_t src_mac = 0;  // lower 48 bits
  std::uint64_t dst_mac = 0;
  IpAddr src_ip;
  IpAddr dst_ip;
  std::uint16_t protocol = 0;  // transport/next-header code; 0 for non-IP
  IpType ip_type = IpType::other;
  std::uint32_t size = 1;  // bytes on the wire, >= 1
  Label label = Label::unlabeled;
};

struct TrafficTrace {
  std::vector<PacketRecord> records;
  TraceOrigin origin = TraceOrigin::canonical;
  SplitRole split_role = SplitRole::mixed;
  bool truncated = false;  // pcap ingest stopped early on a short read

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

/// Errors raised while parsing trace files; the message names the offending
/// file/line or record index.
class TraceParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rounds to the microsecond grid the canonical format stores (6 fractional
/// digits). Applying it at every timestamp producer makes write/read
/// round-trips bit-exact.
double quantize_timestamp(double t);

std::string format_mac(std::uint64_t mac);
std::uint64_t parse_mac(const std::string& text);  // aa:bb:cc:dd:ee:ff
std::string format_ip(const IpAddr& ip, IpType type);
IpAddr parse_ip(const std::string& text, IpType type);

std::string to_string(Label label);
std::string to_string(IpType type);
Label parse_label(const std::string& text);
IpType parse_ip_type(const std::string& text);

/// Reads a libpcap capture (Ethernet link type). Timestamps are rebased so
/// the first packet sits at 0; every record gets `label`. Non-IP packets are
/// kept with ip_type=other and zeroed IP fields. A short read at the end of
/// the file returns the records parsed so far with trace.truncated set.
TrafficTrace ingest_pcap(const std::string& path,
                         Label label = Label::unlabeled);

/// Canonical text format: one record per line,
///   seq_index timestamp src_mac dst_mac src_ip dst_ip protocol ip_type size label
/// single-space separated, timestamps with exactly 6 fractional digits,
/// '#' lines ignored.
TrafficTrace read_canonical(std::istream& in, const std::string& name = "<stream>");
TrafficTrace read_canonical(const std::string& path);
void write_canonical(const TrafficTrace& trace, std::ostream& out);
void write_canonical(const TrafficTrace& trace, const std::string& path);

/// Contiguous prefix/middle/suffix split by packet count. Sub-traces are
/// rebased to timestamp 0, renumbered from seq 0 and given the roles
/// nids_train_benign / reshaper_train_benign / malicious_test in order.
/// The two training slices must contain only benign-labeled records.
std::array<TrafficTrace, 3> split_trace(const TrafficTrace& trace,
                                        double nids_frac,
                                        double reshaper_frac);

/// timestamp[i] - timestamp[i-1] for i in [1, n).
std::vector<double> inter_packet_deltas(const TrafficTrace& trace);

}  // namespace cadence
