#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "cadence/trace.hpp"

// Reader for the classic libpcap file format (both byte orders, micro- and
// nanosecond variants), Ethernet link type only.

namespace cadence {

namespace {

constexpr std::uint32_t kMagicUs = 0xa1b2c3d4;
constexpr std::uint32_t kMagicUsSwapped = 0xd4c3b2a1;
constexpr std::uint32_t kMagicNs = 0xa1b23c4d;
constexpr std::uint32_t kMagicNsSwapped = 0x4d3cb2a1;
constexpr std::uint32_t kLinkTypeEthernet = 1;

std::uint32_t bswap32(std::uint32_t v) {
  return ((v & 0xff) << 24) | ((v & 0xff00) << 8) | ((v >> 8) & 0xff00) |
         (v >> 24);
}

std::uint16_t read_be16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

std::uint64_t read_mac48(const std::uint8_t* p) {
  std::uint64_t mac = 0;
  for (int i = 0; i < 6; ++i) mac = (mac << 8) | p[i];
  return mac;
}

// Fills the IP-level fields from an Ethernet frame. Anything that is not a
// well-formed IPv4/IPv6 payload is kept as ip_type=other.
void dissect_ethernet(const std::uint8_t* data, std::size_t len,
                      PacketRecord& rec) {
  rec.dst_mac = read_mac48(data);
  rec.src_mac = read_mac48(data + 6);
  std::size_t off = 12;
  std::uint16_t ethertype = read_be16(data + off);
  off += 2;
  // 802.1Q / 802.1ad tags sit between the MACs and the real ethertype.
  while ((ethertype == 0x8100 || ethertype == 0x88a8) && off + 4 <= len) {
    ethertype = read_be16(data + off + 2);
    off += 4;
  }
  if (ethertype == 0x0800 && len >= off + 20) {  // IPv4
    const std::uint8_t* ip = data + off;
    rec.ip_type = IpType::v4;
    rec.protocol = ip[9];
    std::memcpy(rec.src_ip.bytes.data(), ip + 12, 4);
    std::memcpy(rec.dst_ip.bytes.data(), ip + 16, 4);
  } else if (ethertype == 0x86dd && len >= off + 40) {  // IPv6
    const std::uint8_t* ip = data + off;
    rec.ip_type = IpType::v6;
    rec.protocol = ip[6];
    std::memcpy(rec.src_ip.bytes.data(), ip + 8, 16);
    std::memcpy(rec.dst_ip.bytes.data(), ip + 24, 16);
  } else {
    rec.ip_type = IpType::other;
    rec.protocol = 0;
  }
}

}  // namespace

TrafficTrace ingest_pcap(const std::string& path, Label label) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceParseError("cannot open pcap file: " + path);

  std::uint8_t ghdr[24];
  in.read(reinterpret_cast<char*>(ghdr), sizeof(ghdr));
  if (in.gcount() != sizeof(ghdr)) {
    throw TraceParseError(path + ": not a pcap file (short global header)");
  }
  std::uint32_t magic;
  std::memcpy(&magic, ghdr, 4);
  bool swapped = false;
  bool nanos = false;
  if (magic == kMagicUs) {
  } else if (magic == kMagicUsSwapped) {
    swapped = true;
  } else if (magic == kMagicNs) {
    nanos = true;
  } else if (magic == kMagicNsSwapped) {
    swapped = true;
    nanos = true;
  } else {
    throw TraceParseError(path + ": not a pcap file (bad magic)");
  }
  auto read_u32 = [&](const std::uint8_t* p) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return swapped ? bswap32(v) : v;
  };
  const std::uint32_t network = read_u32(ghdr + 20);
  if (network != kLinkTypeEthernet) {
    throw TraceParseError(path + ": unsupported link-layer type " +
                          std::to_string(network) + " (expected Ethernet)");
  }

  TrafficTrace trace;
  trace.origin = TraceOrigin::pcap;
  std::vector<std::uint8_t> payload;
  std::int64_t first_ts = 0;
  bool have_first = false;

  for (;;) {
    std::uint8_t phdr[16];
    in.read(reinterpret_cast<char*>(phdr), sizeof(phdr));
    if (in.gcount() == 0) break;  // clean EOF
    if (in.gcount() != sizeof(phdr)) {
      trace.truncated = true;
      break;
    }
    const std::uint32_t ts_sec = read_u32(phdr);
    const std::uint32_t ts_frac = read_u32(phdr + 4);
    const std::uint32_t incl_len = read_u32(phdr + 8);
    const std::uint32_t orig_len = read_u32(phdr + 12);
    payload.resize(incl_len);
    in.read(reinterpret_cast<char*>(payload.data()), incl_len);
    if (in.gcount() != static_cast<std::streamsize>(incl_len)) {
      trace.truncated = true;
      break;
    }

    // Integer microseconds keep the rebase exact.
    const std::int64_t ts_us =
        static_cast<std::int64_t>(ts_sec) * 1000000 +
        (nanos ? static_cast<std::int64_t>((ts_frac + 500) / 1000)
               : static_cast<std::int64_t>(ts_frac));
    if (!have_first) {
      first_ts = ts_us;
      have_first = true;
    }
    if (ts_us < first_ts && trace.records.empty()) first_ts = ts_us;

    PacketRecord rec;
    rec.seq_index = trace.records.size();
    rec.timestamp = static_cast<double>(ts_us - first_ts) / 1e6;
    rec.size = orig_len > 0 ? orig_len : (incl_len > 0 ? incl_len : 1);
    rec.label = label;
    if (payload.size() >= 14) {
      dissect_ethernet(payload.data(), payload.size(), rec);
    }
    if (!trace.records.empty() &&
        rec.timestamp < trace.records.back().timestamp) {
      throw TraceParseError(path + ": non-monotone timestamps at packet " +
                            std::to_string(rec.seq_index));
    }
    trace.records.push_back(rec);
  }

  if (trace.records.empty()) {
    throw TraceParseError(path + ": capture contains no packets");
  }
  return trace;
}

}  // namespace cadence
