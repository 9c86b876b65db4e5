#include "cadence/trace.hpp"

#include <arpa/inet.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace cadence {

double quantize_timestamp(double t) {
  // round() yields an integer exactly; the division is correctly rounded, so
  // the result equals the nearest double of the 6-digit decimal.
  return std::round(t * 1e6) / 1e6;
}

std::string format_mac(std::uint64_t mac) {
  char buf[18];
  std::snprintf(buf, sizeof(buf), "%02x:%02x:%02x:%02x:%02x:%02x",
                unsigned((mac >> 40) & 0xff), unsigned((mac >> 32) & 0xff),
                unsigned((mac >> 24) & 0xff), unsigned((mac >> 16) & 0xff),
                unsigned((mac >> 8) & 0xff), unsigned(mac & 0xff));
  return buf;
}

std::uint64_t parse_mac(const std::string& text) {
  unsigned b[6];
  char tail = 0;
  if (std::sscanf(text.c_str(), "%2x:%2x:%2x:%2x:%2x:%2x%c", &b[0], &b[1],
                  &b[2], &b[3], &b[4], &b[5], &tail) != 6) {
    throw TraceParseError("bad MAC address: " + text);
  }
  std::uint64_t mac = 0;
  for (unsigned v : b) mac = (mac << 8) | v;
  return mac;
}

std::string format_ip(const IpAddr& ip, IpType type) {
  char buf[INET6_ADDRSTRLEN];
  switch (type) {
    case IpType::v4:
      inet_ntop(AF_INET, ip.bytes.data(), buf, sizeof(buf));
      return buf;
    case IpType::v6:
      inet_ntop(AF_INET6, ip.bytes.data(), buf, sizeof(buf));
      return buf;
    case IpType::other:
      return "0.0.0.0";
  }
  return "0.0.0.0";
}

IpAddr parse_ip(const std::string& text, IpType type) {
  IpAddr ip;
  int rc = 0;
  switch (type) {
    case IpType::v4:
      rc = inet_pton(AF_INET, text.c_str(), ip.bytes.data());
      break;
    case IpType::v6:
      rc = inet_pton(AF_INET6, text.c_str(), ip.bytes.data());
      break;
    case IpType::other:
      // Non-IP records always carry the zero address.
      if (text != "0.0.0.0") {
        throw TraceParseError("non-IP record must use address 0.0.0.0, got " +
                              text);
      }
      return ip;
  }
  if (rc != 1) throw TraceParseError("bad IP address: " + text);
  return ip;
}

std::string to_string(Label label) {
  switch (label) {
    case Label::benign: return "benign";
    case Label::malicious: return "malicious";
    case Label::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

std::string to_string(IpType type) {
  switch (type) {
    case IpType::v4: return "v4";
    case IpType::v6: return "v6";
    case IpType::other: return "other";
  }
  return "other";
}

Label parse_label(const std::string& text) {
  if (text == "benign") return Label::benign;
  if (text == "malicious") return Label::malicious;
  if (text == "unlabeled") return Label::unlabeled;
  throw TraceParseError("bad label: " + text);
}

IpType parse_ip_type(const std::string& text) {
  if (text == "v4") return IpType::v4;
  if (text == "v6") return IpType::v6;
  if (text == "other") return IpType::other;
  throw TraceParseError("bad ip_type: " + text);
}

TrafficTrace read_canonical(std::istream& in, const std::string& name) {
  TrafficTrace trace;
  trace.origin = TraceOrigin::canonical;
  std::string line;
  std::size_t lineno = 0;
  double prev_ts = 0.0;
  auto fail = [&](const std::string& what) {
    throw TraceParseError(name + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string seq_s, ts_s, smac_s, dmac_s, sip_s, dip_s, proto_s, iptype_s,
        size_s, label_s, extra;
    if (!(ls >> seq_s >> ts_s >> smac_s >> dmac_s >> sip_s >> dip_s >>
          proto_s >> iptype_s >> size_s >> label_s)) {
      fail("expected 10 fields");
    }
    if (ls >> extra) fail("trailing data after label");

    PacketRecord rec;
    try {
      rec.seq_index = std::stoull(seq_s);
      rec.timestamp = std::stod(ts_s);
      rec.src_mac = parse_mac(smac_s);
      rec.dst_mac = parse_mac(dmac_s);
      rec.ip_type = parse_ip_type(iptype_s);
      rec.src_ip = parse_ip(sip_s, rec.ip_type);
      rec.dst_ip = parse_ip(dip_s, rec.ip_type);
      const long proto = std::stol(proto_s);
      if (proto < 0 || proto > 0xffff) throw TraceParseError("protocol out of range");
      rec.protocol = static_cast<std::uint16_t>(proto);
      const long long size = std::stoll(size_s);
      if (size < 1) throw TraceParseError("size must be >= 1");
      rec.size = static_cast<std::uint32_t>(size);
      rec.label = parse_label(label_s);
    } catch (const std::exception& e) {
      fail(e.what());
    }
    if (rec.timestamp < 0) fail("negative timestamp");
    if (!trace.records.empty() && rec.timestamp < prev_ts) {
      fail("timestamp decreases at record index " +
           std::to_string(trace.records.size()));
    }
    prev_ts = rec.timestamp;
    trace.records.push_back(rec);
  }
  return trace;
}

TrafficTrace read_canonical(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceParseError("cannot open trace file: " + path);
  return read_canonical(in, path);
}

void write_canonical(const TrafficTrace& trace, std::ostream& out) {
  char buf[64];
  for (const auto& rec : trace.records) {
    out << rec.seq_index << ' ';
    std::snprintf(buf, sizeof(buf), "%.6f", rec.timestamp);
    out << buf << ' ' << format_mac(rec.src_mac) << ' '
        << format_mac(rec.dst_mac) << ' ' << format_ip(rec.src_ip, rec.ip_type)
        << ' ' << format_ip(rec.dst_ip, rec.ip_type) << ' ' << rec.protocol
        << ' ' << to_string(rec.ip_type) << ' ' << rec.size << ' '
        << to_string(rec.label) << '\n';
  }
}

void write_canonical(const TrafficTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  write_canonical(trace, out);
}

namespace {

TrafficTrace make_slice(const TrafficTrace& trace, std::size_t begin,
                        std::size_t count, SplitRole role) {
  TrafficTrace slice;
  slice.origin = trace.origin;
  slice.split_role = role;
  slice.records.reserve(count);
  const double t0 = trace.records[begin].timestamp;
  for (std::size_t i = 0; i < count; ++i) {
    PacketRecord rec = trace.records[begin + i];
    rec.seq_index = i;
    rec.timestamp = quantize_timestamp(rec.timestamp - t0);
    slice.records.push_back(rec);
  }
  if (role == SplitRole::nids_train_benign ||
      role == SplitRole::reshaper_train_benign) {
    for (const auto& rec : slice.records) {
      if (rec.label != Label::benign) {
        throw std::runtime_error(
            "training split contains a non-benign record at index " +
            std::to_string(rec.seq_index));
      }
    }
  }
  return slice;
}

}  // namespace

std::array<TrafficTrace, 3> split_trace(const TrafficTrace& trace,
                                        double nids_frac,
                                        double reshaper_frac) {
  if (nids_frac <= 0 || reshaper_frac <= 0) {
    throw std::runtime_error("split fractions must be positive");
  }
  if (nids_frac + reshaper_frac > 1.0) {
    throw std::runtime_error("split fractions exceed 1");
  }
  const std::size_t n = trace.size();
  const auto n1 = static_cast<std::size_t>(std::llround(n * nids_frac));
  const auto n2 = static_cast<std::size_t>(std::llround(n * reshaper_frac));
  if (n1 == 0 || n2 == 0 || n1 + n2 >= n) {
    throw std::runtime_error("split produces an empty sub-trace");
  }
  const std::size_t n3 = n - n1 - n2;
  return {make_slice(trace, 0, n1, SplitRole::nids_train_benign),
          make_slice(trace, n1, n2, SplitRole::reshaper_train_benign),
          make_slice(trace, n1 + n2, n3, SplitRole::malicious_test)};
}

std::vector<double> inter_packet_deltas(const TrafficTrace& trace) {
  std::vector<double> deltas;
  if (trace.size() < 2) return deltas;
  deltas.reserve(trace.size() - 1);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    deltas.push_back(trace.records[i].timestamp -
                     trace.records[i - 1].timestamp);
  }
  return deltas;
}

}  // namespace cadence
