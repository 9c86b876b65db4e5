#include "cadence/features.hpp"

#include <cmath>
#include <stdexcept>

namespace cadence {

void DampedStat::decay_to(double t, double lambda) {
  if (!seen) {
    last_time = t;
    seen = true;
    return;
  }
  const double dt = t - last_time;
  if (dt > 0) {
    const double factor = std::exp2(-lambda * dt);
    weight *= factor;
    lin_sum *= factor;
    sq_sum *= factor;
    last_time = t;
  }
}

void DampedStat::add(double value) {
  weight += 1.0;
  lin_sum += value;
  sq_sum += value * value;
}

double DampedStat::mean() const {
  return weight > 0 ? lin_sum / weight : 0.0;
}

double DampedStat::variance() const {
  if (weight <= 0) return 0.0;
  const double m = mean();
  const double v = sq_sum / weight - m * m;
  return v > 0 ? v : 0.0;
}

double DampedStat::stddev() const { return std::sqrt(variance()); }

FeatureExtractor::FeatureExtractor(std::vector<double> lambdas)
    : lambdas_(std::move(lambdas)) {
  if (lambdas_.empty()) throw std::runtime_error("lambda list is empty");
  for (double l : lambdas_) {
    if (!(l > 0)) throw std::runtime_error("lambdas must be positive");
  }
}

std::vector<DampedStat>& FeatureExtractor::channel(Table& table,
                                                   const std::string& key) {
  auto it = table.find(key);
  if (it == table.end()) {
    it = table.emplace(key, std::vector<DampedStat>(lambdas_.size())).first;
  }
  return it->second;
}

void FeatureExtractor::emit(std::vector<DampedStat>& stats, double t,
                            double value, std::vector<double>& row) const {
  for (std::size_t i = 0; i < lambdas_.size(); ++i) {
    DampedStat& s = stats[i];
    s.decay_to(t, lambdas_[i]);
    s.add(value);
    row.push_back(s.weight);
    row.push_back(s.mean());
    row.push_back(s.stddev());
  }
}

namespace {

void append_bytes(std::string& key, const void* data, std::size_t n) {
  key.append(static_cast<const char*>(data), n);
}

std::string mac_key(std::uint64_t mac) {
  std::string key;
  append_bytes(key, &mac, sizeof(mac));
  return key;
}

std::string ip_key(const IpAddr& ip) {
  std::string key;
  append_bytes(key, ip.bytes.data(), ip.bytes.size());
  return key;
}

}  // namespace

std::vector<double> FeatureExtractor::update(const PacketRecord& rec) {
  if (any_ && rec.timestamp < last_time_) {
    throw std::runtime_error("packet timestamps regressed at seq " +
                             std::to_string(rec.seq_index));
  }
  any_ = true;
  last_time_ = rec.timestamp;

  std::vector<double> row;
  row.reserve(width());

  const double t = rec.timestamp;
  const double value = static_cast<double>(rec.size);

  emit(channel(by_mac_, mac_key(rec.src_mac)), t, value, row);

  if (rec.ip_type == IpType::other) {
    row.resize(width(), 0.0);
    return row;
  }

  const std::string src = ip_key(rec.src_ip);
  std::string pair = src + ip_key(rec.dst_ip);
  std::string socket = pair;
  const std::uint16_t proto = rec.protocol;
  socket.append(reinterpret_cast<const char*>(&proto), sizeof(proto));

  emit(channel(by_ip_, src), t, value, row);
  emit(channel(by_pair_, pair), t, value, row);
  emit(channel(by_socket_, socket), t, value, row);
  return row;
}

void FeatureExtractor::reset() {
  by_mac_.clear();
  by_ip_.clear();
  by_pair_.clear();
  by_socket_.clear();
  last_time_ = 0.0;
  any_ = false;
}

Eigen::MatrixXd featurize_trace(const TrafficTrace& trace,
                                const std::vector<double>& lambdas) {
  FeatureExtractor extractor(lambdas);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(trace.size()),
                      static_cast<Eigen::Index>(extractor.width()));
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const std::vector<double> row = extractor.update(trace.records[i]);
    for (std::size_t j = 0; j < row.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
  }
  return out;
}

Eigen::MatrixXd featurize_continuation(const TrafficTrace& prefix,
                                       const TrafficTrace& trace, double gap,
                                       const std::vector<double>& lambdas) {
  if (prefix.records.empty()) return featurize_trace(trace, lambdas);
  if (gap < 0) throw std::runtime_error("continuation gap must be >= 0");
  FeatureExtractor extractor(lambdas);
  for (const PacketRecord& rec : prefix.records) extractor.update(rec);

  double shift = 0.0;
  if (!trace.records.empty()) {
    shift = quantize_timestamp(prefix.records.back().timestamp + gap -
                               trace.records.front().timestamp);
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(trace.size()),
                      static_cast<Eigen::Index>(extractor.width()));
  for (std::size_t i = 0; i < trace.size(); ++i) {
    PacketRecord rec = trace.records[i];
    rec.timestamp = quantize_timestamp(rec.timestamp + shift);
    const std::vector<double> row = extractor.update(rec);
    for (std::size_t j = 0; j < row.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
  }
  return out;
}

}  // namespace cadence
