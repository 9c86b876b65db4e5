#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "cadence/trace.hpp"

namespace cadence {

// Decay horizons used when none are configured. Five horizons spanning
// sub-second to multi-minute memory give the detectors both burst and
// drift sensitivity.
inline const std::vector<double> kDefaultLambdas = {5.0, 3.0, 1.0, 0.1, 0.01};

// Damped incremental statistic over a single traffic channel. The triple
// (weight, linear sum, squared sum) is decayed by 2^(-lambda * dt) before
// each insertion, so old packets fade smoothly instead of falling out of a
// window.
struct DampedStat {
  double weight = 0.0;
  double lin_sum = 0.0;
  double sq_sum = 0.0;
  double last_time = 0.0;
  bool seen = false;

  void decay_to(double t, double lambda);
  void add(double value);

  double mean() const;
  double variance() const;  // clamped at zero against rounding
  double stddev() const;
};

// Streaming per-packet feature extractor.
//
// Each packet updates four channel families keyed on its headers:
//   0: source MAC
//   1: source IP
//   2: (source IP, destination IP) pair
//   3: (source IP, destination IP, protocol) socket
// and the emitted row concatenates, family-major then lambda-major, the
// (weight, mean, stddev) of the matched channel in each family. The row
// therefore has 4 * 3 * |lambdas| entries (60 with the defaults).
//
// Packets without an IP layer update only the MAC family; their other
// family slots are emitted as zeros.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(std::vector<double> lambdas = kDefaultLambdas);

  std::size_t width() const { return 4 * 3 * lambdas_.size(); }
  const std::vector<double>& lambdas() const { return lambdas_; }

  // Folds the packet into its channels and returns the feature row for the
  // state including this packet. Throws if the timestamp precedes the
  // previous packet's.
  std::vector<double> update(const PacketRecord& rec);

  void reset();

 private:
  using Table = std::unordered_map<std::string, std::vector<DampedStat>>;

  std::vector<DampedStat>& channel(Table& table, const std::string& key);
  void emit(std::vector<DampedStat>& stats, double t, double value,
            std::vector<double>& row) const;

  std::vector<double> lambdas_;
  Table by_mac_, by_ip_, by_pair_, by_socket_;
  double last_time_ = 0.0;
  bool any_ = false;
};

// Runs a fresh extractor over the whole trace; row i describes packet i.
Eigen::MatrixXd featurize_trace(const TrafficTrace& trace,
                                const std::vector<double>& lambdas = kDefaultLambdas);

// Rows for `trace` as though it directly continued `prefix` on the same
// stream: the extractor is warmed on every prefix packet (no rows emitted
// for those), then `trace` is replayed with its timestamps shifted to start
// `gap` seconds after the prefix ends. Row i describes trace packet i. This
// is how a detector that watched the prefix live would see the trace.
Eigen::MatrixXd featurize_continuation(
    const TrafficTrace& prefix, const TrafficTrace& trace, double gap = 0.010,
    const std::vector<double>& lambdas = kDefaultLambdas);

}  // namespace cadence
