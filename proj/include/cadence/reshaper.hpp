#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cadence/trace.hpp"

namespace cadence {

// Min-max bounds learned from the benign training trace. Degenerate bounds
// (max == min) normalize to 0.5 and denormalize to the shared value.
struct Normalization {
  double delta_min = 0.0, delta_max = 0.0;
  double size_min = 0.0, size_max = 0.0;

  double normalize_delta(double delta) const;
  double denormalize_delta(double y) const;
  double normalize_size(double size) const;
};

// Supervised windows over a benign trace: for each packet i >= W the input
// is the W previous packets' (normalized delta, normalized size) pairs --
// each step padded with a third slot that is zero except on the final step,
// where it carries the current packet's normalized size -- and the target
// is packet i's normalized delta. Rows of `inputs` are flattened step-major
// (step t occupies columns [3t, 3t+3)).
struct WindowSet {
  std::size_t window = 0;
  Eigen::MatrixXd inputs;   // n_windows x 3W
  Eigen::VectorXd targets;  // n_windows
  Normalization norms;
};

// Throws if the trace is shorter than W+1 packets. The first history
// packet's delta is undefined and enters as 0, clamped into [0,1] after
// normalization.
WindowSet build_windows(const TrafficTrace& trace, std::size_t window);

struct ReshaperConfig {
  std::size_t window = 50;
  std::size_t hidden = 32;
  std::size_t epochs = 5;
  std::size_t batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 7;
};

// Rolling history consumed by step-wise reshaping: W (normalized delta,
// normalized size) pairs plus the previous emitted timestamp.
struct ReshapeState {
  std::deque<std::pair<double, double>> history;
  double prev_timestamp = 0.0;
};

// Many-to-one LSTM over packet-timing history: W steps of width-3 inputs
// into a hidden state of width 32, then a 32->8 ReLU layer and an 8->1
// sigmoid head emitting the next normalized inter-packet delta. Trained
// with Adam on MSE; reshaping runs the model free-running, feeding each
// prediction back into the history.
class ReshaperModel {
 public:
  explicit ReshaperModel(ReshaperConfig cfg = {});

  // build_windows + train + seed history, in one call. Training-role traces
  // are benign by construction; any benign trace >= W+1 packets works.
  void fit(const TrafficTrace& benign);

  void train(const WindowSet& windows);
  bool trained() const { return trained_; }
  const std::vector<double>& loss_curve() const { return loss_curve_; }
  const ReshaperConfig& config() const { return cfg_; }
  const Normalization& norms() const { return norms_; }

  // Forward pass over one flattened window (3W values); in (0,1).
  double forward(const Eigen::VectorXd& window_input) const;

  // ------ reshaping ------
  // History seeded from the tail of the training trace.
  ReshapeState seed_state() const;
  // Predicts this packet's delta from the current history, advances the
  // state, and returns the packet's new (quantized) timestamp.
  double reshape_step(ReshapeState& state, const PacketRecord& packet) const;
  // Feeds an externally observed (delta, size) -- e.g. a response from the
  // target network -- into the history; values are clamped into [0,1] after
  // normalization.
  void inject_observation(ReshapeState& state, double delta,
                          double size) const;
  // Applies reshape_step over the whole trace. Only timestamps change.
  TrafficTrace reshape_offline(const TrafficTrace& malicious) const;

  // ------ persistence ------
  void save(std::ostream& os) const;
  static ReshaperModel load(std::istream& is);
  static ReshaperModel load_file(const std::string& path);
  void save_file(const std::string& path) const;

  // ------ verification hooks ------
  void init_params();
  Eigen::VectorXd flatten_params() const;
  void set_params(const Eigen::VectorXd& theta);
  // Mean squared error over the given windows and its gradient w.r.t. the
  // flattened parameters.
  std::pair<double, Eigen::VectorXd> loss_and_grad(
      const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets) const;
  void set_norms(const Normalization& norms) { norms_ = norms; }
  void set_seed_history(std::vector<std::pair<double, double>> pairs);
  void mark_trained() { trained_ = true; }

  static constexpr double kDeltaFloor = 1e-6;  // seconds

 private:
  ReshaperConfig cfg_;
  // Gate rows are stacked [input; forget; candidate; output], H rows each.
  Eigen::MatrixXd Wx_;  // 4H x 3
  Eigen::MatrixXd Wh_;  // 4H x H
  Eigen::VectorXd b_;   // 4H
  Eigen::MatrixXd W1_;  // 8 x H
  Eigen::VectorXd b1_;  // 8
  Eigen::MatrixXd W2_;  // 1 x 8
  Eigen::VectorXd b2_;  // 1

  Normalization norms_;
  std::vector<std::pair<double, double>> seed_history_;
  std::vector<double> loss_curve_;
  bool trained_ = false;
};

}  // namespace cadence
