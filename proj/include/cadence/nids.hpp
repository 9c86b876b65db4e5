#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cadence/trace.hpp"

namespace cadence {

// sqrt(mean((x_i - y_i)^2)); throws on length mismatch or empty vectors.
double rmse(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Per-dimension min-max normalization fit on training rows. Constant
// columns map to 0 so a degenerate feature cannot blow up the scale.
struct MinMaxScaler {
  Eigen::VectorXd min;
  Eigen::VectorXd range;  // max - min, left 0 for constant columns

  void fit(const Eigen::MatrixXd& rows);
  Eigen::VectorXd transform(const Eigen::VectorXd& row) const;
  Eigen::MatrixXd transform(const Eigen::MatrixXd& rows) const;
  bool fitted() const { return min.size() > 0; }
};

enum class ThresholdRule : std::uint8_t { max_benign, percentile };

struct ThresholdSpec {
  ThresholdRule rule = ThresholdRule::max_benign;
  double percentile = 99.5;  // only used by the percentile rule
  double phi = 1.0;          // safety multiplier on the base statistic

  // Parses "max" or "pctl:p" as used on the command line.
  static ThresholdSpec parse(const std::string& method, double phi);
};

// max_benign: phi * max(scores). percentile(p): phi * nearest-rank p-th
// percentile, i.e. the ceil(p/100 * n)-th smallest score. Throws on empty
// scores or p outside (0, 100].
double calibrate_threshold(std::vector<double> scores,
                           const ThresholdSpec& spec);

struct DetectionReport {
  std::size_t true_positives = 0;   // malicious, alarmed
  std::size_t false_negatives = 0;  // malicious, silent
  std::size_t false_positives = 0;  // benign, alarmed
  std::size_t true_negatives = 0;   // benign, silent

  // Percent in [0, 100]; empty when the corresponding class is absent.
  std::optional<double> detection_rate() const;
  std::optional<double> false_positive_rate() const;
};

// An anomaly detector trained on benign feature rows. Scoring is const and
// has no side effects, so a trained model may be shared across threads.
class AnomalyModel {
 public:
  virtual ~AnomalyModel() = default;

  virtual void fit(const Eigen::MatrixXd& benign_rows) = 0;
  virtual double score(const Eigen::VectorXd& row) const = 0;
  virtual std::string kind() const = 0;
  virtual void save(std::ostream& os) const = 0;

  std::vector<double> score_rows(const Eigen::MatrixXd& rows) const;
};

// Alarm on score > threshold (strictly). labels[i] labels rows.row(i).
DetectionReport detect(const std::vector<double>& scores,
                       const std::vector<Label>& labels, double threshold);
DetectionReport detect(const AnomalyModel& model, const Eigen::MatrixXd& rows,
                       const std::vector<Label>& labels, double threshold);

// ---------------------------------------------------------------------------
// Deep autoencoder
// ---------------------------------------------------------------------------

struct AeConfig {
  std::size_t h1 = 100;
  std::size_t h2 = 64;
  std::size_t latent = 32;
  std::size_t epochs = 40;
  std::size_t batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

struct Dense {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
};

// F -> h1 -> h2 -> latent -> h2 -> h1 -> F, ReLU on hidden layers and a
// linear output. Inputs are min-max scaled with training statistics; the
// anomaly score is the RMSE between the scaled input and its
// reconstruction. Trained with Adam on MSE.
class Autoencoder : public AnomalyModel {
 public:
  explicit Autoencoder(AeConfig cfg = {});

  void fit(const Eigen::MatrixXd& benign_rows) override;
  double score(const Eigen::VectorXd& row) const override;
  std::string kind() const override { return "autoencoder"; }
  void save(std::ostream& os) const override;
  static Autoencoder load_body(std::istream& is);

  const std::vector<double>& loss_curve() const { return loss_curve_; }
  const AeConfig& config() const { return cfg_; }

  // White-box hooks used by the verification suite: random-init the layers
  // for a given input width without training, and evaluate the training
  // loss plus its gradient over the flattened parameter vector.
  void init_params(std::size_t input_width);
  Eigen::VectorXd flatten_params() const;
  void set_params(const Eigen::VectorXd& theta);
  std::pair<double, Eigen::VectorXd> loss_and_grad(
      const Eigen::MatrixXd& scaled_rows) const;
  Eigen::VectorXd reconstruct_scaled(const Eigen::VectorXd& scaled) const;
  MinMaxScaler& scaler() { return scaler_; }

 private:
  AeConfig cfg_;
  MinMaxScaler scaler_;
  std::vector<Dense> layers_;
  std::vector<double> loss_curve_;
};

// ---------------------------------------------------------------------------
// Autoencoder-ensemble detector
// ---------------------------------------------------------------------------

// Small sigmoid-sigmoid autoencoder used for the ensemble members and the
// output stage; trained by plain SGD.
struct SigmoidAutoencoder {
  Eigen::MatrixXd W1;  // hidden x in
  Eigen::VectorXd b1;
  Eigen::MatrixXd W2;  // in x hidden
  Eigen::VectorXd b2;

  void init(std::size_t input, std::size_t hidden, std::uint64_t seed);
  Eigen::VectorXd reconstruct(const Eigen::VectorXd& x) const;
  // One SGD step on 1/2 * ||x_hat - x||^2; returns the pre-update RMSE.
  double train_step(const Eigen::VectorXd& x, double lr);
  double score(const Eigen::VectorXd& x) const;  // rmse(x, reconstruct(x))
};

// Groups feature indices by correlation: agglomerative single-linkage
// clustering under distance 1 - |corr|, with the dendrogram cut so no
// cluster exceeds max_cluster. Zero-variance features are split off first
// (their correlation is undefined; distance is treated as maximal) and
// chunked into their own clusters. The result partitions [0, F).
std::vector<std::vector<std::size_t>> build_feature_map(
    const Eigen::MatrixXd& rows, std::size_t max_cluster);

struct KitnetConfig {
  std::size_t max_cluster = 10;
  double hidden_ratio = 0.75;
  double lr = 0.1;
  std::size_t epochs = 1;  // passes over the training rows
  std::uint64_t seed = 2;
};

// Ensemble of small autoencoders over clustered feature subsets, with an
// output autoencoder over the per-cluster reconstruction RMSEs. With a
// single cluster the output stage is skipped and the score is the lone
// ensemble member's RMSE, which makes the ensemble degenerate exactly to a
// plain autoencoder of the same shape.
class Kitnet : public AnomalyModel {
 public:
  explicit Kitnet(KitnetConfig cfg = {});

  void fit(const Eigen::MatrixXd& benign_rows) override;
  double score(const Eigen::VectorXd& row) const override;
  std::string kind() const override { return "kitnet"; }
  void save(std::ostream& os) const override;
  static Kitnet load_body(std::istream& is);

  const std::vector<std::vector<std::size_t>>& feature_map() const {
    return map_;
  }
  const KitnetConfig& config() const { return cfg_; }

 private:
  Eigen::VectorXd cluster_rmses(const Eigen::VectorXd& scaled) const;

  KitnetConfig cfg_;
  MinMaxScaler scaler_;        // over raw feature rows
  MinMaxScaler rmse_scaler_;   // over training-phase cluster RMSE vectors
  std::vector<std::vector<std::size_t>> map_;
  std::vector<SigmoidAutoencoder> members_;
  SigmoidAutoencoder output_;
};

// ---------------------------------------------------------------------------
// Isolation forest
// ---------------------------------------------------------------------------

// c(m): average unsuccessful-search path length in a binary search tree of
// m nodes; c(0) = c(1) = 0, c(2) = 1, computed by exact harmonic summation.
double average_path_length(std::size_t m);

// 2^(-mean_path / c(psi)); the anomaly score given an averaged path length.
double iforest_score_from_mean_path(double mean_path, std::size_t psi);

struct IfNode {
  int feature = -1;       // -1 marks a leaf
  double threshold = 0.0;
  std::size_t size = 0;   // subsample rows reaching this node
  std::unique_ptr<IfNode> left;   // x[feature] < threshold
  std::unique_ptr<IfNode> right;
};

struct IForestConfig {
  std::size_t n_trees = 100;
  std::size_t sample_size = 256;  // clamped to the training size
  std::uint64_t seed = 3;
};

class IsolationForest : public AnomalyModel {
 public:
  explicit IsolationForest(IForestConfig cfg = {});

  void fit(const Eigen::MatrixXd& rows) override;
  double score(const Eigen::VectorXd& row) const override;
  std::string kind() const override { return "iforest"; }
  void save(std::ostream& os) const override;
  static IsolationForest load_body(std::istream& is);

  double path_length(const IfNode& tree, const Eigen::VectorXd& row) const;
  const std::vector<std::unique_ptr<IfNode>>& trees() const { return trees_; }
  std::size_t sample_size_used() const { return psi_; }
  bool sample_size_clamped() const { return clamped_; }
  const IForestConfig& config() const { return cfg_; }

 private:
  IForestConfig cfg_;
  std::size_t psi_ = 0;
  bool clamped_ = false;
  std::vector<std::unique_ptr<IfNode>> trees_;
};

// ---------------------------------------------------------------------------
// Factory
// ---------------------------------------------------------------------------

// "ae", "kitnet", or "iforest", with the given training seed.
std::unique_ptr<AnomalyModel> make_model(const std::string& kind,
                                         std::uint64_t seed);

std::unique_ptr<AnomalyModel> load_model(std::istream& is);
std::unique_ptr<AnomalyModel> load_model(const std::string& path);
void save_model(const AnomalyModel& model, const std::string& path);

}  // namespace cadence
