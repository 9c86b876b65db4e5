#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cadence {

enum class ClassifierKind : std::uint8_t {
  logistic_regression,
  gaussian_nb,
  random_forest,
};

ClassifierKind parse_classifier_kind(const std::string& text);
std::string to_string(ClassifierKind kind);

// Binary classifier over feature rows; label 1 = malicious. The predicted
// label is malicious iff the score exceeds 0.5.
class SupervisedModel {
 public:
  virtual ~SupervisedModel() = default;
  virtual void fit(const Eigen::MatrixXd& X, const std::vector<int>& y) = 0;
  virtual double malicious_score(const Eigen::VectorXd& x) const = 0;
  virtual std::string kind_name() const = 0;
  bool predict_malicious(const Eigen::VectorXd& x) const {
    return malicious_score(x) > 0.5;
  }
};

// Batch gradient descent on the logistic loss over raw (unrenormalized)
// features, with backtracking line search; stops when the gradient norm
// drops under `tol` or after `max_iters` passes.
class LogisticRegression : public SupervisedModel {
 public:
  explicit LogisticRegression(std::size_t max_iters = 100, double tol = 1e-4);
  void fit(const Eigen::MatrixXd& X, const std::vector<int>& y) override;
  double malicious_score(const Eigen::VectorXd& x) const override;
  std::string kind_name() const override { return "lr"; }
  bool converged() const { return converged_; }
  const Eigen::VectorXd& weights() const { return w_; }
  double bias() const { return b_; }

 private:
  std::size_t max_iters_;
  double tol_;
  Eigen::VectorXd w_;
  double b_ = 0.0;
  bool converged_ = false;
};

// Per-class Gaussian likelihoods with empirical priors; every class
// variance is padded with 1e-9 times the largest overall feature variance.
class GaussianNb : public SupervisedModel {
 public:
  void fit(const Eigen::MatrixXd& X, const std::vector<int>& y) override;
  double malicious_score(const Eigen::VectorXd& x) const override;
  std::string kind_name() const override { return "gnb"; }

 private:
  Eigen::VectorXd mean_[2], var_[2];
  double log_prior_[2] = {0, 0};
};

// Gini-split trees on bootstrap resamples, sqrt(F) features per split, no
// depth cap, minimum split size 2; the score is the fraction of trees
// voting malicious.
class RandomForest : public SupervisedModel {
 public:
  explicit RandomForest(std::size_t n_trees = 100, std::uint64_t seed = 11);
  void fit(const Eigen::MatrixXd& X, const std::vector<int>& y) override;
  double malicious_score(const Eigen::VectorXd& x) const override;
  std::string kind_name() const override { return "rf"; }
  std::size_t tree_count() const { return trees_.size(); }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    double malicious_fraction = 0.0;  // leaves only
    std::unique_ptr<Node> left, right;
  };
  static bool tree_votes_malicious(const Node& root, const Eigen::VectorXd& x);

  std::size_t n_trees_;
  std::uint64_t seed_;
  std::vector<std::unique_ptr<Node>> trees_;
};

std::unique_ptr<SupervisedModel> make_classifier(ClassifierKind kind,
                                                 std::uint64_t seed);

// Leave-one-attack-out evaluation data: each fold tests on one attack (DR)
// plus the held-out benign rows (FPR) and trains on benign_train + the
// remaining attacks, with the majority class down-sampled so the training
// label counts differ by at most 1.
struct CvPlan {
  Eigen::MatrixXd benign_train;
  Eigen::MatrixXd benign_test;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> attacks;
};

struct CvFold {
  std::string attack;
  std::optional<double> dr;   // percent
  std::optional<double> fpr;  // percent
};

struct CvReport {
  std::vector<CvFold> folds;
  // Means over folds with defined values; empty if none.
  std::optional<double> average_dr() const;
  std::optional<double> average_fpr() const;
};

using ClassifierFactory =
    std::function<std::unique_ptr<SupervisedModel>(std::size_t fold)>;

// Runs the fold protocol with an arbitrary classifier source (used to
// verify the harness itself with degenerate always-benign/always-malicious
// classifiers).
CvReport run_cv_with(const CvPlan& plan, const ClassifierFactory& factory,
                     std::uint64_t seed);
CvReport run_cv(const CvPlan& plan, ClassifierKind kind, std::uint64_t seed);

// Rows of (classifier, attack, DR, FPR) with per-classifier averages and a
// trailing total-average row; undefined rates print as "undefined".
void emit_mitigation_table(
    const std::vector<std::pair<std::string, CvReport>>& reports,
    std::ostream& os);

}  // namespace cadence
