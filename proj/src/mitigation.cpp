#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "cadence/mitigation.hpp"
#include "cadence/rng.hpp"

namespace cadence {

ClassifierKind parse_classifier_kind(const std::string& text) {
  if (text == "lr") return ClassifierKind::logistic_regression;
  if (text == "gnb") return ClassifierKind::gaussian_nb;
  if (text == "rf") return ClassifierKind::random_forest;
  throw std::runtime_error("unknown classifier kind '" + text +
                           "' (expected lr, gnb, or rf)");
}

std::string to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::logistic_regression: return "lr";
    case ClassifierKind::gaussian_nb: return "gnb";
    case ClassifierKind::random_forest: return "rf";
  }
  return "lr";
}

namespace {

void check_two_classes(const std::vector<int>& y) {
  bool has0 = false, has1 = false;
  for (int v : y) {
    if (v == 0) has0 = true;
    else if (v == 1) has1 = true;
    else throw std::runtime_error("labels must be 0 or 1");
  }
  if (!has0 || !has1) {
    throw std::runtime_error("training data must contain both classes");
  }
}

double logistic_loss(const Eigen::VectorXd& margins,
                     const Eigen::VectorXd& y) {
  // mean of log(1+exp(m)) - y*m, computed stably.
  double total = 0;
  for (Eigen::Index i = 0; i < margins.size(); ++i) {
    const double m = margins(i);
    total += std::max(m, 0.0) + std::log1p(std::exp(-std::abs(m))) -
             y(i) * m;
  }
  return total / static_cast<double>(margins.size());
}

}  // namespace

LogisticRegression::LogisticRegression(std::size_t max_iters, double tol)
    : max_iters_(max_iters), tol_(tol) {}

void LogisticRegression::fit(const Eigen::MatrixXd& X,
                             const std::vector<int>& y) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw std::runtime_error("row/label count mismatch");
  }
  check_two_classes(y);
  const auto n = static_cast<double>(X.rows());
  Eigen::VectorXd yv(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) yv(i) = y[static_cast<std::size_t>(i)];

  w_ = Eigen::VectorXd::Zero(X.cols());
  b_ = 0.0;
  converged_ = false;

  double step = 1.0;
  for (std::size_t iter = 0; iter < max_iters_; ++iter) {
    const Eigen::VectorXd margins = X * w_ + Eigen::VectorXd::Constant(X.rows(), b_);
    const Eigen::VectorXd probs =
        (1.0 / (1.0 + (-margins.array()).exp())).matrix();
    const Eigen::VectorXd resid = probs - yv;
    const Eigen::VectorXd gw = X.transpose() * resid / n;
    const double gb = resid.sum() / n;
    const double gnorm = std::sqrt(gw.squaredNorm() + gb * gb);
    if (gnorm <= tol_) {
      converged_ = true;
      break;
    }

    const double loss = logistic_loss(margins, yv);
    // Backtracking line search along the negative gradient (Armijo).
    double alpha = step * 2.0;
    const double slope = 1e-4 * gnorm * gnorm;
    for (int tries = 0; tries < 60; ++tries) {
      const Eigen::VectorXd wt = w_ - alpha * gw;
      const double bt = b_ - alpha * gb;
      const Eigen::VectorXd mt =
          X * wt + Eigen::VectorXd::Constant(X.rows(), bt);
      if (logistic_loss(mt, yv) <= loss - alpha * slope) break;
      alpha *= 0.5;
    }
    w_ -= alpha * gw;
    b_ -= alpha * gb;
    step = alpha;
  }
}

double LogisticRegression::malicious_score(const Eigen::VectorXd& x) const {
  if (w_.size() == 0) throw std::runtime_error("classifier is untrained");
  if (x.size() != w_.size()) throw std::runtime_error("feature width mismatch");
  return 1.0 / (1.0 + std::exp(-(w_.dot(x) + b_)));
}

void GaussianNb::fit(const Eigen::MatrixXd& X, const std::vector<int>& y) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw std::runtime_error("row/label count mismatch");
  }
  check_two_classes(y);

  // Smoothing scale: largest per-feature variance over the whole set.
  const Eigen::VectorXd overall_mean = X.colwise().mean();
  double max_var = 0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double v = (X.col(j).array() - overall_mean(j)).square().mean();
    max_var = std::max(max_var, v);
  }
  const double eps = 1e-9 * max_var;

  for (int c = 0; c < 2; ++c) {
    std::size_t count = 0;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      if (y[static_cast<std::size_t>(i)] == c) {
        sum += X.row(i).transpose();
        ++count;
      }
    }
    mean_[c] = sum / static_cast<double>(count);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      if (y[static_cast<std::size_t>(i)] == c) {
        const Eigen::VectorXd d = X.row(i).transpose() - mean_[c];
        sq += d.cwiseProduct(d);
      }
    }
    var_[c] = sq / static_cast<double>(count);
    var_[c].array() += eps;
    log_prior_[c] = std::log(static_cast<double>(count) /
                             static_cast<double>(X.rows()));
  }
}

double GaussianNb::malicious_score(const Eigen::VectorXd& x) const {
  if (mean_[0].size() == 0) throw std::runtime_error("classifier is untrained");
  if (x.size() != mean_[0].size()) {
    throw std::runtime_error("feature width mismatch");
  }
  double log_like[2];
  for (int c = 0; c < 2; ++c) {
    double ll = log_prior_[c];
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double v = var_[c](j);
      const double d = x(j) - mean_[c](j);
      ll += -0.5 * std::log(2.0 * std::numbers::pi * v) - d * d / (2.0 * v);
    }
    log_like[c] = ll;
  }
  // p(malicious | x) without overflowing either exponential.
  return 1.0 / (1.0 + std::exp(log_like[0] - log_like[1]));
}

RandomForest::RandomForest(std::size_t n_trees, std::uint64_t seed)
    : n_trees_(n_trees), seed_(seed) {
  if (n_trees_ == 0) throw std::runtime_error("need at least one tree");
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gini = std::numeric_limits<double>::infinity();
};

// Weighted Gini impurity of a candidate split over the node's sorted
// values; counts index by label.
double split_gini(std::size_t l1, std::size_t ln, std::size_t r1,
                  std::size_t rn) {
  auto gini = [](std::size_t ones, std::size_t total) {
    if (total == 0) return 0.0;
    const double p = static_cast<double>(ones) / static_cast<double>(total);
    return 2.0 * p * (1.0 - p);
  };
  const double total = static_cast<double>(ln + rn);
  return (static_cast<double>(ln) / total) * gini(l1, ln) +
         (static_cast<double>(rn) / total) * gini(r1, rn);
}

}  // namespace

void RandomForest::fit(const Eigen::MatrixXd& X, const std::vector<int>& y) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw std::runtime_error("row/label count mismatch");
  }
  check_two_classes(y);
  const auto n = static_cast<std::size_t>(X.rows());
  const auto F = static_cast<std::size_t>(X.cols());
  const auto mtry = static_cast<std::size_t>(
      std::max(1.0, std::floor(std::sqrt(static_cast<double>(F)))));

  struct Builder {
    const Eigen::MatrixXd& X;
    const std::vector<int>& y;
    std::size_t mtry;
    Rng& rng;

    std::unique_ptr<Node> build(std::vector<std::size_t>& idx, std::size_t lo,
                                std::size_t hi) {
      auto node = std::make_unique<Node>();
      std::size_t ones = 0;
      for (std::size_t i = lo; i < hi; ++i) ones += y[idx[i]] == 1 ? 1u : 0u;
      const std::size_t size = hi - lo;
      node->malicious_fraction =
          static_cast<double>(ones) / static_cast<double>(size);
      if (size < 2 || ones == 0 || ones == size) return node;

      // Draw mtry distinct candidate features.
      const auto F = static_cast<std::size_t>(X.cols());
      std::vector<std::size_t> feats(F);
      std::iota(feats.begin(), feats.end(), 0);
      for (std::size_t i = 0; i < mtry; ++i) {
        std::swap(feats[i], feats[i + rng.below(F - i)]);
      }

      SplitChoice best;
      std::vector<std::pair<double, int>> vals(size);
      for (std::size_t fi = 0; fi < mtry; ++fi) {
        const auto f = static_cast<Eigen::Index>(feats[fi]);
        for (std::size_t i = lo; i < hi; ++i) {
          vals[i - lo] = {X(static_cast<Eigen::Index>(idx[i]), f), y[idx[i]]};
        }
        std::sort(vals.begin(), vals.end());
        std::size_t left_ones = 0;
        for (std::size_t i = 0; i + 1 < size; ++i) {
          left_ones += vals[i].second == 1 ? 1u : 0u;
          if (vals[i].first == vals[i + 1].first) continue;
          const double g = split_gini(left_ones, i + 1, ones - left_ones,
                                      size - i - 1);
          if (g < best.gini) {
            best.gini = g;
            best.feature = static_cast<int>(feats[fi]);
            best.threshold = (vals[i].first + vals[i + 1].first) / 2.0;
          }
        }
      }
      if (best.feature < 0) return node;  // all candidates constant here

      std::size_t mid = lo;
      for (std::size_t i = lo; i < hi; ++i) {
        if (X(static_cast<Eigen::Index>(idx[i]),
              static_cast<Eigen::Index>(best.feature)) <= best.threshold) {
          std::swap(idx[i], idx[mid]);
          ++mid;
        }
      }
      if (mid == lo || mid == hi) return node;  // numerically degenerate

      node->feature = best.feature;
      node->threshold = best.threshold;
      node->left = build(idx, lo, mid);
      node->right = build(idx, mid, hi);
      return node;
    }
  };

  trees_.clear();
  trees_.reserve(n_trees_);
  for (std::size_t t = 0; t < n_trees_; ++t) {
    Rng rng(derive_seed(seed_, "tree", t));
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = rng.below(n);  // bootstrap resample
    Builder builder{X, y, mtry, rng};
    trees_.push_back(builder.build(idx, 0, n));
  }
}

bool RandomForest::tree_votes_malicious(const Node& root,
                                        const Eigen::VectorXd& x) {
  const Node* node = &root;
  while (node->feature >= 0) {
    node = x(node->feature) <= node->threshold ? node->left.get()
                                               : node->right.get();
  }
  return node->malicious_fraction > 0.5;
}

double RandomForest::malicious_score(const Eigen::VectorXd& x) const {
  if (trees_.empty()) throw std::runtime_error("classifier is untrained");
  std::size_t votes = 0;
  for (const auto& tree : trees_) {
    votes += tree_votes_malicious(*tree, x) ? 1u : 0u;
  }
  return static_cast<double>(votes) / static_cast<double>(trees_.size());
}

std::unique_ptr<SupervisedModel> make_classifier(ClassifierKind kind,
                                                 std::uint64_t seed) {
  switch (kind) {
    case ClassifierKind::logistic_regression:
      return std::make_unique<LogisticRegression>();
    case ClassifierKind::gaussian_nb:
      return std::make_unique<GaussianNb>();
    case ClassifierKind::random_forest:
      return std::make_unique<RandomForest>(100, seed);
  }
  throw std::runtime_error("unreachable classifier kind");
}

namespace {

// Sorted distinct draw of `keep` row indices out of n.
std::vector<std::size_t> downsample(std::size_t n, std::size_t keep, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < keep; ++i) {
    std::swap(idx[i], idx[i + rng.below(n - i)]);
  }
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

CvReport run_cv_with(const CvPlan& plan, const ClassifierFactory& factory,
                     std::uint64_t seed) {
  if (plan.attacks.size() < 2) {
    throw std::runtime_error("leave-one-attack-out needs >= 2 attacks");
  }
  if (plan.benign_train.rows() == 0) {
    throw std::runtime_error("benign training rows are required");
  }

  CvReport report;
  for (std::size_t k = 0; k < plan.attacks.size(); ++k) {
    const Eigen::MatrixXd& test_attack = plan.attacks[k].second;
    if (test_attack.rows() == 0) {
      throw std::runtime_error("fold '" + plan.attacks[k].first +
                               "' has an empty test set");
    }

    Eigen::Index mal_rows = 0;
    for (std::size_t a = 0; a < plan.attacks.size(); ++a) {
      if (a != k) mal_rows += plan.attacks[a].second.rows();
    }
    Eigen::MatrixXd malicious(mal_rows, plan.benign_train.cols());
    Eigen::Index at = 0;
    for (std::size_t a = 0; a < plan.attacks.size(); ++a) {
      if (a == k) continue;
      malicious.middleRows(at, plan.attacks[a].second.rows()) =
          plan.attacks[a].second;
      at += plan.attacks[a].second.rows();
    }

    // Balance classes by down-sampling the majority side.
    Rng rng(derive_seed(seed, "fold", k));
    const auto nb = static_cast<std::size_t>(plan.benign_train.rows());
    const auto nm = static_cast<std::size_t>(malicious.rows());
    const std::size_t keep = std::min(nb, nm);
    const std::vector<std::size_t> bidx = downsample(nb, keep, rng);
    const std::vector<std::size_t> midx = downsample(nm, keep, rng);

    Eigen::MatrixXd X(2 * static_cast<Eigen::Index>(keep),
                      plan.benign_train.cols());
    std::vector<int> y(2 * keep);
    for (std::size_t i = 0; i < keep; ++i) {
      X.row(static_cast<Eigen::Index>(i)) =
          plan.benign_train.row(static_cast<Eigen::Index>(bidx[i]));
      y[i] = 0;
      X.row(static_cast<Eigen::Index>(keep + i)) =
          malicious.row(static_cast<Eigen::Index>(midx[i]));
      y[keep + i] = 1;
    }

    const std::unique_ptr<SupervisedModel> model = factory(k);
    model->fit(X, y);

    std::size_t detected = 0;
    for (Eigen::Index i = 0; i < test_attack.rows(); ++i) {
      detected += model->predict_malicious(test_attack.row(i)) ? 1u : 0u;
    }
    std::size_t false_alarms = 0;
    for (Eigen::Index i = 0; i < plan.benign_test.rows(); ++i) {
      false_alarms +=
          model->predict_malicious(plan.benign_test.row(i)) ? 1u : 0u;
    }

    CvFold fold;
    fold.attack = plan.attacks[k].first;
    fold.dr = 100.0 * static_cast<double>(detected) /
              static_cast<double>(test_attack.rows());
    if (plan.benign_test.rows() > 0) {
      fold.fpr = 100.0 * static_cast<double>(false_alarms) /
                 static_cast<double>(plan.benign_test.rows());
    }
    report.folds.push_back(std::move(fold));
  }
  return report;
}

CvReport run_cv(const CvPlan& plan, ClassifierKind kind, std::uint64_t seed) {
  return run_cv_with(
      plan,
      [kind, seed](std::size_t fold) {
        return make_classifier(kind, derive_seed(seed, "classifier", fold));
      },
      seed);
}

std::optional<double> CvReport::average_dr() const {
  double total = 0;
  std::size_t count = 0;
  for (const CvFold& f : folds) {
    if (f.dr) {
      total += *f.dr;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

std::optional<double> CvReport::average_fpr() const {
  double total = 0;
  std::size_t count = 0;
  for (const CvFold& f : folds) {
    if (f.fpr) {
      total += *f.fpr;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

namespace {

std::string fmt_rate(const std::optional<double>& rate) {
  if (!rate) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *rate);
  return buf;
}

}  // namespace

void emit_mitigation_table(
    const std::vector<std::pair<std::string, CvReport>>& reports,
    std::ostream& os) {
  os << "classifier,attack,dr,fpr\n";
  double total_dr = 0, total_fpr = 0;
  std::size_t n_dr = 0, n_fpr = 0;
  for (const auto& [name, report] : reports) {
    for (const CvFold& fold : report.folds) {
      os << name << ',' << fold.attack << ',' << fmt_rate(fold.dr) << ','
         << fmt_rate(fold.fpr) << '\n';
      if (fold.dr) {
        total_dr += *fold.dr;
        ++n_dr;
      }
      if (fold.fpr) {
        total_fpr += *fold.fpr;
        ++n_fpr;
      }
    }
    os << name << ",average," << fmt_rate(report.average_dr()) << ','
       << fmt_rate(report.average_fpr()) << '\n';
  }
  std::optional<double> tdr, tfpr;
  if (n_dr > 0) tdr = total_dr / static_cast<double>(n_dr);
  if (n_fpr > 0) tfpr = total_fpr / static_cast<double>(n_fpr);
  os << "total,average," << fmt_rate(tdr) << ',' << fmt_rate(tfpr) << '\n';
}

}  // namespace cadence
