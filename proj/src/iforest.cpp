#include <cmath>
#include <iostream>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "cadence/nids.hpp"
#include "cadence/rng.hpp"
#include "cadence/serialize.hpp"

namespace cadence {

double average_path_length(std::size_t m) {
  if (m < 2) return 0.0;
  if (m == 2) return 1.0;
  double harmonic = 0.0;
  for (std::size_t i = 1; i <= m - 1; ++i) {
    harmonic += 1.0 / static_cast<double>(i);
  }
  return 2.0 * harmonic -
         2.0 * static_cast<double>(m - 1) / static_cast<double>(m);
}

double iforest_score_from_mean_path(double mean_path, std::size_t psi) {
  const double c = average_path_length(psi);
  if (c <= 0) throw std::runtime_error("sample size too small to score");
  return std::exp2(-mean_path / c);
}

IsolationForest::IsolationForest(IForestConfig cfg) : cfg_(cfg) {
  if (cfg_.n_trees == 0) throw std::runtime_error("need at least one tree");
  if (cfg_.sample_size < 2) {
    throw std::runtime_error("sample size must be at least 2");
  }
}

namespace {

std::unique_ptr<IfNode> grow(const Eigen::MatrixXd& rows,
                             std::vector<std::size_t>& idx, std::size_t lo,
                             std::size_t hi, std::size_t depth,
                             std::size_t height_limit, Rng& rng) {
  auto node = std::make_unique<IfNode>();
  node->size = hi - lo;
  if (node->size <= 1 || depth >= height_limit) return node;

  // Choose uniformly among features that still vary inside this node.
  std::vector<int> candidates;
  std::vector<std::pair<double, double>> ranges;
  for (Eigen::Index f = 0; f < rows.cols(); ++f) {
    double mn = rows(static_cast<Eigen::Index>(idx[lo]), f);
    double mx = mn;
    for (std::size_t i = lo + 1; i < hi; ++i) {
      const double v = rows(static_cast<Eigen::Index>(idx[i]), f);
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    if (mx > mn) {
      candidates.push_back(static_cast<int>(f));
      ranges.emplace_back(mn, mx);
    }
  }
  if (candidates.empty()) return node;  // all duplicates: leaf

  const std::size_t pick = rng.below(candidates.size());
  node->feature = candidates[pick];
  node->threshold = rng.uniform(ranges[pick].first, ranges[pick].second);

  // Partition [lo, hi) so rows below the threshold come first.
  std::size_t mid = lo;
  for (std::size_t i = lo; i < hi; ++i) {
    if (rows(static_cast<Eigen::Index>(idx[i]), node->feature) <
        node->threshold) {
      std::swap(idx[i], idx[mid]);
      ++mid;
    }
  }

  node->left = grow(rows, idx, lo, mid, depth + 1, height_limit, rng);
  node->right = grow(rows, idx, mid, hi, depth + 1, height_limit, rng);
  return node;
}

}  // namespace

void IsolationForest::fit(const Eigen::MatrixXd& rows) {
  const auto n = static_cast<std::size_t>(rows.rows());
  if (n < 2) throw std::runtime_error("need at least 2 training rows");

  psi_ = cfg_.sample_size;
  clamped_ = false;
  if (psi_ > n) {
    psi_ = n;
    clamped_ = true;
    std::cerr << "note: sample size clamped to training size " << n << "\n";
  }
  const auto height_limit = static_cast<std::size_t>(
      std::ceil(std::log2(static_cast<double>(psi_))));

  trees_.clear();
  trees_.reserve(cfg_.n_trees);
  for (std::size_t t = 0; t < cfg_.n_trees; ++t) {
    Rng rng(derive_seed(cfg_.seed, "tree", t));

    // Partial Fisher-Yates draw of psi distinct row indices.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < psi_; ++i) {
      std::swap(idx[i], idx[i + rng.below(n - i)]);
    }
    idx.resize(psi_);

    trees_.push_back(grow(rows, idx, 0, psi_, 0, height_limit, rng));
  }
}

double IsolationForest::path_length(const IfNode& tree,
                                    const Eigen::VectorXd& row) const {
  const IfNode* node = &tree;
  double depth = 0;
  while (node->feature >= 0) {
    node = row(node->feature) < node->threshold ? node->left.get()
                                                : node->right.get();
    depth += 1;
  }
  return depth + average_path_length(node->size);
}

double IsolationForest::score(const Eigen::VectorXd& row) const {
  if (trees_.empty()) throw std::runtime_error("forest is untrained");
  double total = 0;
  for (const auto& tree : trees_) total += path_length(*tree, row);
  return iforest_score_from_mean_path(total / static_cast<double>(trees_.size()),
                                      psi_);
}

namespace {

void write_node(std::ostream& os, const IfNode& node) {
  if (node.feature < 0) {
    os << "L " << node.size << '\n';
    return;
  }
  os << "I " << node.feature << ' ';
  ser::write_double(os, node.threshold);
  os << ' ' << node.size << '\n';
  write_node(os, *node.left);
  write_node(os, *node.right);
}

std::unique_ptr<IfNode> read_node(std::istream& is) {
  auto node = std::make_unique<IfNode>();
  const std::string tag = ser::read_token(is, "tree node tag");
  if (tag == "L") {
    node->size = ser::read_u64(is, "leaf size");
    return node;
  }
  if (tag != "I") throw std::runtime_error("bad tree node tag '" + tag + "'");
  node->feature = static_cast<int>(ser::read_u64(is, "split feature"));
  node->threshold = ser::read_double(is, "split threshold");
  node->size = ser::read_u64(is, "node size");
  node->left = read_node(is);
  node->right = read_node(is);
  return node;
}

}  // namespace

void IsolationForest::save(std::ostream& os) const {
  ser::write_header(os, "iforest");
  os << cfg_.n_trees << ' ' << cfg_.sample_size << ' ' << cfg_.seed << ' '
     << psi_ << ' ' << (clamped_ ? 1 : 0) << '\n';
  os << trees_.size() << '\n';
  for (const auto& tree : trees_) write_node(os, *tree);
}

IsolationForest IsolationForest::load_body(std::istream& is) {
  IForestConfig cfg;
  cfg.n_trees = ser::read_u64(is, "tree count");
  cfg.sample_size = ser::read_u64(is, "sample size");
  cfg.seed = ser::read_u64(is, "seed");
  IsolationForest forest(cfg);
  forest.psi_ = ser::read_u64(is, "effective sample size");
  forest.clamped_ = ser::read_u64(is, "clamp flag") != 0;
  const auto n = ser::read_u64(is, "stored tree count");
  forest.trees_.reserve(n);
  for (std::size_t t = 0; t < n; ++t) forest.trees_.push_back(read_node(is));
  return forest;
}

}  // namespace cadence
