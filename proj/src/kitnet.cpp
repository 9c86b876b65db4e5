#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "cadence/nids.hpp"
#include "cadence/rng.hpp"
#include "cadence/serialize.hpp"

namespace cadence {

namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

// Binary dendrogram node for the feature clustering; leaves carry one
// feature index.
struct DendroNode {
  int left = -1, right = -1;       // children, -1 for leaves
  std::size_t feature = 0;         // valid for leaves only
  std::size_t count = 1;
};

void collect_leaves(const std::vector<DendroNode>& nodes, int at,
                    std::vector<std::size_t>& out) {
  const DendroNode& n = nodes[static_cast<std::size_t>(at)];
  if (n.left < 0) {
    out.push_back(n.feature);
    return;
  }
  collect_leaves(nodes, n.left, out);
  collect_leaves(nodes, n.right, out);
}

void cut_dendrogram(const std::vector<DendroNode>& nodes, int at,
                    std::size_t max_cluster,
                    std::vector<std::vector<std::size_t>>& clusters) {
  const DendroNode& n = nodes[static_cast<std::size_t>(at)];
  if (n.count <= max_cluster || n.left < 0) {
    std::vector<std::size_t> leaves;
    collect_leaves(nodes, at, leaves);
    std::sort(leaves.begin(), leaves.end());
    clusters.push_back(std::move(leaves));
    return;
  }
  cut_dendrogram(nodes, n.left, max_cluster, clusters);
  cut_dendrogram(nodes, n.right, max_cluster, clusters);
}

}  // namespace

std::vector<std::vector<std::size_t>> build_feature_map(
    const Eigen::MatrixXd& rows, std::size_t max_cluster) {
  if (rows.rows() < 2) {
    throw std::runtime_error("feature map needs at least 2 training rows");
  }
  if (max_cluster == 0) throw std::runtime_error("max_cluster must be >= 1");

  const auto F = static_cast<std::size_t>(rows.cols());
  const double n = static_cast<double>(rows.rows());

  const Eigen::VectorXd mean = rows.colwise().mean();
  Eigen::MatrixXd centered = rows.rowwise() - mean.transpose();
  Eigen::VectorXd sd(rows.cols());
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    sd(j) = std::sqrt(centered.col(j).squaredNorm() / n);
  }

  std::vector<std::size_t> live, constants;
  for (std::size_t j = 0; j < F; ++j) {
    (sd(static_cast<Eigen::Index>(j)) > 0 ? live : constants).push_back(j);
  }

  std::vector<std::vector<std::size_t>> clusters;

  if (!live.empty()) {
    const auto m = live.size();
    // Pairwise correlation distance 1 - |corr| among non-constant features.
    Eigen::MatrixXd dist(m, m);
    for (std::size_t a = 0; a < m; ++a) {
      dist(a, a) = 0;
      for (std::size_t b = a + 1; b < m; ++b) {
        const auto ja = static_cast<Eigen::Index>(live[a]);
        const auto jb = static_cast<Eigen::Index>(live[b]);
        const double cov = centered.col(ja).dot(centered.col(jb)) / n;
        const double corr = cov / (sd(ja) * sd(jb));
        const double d = 1.0 - std::min(1.0, std::abs(corr));
        dist(a, b) = dist(b, a) = std::max(0.0, d);
      }
    }

    // Single-linkage agglomeration to a full dendrogram; ties resolved
    // toward the oldest cluster pair so the result is deterministic.
    std::vector<DendroNode> nodes(m);
    for (std::size_t i = 0; i < m; ++i) nodes[i].feature = live[i];
    std::vector<int> active(m);
    std::vector<std::vector<double>> d(m, std::vector<double>(m));
    for (std::size_t a = 0; a < m; ++a) {
      active[a] = static_cast<int>(a);
      for (std::size_t b = 0; b < m; ++b) d[a][b] = dist(a, b);
    }

    while (active.size() > 1) {
      std::size_t bi = 0, bj = 1;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < active.size(); ++i) {
        for (std::size_t j = i + 1; j < active.size(); ++j) {
          const double dij = d[static_cast<std::size_t>(active[i])]
                              [static_cast<std::size_t>(active[j])];
          if (dij < best) {
            best = dij;
            bi = i;
            bj = j;
          }
        }
      }
      DendroNode merged;
      merged.left = active[bi];
      merged.right = active[bj];
      merged.count = nodes[static_cast<std::size_t>(active[bi])].count +
                     nodes[static_cast<std::size_t>(active[bj])].count;
      const int id = static_cast<int>(nodes.size());
      nodes.push_back(merged);

      // Single linkage: the new cluster's distance to k is the min of its
      // parts' distances.
      std::vector<double> row(nodes.size(), 0.0);
      for (std::size_t k = 0; k < active.size(); ++k) {
        if (k == bi || k == bj) continue;
        const auto ak = static_cast<std::size_t>(active[k]);
        const double dk =
            std::min(d[static_cast<std::size_t>(active[bi])][ak],
                     d[static_cast<std::size_t>(active[bj])][ak]);
        row[ak] = dk;
      }
      for (auto& dr : d) dr.resize(nodes.size(), 0.0);
      d.push_back(std::move(row));
      for (std::size_t k = 0; k < active.size(); ++k) {
        const auto ak = static_cast<std::size_t>(active[k]);
        d[ak].resize(nodes.size(), 0.0);
        d[ak][static_cast<std::size_t>(id)] = d[static_cast<std::size_t>(id)][ak];
      }

      active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
      active[bi] = id;
    }

    cut_dendrogram(nodes, active[0], max_cluster, clusters);
  }

  // Constant features cannot participate in correlation; chunk them into
  // clusters of their own.
  for (std::size_t at = 0; at < constants.size(); at += max_cluster) {
    const std::size_t stop = std::min(constants.size(), at + max_cluster);
    clusters.emplace_back(constants.begin() + static_cast<std::ptrdiff_t>(at),
                          constants.begin() + static_cast<std::ptrdiff_t>(stop));
  }

  std::sort(clusters.begin(), clusters.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return clusters;
}

void SigmoidAutoencoder::init(std::size_t input, std::size_t hidden,
                              std::uint64_t seed) {
  if (input == 0 || hidden == 0) {
    throw std::runtime_error("autoencoder dimensions must be positive");
  }
  Rng rng(seed);
  const double a = 1.0 / static_cast<double>(input);
  W1.resize(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(input));
  W2.resize(static_cast<Eigen::Index>(input), static_cast<Eigen::Index>(hidden));
  for (Eigen::Index c = 0; c < W1.cols(); ++c) {
    for (Eigen::Index r = 0; r < W1.rows(); ++r) W1(r, c) = rng.uniform(-a, a);
  }
  for (Eigen::Index c = 0; c < W2.cols(); ++c) {
    for (Eigen::Index r = 0; r < W2.rows(); ++r) W2(r, c) = rng.uniform(-a, a);
  }
  b1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hidden));
  b2 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(input));
}

Eigen::VectorXd SigmoidAutoencoder::reconstruct(
    const Eigen::VectorXd& x) const {
  return sigmoid(W2 * sigmoid(W1 * x + b1) + b2);
}

double SigmoidAutoencoder::train_step(const Eigen::VectorXd& x, double lr) {
  const Eigen::VectorXd h = sigmoid(W1 * x + b1);
  const Eigen::VectorXd xhat = sigmoid(W2 * h + b2);
  const Eigen::VectorXd diff = xhat - x;
  const double pre_rmse =
      std::sqrt(diff.squaredNorm() / static_cast<double>(x.size()));

  const Eigen::VectorXd dz2 =
      diff.cwiseProduct(xhat.cwiseProduct((1.0 - xhat.array()).matrix()));
  const Eigen::VectorXd dh = W2.transpose() * dz2;
  const Eigen::VectorXd dz1 =
      dh.cwiseProduct(h.cwiseProduct((1.0 - h.array()).matrix()));

  W2 -= lr * (dz2 * h.transpose());
  b2 -= lr * dz2;
  W1 -= lr * (dz1 * x.transpose());
  b1 -= lr * dz1;
  return pre_rmse;
}

double SigmoidAutoencoder::score(const Eigen::VectorXd& x) const {
  return rmse(x, reconstruct(x));
}

Kitnet::Kitnet(KitnetConfig cfg) : cfg_(cfg) {
  if (cfg_.hidden_ratio <= 0 || cfg_.hidden_ratio > 1) {
    throw std::runtime_error("hidden_ratio must be in (0, 1]");
  }
  if (cfg_.epochs == 0) throw std::runtime_error("epochs must be >= 1");
}

Eigen::VectorXd Kitnet::cluster_rmses(const Eigen::VectorXd& scaled) const {
  Eigen::VectorXd r(static_cast<Eigen::Index>(map_.size()));
  for (std::size_t c = 0; c < map_.size(); ++c) {
    Eigen::VectorXd slice(static_cast<Eigen::Index>(map_[c].size()));
    for (std::size_t k = 0; k < map_[c].size(); ++k) {
      slice(static_cast<Eigen::Index>(k)) =
          scaled(static_cast<Eigen::Index>(map_[c][k]));
    }
    r(static_cast<Eigen::Index>(c)) = members_[c].score(slice);
  }
  return r;
}

void Kitnet::fit(const Eigen::MatrixXd& benign_rows) {
  map_ = build_feature_map(benign_rows, cfg_.max_cluster);
  scaler_.fit(benign_rows);
  const Eigen::MatrixXd scaled = scaler_.transform(benign_rows);

  members_.clear();
  members_.resize(map_.size());
  for (std::size_t c = 0; c < map_.size(); ++c) {
    const std::size_t width = map_[c].size();
    const auto hidden = static_cast<std::size_t>(
        std::max(1.0, std::ceil(cfg_.hidden_ratio * static_cast<double>(width))));
    members_[c].init(width, hidden, derive_seed(cfg_.seed, "member", c));
  }

  // Train the ensemble members over the benign rows in stream order.
  for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
    for (Eigen::Index r = 0; r < scaled.rows(); ++r) {
      const Eigen::VectorXd row = scaled.row(r);
      for (std::size_t c = 0; c < map_.size(); ++c) {
        Eigen::VectorXd slice(static_cast<Eigen::Index>(map_[c].size()));
        for (std::size_t k = 0; k < map_[c].size(); ++k) {
          slice(static_cast<Eigen::Index>(k)) =
              row(static_cast<Eigen::Index>(map_[c][k]));
        }
        members_[c].train_step(slice, cfg_.lr);
      }
    }
  }

  if (map_.size() == 1) return;  // degenerate: score is the lone member RMSE

  // The output stage learns the joint shape of the per-cluster errors,
  // measured after the members have settled.
  Eigen::MatrixXd rmse_rows(scaled.rows(),
                            static_cast<Eigen::Index>(map_.size()));
  for (Eigen::Index r = 0; r < scaled.rows(); ++r) {
    rmse_rows.row(r) = cluster_rmses(scaled.row(r)).transpose();
  }
  rmse_scaler_.fit(rmse_rows);
  const Eigen::MatrixXd rmse_scaled = rmse_scaler_.transform(rmse_rows);

  const auto out_hidden = static_cast<std::size_t>(std::max(
      1.0, std::ceil(cfg_.hidden_ratio * static_cast<double>(map_.size()))));
  output_.init(map_.size(), out_hidden, derive_seed(cfg_.seed, "output", 0));
  for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
    for (Eigen::Index r = 0; r < rmse_scaled.rows(); ++r) {
      output_.train_step(rmse_scaled.row(r), cfg_.lr);
    }
  }
}

double Kitnet::score(const Eigen::VectorXd& row) const {
  if (map_.empty()) throw std::runtime_error("ensemble is untrained");
  if (row.size() != scaler_.min.size()) {
    throw std::runtime_error("feature vector width does not match the map");
  }
  const Eigen::VectorXd r = cluster_rmses(scaler_.transform(row));
  if (map_.size() == 1) return r(0);
  return output_.score(rmse_scaler_.transform(r));
}

namespace {

void write_sigmoid_ae(std::ostream& os, const SigmoidAutoencoder& ae) {
  ser::write_matrix(os, ae.W1);
  ser::write_vector(os, ae.b1);
  ser::write_matrix(os, ae.W2);
  ser::write_vector(os, ae.b2);
}

SigmoidAutoencoder read_sigmoid_ae(std::istream& is) {
  SigmoidAutoencoder ae;
  ae.W1 = ser::read_matrix(is, "W1");
  ae.b1 = ser::read_vector(is, "b1");
  ae.W2 = ser::read_matrix(is, "W2");
  ae.b2 = ser::read_vector(is, "b2");
  return ae;
}

}  // namespace

void Kitnet::save(std::ostream& os) const {
  ser::write_header(os, "kitnet");
  os << cfg_.max_cluster << ' ';
  ser::write_double(os, cfg_.hidden_ratio);
  os << ' ';
  ser::write_double(os, cfg_.lr);
  os << ' ' << cfg_.epochs << ' ' << cfg_.seed << '\n';
  ser::write_vector(os, scaler_.min);
  ser::write_vector(os, scaler_.range);
  os << map_.size() << '\n';
  for (const auto& cluster : map_) {
    os << cluster.size();
    for (std::size_t j : cluster) os << ' ' << j;
    os << '\n';
  }
  for (const auto& member : members_) write_sigmoid_ae(os, member);
  if (map_.size() > 1) {
    ser::write_vector(os, rmse_scaler_.min);
    ser::write_vector(os, rmse_scaler_.range);
    write_sigmoid_ae(os, output_);
  }
}

Kitnet Kitnet::load_body(std::istream& is) {
  KitnetConfig cfg;
  cfg.max_cluster = ser::read_u64(is, "max_cluster");
  cfg.hidden_ratio = ser::read_double(is, "hidden_ratio");
  cfg.lr = ser::read_double(is, "lr");
  cfg.epochs = ser::read_u64(is, "epochs");
  cfg.seed = ser::read_u64(is, "seed");
  Kitnet net(cfg);
  net.scaler_.min = ser::read_vector(is, "scaler min");
  net.scaler_.range = ser::read_vector(is, "scaler range");
  const auto n_clusters = ser::read_u64(is, "cluster count");
  net.map_.resize(n_clusters);
  for (auto& cluster : net.map_) {
    const auto sz = ser::read_u64(is, "cluster size");
    cluster.resize(sz);
    for (auto& j : cluster) j = ser::read_u64(is, "feature index");
  }
  net.members_.resize(n_clusters);
  for (auto& member : net.members_) member = read_sigmoid_ae(is);
  if (n_clusters > 1) {
    net.rmse_scaler_.min = ser::read_vector(is, "rmse scaler min");
    net.rmse_scaler_.range = ser::read_vector(is, "rmse scaler range");
    net.output_ = read_sigmoid_ae(is);
  }
  return net;
}

}  // namespace cadence
