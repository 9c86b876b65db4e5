#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "cadence/nids.hpp"
#include "cadence/rng.hpp"
#include "cadence/serialize.hpp"

namespace cadence {

namespace {

Eigen::MatrixXd glorot(std::size_t out, std::size_t in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Eigen::MatrixXd W(out, in);
  for (Eigen::Index c = 0; c < W.cols(); ++c) {
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      W(r, c) = rng.uniform(-limit, limit);
    }
  }
  return W;
}

struct LayerGrads {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;
};

// Columns of X are samples. Returns the mean squared error over all
// elements and, if grads is non-null, its gradient per layer.
double forward_backward(const std::vector<Dense>& layers,
                        const Eigen::MatrixXd& X, LayerGrads* grads) {
  const std::size_t L = layers.size();
  std::vector<Eigen::MatrixXd> acts(L + 1);
  acts[0] = X;
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd Z = layers[l].W * acts[l];
    Z.colwise() += layers[l].b;
    if (l + 1 < L) Z = Z.cwiseMax(0.0);  // ReLU on hidden layers
    acts[l + 1] = std::move(Z);
  }

  const Eigen::MatrixXd diff = acts[L] - X;
  const double denom = static_cast<double>(X.rows() * X.cols());
  const double loss = diff.squaredNorm() / denom;
  if (!grads) return loss;

  grads->dW.resize(L);
  grads->db.resize(L);
  Eigen::MatrixXd delta = (2.0 / denom) * diff;
  for (std::size_t l = L; l-- > 0;) {
    if (l + 1 < L) {
      // Undo the ReLU: gradient flows only where the activation survived.
      delta = delta.cwiseProduct(
          (acts[l + 1].array() > 0.0).cast<double>().matrix());
    }
    grads->dW[l] = delta * acts[l].transpose();
    grads->db[l] = delta.rowwise().sum();
    if (l > 0) delta = layers[l].W.transpose() * delta;
  }
  return loss;
}

}  // namespace

Autoencoder::Autoencoder(AeConfig cfg) : cfg_(cfg) {
  if (cfg_.h1 == 0 || cfg_.h2 == 0 || cfg_.latent == 0) {
    throw std::runtime_error("autoencoder layer widths must be positive");
  }
  if (cfg_.batch == 0) throw std::runtime_error("batch size must be positive");
}

void Autoencoder::init_params(std::size_t input_width) {
  if (input_width == 0) throw std::runtime_error("input width must be positive");
  Rng rng(cfg_.seed);
  const std::size_t widths[] = {input_width, cfg_.h1,    cfg_.h2, cfg_.latent,
                                cfg_.h2,     cfg_.h1,    input_width};
  layers_.clear();
  for (std::size_t l = 0; l < 6; ++l) {
    Dense d;
    d.W = glorot(widths[l + 1], widths[l], rng);
    d.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(widths[l + 1]));
    layers_.push_back(std::move(d));
  }
}

void Autoencoder::fit(const Eigen::MatrixXd& benign_rows) {
  if (benign_rows.rows() < 2) {
    throw std::runtime_error("autoencoder needs at least 2 training rows");
  }
  scaler_.fit(benign_rows);
  const Eigen::MatrixXd scaled = scaler_.transform(benign_rows);
  init_params(static_cast<std::size_t>(scaled.cols()));
  loss_curve_.clear();

  // Adam state mirrors the layer shapes.
  std::vector<Dense> m(layers_.size()), v(layers_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    m[l].W = Eigen::MatrixXd::Zero(layers_[l].W.rows(), layers_[l].W.cols());
    m[l].b = Eigen::VectorXd::Zero(layers_[l].b.size());
    v[l] = m[l];
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double b1t = 1.0, b2t = 1.0;

  const auto n = static_cast<std::size_t>(scaled.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg_.seed, "shuffle", epoch));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg_.batch) {
      const std::size_t stop = std::min(n, start + cfg_.batch);
      Eigen::MatrixXd X(scaled.cols(), static_cast<Eigen::Index>(stop - start));
      for (std::size_t i = start; i < stop; ++i) {
        X.col(static_cast<Eigen::Index>(i - start)) =
            scaled.row(static_cast<Eigen::Index>(order[i])).transpose();
      }

      LayerGrads grads;
      const double loss = forward_backward(layers_, X, &grads);
      if (!std::isfinite(loss)) {
        throw std::runtime_error(
            "training diverged: non-finite loss at epoch " +
            std::to_string(epoch) + ", batch " + std::to_string(batches));
      }
      epoch_loss += loss;
      ++batches;

      b1t *= beta1;
      b2t *= beta2;
      for (std::size_t l = 0; l < layers_.size(); ++l) {
        auto adam = [&](Eigen::MatrixXd& theta, Eigen::MatrixXd& mm,
                        Eigen::MatrixXd& vv, const Eigen::MatrixXd& g) {
          mm = beta1 * mm + (1 - beta1) * g;
          vv = beta2 * vv + (1 - beta2) * g.cwiseProduct(g);
          const Eigen::MatrixXd mhat = mm / (1 - b1t);
          const Eigen::MatrixXd vhat = vv / (1 - b2t);
          theta -= cfg_.lr *
                   (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
        };
        adam(layers_[l].W, m[l].W, v[l].W, grads.dW[l]);
        Eigen::MatrixXd bm = m[l].b, bv = v[l].b, bt = layers_[l].b,
                        bg = grads.db[l];
        adam(bt, bm, bv, bg);
        layers_[l].b = bt.col(0);
        m[l].b = bm.col(0);
        v[l].b = bv.col(0);
      }
    }
    loss_curve_.push_back(epoch_loss / static_cast<double>(batches));
  }
}

Eigen::VectorXd Autoencoder::reconstruct_scaled(
    const Eigen::VectorXd& scaled) const {
  if (layers_.empty()) throw std::runtime_error("autoencoder is untrained");
  Eigen::VectorXd a = scaled;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd z = layers_[l].W * a + layers_[l].b;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

double Autoencoder::score(const Eigen::VectorXd& row) const {
  const Eigen::VectorXd scaled =
      scaler_.fitted() ? scaler_.transform(row) : row;
  return rmse(scaled, reconstruct_scaled(scaled));
}

Eigen::VectorXd Autoencoder::flatten_params() const {
  std::size_t total = 0;
  for (const Dense& d : layers_) {
    total += static_cast<std::size_t>(d.W.size() + d.b.size());
  }
  Eigen::VectorXd theta(static_cast<Eigen::Index>(total));
  Eigen::Index at = 0;
  for (const Dense& d : layers_) {
    theta.segment(at, d.W.size()) =
        Eigen::Map<const Eigen::VectorXd>(d.W.data(), d.W.size());
    at += d.W.size();
    theta.segment(at, d.b.size()) = d.b;
    at += d.b.size();
  }
  return theta;
}

void Autoencoder::set_params(const Eigen::VectorXd& theta) {
  Eigen::Index at = 0;
  for (Dense& d : layers_) {
    if (at + d.W.size() + d.b.size() > theta.size()) {
      throw std::runtime_error("parameter vector too short");
    }
    Eigen::Map<Eigen::VectorXd>(d.W.data(), d.W.size()) =
        theta.segment(at, d.W.size());
    at += d.W.size();
    d.b = theta.segment(at, d.b.size());
    at += d.b.size();
  }
  if (at != theta.size()) {
    throw std::runtime_error("parameter vector too long");
  }
}

std::pair<double, Eigen::VectorXd> Autoencoder::loss_and_grad(
    const Eigen::MatrixXd& scaled_rows) const {
  LayerGrads grads;
  const double loss =
      forward_backward(layers_, scaled_rows.transpose(), &grads);
  std::size_t total = 0;
  for (const Dense& d : layers_) {
    total += static_cast<std::size_t>(d.W.size() + d.b.size());
  }
  Eigen::VectorXd g(static_cast<Eigen::Index>(total));
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    g.segment(at, grads.dW[l].size()) = Eigen::Map<const Eigen::VectorXd>(
        grads.dW[l].data(), grads.dW[l].size());
    at += grads.dW[l].size();
    g.segment(at, grads.db[l].size()) = grads.db[l];
    at += grads.db[l].size();
  }
  return {loss, std::move(g)};
}

void Autoencoder::save(std::ostream& os) const {
  ser::write_header(os, "autoencoder");
  os << cfg_.h1 << ' ' << cfg_.h2 << ' ' << cfg_.latent << ' ' << cfg_.epochs
     << ' ' << cfg_.batch << ' ';
  ser::write_double(os, cfg_.lr);
  os << ' ' << cfg_.seed << '\n';
  ser::write_vector(os, scaler_.min);
  ser::write_vector(os, scaler_.range);
  os << layers_.size() << '\n';
  for (const Dense& d : layers_) {
    ser::write_matrix(os, d.W);
    ser::write_vector(os, d.b);
  }
}

Autoencoder Autoencoder::load_body(std::istream& is) {
  AeConfig cfg;
  cfg.h1 = ser::read_u64(is, "h1");
  cfg.h2 = ser::read_u64(is, "h2");
  cfg.latent = ser::read_u64(is, "latent");
  cfg.epochs = ser::read_u64(is, "epochs");
  cfg.batch = ser::read_u64(is, "batch");
  cfg.lr = ser::read_double(is, "lr");
  cfg.seed = ser::read_u64(is, "seed");
  Autoencoder ae(cfg);
  ae.scaler_.min = ser::read_vector(is, "scaler min");
  ae.scaler_.range = ser::read_vector(is, "scaler range");
  const auto n_layers = ser::read_u64(is, "layer count");
  ae.layers_.resize(n_layers);
  for (auto& d : ae.layers_) {
    d.W = ser::read_matrix(is, "layer weights");
    d.b = ser::read_vector(is, "layer bias");
  }
  return ae;
}

}  // namespace cadence
