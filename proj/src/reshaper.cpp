#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "cadence/reshaper.hpp"
#include "cadence/rng.hpp"
#include "cadence/serialize.hpp"

namespace cadence {

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

Eigen::MatrixXd msigmoid(const Eigen::MatrixXd& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

Eigen::VectorXd vsigmoid(const Eigen::VectorXd& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

struct Grads {
  Eigen::MatrixXd Wx, Wh, W1, W2;
  Eigen::VectorXd b, b1, b2;
};

struct Net {
  const Eigen::MatrixXd& Wx;
  const Eigen::MatrixXd& Wh;
  const Eigen::VectorXd& b;
  const Eigen::MatrixXd& W1;
  const Eigen::VectorXd& b1;
  const Eigen::MatrixXd& W2;
  const Eigen::VectorXd& b2;
};

// Forward and, when grads is non-null, backward over a batch of windows
// (rows of `rows`, flattened step-major). Returns the mean squared error of
// the sigmoid head against `y`.
double bptt(const Net& net, const Eigen::MatrixXd& rows,
            const Eigen::VectorXd& y, Grads* grads) {
  const Eigen::Index B = rows.rows();
  const Eigen::Index H = net.Wh.cols();
  const auto T = static_cast<std::size_t>(rows.cols() / 3);

  std::vector<Eigen::MatrixXd> Xs(T), Ig(T), Fg(T), Gg(T), Og(T), Cs(T),
      TCs(T), Hs(T);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(H, B);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(H, B);

  for (std::size_t t = 0; t < T; ++t) {
    Eigen::MatrixXd X(3, B);
    for (Eigen::Index j = 0; j < B; ++j) {
      X.col(j) = rows.row(j).segment(static_cast<Eigen::Index>(3 * t), 3)
                     .transpose();
    }
    Eigen::MatrixXd Z = net.Wx * X + net.Wh * h;
    Z.colwise() += net.b;
    Ig[t] = msigmoid(Z.topRows(H));
    Fg[t] = msigmoid(Z.middleRows(H, H));
    Gg[t] = Z.middleRows(2 * H, H).array().tanh().matrix();
    Og[t] = msigmoid(Z.bottomRows(H));
    c = Fg[t].cwiseProduct(c) + Ig[t].cwiseProduct(Gg[t]);
    Cs[t] = c;
    TCs[t] = c.array().tanh().matrix();
    h = Og[t].cwiseProduct(TCs[t]);
    Hs[t] = h;
    Xs[t] = std::move(X);
  }

  Eigen::MatrixXd U1 = net.W1 * h;
  U1.colwise() += net.b1;
  const Eigen::MatrixXd A1 = U1.cwiseMax(0.0);
  Eigen::MatrixXd U2 = net.W2 * A1;
  U2.array() += net.b2(0);
  const Eigen::MatrixXd Yhat = msigmoid(U2);  // 1 x B

  const Eigen::MatrixXd diff = Yhat - y.transpose();
  const double loss = diff.squaredNorm() / static_cast<double>(B);
  if (!grads) return loss;

  grads->Wx = Eigen::MatrixXd::Zero(net.Wx.rows(), net.Wx.cols());
  grads->Wh = Eigen::MatrixXd::Zero(net.Wh.rows(), net.Wh.cols());
  grads->b = Eigen::VectorXd::Zero(net.b.size());

  const Eigen::MatrixXd dU2 =
      (2.0 / static_cast<double>(B)) *
      diff.cwiseProduct(Yhat.cwiseProduct((1.0 - Yhat.array()).matrix()));
  grads->W2 = dU2 * A1.transpose();
  grads->b2 = dU2.rowwise().sum();
  const Eigen::MatrixXd dA1 = net.W2.transpose() * dU2;
  const Eigen::MatrixXd dU1 =
      dA1.cwiseProduct((U1.array() > 0.0).cast<double>().matrix());
  grads->W1 = dU1 * h.transpose();
  grads->b1 = dU1.rowwise().sum();

  Eigen::MatrixXd dh = net.W1.transpose() * dU1;
  Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(H, B);
  for (std::size_t t = T; t-- > 0;) {
    dc += dh.cwiseProduct(Og[t]).cwiseProduct(
        (1.0 - TCs[t].array().square()).matrix());
    const Eigen::MatrixXd dO = dh.cwiseProduct(TCs[t]);
    const Eigen::MatrixXd dI = dc.cwiseProduct(Gg[t]);
    const Eigen::MatrixXd dG = dc.cwiseProduct(Ig[t]);
    const Eigen::MatrixXd dF =
        t > 0 ? Eigen::MatrixXd(dc.cwiseProduct(Cs[t - 1]))
              : Eigen::MatrixXd(Eigen::MatrixXd::Zero(H, B));

    Eigen::MatrixXd dZ(4 * H, B);
    dZ.topRows(H) = dI.cwiseProduct(Ig[t]).cwiseProduct(
        (1.0 - Ig[t].array()).matrix());
    dZ.middleRows(H, H) = dF.cwiseProduct(Fg[t]).cwiseProduct(
        (1.0 - Fg[t].array()).matrix());
    dZ.middleRows(2 * H, H) =
        dG.cwiseProduct((1.0 - Gg[t].array().square()).matrix());
    dZ.bottomRows(H) = dO.cwiseProduct(Og[t]).cwiseProduct(
        (1.0 - Og[t].array()).matrix());

    grads->Wx += dZ * Xs[t].transpose();
    grads->b += dZ.rowwise().sum();
    if (t > 0) {
      grads->Wh += dZ * Hs[t - 1].transpose();
      dh = net.Wh.transpose() * dZ;
      dc = dc.cwiseProduct(Fg[t]);
    }
  }
  return loss;
}

}  // namespace

double Normalization::normalize_delta(double delta) const {
  if (delta_max > delta_min) return (delta - delta_min) / (delta_max - delta_min);
  return 0.5;
}

double Normalization::denormalize_delta(double y) const {
  if (delta_max > delta_min) return delta_min + y * (delta_max - delta_min);
  return delta_min;
}

double Normalization::normalize_size(double size) const {
  if (size_max > size_min) return (size - size_min) / (size_max - size_min);
  return 0.5;
}

WindowSet build_windows(const TrafficTrace& trace, std::size_t window) {
  if (window < 1) throw std::runtime_error("window must be >= 1");
  const std::size_t n = trace.size();
  if (n < window + 1) {
    throw std::runtime_error("trace has " + std::to_string(n) +
                             " packets; need at least " +
                             std::to_string(window + 1));
  }

  std::vector<double> deltas(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    deltas[i] =
        trace.records[i].timestamp - trace.records[i - 1].timestamp;
  }

  WindowSet ws;
  ws.window = window;
  ws.norms.delta_min = *std::min_element(deltas.begin() + 1, deltas.end());
  ws.norms.delta_max = *std::max_element(deltas.begin() + 1, deltas.end());
  double smin = trace.records[0].size, smax = trace.records[0].size;
  for (const PacketRecord& rec : trace.records) {
    smin = std::min(smin, static_cast<double>(rec.size));
    smax = std::max(smax, static_cast<double>(rec.size));
  }
  ws.norms.size_min = smin;
  ws.norms.size_max = smax;

  const auto rows = static_cast<Eigen::Index>(n - window);
  ws.inputs.setZero(rows, static_cast<Eigen::Index>(3 * window));
  ws.targets.resize(rows);
  for (std::size_t i = window; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i - window);
    for (std::size_t t = 0; t < window; ++t) {
      const std::size_t j = i - window + t;
      ws.inputs(r, static_cast<Eigen::Index>(3 * t)) =
          clamp01(ws.norms.normalize_delta(deltas[j]));
      ws.inputs(r, static_cast<Eigen::Index>(3 * t + 1)) =
          clamp01(ws.norms.normalize_size(trace.records[j].size));
    }
    ws.inputs(r, static_cast<Eigen::Index>(3 * (window - 1) + 2)) =
        clamp01(ws.norms.normalize_size(trace.records[i].size));
    ws.targets(r) = ws.norms.normalize_delta(deltas[i]);
  }
  return ws;
}

ReshaperModel::ReshaperModel(ReshaperConfig cfg) : cfg_(cfg) {
  if (cfg_.window < 1) throw std::runtime_error("window must be >= 1");
  if (cfg_.hidden < 1) throw std::runtime_error("hidden width must be >= 1");
  if (cfg_.batch < 1) throw std::runtime_error("batch size must be >= 1");
}

void ReshaperModel::init_params() {
  Rng rng(cfg_.seed);
  const auto H = static_cast<Eigen::Index>(cfg_.hidden);
  auto glorot = [&rng](Eigen::Index out, Eigen::Index in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Eigen::MatrixXd W(out, in);
    for (Eigen::Index c = 0; c < in; ++c) {
      for (Eigen::Index r = 0; r < out; ++r) W(r, c) = rng.uniform(-limit, limit);
    }
    return W;
  };
  Wx_ = glorot(4 * H, 3);
  Wh_ = glorot(4 * H, H);
  b_ = Eigen::VectorXd::Zero(4 * H);
  b_.segment(H, H).setOnes();  // forget-gate bias starts open
  W1_ = glorot(8, H);
  b1_ = Eigen::VectorXd::Zero(8);
  W2_ = glorot(1, 8);
  b2_ = Eigen::VectorXd::Zero(1);
}

void ReshaperModel::train(const WindowSet& ws) {
  if (ws.window != cfg_.window) {
    throw std::runtime_error("window set was built for W=" +
                             std::to_string(ws.window) + ", model expects W=" +
                             std::to_string(cfg_.window));
  }
  if (ws.inputs.rows() == 0) throw std::runtime_error("no training windows");

  norms_ = ws.norms;
  init_params();
  loss_curve_.clear();

  Grads m, v;
  auto zero_like = [this](Grads& g) {
    g.Wx = Eigen::MatrixXd::Zero(Wx_.rows(), Wx_.cols());
    g.Wh = Eigen::MatrixXd::Zero(Wh_.rows(), Wh_.cols());
    g.b = Eigen::VectorXd::Zero(b_.size());
    g.W1 = Eigen::MatrixXd::Zero(W1_.rows(), W1_.cols());
    g.b1 = Eigen::VectorXd::Zero(b1_.size());
    g.W2 = Eigen::MatrixXd::Zero(W2_.rows(), W2_.cols());
    g.b2 = Eigen::VectorXd::Zero(b2_.size());
  };
  zero_like(m);
  zero_like(v);
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double b1t = 1.0, b2t = 1.0;

  const auto n = static_cast<std::size_t>(ws.inputs.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  const Net net{Wx_, Wh_, b_, W1_, b1_, W2_, b2_};
  for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg_.seed, "shuffle", epoch));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg_.batch) {
      const std::size_t stop = std::min(n, start + cfg_.batch);
      Eigen::MatrixXd X(static_cast<Eigen::Index>(stop - start),
                        ws.inputs.cols());
      Eigen::VectorXd y(static_cast<Eigen::Index>(stop - start));
      for (std::size_t i = start; i < stop; ++i) {
        X.row(static_cast<Eigen::Index>(i - start)) =
            ws.inputs.row(static_cast<Eigen::Index>(order[i]));
        y(static_cast<Eigen::Index>(i - start)) =
            ws.targets(static_cast<Eigen::Index>(order[i]));
      }

      Grads g;
      const double loss = bptt(net, X, y, &g);
      if (!std::isfinite(loss)) {
        throw std::runtime_error(
            "training diverged: non-finite loss at epoch " +
            std::to_string(epoch) + ", batch " + std::to_string(batches));
      }
      epoch_loss += loss;
      ++batches;

      b1t *= beta1;
      b2t *= beta2;
      auto adam = [&](auto& theta, auto& mm, auto& vv, const auto& grad) {
        mm = beta1 * mm + (1 - beta1) * grad;
        vv = beta2 * vv + (1 - beta2) * grad.cwiseProduct(grad);
        theta -= cfg_.lr * ((mm / (1 - b1t)).array() /
                            ((vv / (1 - b2t)).array().sqrt() + eps))
                               .matrix();
      };
      adam(Wx_, m.Wx, v.Wx, g.Wx);
      adam(Wh_, m.Wh, v.Wh, g.Wh);
      adam(b_, m.b, v.b, g.b);
      adam(W1_, m.W1, v.W1, g.W1);
      adam(b1_, m.b1, v.b1, g.b1);
      adam(W2_, m.W2, v.W2, g.W2);
      adam(b2_, m.b2, v.b2, g.b2);
    }
    loss_curve_.push_back(epoch_loss / static_cast<double>(batches));
  }
  trained_ = true;
}

void ReshaperModel::fit(const TrafficTrace& benign) {
  const WindowSet ws = build_windows(benign, cfg_.window);
  train(ws);

  // Seed the reshaping history with the tail of the training trace.
  const std::size_t n = benign.size();
  std::vector<std::pair<double, double>> tail;
  tail.reserve(cfg_.window);
  for (std::size_t j = n - cfg_.window; j < n; ++j) {
    const double delta =
        benign.records[j].timestamp - benign.records[j - 1].timestamp;
    tail.emplace_back(clamp01(norms_.normalize_delta(delta)),
                      clamp01(norms_.normalize_size(benign.records[j].size)));
  }
  seed_history_ = std::move(tail);
}

double ReshaperModel::forward(const Eigen::VectorXd& window_input) const {
  if (Wx_.size() == 0) throw std::runtime_error("parameters not initialized");
  if (window_input.size() != static_cast<Eigen::Index>(3 * cfg_.window)) {
    throw std::runtime_error("window input must have 3*W values");
  }
  const auto H = static_cast<Eigen::Index>(cfg_.hidden);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(H);
  for (std::size_t t = 0; t < cfg_.window; ++t) {
    const Eigen::VectorXd xt =
        window_input.segment(static_cast<Eigen::Index>(3 * t), 3);
    const Eigen::VectorXd z = Wx_ * xt + Wh_ * h + b_;
    const Eigen::VectorXd ig = vsigmoid(z.head(H));
    const Eigen::VectorXd fg = vsigmoid(z.segment(H, H));
    const Eigen::VectorXd gg = z.segment(2 * H, H).array().tanh().matrix();
    const Eigen::VectorXd og = vsigmoid(z.tail(H));
    c = fg.cwiseProduct(c) + ig.cwiseProduct(gg);
    h = og.cwiseProduct(c.array().tanh().matrix());
  }
  const Eigen::VectorXd a1 = (W1_ * h + b1_).cwiseMax(0.0);
  const double u2 = (W2_ * a1)(0) + b2_(0);
  return 1.0 / (1.0 + std::exp(-u2));
}

ReshapeState ReshaperModel::seed_state() const {
  if (seed_history_.size() != cfg_.window) {
    throw std::runtime_error("model has no seeded history; train via fit()");
  }
  ReshapeState state;
  state.history.assign(seed_history_.begin(), seed_history_.end());
  state.prev_timestamp = 0.0;
  return state;
}

double ReshaperModel::reshape_step(ReshapeState& state,
                                   const PacketRecord& packet) const {
  if (!trained_) throw std::runtime_error("model is untrained");
  if (state.history.size() != cfg_.window) {
    throw std::runtime_error("history state not initialized for W=" +
                             std::to_string(cfg_.window));
  }
  Eigen::VectorXd x =
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(3 * cfg_.window));
  for (std::size_t t = 0; t < cfg_.window; ++t) {
    x(static_cast<Eigen::Index>(3 * t)) = state.history[t].first;
    x(static_cast<Eigen::Index>(3 * t + 1)) = state.history[t].second;
  }
  const double norm_size = clamp01(norms_.normalize_size(packet.size));
  x(static_cast<Eigen::Index>(3 * (cfg_.window - 1) + 2)) = norm_size;

  const double yhat = forward(x);
  const double delta = std::max(norms_.denormalize_delta(yhat), kDeltaFloor);
  const double stamped = quantize_timestamp(state.prev_timestamp + delta);
  state.prev_timestamp = stamped;
  state.history.pop_front();
  state.history.emplace_back(yhat, norm_size);
  return stamped;
}

void ReshaperModel::inject_observation(ReshapeState& state, double delta,
                                       double size) const {
  if (state.history.size() != cfg_.window) {
    throw std::runtime_error("history state not initialized");
  }
  if (delta < 0) throw std::runtime_error("observed delta must be >= 0");
  state.history.pop_front();
  state.history.emplace_back(clamp01(norms_.normalize_delta(delta)),
                             clamp01(norms_.normalize_size(size)));
  state.prev_timestamp = quantize_timestamp(state.prev_timestamp + delta);
}

TrafficTrace ReshaperModel::reshape_offline(
    const TrafficTrace& malicious) const {
  if (!trained_) throw std::runtime_error("model is untrained");
  if (malicious.size() < cfg_.window + 1) {
    throw std::runtime_error("trace has " + std::to_string(malicious.size()) +
                             " packets; need at least " +
                             std::to_string(cfg_.window + 1));
  }
  TrafficTrace out = malicious;
  ReshapeState state = seed_state();
  for (PacketRecord& rec : out.records) {
    rec.timestamp = reshape_step(state, rec);
  }
  return out;
}

Eigen::VectorXd ReshaperModel::flatten_params() const {
  const Eigen::MatrixXd* mats[] = {&Wx_, &Wh_, &W1_, &W2_};
  const Eigen::VectorXd* vecs[] = {&b_, &b1_, &b2_};
  std::size_t total = 0;
  for (auto* m : mats) total += static_cast<std::size_t>(m->size());
  for (auto* v : vecs) total += static_cast<std::size_t>(v->size());
  Eigen::VectorXd theta(static_cast<Eigen::Index>(total));
  Eigen::Index at = 0;
  auto put_mat = [&](const Eigen::MatrixXd& M) {
    theta.segment(at, M.size()) =
        Eigen::Map<const Eigen::VectorXd>(M.data(), M.size());
    at += M.size();
  };
  auto put_vec = [&](const Eigen::VectorXd& V) {
    theta.segment(at, V.size()) = V;
    at += V.size();
  };
  put_mat(Wx_);
  put_mat(Wh_);
  put_vec(b_);
  put_mat(W1_);
  put_vec(b1_);
  put_mat(W2_);
  put_vec(b2_);
  return theta;
}

void ReshaperModel::set_params(const Eigen::VectorXd& theta) {
  Eigen::Index at = 0;
  auto take_mat = [&](Eigen::MatrixXd& M) {
    Eigen::Map<Eigen::VectorXd>(M.data(), M.size()) =
        theta.segment(at, M.size());
    at += M.size();
  };
  auto take_vec = [&](Eigen::VectorXd& V) {
    V = theta.segment(at, V.size());
    at += V.size();
  };
  take_mat(Wx_);
  take_mat(Wh_);
  take_vec(b_);
  take_mat(W1_);
  take_vec(b1_);
  take_mat(W2_);
  take_vec(b2_);
  if (at != theta.size()) {
    throw std::runtime_error("parameter vector length mismatch");
  }
}

std::pair<double, Eigen::VectorXd> ReshaperModel::loss_and_grad(
    const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets) const {
  const Net net{Wx_, Wh_, b_, W1_, b1_, W2_, b2_};
  Grads g;
  const double loss = bptt(net, inputs, targets, &g);
  Eigen::VectorXd flat(flatten_params().size());
  Eigen::Index at = 0;
  auto put_mat = [&](const Eigen::MatrixXd& M) {
    flat.segment(at, M.size()) =
        Eigen::Map<const Eigen::VectorXd>(M.data(), M.size());
    at += M.size();
  };
  auto put_vec = [&](const Eigen::VectorXd& V) {
    flat.segment(at, V.size()) = V;
    at += V.size();
  };
  put_mat(g.Wx);
  put_mat(g.Wh);
  put_vec(g.b);
  put_mat(g.W1);
  put_vec(g.b1);
  put_mat(g.W2);
  put_vec(g.b2);
  return {loss, std::move(flat)};
}

void ReshaperModel::set_seed_history(
    std::vector<std::pair<double, double>> pairs) {
  seed_history_ = std::move(pairs);
}

void ReshaperModel::save(std::ostream& os) const {
  ser::write_header(os, "reshaper");
  os << cfg_.window << ' ' << cfg_.hidden << ' ' << cfg_.epochs << ' '
     << cfg_.batch << ' ';
  ser::write_double(os, cfg_.lr);
  os << ' ' << cfg_.seed << ' ' << (trained_ ? 1 : 0) << '\n';
  ser::write_double(os, norms_.delta_min);
  os << ' ';
  ser::write_double(os, norms_.delta_max);
  os << ' ';
  ser::write_double(os, norms_.size_min);
  os << ' ';
  ser::write_double(os, norms_.size_max);
  os << '\n';
  ser::write_matrix(os, Wx_);
  ser::write_matrix(os, Wh_);
  ser::write_vector(os, b_);
  ser::write_matrix(os, W1_);
  ser::write_vector(os, b1_);
  ser::write_matrix(os, W2_);
  ser::write_vector(os, b2_);
  os << seed_history_.size() << '\n';
  for (const auto& [d, s] : seed_history_) {
    ser::write_double(os, d);
    os << ' ';
    ser::write_double(os, s);
    os << '\n';
  }
}

ReshaperModel ReshaperModel::load(std::istream& is) {
  ser::expect_header(is, "reshaper");
  ReshaperConfig cfg;
  cfg.window = ser::read_u64(is, "window");
  cfg.hidden = ser::read_u64(is, "hidden");
  cfg.epochs = ser::read_u64(is, "epochs");
  cfg.batch = ser::read_u64(is, "batch");
  cfg.lr = ser::read_double(is, "lr");
  cfg.seed = ser::read_u64(is, "seed");
  const bool trained = ser::read_u64(is, "trained flag") != 0;
  ReshaperModel model(cfg);
  model.norms_.delta_min = ser::read_double(is, "delta_min");
  model.norms_.delta_max = ser::read_double(is, "delta_max");
  model.norms_.size_min = ser::read_double(is, "size_min");
  model.norms_.size_max = ser::read_double(is, "size_max");
  model.Wx_ = ser::read_matrix(is, "Wx");
  model.Wh_ = ser::read_matrix(is, "Wh");
  model.b_ = ser::read_vector(is, "b");
  model.W1_ = ser::read_matrix(is, "W1");
  model.b1_ = ser::read_vector(is, "b1");
  model.W2_ = ser::read_matrix(is, "W2");
  model.b2_ = ser::read_vector(is, "b2");
  const auto n = ser::read_u64(is, "seed history length");
  model.seed_history_.resize(n);
  for (auto& [d, s] : model.seed_history_) {
    d = ser::read_double(is, "history delta");
    s = ser::read_double(is, "history size");
  }
  model.trained_ = trained;
  return model;
}

ReshaperModel ReshaperModel::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open model file: " + path);
  return load(is);
}

void ReshaperModel::save_file(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write model file: " + path);
  save(os);
  if (!os.good()) throw std::runtime_error("short write: " + path);
}

}  // namespace cadence
