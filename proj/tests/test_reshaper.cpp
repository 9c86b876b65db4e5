#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cadence/reshaper.hpp"
#include "cadence/rng.hpp"
#include "cadence/synth.hpp"
#include "cadence/trace.hpp"

using namespace cadence;

namespace {

std::string fixture(const std::string& name) {
  return std::string(CADENCE_FIXTURE_DIR) + "/" + name;
}

TrafficTrace periodic(std::size_t n, double jitter, std::uint64_t seed,
                      std::uint32_t size_std = 120) {
  TrafficProfile p;
  p.kind = ProfileKind::periodic_benign;
  p.n_packets = n;
  p.base_delta = 0.01;
  p.jitter = jitter;
  p.size_mean = 512;
  p.size_std = size_std;
  p.seed = seed;
  return generate(p);
}

std::vector<double> deltas_of(const TrafficTrace& t) {
  return inter_packet_deltas(t);
}

double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(p / 100.0 * static_cast<double>(v.size())));
  return v[std::max<std::size_t>(1, rank) - 1];
}

// Plain-loop scalar re-implementation of the recurrent forward pass, fed
// straight from the text serialization. No Eigen, no shared code with the
// model class.
struct ScalarNet {
  std::size_t W = 0, H = 0;
  std::vector<double> Wx, Wh, b, W1, b1, W2;  // matrices row-major
  double b2 = 0;
  double delta_min = 0, delta_max = 0, size_min = 0, size_max = 0;

  static ScalarNet parse(const std::string& path) {
    std::ifstream is(path);
    REQUIRE(is.good());
    std::string magic, kind, version;
    is >> magic >> kind >> version;
    REQUIRE(magic == "cadence-model");
    REQUIRE(kind == "reshaper");
    ScalarNet net;
    std::size_t epochs, batch, trained;
    double lr;
    std::uint64_t seed;
    is >> net.W >> net.H >> epochs >> batch >> lr >> seed >> trained;
    is >> net.delta_min >> net.delta_max >> net.size_min >> net.size_max;
    auto matrix = [&is](std::size_t expect_r, std::size_t expect_c) {
      std::size_t r, c;
      is >> r >> c;
      REQUIRE(r == expect_r);
      REQUIRE(c == expect_c);
      std::vector<double> m(r * c);
      for (double& x : m) is >> x;
      return m;
    };
    auto vector = [&is](std::size_t expect_n) {
      std::size_t n;
      is >> n;
      REQUIRE(n == expect_n);
      std::vector<double> v(n);
      for (double& x : v) is >> x;
      return v;
    };
    net.Wx = matrix(4 * net.H, 3);
    net.Wh = matrix(4 * net.H, net.H);
    net.b = vector(4 * net.H);
    net.W1 = matrix(8, net.H);
    net.b1 = vector(8);
    net.W2 = matrix(1, 8);
    net.b2 = vector(1)[0];
    REQUIRE(is.good());
    return net;
  }

  double forward(const std::vector<double>& x) const {
    auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    std::vector<double> h(H, 0.0), c(H, 0.0);
    for (std::size_t t = 0; t < W; ++t) {
      std::vector<double> z(4 * H, 0.0);
      for (std::size_t r = 0; r < 4 * H; ++r) {
        double acc = b[r];
        for (std::size_t k = 0; k < 3; ++k) acc += Wx[r * 3 + k] * x[3 * t + k];
        for (std::size_t j = 0; j < H; ++j) acc += Wh[r * H + j] * h[j];
        z[r] = acc;
      }
      std::vector<double> hn(H), cn(H);
      for (std::size_t j = 0; j < H; ++j) {
        const double ig = sig(z[j]);
        const double fg = sig(z[H + j]);
        const double gg = std::tanh(z[2 * H + j]);
        const double og = sig(z[3 * H + j]);
        cn[j] = fg * c[j] + ig * gg;
        hn[j] = og * std::tanh(cn[j]);
      }
      h = hn;
      c = cn;
    }
    double u2 = b2;
    for (std::size_t k = 0; k < 8; ++k) {
      double a = b1[k];
      for (std::size_t j = 0; j < H; ++j) a += W1[k * H + j] * h[j];
      u2 += W2[k] * std::max(0.0, a);
    }
    return sig(u2);
  }
};

}  // namespace

TEST_CASE("window construction shapes and clamping") {
  TrafficTrace t;
  const double stamps[] = {0.0, 0.010, 0.025, 0.030, 0.050};
  const std::uint32_t sizes[] = {100, 200, 300, 400, 500};
  for (int i = 0; i < 5; ++i) {
    PacketRecord r;
    r.timestamp = stamps[i];
    r.size = sizes[i];
    r.label = Label::benign;
    t.records.push_back(r);
  }

  const WindowSet ws = build_windows(t, 3);
  REQUIRE(ws.inputs.rows() == 2);
  REQUIRE(ws.inputs.cols() == 9);
  REQUIRE(ws.targets.size() == 2);
  CHECK(ws.window == 3);

  // norms come from deltas[1:] = {.010,.015,.005,.020} and all sizes
  CHECK(ws.norms.delta_min == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(ws.norms.delta_max == doctest::Approx(0.020).epsilon(1e-12));
  CHECK(ws.norms.size_min == 100.0);
  CHECK(ws.norms.size_max == 500.0);

  // first history packet has no predecessor; its delta enters as 0 and
  // clamps to the bottom of the scale
  CHECK(ws.inputs(0, 0) == 0.0);
  CHECK(ws.inputs(0, 1) == doctest::Approx(0.0));  // size 100 is the min
  // aux slot is zero on every step except the last
  CHECK(ws.inputs(0, 2) == 0.0);
  CHECK(ws.inputs(0, 5) == 0.0);
  CHECK(ws.inputs(0, 8) ==
        doctest::Approx(ws.norms.normalize_size(400)).epsilon(1e-12));
  // target for row 0 is packet 3's normalized delta (.005 -> 0)
  CHECK(ws.targets(0) == doctest::Approx(0.0));
  CHECK(ws.targets(1) == doctest::Approx(1.0));  // .020 is the max

  CHECK_THROWS_AS(build_windows(t, 5), std::runtime_error);
  CHECK_THROWS_AS(build_windows(t, 0), std::runtime_error);
}

TEST_CASE("constant spacing pins every target to the degenerate midpoint") {
  // 0.25 is a dyadic rational, so every timestamp and every delta is exact
  TrafficTrace t;
  for (int i = 0; i < 50; ++i) {
    PacketRecord r;
    r.timestamp = 0.25 * i;
    r.size = 512;
    r.label = Label::benign;
    t.records.push_back(r);
  }
  const WindowSet ws = build_windows(t, 4);
  CHECK(ws.norms.delta_min == ws.norms.delta_max);
  for (Eigen::Index i = 0; i < ws.targets.size(); ++i) {
    CHECK(ws.targets(i) == 0.5);
  }
}

TEST_CASE("normalization round-trips and degenerates cleanly") {
  Normalization n;
  n.delta_min = 0.002;
  n.delta_max = 0.04;
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const double d = rng.uniform(0.002, 0.04);
    const double rt = n.denormalize_delta(n.normalize_delta(d));
    CHECK(std::abs(rt - d) <= 1e-12 * std::max(1.0, std::abs(d)));
  }
  CHECK(n.normalize_delta(0.002) == 0.0);
  CHECK(n.normalize_delta(0.04) == 1.0);

  Normalization flat;
  flat.delta_min = flat.delta_max = 0.01;
  CHECK(flat.normalize_delta(123.0) == 0.5);
  CHECK(flat.denormalize_delta(0.77) == 0.01);
  flat.size_min = flat.size_max = 512;
  CHECK(flat.normalize_size(9999) == 0.5);
}

TEST_CASE("all-zero parameters sit exactly at the sigmoid midpoint") {
  ReshaperConfig cfg;
  cfg.window = 3;
  cfg.hidden = 4;
  ReshaperModel model(cfg);
  model.init_params();
  model.set_params(Eigen::VectorXd::Zero(model.flatten_params().size()));
  const double y = model.forward(Eigen::VectorXd::Random(9));
  CHECK(y == 0.5);
}

TEST_CASE("forward output stays inside the open unit interval") {
  ReshaperConfig cfg;
  cfg.window = 5;
  cfg.hidden = 8;
  cfg.seed = 99;
  ReshaperModel model(cfg);
  model.init_params();
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd x(15);
    for (Eigen::Index j = 0; j < 15; ++j) x(j) = rng.uniform(0.0, 1.0);
    const double y = model.forward(x);
    CHECK(y > 0.0);
    CHECK(y < 1.0);
  }
  CHECK_THROWS_AS(model.forward(Eigen::VectorXd::Zero(14)),
                  std::runtime_error);
  ReshaperModel blank(cfg);
  CHECK_THROWS_AS(blank.forward(Eigen::VectorXd::Zero(15)),
                  std::runtime_error);
}

TEST_CASE("forward agrees with a straight-line scalar reimplementation") {
  const ScalarNet scalar = ScalarNet::parse(fixture("tiny_reshaper.model"));
  const ReshaperModel model =
      ReshaperModel::load_file(fixture("tiny_reshaper.model"));
  REQUIRE(model.config().window == scalar.W);
  REQUIRE(model.config().hidden == scalar.H);

  Rng rng(20260825);
  double worst = 0;
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> x(3 * scalar.W);
    for (double& v : x) v = rng.uniform(0.0, 1.0);
    Eigen::VectorXd xe(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i)
      xe(static_cast<Eigen::Index>(i)) = x[i];
    const double a = model.forward(xe);
    const double b = scalar.forward(x);
    worst = std::max(worst, std::abs(a - b));
    CHECK(std::abs(a - b) <= 1e-10);
  }
  MESSAGE("worst |model - scalar|: " << worst);
}

TEST_CASE("analytic gradients match central differences") {
  ReshaperConfig cfg;
  cfg.window = 3;
  cfg.hidden = 4;
  cfg.seed = 17;
  ReshaperModel model(cfg);
  model.init_params();

  Rng rng(31);
  Eigen::MatrixXd inputs(5, 9);
  Eigen::VectorXd targets(5);
  for (Eigen::Index i = 0; i < 5; ++i) {
    for (Eigen::Index j = 0; j < 9; ++j) inputs(i, j) = rng.uniform(0.0, 1.0);
    targets(i) = rng.uniform(0.05, 0.95);
  }

  const auto [loss, grad] = model.loss_and_grad(inputs, targets);
  CHECK(std::isfinite(loss));
  REQUIRE(grad.size() == model.flatten_params().size());

  const Eigen::VectorXd theta = model.flatten_params();
  const double h = 1e-5;
  double worst = 0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd up = theta, dn = theta;
    up(k) += h;
    dn(k) -= h;
    model.set_params(up);
    const double lu = model.loss_and_grad(inputs, targets).first;
    model.set_params(dn);
    const double ld = model.loss_and_grad(inputs, targets).first;
    model.set_params(theta);
    const double numeric = (lu - ld) / (2 * h);
    const double rel = std::abs(grad(k) - numeric) /
                       std::max(std::abs(grad(k)) + std::abs(numeric), 1e-8);
    worst = std::max(worst, rel);
    if (rel > 1e-4) {
      CAPTURE(k);
      CHECK(rel <= 1e-4);
    }
  }
  CHECK(worst <= 1e-4);
  MESSAGE("worst gradient relative error: " << worst);
}

TEST_CASE("the model can memorize a single repeated window") {
  Rng rng(77);
  Eigen::MatrixXd inputs(8, 9);
  Eigen::VectorXd targets(8);
  Eigen::VectorXd one(9);
  for (Eigen::Index j = 0; j < 9; ++j) one(j) = rng.uniform(0.0, 1.0);
  for (Eigen::Index i = 0; i < 8; ++i) {
    inputs.row(i) = one.transpose();
    targets(i) = 0.3;
  }
  WindowSet ws;
  ws.window = 3;
  ws.inputs = inputs;
  ws.targets = targets;

  ReshaperConfig cfg;
  cfg.window = 3;
  cfg.hidden = 8;
  cfg.batch = 8;
  cfg.lr = 0.02;
  cfg.epochs = 500;
  cfg.seed = 5;
  ReshaperModel model(cfg);
  model.train(ws);
  REQUIRE(model.loss_curve().size() == 500);
  CHECK(model.loss_curve().back() < 1e-4);
  CHECK(model.forward(one) == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("zero learning rate leaves the initialization untouched") {
  const TrafficTrace t = periodic(100, 0.2, 21);
  WindowSet ws = build_windows(t, 3);
  ws.inputs.conservativeResize(96, Eigen::NoChange);  // multiple of batch
  ws.targets.conservativeResize(96);

  ReshaperConfig cfg;
  cfg.window = 3;
  cfg.hidden = 4;
  cfg.batch = 8;
  cfg.lr = 0.0;
  cfg.epochs = 4;
  cfg.seed = 123;
  ReshaperModel model(cfg);
  model.train(ws);

  ReshaperModel fresh(cfg);
  fresh.init_params();
  const Eigen::VectorXd a = model.flatten_params();
  const Eigen::VectorXd b = fresh.flatten_params();
  REQUIRE(a.size() == b.size());
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);

  // equal-size batches: the epoch mean equals the global mean regardless
  // of how the shuffles partition the windows
  REQUIRE(model.loss_curve().size() == 4);
  for (double l : model.loss_curve()) {
    CHECK(l == doctest::Approx(model.loss_curve()[0]).epsilon(1e-12));
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const TrafficTrace t = periodic(200, 0.2, 42);
  ReshaperConfig cfg;
  cfg.window = 5;
  cfg.hidden = 8;
  cfg.epochs = 2;
  cfg.seed = 9;
  ReshaperModel m1(cfg), m2(cfg);
  m1.fit(t);
  m2.fit(t);
  CHECK((m1.flatten_params() - m2.flatten_params()).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(m1.loss_curve() == m2.loss_curve());

  ReshaperConfig other = cfg;
  other.seed = 10;
  ReshaperModel m3(other);
  m3.fit(t);
  CHECK((m1.flatten_params() - m3.flatten_params()).cwiseAbs().maxCoeff() >
        0.0);
}

TEST_CASE("reshaped floods land inside the benign timing band") {
  const TrafficTrace benign = periodic(3000, 0.2, 101);
  ReshaperConfig cfg;
  cfg.window = 10;
  cfg.hidden = 16;
  cfg.epochs = 3;
  cfg.seed = 7;
  ReshaperModel model(cfg);
  model.fit(benign);

  TrafficProfile fp;
  fp.kind = ProfileKind::flood_attack;
  fp.n_packets = 1000;
  fp.base_delta = 0.01;
  fp.jitter = 0.2;
  fp.seed = 202;
  const TrafficTrace flood = generate(fp);
  const TrafficTrace reshaped = model.reshape_offline(flood);

  std::vector<double> bd = deltas_of(benign);
  std::vector<double> rd = deltas_of(reshaped);
  std::vector<double> fd = deltas_of(flood);
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  const double lo = percentile(bd, 5.0);
  const double hi = percentile(bd, 95.0);
  const double med_reshaped = median(rd);
  MESSAGE("benign band [" << lo << ", " << hi << "], reshaped median "
                          << med_reshaped << ", flood median " << median(fd));
  CHECK(median(fd) < lo);  // the flood is visibly faster than benign
  CHECK(med_reshaped >= lo);
  CHECK(med_reshaped <= hi);
}

TEST_CASE("offline reshaping equals folding the step function") {
  const ReshaperModel model =
      ReshaperModel::load_file(fixture("tiny_reshaper.model"));
  for (const char* name :
       {"flood_small.trace", "scan_small.trace", "mitm_small.trace"}) {
    CAPTURE(name);
    const TrafficTrace trace = read_canonical(fixture(name));
    const TrafficTrace offline = model.reshape_offline(trace);

    ReshapeState state = model.seed_state();
    REQUIRE(offline.size() == trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
      const double stamped = model.reshape_step(state, trace.records[i]);
      CHECK(offline.records[i].timestamp == stamped);
    }
  }
}

TEST_CASE("reshaping rewrites timestamps and nothing else") {
  const ReshaperModel model =
      ReshaperModel::load_file(fixture("tiny_reshaper.model"));
  for (const char* name :
       {"flood_small.trace", "scan_small.trace", "mitm_small.trace"}) {
    CAPTURE(name);
    const TrafficTrace trace = read_canonical(fixture(name));
    const TrafficTrace reshaped = model.reshape_offline(trace);
    REQUIRE(reshaped.size() == trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
      const PacketRecord& a = trace.records[i];
      const PacketRecord& b = reshaped.records[i];
      CHECK(a.seq_index == b.seq_index);
      CHECK(a.src_mac == b.src_mac);
      CHECK(a.dst_mac == b.dst_mac);
      CHECK(a.src_ip.bytes == b.src_ip.bytes);
      CHECK(a.dst_ip.bytes == b.dst_ip.bytes);
      CHECK(a.protocol == b.protocol);
      CHECK(a.ip_type == b.ip_type);
      CHECK(a.size == b.size);
      CHECK(a.label == b.label);
      if (i > 0) {
        CHECK(b.timestamp >= reshaped.records[i - 1].timestamp);
      }
      CHECK(b.timestamp == quantize_timestamp(b.timestamp));
    }
  }
}

TEST_CASE("observed responses steer later predictions") {
  const ReshaperModel model =
      ReshaperModel::load_file(fixture("tiny_reshaper.model"));
  const TrafficTrace trace = read_canonical(fixture("flood_small.trace"));

  ReshapeState plain = model.seed_state();
  ReshapeState fed = model.seed_state();
  model.reshape_step(plain, trace.records[0]);
  model.reshape_step(fed, trace.records[0]);
  model.inject_observation(fed, 0.25, 64);

  // the injected observation rewrites one history slot, so the next
  // prediction differs, and the injected delta advances the clock
  const double a = model.reshape_step(plain, trace.records[1]);
  const double b = model.reshape_step(fed, trace.records[1]);
  CHECK(a != b);
  CHECK(fed.prev_timestamp > plain.prev_timestamp);

  CHECK_THROWS_AS(model.inject_observation(fed, -0.1, 64),
                  std::runtime_error);
}

TEST_CASE("save and load round-trip the whole model") {
  const TrafficTrace t = periodic(150, 0.2, 55);
  ReshaperConfig cfg;
  cfg.window = 4;
  cfg.hidden = 6;
  cfg.epochs = 2;
  cfg.batch = 16;
  cfg.lr = 2e-3;
  cfg.seed = 88;
  ReshaperModel model(cfg);
  model.fit(t);

  std::stringstream buf;
  model.save(buf);
  const ReshaperModel back = ReshaperModel::load(buf);

  CHECK(back.trained());
  CHECK(back.config().window == cfg.window);
  CHECK(back.config().hidden == cfg.hidden);
  CHECK(back.config().lr == cfg.lr);
  CHECK(back.config().seed == cfg.seed);
  CHECK(back.norms().delta_min == model.norms().delta_min);
  CHECK(back.norms().delta_max == model.norms().delta_max);
  CHECK((back.flatten_params() - model.flatten_params())
            .cwiseAbs()
            .maxCoeff() == 0.0);

  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd x(12);
    for (Eigen::Index j = 0; j < 12; ++j) x(j) = rng.uniform(0.0, 1.0);
    CHECK(model.forward(x) == back.forward(x));
  }

  const TrafficTrace flood = read_canonical(fixture("flood_small.trace"));
  const TrafficTrace r1 = model.reshape_offline(flood);
  const TrafficTrace r2 = back.reshape_offline(flood);
  for (std::size_t i = 0; i < r1.size(); ++i) {
    CHECK(r1.records[i].timestamp == r2.records[i].timestamp);
  }

  CHECK_THROWS_AS(ReshaperModel::load_file("/nonexistent/model"),
                  std::runtime_error);
}

TEST_CASE("construction and state errors") {
  ReshaperConfig bad;
  bad.window = 0;
  CHECK_THROWS_AS(ReshaperModel{bad}, std::runtime_error);
  bad.window = 3;
  bad.hidden = 0;
  CHECK_THROWS_AS(ReshaperModel{bad}, std::runtime_error);
  bad.hidden = 4;
  bad.batch = 0;
  CHECK_THROWS_AS(ReshaperModel{bad}, std::runtime_error);

  ReshaperConfig cfg;
  cfg.window = 3;
  ReshaperModel untrained(cfg);
  CHECK_THROWS_AS(untrained.seed_state(), std::runtime_error);
  const TrafficTrace flood = read_canonical(fixture("flood_small.trace"));
  CHECK_THROWS_AS(untrained.reshape_offline(flood), std::runtime_error);

  // a trained W=3 model still refuses traces shorter than W+1
  const ReshaperModel model =
      ReshaperModel::load_file(fixture("tiny_reshaper.model"));
  TrafficTrace tiny;
  tiny.records.assign(flood.records.begin(), flood.records.begin() + 3);
  CHECK_THROWS_AS(model.reshape_offline(tiny), std::runtime_error);

  // mismatched window set
  const TrafficTrace t = periodic(60, 0.2, 3);
  const WindowSet ws = build_windows(t, 5);
  ReshaperModel w3(cfg);
  CHECK_THROWS_AS(w3.train(ws), std::runtime_error);
}
