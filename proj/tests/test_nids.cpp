#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cadence/nids.hpp"
#include "cadence/rng.hpp"

using namespace cadence;

namespace {

std::string fixture(const std::string& name) {
  return std::string(CADENCE_FIXTURE_DIR) + "/" + name;
}

std::filesystem::path scratch_dir() {
  const auto dir =
      std::filesystem::temp_directory_path() / "cadence-test-nids";
  std::filesystem::create_directories(dir);
  return dir;
}

Eigen::VectorXd vec(std::initializer_list<double> vals) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double x : vals) v(i++) = x;
  return v;
}

Eigen::MatrixXd random_rows(Eigen::Index n, Eigen::Index f,
                            std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd rows(n, f);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < f; ++j) rows(i, j) = rng.uniform(0.0, 1.0);
  }
  return rows;
}

// independent harmonic-sum oracle for the unsuccessful-search path length
double apl_oracle(std::size_t m) {
  if (m < 2) return 0.0;
  double h = 0;
  for (std::size_t i = m - 1; i >= 1; --i) h += 1.0 / static_cast<double>(i);
  return 2.0 * h - 2.0 * (static_cast<double>(m) - 1.0) /
                       static_cast<double>(m);
}

// walks a stored tree by hand: depth of the landing leaf plus the expected
// remainder for its size
double walk_tree(const IfNode& node, const Eigen::VectorXd& x, double depth) {
  if (node.feature < 0) return depth + apl_oracle(node.size);
  const IfNode& next = x(node.feature) < node.threshold ? *node.left
                                                        : *node.right;
  return walk_tree(next, x, depth + 1);
}

void check_tree_shape(const IfNode& node) {
  if (node.feature < 0) {
    CHECK(node.left == nullptr);
    CHECK(node.right == nullptr);
    return;
  }
  REQUIRE(node.left != nullptr);
  REQUIRE(node.right != nullptr);
  CHECK(std::isfinite(node.threshold));
  CHECK(node.size == node.left->size + node.right->size);
  check_tree_shape(*node.left);
  check_tree_shape(*node.right);
}

}  // namespace

TEST_CASE("rmse agrees with the textbook definition") {
  CHECK(rmse(vec({0, 0}), vec({3, 4})) ==
        doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));
  CHECK(rmse(vec({3, 4}), vec({0, 0})) == rmse(vec({0, 0}), vec({3, 4})));
  CHECK(rmse(vec({5}), vec({5})) == 0.0);
  CHECK_THROWS_AS(rmse(vec({1, 2}), vec({1})), std::runtime_error);
  CHECK_THROWS_AS(rmse(Eigen::VectorXd(), Eigen::VectorXd()),
                  std::runtime_error);
}

TEST_CASE("min-max scaling maps training bounds onto the unit box") {
  Eigen::MatrixXd rows(3, 3);
  rows << 0, 10, 7,
          5, 20, 7,
          10, 15, 7;
  MinMaxScaler scaler;
  CHECK(!scaler.fitted());
  scaler.fit(rows);
  CHECK(scaler.fitted());

  const Eigen::VectorXd lo = scaler.transform(vec({0, 10, 7}));
  CHECK(lo(0) == 0.0);
  CHECK(lo(1) == 0.0);
  CHECK(lo(2) == 0.0);  // constant column pins to zero
  const Eigen::VectorXd hi = scaler.transform(vec({10, 20, 7}));
  CHECK(hi(0) == 1.0);
  CHECK(hi(1) == 1.0);
  const Eigen::VectorXd mid = scaler.transform(vec({5, 15, 123456}));
  CHECK(mid(0) == 0.5);
  CHECK(mid(1) == 0.5);
  CHECK(mid(2) == 0.0);  // even off-distribution values of a dead column

  CHECK_THROWS_AS(scaler.transform(vec({1, 2})), std::runtime_error);
  MinMaxScaler empty;
  CHECK_THROWS_AS(empty.fit(Eigen::MatrixXd(0, 3)), std::runtime_error);
}

TEST_CASE("threshold specs parse and calibrate by nearest rank") {
  const ThresholdSpec mx = ThresholdSpec::parse("max", 1.0);
  CHECK(mx.rule == ThresholdRule::max_benign);
  const ThresholdSpec p = ThresholdSpec::parse("pctl:97.5", 2.0);
  CHECK(p.rule == ThresholdRule::percentile);
  CHECK(p.percentile == 97.5);
  CHECK(p.phi == 2.0);
  CHECK_THROWS_AS(ThresholdSpec::parse("median", 1.0), std::runtime_error);
  CHECK_THROWS(ThresholdSpec::parse("pctl:abc", 1.0));

  CHECK(calibrate_threshold({1, 2, 3}, mx) == 3.0);
  ThresholdSpec scaled = mx;
  scaled.phi = 1.5;
  CHECK(calibrate_threshold({1, 2, 3}, scaled) == 4.5);

  std::vector<double> hundred(100);
  std::iota(hundred.begin(), hundred.end(), 1.0);  // 1..100
  ThresholdSpec p99;
  p99.rule = ThresholdRule::percentile;
  p99.percentile = 99.0;
  CHECK(calibrate_threshold(hundred, p99) == 99.0);
  p99.percentile = 99.5;  // ceil(99.5) = 100th smallest
  CHECK(calibrate_threshold(hundred, p99) == 100.0);
  p99.percentile = 100.0;
  CHECK(calibrate_threshold(hundred, p99) ==
        calibrate_threshold(hundred, mx));
  p99.percentile = 0.5;  // ceil(0.5) = 1st smallest
  CHECK(calibrate_threshold(hundred, p99) == 1.0);

  ThresholdSpec bad;
  bad.rule = ThresholdRule::percentile;
  bad.percentile = 0.0;
  CHECK_THROWS_AS(calibrate_threshold(hundred, bad), std::runtime_error);
  bad.percentile = 100.5;
  CHECK_THROWS_AS(calibrate_threshold(hundred, bad), std::runtime_error);
  CHECK_THROWS_AS(calibrate_threshold({}, mx), std::runtime_error);
}

TEST_CASE("detection counts and rates from a hand-built confusion") {
  const std::vector<double> scores = {1, 2, 3, 4, 5, 10};
  const std::vector<Label> labels = {Label::benign,    Label::benign,
                                     Label::malicious, Label::malicious,
                                     Label::benign,    Label::unlabeled};
  const DetectionReport r = detect(scores, labels, 2.0);
  CHECK(r.true_positives == 2);
  CHECK(r.false_negatives == 0);
  CHECK(r.false_positives == 1);  // the 5
  CHECK(r.true_negatives == 2);   // 1, and 2 is not strictly above 2
  CHECK(r.detection_rate().value() == 100.0);
  CHECK(r.false_positive_rate().value() ==
        doctest::Approx(100.0 / 3.0).epsilon(1e-12));

  // raising the threshold can only silence alarms
  std::size_t prev_alarms = 99;
  for (double thr : {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0}) {
    const DetectionReport rr = detect(scores, labels, thr);
    const std::size_t alarms = rr.true_positives + rr.false_positives;
    CHECK(alarms <= prev_alarms);
    prev_alarms = alarms;
  }

  const DetectionReport none =
      detect({1.0, 2.0}, {Label::benign, Label::benign}, 0.5);
  CHECK(!none.detection_rate().has_value());
  CHECK(none.false_positive_rate().value() == 100.0);
  const DetectionReport allm =
      detect({1.0, 2.0}, {Label::malicious, Label::malicious}, 5.0);
  CHECK(allm.detection_rate().value() == 0.0);
  CHECK(!allm.false_positive_rate().has_value());

  CHECK_THROWS_AS(detect({1.0}, {}, 0.0), std::runtime_error);
}

TEST_CASE("autoencoder with zeroed parameters reconstructs the zero vector") {
  Autoencoder ae;
  ae.init_params(2);
  ae.set_params(Eigen::VectorXd::Zero(ae.flatten_params().size()));
  // unfitted scaler: the raw row is scored against its zero reconstruction
  CHECK(ae.score(vec({3, 4})) == std::sqrt((9.0 + 16.0) / 2.0));
  CHECK(ae.score(vec({0, 0})) == 0.0);

  Autoencoder blank;
  CHECK_THROWS_AS(blank.score(vec({1, 2})), std::runtime_error);
}

TEST_CASE("autoencoder analytic gradients match central differences") {
  AeConfig cfg;
  cfg.h1 = 8;
  cfg.h2 = 5;
  cfg.latent = 3;
  cfg.seed = 11;
  Autoencoder ae(cfg);
  ae.init_params(6);

  const Eigen::MatrixXd rows = random_rows(7, 6, 21);
  const auto [loss, grad] = ae.loss_and_grad(rows);
  CHECK(std::isfinite(loss));

  const Eigen::VectorXd theta = ae.flatten_params();
  REQUIRE(grad.size() == theta.size());
  const double h = 1e-5;
  double worst = 0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd up = theta, dn = theta;
    up(k) += h;
    dn(k) -= h;
    ae.set_params(up);
    const double lu = ae.loss_and_grad(rows).first;
    ae.set_params(dn);
    const double ld = ae.loss_and_grad(rows).first;
    ae.set_params(theta);
    const double numeric = (lu - ld) / (2 * h);
    const double rel = std::abs(grad(k) - numeric) /
                       std::max(std::abs(grad(k)) + std::abs(numeric), 1e-8);
    worst = std::max(worst, rel);
  }
  CHECK(worst <= 1e-4);
  MESSAGE("worst autoencoder gradient relative error: " << worst);
}

TEST_CASE("autoencoder separates its training cluster from outliers") {
  Rng rng(5);
  Eigen::MatrixXd rows(80, 5);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) {
      rows(i, j) = static_cast<double>(j + 1) + rng.uniform(-0.05, 0.05);
    }
  }
  AeConfig cfg;
  cfg.h1 = 16;
  cfg.h2 = 8;
  cfg.latent = 4;
  cfg.epochs = 30;
  cfg.batch = 16;
  cfg.lr = 5e-3;
  cfg.seed = 3;
  Autoencoder ae(cfg);
  ae.fit(rows);

  const double in_score = ae.score(rows.row(4));
  const double out_score = ae.score(vec({10, 10, 10, 10, 10}));
  MESSAGE("in-cluster " << in_score << " vs outlier " << out_score);
  CHECK(out_score > 5.0 * in_score);

  CHECK_THROWS_AS(ae.fit(Eigen::MatrixXd(1, 5)), std::runtime_error);
}

TEST_CASE("feature clustering groups exact copies and respects the cap") {
  Rng rng(17);
  Eigen::MatrixXd rows(200, 4);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double u = rng.uniform(0.0, 1.0);
    const double v = rng.uniform(0.0, 1.0);
    rows(i, 0) = u;
    rows(i, 1) = u;  // exact copy of 0
    rows(i, 2) = v;
    rows(i, 3) = v;  // exact copy of 2
  }
  const auto map = build_feature_map(rows, 2);
  REQUIRE(map.size() == 2);
  CHECK(map[0] == std::vector<std::size_t>{0, 1});
  CHECK(map[1] == std::vector<std::size_t>{2, 3});

  // everything fits under the cap: one cluster holding all features
  const auto whole = build_feature_map(rows, 10);
  REQUIRE(whole.size() == 1);
  CHECK(whole[0] == std::vector<std::size_t>{0, 1, 2, 3});

  CHECK_THROWS_AS(build_feature_map(Eigen::MatrixXd(1, 4), 2),
                  std::runtime_error);
  CHECK_THROWS_AS(build_feature_map(rows, 0), std::runtime_error);
}

TEST_CASE("a cap of one splits every feature into its own cluster") {
  const Eigen::MatrixXd rows = random_rows(100, 10, 23);
  const auto map = build_feature_map(rows, 1);
  REQUIRE(map.size() == 10);
  for (std::size_t j = 0; j < 10; ++j) {
    CHECK(map[j] == std::vector<std::size_t>{j});
  }
}

TEST_CASE("correlated blocks stay together and the result partitions") {
  Rng rng(29);
  const std::size_t kBlocks = 5, kPer = 5;
  Eigen::MatrixXd rows(300, kBlocks * kPer);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (std::size_t b = 0; b < kBlocks; ++b) {
      const double latent = rng.uniform(0.0, 1.0);
      for (std::size_t k = 0; k < kPer; ++k) {
        rows(i, static_cast<Eigen::Index>(b * kPer + k)) =
            latent + 0.01 * rng.uniform(-1.0, 1.0);
      }
    }
  }
  const auto map = build_feature_map(rows, 10);

  std::set<std::size_t> seen;
  for (const auto& cluster : map) {
    CHECK(cluster.size() <= 10);
    CHECK(!cluster.empty());
    for (std::size_t j : cluster) CHECK(seen.insert(j).second);
  }
  CHECK(seen.size() == kBlocks * kPer);

  // members of one block always land in the same cluster
  for (std::size_t b = 0; b < kBlocks; ++b) {
    std::size_t home = map.size();
    for (std::size_t c = 0; c < map.size(); ++c) {
      if (std::count(map[c].begin(), map[c].end(), b * kPer)) home = c;
    }
    REQUIRE(home < map.size());
    for (std::size_t k = 1; k < kPer; ++k) {
      CHECK(std::count(map[home].begin(), map[home].end(), b * kPer + k) ==
            1);
    }
  }
}

TEST_CASE("constant features are fenced off into their own clusters") {
  Rng rng(31);
  Eigen::MatrixXd rows(120, 5);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) rows(i, j) = rng.uniform(0.0, 1.0);
    rows(i, 4) = 7.0;
  }
  const auto map = build_feature_map(rows, 2);
  bool found_constant = false;
  std::set<std::size_t> seen;
  for (const auto& cluster : map) {
    CHECK(cluster.size() <= 2);
    for (std::size_t j : cluster) CHECK(seen.insert(j).second);
    if (cluster == std::vector<std::size_t>{4}) found_constant = true;
  }
  CHECK(found_constant);
  CHECK(seen.size() == 5);
}

TEST_CASE("single-cluster ensemble degenerates to one plain autoencoder") {
  const Eigen::MatrixXd rows = random_rows(30, 4, 37);

  KitnetConfig cfg;
  cfg.max_cluster = 10;  // all four features fit in one cluster
  cfg.epochs = 2;
  cfg.lr = 0.1;
  cfg.seed = 42;
  Kitnet net(cfg);
  net.fit(rows);
  REQUIRE(net.feature_map().size() == 1);
  REQUIRE(net.feature_map()[0] == std::vector<std::size_t>({0, 1, 2, 3}));

  // replicate by hand: same scaler, same member seed, same stream order
  MinMaxScaler scaler;
  scaler.fit(rows);
  const Eigen::MatrixXd scaled = scaler.transform(rows);
  SigmoidAutoencoder lone;
  const auto hidden = static_cast<std::size_t>(
      std::max(1.0, std::ceil(cfg.hidden_ratio * 4.0)));
  lone.init(4, hidden, derive_seed(cfg.seed, "member", 0));
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (Eigen::Index r = 0; r < scaled.rows(); ++r) {
      lone.train_step(scaled.row(r), cfg.lr);
    }
  }

  Rng rng(51);
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd q(4);
    for (Eigen::Index j = 0; j < 4; ++j) q(j) = rng.uniform(-0.5, 1.5);
    CHECK(net.score(q) == lone.score(scaler.transform(q)));
  }

  CHECK_THROWS_AS(net.score(vec({1, 2, 3})), std::runtime_error);
  Kitnet untrained(cfg);
  CHECK_THROWS_AS(untrained.score(vec({1, 2, 3, 4})), std::runtime_error);

  KitnetConfig bad = cfg;
  bad.hidden_ratio = 0.0;
  CHECK_THROWS_AS(Kitnet{bad}, std::runtime_error);
  bad.hidden_ratio = 0.75;
  bad.epochs = 0;
  CHECK_THROWS_AS(Kitnet{bad}, std::runtime_error);
}

TEST_CASE("ensemble scores flag timing shifts the members never saw") {
  // benign-looking rows: two moderately correlated groups
  Rng rng(61);
  Eigen::MatrixXd benign(400, 6);
  for (Eigen::Index i = 0; i < benign.rows(); ++i) {
    const double a = rng.uniform(0.2, 0.8);
    const double b = rng.uniform(0.2, 0.8);
    benign(i, 0) = a;
    benign(i, 1) = a + 0.05 * rng.uniform(-1.0, 1.0);
    benign(i, 2) = a + 0.05 * rng.uniform(-1.0, 1.0);
    benign(i, 3) = b;
    benign(i, 4) = b + 0.05 * rng.uniform(-1.0, 1.0);
    benign(i, 5) = b + 0.05 * rng.uniform(-1.0, 1.0);
  }
  KitnetConfig cfg;
  cfg.max_cluster = 3;
  cfg.epochs = 2;
  cfg.seed = 7;
  Kitnet net(cfg);
  net.fit(benign);
  REQUIRE(net.feature_map().size() >= 2);

  double benign_mean = 0;
  for (Eigen::Index i = 0; i < 50; ++i) {
    benign_mean += net.score(benign.row(i));
  }
  benign_mean /= 50;

  double hostile_mean = 0;
  for (int i = 0; i < 50; ++i) {
    // break the learned correlation structure
    Eigen::VectorXd q(6);
    for (Eigen::Index j = 0; j < 6; ++j)
      q(j) = (j % 2 == 0) ? 3.0 : -2.0;
    hostile_mean += net.score(q);
  }
  hostile_mean /= 50;
  MESSAGE("benign " << benign_mean << " vs hostile " << hostile_mean);
  CHECK(hostile_mean > 2.0 * benign_mean);
}

TEST_CASE("path-length constants come from exact harmonic sums") {
  CHECK(average_path_length(0) == 0.0);
  CHECK(average_path_length(1) == 0.0);
  CHECK(average_path_length(2) == 1.0);
  for (std::size_t m : {3UL, 10UL, 100UL, 4096UL}) {
    CHECK(std::abs(average_path_length(m) - apl_oracle(m)) <= 1e-12);
  }
  CHECK(std::abs(average_path_length(3) - 5.0 / 3.0) <= 1e-15);

  CHECK(iforest_score_from_mean_path(0.0, 256) == 1.0);
  CHECK(iforest_score_from_mean_path(average_path_length(256), 256) == 0.5);
  CHECK_THROWS_AS(iforest_score_from_mean_path(1.0, 1),
                  std::runtime_error);

  double prev = 2.0;
  for (double e = 0.0; e <= 20.0; e += 0.25) {
    const double s = iforest_score_from_mean_path(e, 64);
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("forest scores match a brute-force walk of the stored trees") {
  Eigen::MatrixXd rows(8, 1);
  rows << 0.1, 0.35, 0.4, 0.42, 0.5, 0.61, 0.8, 3.0;
  IForestConfig cfg;
  cfg.n_trees = 10;
  cfg.sample_size = 8;
  cfg.seed = 1234;
  IsolationForest forest(cfg);
  forest.fit(rows);
  REQUIRE(forest.trees().size() == 10);
  CHECK(forest.sample_size_used() == 8);
  CHECK(!forest.sample_size_clamped());
  for (const auto& tree : forest.trees()) {
    REQUIRE(tree != nullptr);
    CHECK(tree->size == 8);
    check_tree_shape(*tree);
  }

  for (double q : {0.0, 0.1, 0.3, 0.41, 0.415, 0.55, 0.75, 1.2, 3.0, 50.0}) {
    const Eigen::VectorXd x = vec({q});
    double total = 0;
    for (const auto& tree : forest.trees()) {
      const double mine = walk_tree(*tree, x, 0);
      CHECK(std::abs(forest.path_length(*tree, x) - mine) <= 1e-12);
      total += mine;
    }
    const double expected =
        std::exp2(-(total / 10.0) / apl_oracle(8));
    CHECK(std::abs(forest.score(x) - expected) <= 1e-12);
  }

  // the inlier crowd scores lower than the lone far point
  CHECK(forest.score(vec({3.0})) > forest.score(vec({0.42})));
}

TEST_CASE("oversized sample requests clamp to the training size") {
  const Eigen::MatrixXd rows = random_rows(50, 3, 77);
  IForestConfig cfg;
  cfg.n_trees = 5;
  cfg.sample_size = 256;
  IsolationForest forest(cfg);
  forest.fit(rows);
  CHECK(forest.sample_size_used() == 50);
  CHECK(forest.sample_size_clamped());

  IForestConfig bad;
  bad.n_trees = 0;
  CHECK_THROWS_AS(IsolationForest{bad}, std::runtime_error);
  bad.n_trees = 1;
  bad.sample_size = 1;
  CHECK_THROWS_AS(IsolationForest{bad}, std::runtime_error);

  IsolationForest untrained;
  CHECK_THROWS_AS(untrained.score(vec({1, 2, 3})), std::runtime_error);
  CHECK_THROWS_AS(IsolationForest{}.fit(Eigen::MatrixXd(1, 2)),
                  std::runtime_error);
}

TEST_CASE("every detector kind round-trips through its file format") {
  const Eigen::MatrixXd rows = random_rows(60, 6, 99);
  const Eigen::MatrixXd probes = random_rows(15, 6, 100);
  const auto dir = scratch_dir();

  auto check_roundtrip = [&](AnomalyModel& model, const char* kind) {
    CAPTURE(kind);
    model.fit(rows);
    const auto path = (dir / (std::string(kind) + ".model")).string();
    save_model(model, path);
    const auto loaded = load_model(path);
    CHECK(loaded->kind() == model.kind());
    const auto a = model.score_rows(probes);
    const auto b = loaded->score_rows(probes);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  };

  AeConfig ae_cfg;
  ae_cfg.h1 = 8;
  ae_cfg.h2 = 5;
  ae_cfg.latent = 3;
  ae_cfg.epochs = 3;
  Autoencoder ae(ae_cfg);
  check_roundtrip(ae, "ae");

  KitnetConfig kn_cfg;
  kn_cfg.max_cluster = 3;
  Kitnet kn(kn_cfg);
  check_roundtrip(kn, "kitnet");

  IForestConfig if_cfg;
  if_cfg.n_trees = 12;
  if_cfg.sample_size = 32;
  IsolationForest forest(if_cfg);
  check_roundtrip(forest, "iforest");

  // a file of some other kind is rejected by the detector loader
  CHECK_THROWS_AS(load_model(fixture("tiny_reshaper.model")),
                  std::runtime_error);
  CHECK_THROWS_AS(load_model("/nonexistent/detector.model"),
                  std::runtime_error);
}

TEST_CASE("the factory recognizes exactly the shipped detector kinds") {
  CHECK(make_model("ae", 1)->kind() == "autoencoder");
  CHECK(make_model("autoencoder", 1)->kind() == "autoencoder");
  CHECK(make_model("kitnet", 1)->kind() == "kitnet");
  CHECK(make_model("iforest", 1)->kind() == "iforest");
  CHECK_THROWS_AS(make_model("svm", 1), std::runtime_error);
}

TEST_CASE("scoring a model through the generic interface uses detect()") {
  Autoencoder ae;
  ae.init_params(2);
  ae.set_params(Eigen::VectorXd::Zero(ae.flatten_params().size()));
  Eigen::MatrixXd rows(3, 2);
  rows << 0, 0,   // score 0
          3, 4,   // score sqrt(12.5)
          6, 8;   // score sqrt(50)
  const std::vector<Label> labels = {Label::benign, Label::benign,
                                     Label::malicious};
  const DetectionReport r = detect(ae, rows, labels, 4.0);
  CHECK(r.true_positives == 1);   // sqrt(50) ~ 7.07 > 4
  CHECK(r.false_positives == 0);  // sqrt(12.5) ~ 3.54 < 4
  CHECK(r.true_negatives == 2);
  CHECK(r.false_negatives == 0);
}
