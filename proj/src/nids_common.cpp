#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "cadence/nids.hpp"
#include "cadence/serialize.hpp"

namespace cadence {

double rmse(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) {
    throw std::runtime_error("rmse: length mismatch (" +
                             std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()) + ")");
  }
  if (x.size() == 0) throw std::runtime_error("rmse: empty vectors");
  return std::sqrt((x - y).squaredNorm() / static_cast<double>(x.size()));
}

void MinMaxScaler::fit(const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0) throw std::runtime_error("scaler: no training rows");
  min = rows.colwise().minCoeff();
  Eigen::VectorXd max = rows.colwise().maxCoeff();
  range = max - min;
  for (Eigen::Index i = 0; i < range.size(); ++i) {
    if (range(i) < 0) range(i) = 0;  // guards NaN-free data only
  }
}

Eigen::VectorXd MinMaxScaler::transform(const Eigen::VectorXd& row) const {
  if (row.size() != min.size()) {
    throw std::runtime_error("scaler: width mismatch");
  }
  Eigen::VectorXd out(row.size());
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    out(i) = range(i) > 0 ? (row(i) - min(i)) / range(i) : 0.0;
  }
  return out;
}

Eigen::MatrixXd MinMaxScaler::transform(const Eigen::MatrixXd& rows) const {
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    out.row(r) = transform(Eigen::VectorXd(rows.row(r))).transpose();
  }
  return out;
}

ThresholdSpec ThresholdSpec::parse(const std::string& method, double phi) {
  ThresholdSpec spec;
  spec.phi = phi;
  if (method == "max") {
    spec.rule = ThresholdRule::max_benign;
  } else if (method.rfind("pctl:", 0) == 0) {
    spec.rule = ThresholdRule::percentile;
    spec.percentile = std::stod(method.substr(5));
  } else {
    throw std::runtime_error("unknown threshold method '" + method +
                             "' (expected max or pctl:p)");
  }
  return spec;
}

double calibrate_threshold(std::vector<double> scores,
                           const ThresholdSpec& spec) {
  if (scores.empty()) {
    throw std::runtime_error("cannot calibrate a threshold on zero scores");
  }
  double base = 0;
  if (spec.rule == ThresholdRule::max_benign) {
    base = *std::max_element(scores.begin(), scores.end());
  } else {
    const double p = spec.percentile;
    if (!(p > 0) || p > 100) {
      throw std::runtime_error("percentile must be in (0, 100]");
    }
    // Nearest-rank: the ceil(p/100 * n)-th smallest value.
    const auto n = scores.size();
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(p / 100.0 * static_cast<double>(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    std::nth_element(scores.begin(), scores.begin() + (rank - 1),
                     scores.end());
    base = scores[rank - 1];
  }
  return spec.phi * base;
}

std::optional<double> DetectionReport::detection_rate() const {
  const std::size_t malicious = true_positives + false_negatives;
  if (malicious == 0) return std::nullopt;
  return 100.0 * static_cast<double>(true_positives) /
         static_cast<double>(malicious);
}

std::optional<double> DetectionReport::false_positive_rate() const {
  const std::size_t benign = false_positives + true_negatives;
  if (benign == 0) return std::nullopt;
  return 100.0 * static_cast<double>(false_positives) /
         static_cast<double>(benign);
}

std::vector<double> AnomalyModel::score_rows(
    const Eigen::MatrixXd& rows) const {
  std::vector<double> scores(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    scores[static_cast<std::size_t>(r)] = score(rows.row(r));
  }
  return scores;
}

DetectionReport detect(const std::vector<double>& scores,
                       const std::vector<Label>& labels, double threshold) {
  if (scores.size() != labels.size()) {
    throw std::runtime_error("detect: scores and labels differ in length");
  }
  DetectionReport report;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool alarm = scores[i] > threshold;
    if (labels[i] == Label::malicious) {
      (alarm ? report.true_positives : report.false_negatives) += 1;
    } else if (labels[i] == Label::benign) {
      (alarm ? report.false_positives : report.true_negatives) += 1;
    }
    // unlabeled packets contribute to neither rate
  }
  return report;
}

DetectionReport detect(const AnomalyModel& model, const Eigen::MatrixXd& rows,
                       const std::vector<Label>& labels, double threshold) {
  return detect(model.score_rows(rows), labels, threshold);
}

std::unique_ptr<AnomalyModel> make_model(const std::string& kind,
                                         std::uint64_t seed) {
  if (kind == "ae" || kind == "autoencoder") {
    AeConfig cfg;
    cfg.seed = seed;
    return std::make_unique<Autoencoder>(cfg);
  }
  if (kind == "kitnet") {
    KitnetConfig cfg;
    cfg.seed = seed;
    return std::make_unique<Kitnet>(cfg);
  }
  if (kind == "iforest") {
    IForestConfig cfg;
    cfg.seed = seed;
    return std::make_unique<IsolationForest>(cfg);
  }
  throw std::runtime_error("unknown detector kind '" + kind +
                           "' (expected ae, kitnet, or iforest)");
}

std::unique_ptr<AnomalyModel> load_model(std::istream& is) {
  const std::string kind = ser::read_header(is);
  if (kind == "autoencoder") {
    return std::make_unique<Autoencoder>(Autoencoder::load_body(is));
  }
  if (kind == "kitnet") {
    return std::make_unique<Kitnet>(Kitnet::load_body(is));
  }
  if (kind == "iforest") {
    return std::make_unique<IsolationForest>(IsolationForest::load_body(is));
  }
  throw std::runtime_error("model file holds unsupported kind '" + kind + "'");
}

std::unique_ptr<AnomalyModel> load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open model file: " + path);
  return load_model(is);
}

void save_model(const AnomalyModel& model, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write model file: " + path);
  model.save(os);
  if (!os.good()) throw std::runtime_error("short write: " + path);
}

}  // namespace cadence
