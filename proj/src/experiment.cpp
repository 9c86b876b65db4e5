#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "cadence/experiment.hpp"
#include "cadence/features.hpp"
#include "cadence/reshaper.hpp"
#include "cadence/rng.hpp"

namespace fs = std::filesystem;

namespace cadence {

TrafficTrace TraceSource::realize() const {
  if (!path.empty()) return read_canonical(path);
  return generate(profile);
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::istringstream ss(text);
  std::vector<std::string> out;
  std::string token;
  while (ss >> token) out.push_back(token);
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text,
                                         const std::string& key) {
  std::vector<std::size_t> out;
  for (const std::string& token : split_list(text)) {
    const long v = std::stol(token);
    if (v <= 0) throw std::runtime_error(key + " entries must be positive");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw std::runtime_error(key + " must not be empty");
  return out;
}

void require_exists(const std::string& path, const std::string& key) {
  if (!fs::exists(path)) {
    throw std::runtime_error(key + " references a missing file: " + path);
  }
}

TraceSource read_source(const KvConfig& cfg, const std::string& prefix,
                        const std::string& name) {
  TraceSource src;
  src.name = name;
  if (cfg.has(prefix + "path")) {
    src.path = cfg.get(prefix + "path");
    require_exists(src.path, prefix + "path");
  } else {
    src.profile = TrafficProfile::from_config(cfg, prefix);
  }
  return src;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_config(const KvConfig& cfg) {
  ExperimentConfig ec;
  ec.seed = cfg.get_u64_or("seed", 1);
  ec.out_dir = cfg.get_or("out", "run-out");

  ec.benign = read_source(cfg, "benign.", "benign");
  ec.nids_n = static_cast<std::size_t>(cfg.get_int_or("split.nids_n", 0));
  ec.reshaper_n =
      static_cast<std::size_t>(cfg.get_int_or("split.reshaper_n", 0));
  ec.nids_fraction = cfg.get_double_or("split.nids_fraction", 0.5);
  ec.fit_fraction = cfg.get_double_or("split.fit_fraction", 0.7);
  if (ec.nids_fraction <= 0 || ec.nids_fraction >= 1) {
    throw std::runtime_error("split.nids_fraction must be in (0, 1)");
  }
  if (ec.fit_fraction <= 0 || ec.fit_fraction >= 1) {
    throw std::runtime_error("split.fit_fraction must be in (0, 1)");
  }

  for (const std::string& name : cfg.group_names("attack")) {
    ec.attacks.push_back(read_source(cfg, "attack." + name + ".", name));
  }
  if (ec.attacks.empty()) {
    throw std::runtime_error("config declares no attack.* sources");
  }

  ec.window =
      static_cast<std::size_t>(cfg.get_int_or("reshaper.window", 50));
  if (cfg.has("reshaper.windows")) {
    ec.windows = parse_size_list(cfg.get("reshaper.windows"),
                                 "reshaper.windows");
  }
  ec.reshaper_hidden =
      static_cast<std::size_t>(cfg.get_int_or("reshaper.hidden", 32));
  ec.reshaper_epochs =
      static_cast<std::size_t>(cfg.get_int_or("reshaper.epochs", 5));
  ec.reshaper_batch =
      static_cast<std::size_t>(cfg.get_int_or("reshaper.batch", 32));
  ec.reshaper_lr = cfg.get_double_or("reshaper.lr", 1e-3);

  if (cfg.has("nids.kinds")) {
    ec.nids_kinds = split_list(cfg.get("nids.kinds"));
    if (ec.nids_kinds.empty()) {
      throw std::runtime_error("nids.kinds must not be empty");
    }
  }
  ec.threshold = ThresholdSpec::parse(
      cfg.get_or("nids.threshold", "pctl:99.5"),
      cfg.get_double_or("nids.phi", 1.0));
  ec.ae_epochs = static_cast<std::size_t>(cfg.get_int_or("nids.ae.epochs", 40));
  ec.ae_batch = static_cast<std::size_t>(cfg.get_int_or("nids.ae.batch", 32));
  ec.ae_lr = cfg.get_double_or("nids.ae.lr", 1e-3);
  ec.kitnet_max_cluster = static_cast<std::size_t>(
      cfg.get_int_or("nids.kitnet.max_cluster", 10));
  ec.kitnet_epochs =
      static_cast<std::size_t>(cfg.get_int_or("nids.kitnet.epochs", 1));
  ec.kitnet_lr = cfg.get_double_or("nids.kitnet.lr", 0.1);
  ec.iforest_trees =
      static_cast<std::size_t>(cfg.get_int_or("nids.iforest.trees", 100));
  ec.iforest_sample =
      static_cast<std::size_t>(cfg.get_int_or("nids.iforest.sample", 256));

  ec.net = NetworkModel::from_config(cfg, "net.");
  if (cfg.has("live.attacks")) {
    ec.live_attacks = split_list(cfg.get("live.attacks"));
  }
  return ec;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  return from_config(KvConfig::parse_file(path));
}

namespace {

std::string canonical_kind(const std::string& kind) {
  if (kind == "ae") return "autoencoder";
  return kind;
}

// Contiguous [begin, begin+count) cut of a trace, rebased to timestamp 0
// and renumbered from seq 0.
TrafficTrace cut_slice(const TrafficTrace& trace, std::size_t begin,
                       std::size_t count, SplitRole role) {
  TrafficTrace out;
  out.origin = trace.origin;
  out.split_role = role;
  out.records.reserve(count);
  const double t0 = trace.records[begin].timestamp;
  for (std::size_t i = 0; i < count; ++i) {
    PacketRecord rec = trace.records[begin + i];
    rec.seq_index = i;
    rec.timestamp = quantize_timestamp(rec.timestamp - t0);
    out.records.push_back(rec);
  }
  return out;
}

std::string fmt_rate(const std::optional<double>& rate) {
  if (!rate) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *rate);
  return buf;
}

std::string fmt_loss(const std::optional<double>& loss) {
  if (!loss) return "undefined";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", *loss);
  return buf;
}

std::optional<double> column_mean(const std::vector<std::optional<double>>& v) {
  double total = 0;
  std::size_t count = 0;
  for (const auto& x : v) {
    if (x) {
      total += *x;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

// Lazily trained, cached pipeline pieces shared by the baseline, sweep and
// live evaluations. A failed stage caches its reason so every dependent
// cell reports it without retrying.
class Runner {
 public:
  explicit Runner(const ExperimentConfig& cfg) : cfg_(cfg) {
    for (const char* sub : {"", "models", "scores", "traces", "events"}) {
      fs::create_directories(fs::path(cfg_.out_dir) / sub);
    }
    prepare_benign();
  }

  BaselineTable baseline();
  SweepTable sweep();
  std::vector<LiveCell> live();

 private:
  struct DetectorSlot {
    std::string kind;  // canonical name used in rows and file names
    std::unique_ptr<AnomalyModel> model;
    double threshold = 0.0;
    std::optional<double> fpr;
    std::string error;
  };
  struct AttackSlot {
    std::string name;
    TrafficTrace trace;
    Eigen::MatrixXd rows;
    std::vector<Label> labels;
    std::string error;
  };
  struct ReshaperSlot {
    std::optional<ReshaperModel> model;
    std::string error;
  };
  struct ReshapedSlot {
    Eigen::MatrixXd rows;
    std::vector<Label> labels;
    std::string error;
  };

  std::string out(const std::string& rel) const {
    return (fs::path(cfg_.out_dir) / rel).string();
  }

  void prepare_benign();
  const DetectorSlot& detector(std::size_t i);
  const AttackSlot& attack(std::size_t i);
  const ReshaperSlot& reshaper(std::size_t window);
  const ReshapedSlot& reshaped(std::size_t attack_idx, std::size_t window);
  const std::vector<double>* before_scores(std::size_t det, std::size_t atk,
                                           std::string* error);

  ExperimentConfig cfg_;
  TrafficTrace benign_full_, benign_detector_, benign_reshaper_;
  Eigen::MatrixXd fit_rows_, calib_rows_, eval_rows_;
  std::map<std::size_t, DetectorSlot> detectors_;
  std::map<std::size_t, AttackSlot> attacks_;
  std::map<std::size_t, ReshaperSlot> reshapers_;
  std::map<std::pair<std::size_t, std::size_t>, ReshapedSlot> reshaped_;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>>
      before_scores_;
};

void Runner::prepare_benign() {
  benign_full_ = cfg_.benign.realize();
  const auto n = benign_full_.size();
  const std::size_t n_det =
      cfg_.nids_n != 0
          ? cfg_.nids_n
          : static_cast<std::size_t>(std::llround(n * cfg_.nids_fraction));
  if (n_det == 0 || n_det >= n) {
    throw std::runtime_error("benign split leaves an empty slice");
  }
  const std::size_t n_resh = cfg_.reshaper_n != 0 ? cfg_.reshaper_n : n - n_det;
  if (n_resh == 0 || n_det + n_resh > n) {
    throw std::runtime_error("benign split exceeds the stream");
  }
  for (const PacketRecord& rec : benign_full_.records) {
    if (rec.label != Label::benign) {
      throw std::runtime_error("benign source contains non-benign records");
    }
  }
  // One stream laid out [ambient history][reshaper-train][detector-train]:
  // the reshaper only needs deltas, the detectors train on the trailing
  // segment where the extractor's channel statistics are fully warm.
  benign_reshaper_ = cut_slice(benign_full_, n - n_det - n_resh, n_resh,
                               SplitRole::reshaper_train_benign);
  benign_detector_ =
      cut_slice(benign_full_, n - n_det, n_det, SplitRole::nids_train_benign);
  write_canonical(benign_detector_, out("traces/benign_detector.trace"));
  write_canonical(benign_reshaper_, out("traces/benign_reshaper.trace"));

  // Detector rows come from one featurization of the whole stream, i.e.
  // with channel statistics warmed by everything before them; attack rows
  // are later produced the same way via featurize_continuation.
  const Eigen::MatrixXd rows =
      featurize_trace(benign_full_)
          .bottomRows(static_cast<Eigen::Index>(n_det));

  // Deal rows to fit / calibration / FPR-evaluation in repeating cycles of
  // kCycle so all three slices sample the whole training regime, including
  // any slow drift across it.
  constexpr std::size_t kCycle = 20;
  const auto fit_per_cycle = static_cast<std::size_t>(std::clamp<long long>(
      std::llround(cfg_.fit_fraction * kCycle), 1, kCycle - 2));
  std::vector<Eigen::Index> fit_idx, calib_idx, eval_idx;
  for (std::size_t i = 0; i < n_det; ++i) {
    const std::size_t slot = i % kCycle;
    if (slot < fit_per_cycle) {
      fit_idx.push_back(static_cast<Eigen::Index>(i));
    } else if ((slot - fit_per_cycle) % 2 == 0) {
      calib_idx.push_back(static_cast<Eigen::Index>(i));
    } else {
      eval_idx.push_back(static_cast<Eigen::Index>(i));
    }
  }
  if (calib_idx.empty() || eval_idx.empty()) {
    throw std::runtime_error("benign feature split leaves an empty slice");
  }
  const auto gather = [&rows](const std::vector<Eigen::Index>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), rows.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = rows.row(idx[i]);
    }
    return out;
  };
  fit_rows_ = gather(fit_idx);
  calib_rows_ = gather(calib_idx);
  eval_rows_ = gather(eval_idx);
}

const Runner::DetectorSlot& Runner::detector(std::size_t i) {
  auto it = detectors_.find(i);
  if (it != detectors_.end()) return it->second;
  DetectorSlot& slot = detectors_[i];
  slot.kind = canonical_kind(cfg_.nids_kinds[i]);
  try {
    const std::uint64_t seed = derive_seed(cfg_.seed, "nids", i);
    const std::string& kind = cfg_.nids_kinds[i];
    if (kind == "ae" || kind == "autoencoder") {
      AeConfig ac;
      ac.epochs = cfg_.ae_epochs;
      ac.batch = cfg_.ae_batch;
      ac.lr = cfg_.ae_lr;
      ac.seed = seed;
      slot.model = std::make_unique<Autoencoder>(ac);
    } else if (kind == "kitnet") {
      KitnetConfig kc;
      kc.max_cluster = cfg_.kitnet_max_cluster;
      kc.epochs = cfg_.kitnet_epochs;
      kc.lr = cfg_.kitnet_lr;
      kc.seed = seed;
      slot.model = std::make_unique<Kitnet>(kc);
    } else if (kind == "iforest") {
      IForestConfig fc;
      fc.n_trees = cfg_.iforest_trees;
      fc.sample_size = cfg_.iforest_sample;
      fc.seed = seed;
      slot.model = std::make_unique<IsolationForest>(fc);
    } else {
      throw std::runtime_error("unknown nids kind '" + kind + "'");
    }
    slot.model->fit(fit_rows_);
    slot.threshold = calibrate_threshold(slot.model->score_rows(calib_rows_),
                                         cfg_.threshold);
    const std::vector<Label> benign_labels(
        static_cast<std::size_t>(eval_rows_.rows()), Label::benign);
    slot.fpr = detect(*slot.model, eval_rows_, benign_labels, slot.threshold)
                   .false_positive_rate();
    save_model(*slot.model, out("models/" + slot.kind + ".model"));
  } catch (const std::exception& e) {
    slot.model.reset();
    slot.error = e.what();
  }
  return slot;
}

const Runner::AttackSlot& Runner::attack(std::size_t i) {
  auto it = attacks_.find(i);
  if (it != attacks_.end()) return it->second;
  AttackSlot& slot = attacks_[i];
  slot.name = cfg_.attacks[i].name;
  try {
    slot.trace = cfg_.attacks[i].realize();
    // Scored as a continuation of the benign stream: the detector watched
    // the benign capture live and the attack arrives right after it.
    slot.rows = featurize_continuation(benign_full_, slot.trace);
    slot.labels.reserve(slot.trace.size());
    for (const PacketRecord& rec : slot.trace.records) {
      slot.labels.push_back(rec.label);
    }
    write_canonical(slot.trace, out("traces/" + slot.name + ".trace"));
  } catch (const std::exception& e) {
    slot.error = e.what();
  }
  return slot;
}

const Runner::ReshaperSlot& Runner::reshaper(std::size_t window) {
  auto it = reshapers_.find(window);
  if (it != reshapers_.end()) return it->second;
  ReshaperSlot& slot = reshapers_[window];
  try {
    ReshaperConfig rc;
    rc.window = window;
    rc.hidden = cfg_.reshaper_hidden;
    rc.epochs = cfg_.reshaper_epochs;
    rc.batch = cfg_.reshaper_batch;
    rc.lr = cfg_.reshaper_lr;
    rc.seed = derive_seed(cfg_.seed, "reshaper", window);
    ReshaperModel model(rc);
    model.fit(benign_reshaper_);
    const std::string stem = "models/reshaper_w" + std::to_string(window);
    model.save_file(out(stem + ".model"));
    std::ofstream loss(out(stem + "_loss.csv"));
    loss << "epoch,loss\n";
    for (std::size_t e = 0; e < model.loss_curve().size(); ++e) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", e,
                    model.loss_curve()[e]);
      loss << buf;
    }
    slot.model = std::move(model);
  } catch (const std::exception& e) {
    slot.error = e.what();
  }
  return slot;
}

const Runner::ReshapedSlot& Runner::reshaped(std::size_t attack_idx,
                                             std::size_t window) {
  const auto key = std::make_pair(attack_idx, window);
  auto it = reshaped_.find(key);
  if (it != reshaped_.end()) return it->second;
  ReshapedSlot& slot = reshaped_[key];
  const AttackSlot& atk = attack(attack_idx);
  if (!atk.error.empty()) {
    slot.error = "attack: " + atk.error;
    return slot;
  }
  const ReshaperSlot& rs = reshaper(window);
  if (!rs.error.empty()) {
    slot.error = "reshaper: " + rs.error;
    return slot;
  }
  try {
    const TrafficTrace reshaped_trace = rs.model->reshape_offline(atk.trace);
    slot.rows = featurize_continuation(benign_full_, reshaped_trace);
    slot.labels = atk.labels;
    write_canonical(reshaped_trace,
                    out("traces/" + atk.name + "_reshaped_w" +
                        std::to_string(window) + ".trace"));
  } catch (const std::exception& e) {
    slot.error = e.what();
  }
  return slot;
}

const std::vector<double>* Runner::before_scores(std::size_t det,
                                                 std::size_t atk,
                                                 std::string* error) {
  const auto key = std::make_pair(det, atk);
  auto it = before_scores_.find(key);
  if (it != before_scores_.end()) return &it->second;
  const DetectorSlot& d = detector(det);
  if (!d.error.empty()) {
    *error = "detector: " + d.error;
    return nullptr;
  }
  const AttackSlot& a = attack(atk);
  if (!a.error.empty()) {
    *error = "attack: " + a.error;
    return nullptr;
  }
  return &(before_scores_[key] = d.model->score_rows(a.rows));
}

BaselineTable Runner::baseline() {
  BaselineTable table;
  for (std::size_t di = 0; di < cfg_.nids_kinds.size(); ++di) {
    for (std::size_t ai = 0; ai < cfg_.attacks.size(); ++ai) {
      BaselineCell cell;
      cell.nids = canonical_kind(cfg_.nids_kinds[di]);
      cell.attack = cfg_.attacks[ai].name;
      std::string error;
      const std::vector<double>* before = before_scores(di, ai, &error);
      if (before == nullptr) {
        cell.note = error;
        table.rows.push_back(std::move(cell));
        continue;
      }
      const DetectorSlot& d = detector(di);
      const AttackSlot& a = attack(ai);
      cell.threshold = d.threshold;
      cell.fpr = d.fpr;
      cell.dr_before =
          detect(*before, a.labels, d.threshold).detection_rate();

      const ReshapedSlot& r = reshaped(ai, cfg_.window);
      if (!r.error.empty()) {
        cell.note = r.error;
      } else {
        try {
          const std::vector<double> after = d.model->score_rows(r.rows);
          cell.dr_after =
              detect(after, r.labels, d.threshold).detection_rate();
          ScoreTrace st;
          st.threshold = d.threshold;
          for (std::size_t i = 0; i < a.trace.size(); ++i) {
            st.seq_index.push_back(a.trace.records[i].seq_index);
          }
          st.before = *before;
          st.after = after;
          emit_score_trace(
              st, out("scores/" + cell.nids + "_" + cell.attack + ".csv"));
        } catch (const std::exception& e) {
          cell.note = e.what();
        }
      }
      table.rows.push_back(std::move(cell));
    }
  }

  std::ofstream thr(out("thresholds.csv"));
  thr << "nids,threshold\n";
  for (std::size_t di = 0; di < cfg_.nids_kinds.size(); ++di) {
    const DetectorSlot& d = detector(di);
    if (d.error.empty()) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "%.17g", d.threshold);
      thr << d.kind << ',' << buf << '\n';
    } else {
      thr << d.kind << ",undefined\n";
    }
  }

  std::ofstream csv(out("table3.csv"));
  write_baseline_csv(table, csv);
  return table;
}

SweepTable Runner::sweep() {
  if (cfg_.windows.empty()) {
    throw std::runtime_error("window sweep needs at least 1 window size");
  }
  SweepTable table;
  table.windows = cfg_.windows;
  for (std::size_t w : cfg_.windows) {
    const ReshaperSlot& rs = reshaper(w);
    if (rs.error.empty() && !rs.model->loss_curve().empty()) {
      table.reshaper_loss.push_back(rs.model->loss_curve().back());
    } else {
      table.reshaper_loss.push_back(std::nullopt);
    }
  }
  for (std::size_t di = 0; di < cfg_.nids_kinds.size(); ++di) {
    for (std::size_t ai = 0; ai < cfg_.attacks.size(); ++ai) {
      SweepCell cell;
      cell.nids = canonical_kind(cfg_.nids_kinds[di]);
      cell.attack = cfg_.attacks[ai].name;
      cell.dr_after.resize(cfg_.windows.size());
      std::string error;
      const std::vector<double>* before = before_scores(di, ai, &error);
      if (before == nullptr) {
        cell.note = error;
        table.rows.push_back(std::move(cell));
        continue;
      }
      const DetectorSlot& d = detector(di);
      const AttackSlot& a = attack(ai);
      cell.dr_before =
          detect(*before, a.labels, d.threshold).detection_rate();
      for (std::size_t wi = 0; wi < cfg_.windows.size(); ++wi) {
        const ReshapedSlot& r = reshaped(ai, cfg_.windows[wi]);
        if (!r.error.empty()) {
          if (cell.note.empty()) cell.note = r.error;
          continue;
        }
        try {
          const std::vector<double> after = d.model->score_rows(r.rows);
          cell.dr_after[wi] =
              detect(after, r.labels, d.threshold).detection_rate();
          ScoreTrace st;
          st.threshold = d.threshold;
          for (std::size_t i = 0; i < a.trace.size(); ++i) {
            st.seq_index.push_back(a.trace.records[i].seq_index);
          }
          st.before = *before;
          st.after = after;
          emit_score_trace(st, out("scores/" + cell.nids + "_" + cell.attack +
                                   "_w" + std::to_string(cfg_.windows[wi]) +
                                   ".csv"));
        } catch (const std::exception& e) {
          if (cell.note.empty()) cell.note = e.what();
        }
      }
      table.rows.push_back(std::move(cell));
    }
  }
  std::ofstream csv(out("table4.csv"));
  write_sweep_csv(table, csv);
  return table;
}

std::vector<LiveCell> Runner::live() {
  std::vector<std::size_t> targets;
  if (cfg_.live_attacks.empty()) {
    for (std::size_t i = 0; i < cfg_.attacks.size(); ++i) {
      targets.push_back(i);
    }
  } else {
    for (const std::string& name : cfg_.live_attacks) {
      bool found = false;
      for (std::size_t i = 0; i < cfg_.attacks.size(); ++i) {
        if (cfg_.attacks[i].name == name) {
          targets.push_back(i);
          found = true;
          break;
        }
      }
      if (!found) {
        throw std::runtime_error("live.attacks names unknown attack '" +
                                 name + "'");
      }
    }
  }

  std::vector<LiveCell> cells;
  for (std::size_t di = 0; di < cfg_.nids_kinds.size(); ++di) {
    for (std::size_t ai : targets) {
      LiveCell cell;
      cell.nids = canonical_kind(cfg_.nids_kinds[di]);
      cell.attack = cfg_.attacks[ai].name;
      const DetectorSlot& d = detector(di);
      const AttackSlot& a = attack(ai);
      const ReshaperSlot& rs = reshaper(cfg_.window);
      if (!d.error.empty()) {
        cell.note = "detector: " + d.error;
      } else if (!a.error.empty()) {
        cell.note = "attack: " + a.error;
      } else if (!rs.error.empty()) {
        cell.note = "reshaper: " + rs.error;
      } else {
        try {
          E2eOptions opts;
          opts.warm_prefix = &benign_full_;
          const E2eResult result = run_e2e(*rs.model, a.trace, cfg_.net,
                                           *d.model, d.threshold, opts);
          cell.dr = result.report.detection_rate();
          cell.response_alarm_rate = result.report.false_positive_rate();
          write_events_jsonl(result.events, out("events/" + cell.nids + "_" +
                                                cell.attack + ".jsonl"));
        } catch (const std::exception& e) {
          cell.note = e.what();
        }
      }
      cells.push_back(std::move(cell));
    }
  }
  std::ofstream csv(out("live.csv"));
  write_live_csv(cells, csv);
  return cells;
}

}  // namespace

std::optional<double> BaselineTable::average_dr_before() const {
  std::vector<std::optional<double>> col;
  for (const auto& r : rows) col.push_back(r.dr_before);
  return column_mean(col);
}

std::optional<double> BaselineTable::average_dr_after() const {
  std::vector<std::optional<double>> col;
  for (const auto& r : rows) col.push_back(r.dr_after);
  return column_mean(col);
}

std::optional<double> BaselineTable::average_fpr() const {
  std::vector<std::optional<double>> col;
  for (const auto& r : rows) col.push_back(r.fpr);
  return column_mean(col);
}

std::optional<double> SweepTable::average_before() const {
  std::vector<std::optional<double>> col;
  for (const auto& r : rows) col.push_back(r.dr_before);
  return column_mean(col);
}

std::optional<double> SweepTable::average_after(
    std::size_t window_index) const {
  std::vector<std::optional<double>> col;
  for (const auto& r : rows) {
    col.push_back(window_index < r.dr_after.size() ? r.dr_after[window_index]
                                                   : std::nullopt);
  }
  return column_mean(col);
}

BaselineTable run_baseline(const ExperimentConfig& cfg) {
  Runner runner(cfg);
  return runner.baseline();
}

SweepTable run_ws_sweep(const ExperimentConfig& cfg) {
  Runner runner(cfg);
  return runner.sweep();
}

std::vector<LiveCell> run_live(const ExperimentConfig& cfg) {
  Runner runner(cfg);
  return runner.live();
}

void run_experiment(const ExperimentConfig& cfg) {
  Runner runner(cfg);
  runner.baseline();
  runner.sweep();
  runner.live();
}

void write_baseline_csv(const BaselineTable& table, std::ostream& os) {
  os << "nids,attack,dr_before,dr_after,fpr,note\n";
  for (const BaselineCell& row : table.rows) {
    os << row.nids << ',' << row.attack << ',' << fmt_rate(row.dr_before)
       << ',' << fmt_rate(row.dr_after) << ',' << fmt_rate(row.fpr) << ','
       << row.note << '\n';
  }
  os << "average,all," << fmt_rate(table.average_dr_before()) << ','
     << fmt_rate(table.average_dr_after()) << ','
     << fmt_rate(table.average_fpr()) << ",\n";
}

void write_sweep_csv(const SweepTable& table, std::ostream& os) {
  os << "nids,attack,dr_before";
  for (std::size_t w : table.windows) os << ",dr_after_w" << w;
  os << ",note\n";
  for (const SweepCell& row : table.rows) {
    os << row.nids << ',' << row.attack << ',' << fmt_rate(row.dr_before);
    for (std::size_t wi = 0; wi < table.windows.size(); ++wi) {
      os << ','
         << fmt_rate(wi < row.dr_after.size() ? row.dr_after[wi]
                                              : std::nullopt);
    }
    os << ',' << row.note << '\n';
  }
  os << "average,all," << fmt_rate(table.average_before());
  for (std::size_t wi = 0; wi < table.windows.size(); ++wi) {
    os << ',' << fmt_rate(table.average_after(wi));
  }
  os << ",\n";
  os << "reshaper_loss,,";
  for (const auto& loss : table.reshaper_loss) os << ',' << fmt_loss(loss);
  os << ",\n";
}

void write_live_csv(const std::vector<LiveCell>& cells, std::ostream& os) {
  os << "nids,attack,dr,response_alarm_rate,note\n";
  for (const LiveCell& cell : cells) {
    os << cell.nids << ',' << cell.attack << ',' << fmt_rate(cell.dr) << ','
       << fmt_rate(cell.response_alarm_rate) << ',' << cell.note << '\n';
  }
}

void emit_score_trace(const ScoreTrace& trace, const std::string& path) {
  if (trace.seq_index.size() != trace.before.size() ||
      trace.before.size() != trace.after.size()) {
    throw std::runtime_error("score trace columns differ in length");
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write score trace: " + path);
  os << "seq_index,score_before,score_after,threshold\n";
  for (std::size_t i = 0; i < trace.seq_index.size(); ++i) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%.17g\n",
                  static_cast<unsigned long long>(trace.seq_index[i]),
                  trace.before[i], trace.after[i], trace.threshold);
    os << buf;
  }
  if (!os.good()) throw std::runtime_error("short write: " + path);
}

}  // namespace cadence
