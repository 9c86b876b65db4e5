#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cadence/kvconfig.hpp"
#include "cadence/netsim.hpp"
#include "cadence/nids.hpp"
#include "cadence/synth.hpp"
#include "cadence/trace.hpp"

namespace cadence {

/// A named traffic input: a canonical trace file when `path` is set,
/// otherwise a synthetic profile realized on demand.
struct TraceSource {
  std::string name;
  std::string path;  // empty -> synthesize from `profile`
  TrafficProfile profile;

  TrafficTrace realize() const;
};

/// Everything one evaluation run needs, read from a key-value file.
///
/// The benign source is treated as one continuously captured stream: its
/// leading share trains the reshaper (which only needs deltas) and its
/// trailing nids_fraction trains the detectors. Detector feature rows are
/// taken from a single featurization of the whole stream — so they carry
/// fully warmed-up channel statistics — and attack traces are scored as
/// continuations of that stream (featurize_continuation), the way a
/// detector that had been watching the network would see them. Within the
/// detector slice, rows are dealt to fit / calibration / FPR-evaluation in
/// repeating 20-row cycles (fit_fraction of each cycle fits, the rest
/// alternates), so every slice samples the whole regime.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "run-out";

  TraceSource benign;
  // The stream is laid out [ambient history][reshaper-train][detector-train].
  // Explicit counts take precedence; with counts of 0 the stream is split by
  // nids_fraction with no ambient history. Ambient history lets the slow
  // channel statistics saturate before any training row is taken, the way a
  // detector deployed on a long-lived link would see them.
  std::size_t nids_n = 0;       // detector-train packets (0 -> use fraction)
  std::size_t reshaper_n = 0;   // reshaper-train packets (0 -> remainder)
  double nids_fraction = 0.5;   // benign packets fed to the detectors
  double fit_fraction = 0.7;    // detector-slice rows used for fitting
  std::vector<TraceSource> attacks;

  std::size_t window = 50;                      // single-run window
  std::vector<std::size_t> windows = {3, 50, 150};  // sweep windows
  std::size_t reshaper_hidden = 32;
  std::size_t reshaper_epochs = 5;
  std::size_t reshaper_batch = 32;
  double reshaper_lr = 1e-3;

  std::vector<std::string> nids_kinds = {"ae", "kitnet", "iforest"};
  ThresholdSpec threshold{ThresholdRule::percentile, 99.5, 1.0};
  std::size_t ae_epochs = 40;
  std::size_t ae_batch = 32;
  double ae_lr = 1e-3;
  std::size_t kitnet_max_cluster = 10;
  std::size_t kitnet_epochs = 1;
  double kitnet_lr = 0.1;
  std::size_t iforest_trees = 100;
  std::size_t iforest_sample = 256;

  NetworkModel net;
  std::vector<std::string> live_attacks;  // empty -> all attacks

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_config(const KvConfig& cfg);
};

/// One detector x attack evaluation. `note` carries the failure reason for
/// cells whose pipeline stage threw; their rates stay unset.
struct BaselineCell {
  std::string nids;
  std::string attack;
  std::optional<double> dr_before;  // percent
  std::optional<double> dr_after;
  std::optional<double> fpr;  // held-out benign alarm rate, percent
  double threshold = 0.0;
  std::string note;
};

struct BaselineTable {
  std::vector<BaselineCell> rows;
  // Column means over defined values, recomputed on demand.
  std::optional<double> average_dr_before() const;
  std::optional<double> average_dr_after() const;
  std::optional<double> average_fpr() const;
};

/// Sweep row: one before column plus one after column per window size.
struct SweepCell {
  std::string nids;
  std::string attack;
  std::optional<double> dr_before;
  std::vector<std::optional<double>> dr_after;  // aligned with windows
  std::string note;
};

struct SweepTable {
  std::vector<std::size_t> windows;
  std::vector<SweepCell> rows;
  // Final training loss of each window's reshaper, for audit.
  std::vector<std::optional<double>> reshaper_loss;
  std::optional<double> average_before() const;
  std::optional<double> average_after(std::size_t window_index) const;
};

/// Live-scenario outcome for one detector x attack pair.
struct LiveCell {
  std::string nids;
  std::string attack;
  std::optional<double> dr;                   // malicious stream, percent
  std::optional<double> response_alarm_rate;  // responses flagged, percent
  std::string note;
};

/// Per-packet anomaly scores for one detector x attack pair, aligned by
/// packet sequence index, with the calibrated threshold.
struct ScoreTrace {
  std::vector<std::uint64_t> seq_index;
  std::vector<double> before;
  std::vector<double> after;
  double threshold = 0.0;
};

/// Offline evaluation: per (detector, attack) train on benign, calibrate,
/// score the raw attack, reshape with a window=cfg.window model, score
/// again. Persists models, traces, thresholds and score CSVs under
/// cfg.out_dir.
BaselineTable run_baseline(const ExperimentConfig& cfg);

/// Same protocol with one reshaper per window size and shared detectors;
/// score CSVs gain a _w<W> suffix.
SweepTable run_ws_sweep(const ExperimentConfig& cfg);

/// Network-in-the-loop evaluation: each attack is paced live through the
/// simulator against each detector, writing events/<nids>_<attack>.jsonl.
std::vector<LiveCell> run_live(const ExperimentConfig& cfg);

/// Full run: baseline + sweep + live, emitting table3.csv, table4.csv and
/// live.csv under cfg.out_dir.
void run_experiment(const ExperimentConfig& cfg);

/// CSV emitters; undefined rates print "undefined", averages rows are
/// recomputed from the table rows. Formatting is deterministic.
void write_baseline_csv(const BaselineTable& table, std::ostream& os);
void write_sweep_csv(const SweepTable& table, std::ostream& os);
void write_live_csv(const std::vector<LiveCell>& cells, std::ostream& os);

void emit_score_trace(const ScoreTrace& trace, const std::string& path);

}  // namespace cadence
