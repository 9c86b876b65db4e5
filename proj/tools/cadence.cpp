// Command-line front end: every subcommand is a thin wrapper over the
// library so pipelines can be scripted and artifacts inspected piecemeal.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cadence/experiment.hpp"
#include "cadence/features.hpp"
#include "cadence/kvconfig.hpp"
#include "cadence/mitigation.hpp"
#include "cadence/netsim.hpp"
#include "cadence/nids.hpp"
#include "cadence/reshaper.hpp"
#include "cadence/synth.hpp"
#include "cadence/trace.hpp"

namespace {

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *v);
  return buf;
}

void write_matrix_csv(const Eigen::MatrixXd& rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", rows(i, j));
      os << (j ? "," : "") << buf;
    }
    os << '\n';
  }
  if (!os.good()) throw std::runtime_error("short write: " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Traffic-timing reshaping toolkit: learn benign inter-packet timing, "
      "rewrite malicious traffic to match it, and evaluate anomaly "
      "detectors and supervised mitigations against the result."};
  app.require_subcommand(1);

  try {
    // ---- ingest ----------------------------------------------------------
    auto* ingest = app.add_subcommand(
        "ingest", "Convert a libpcap capture to the canonical trace format");
    std::string in_pcap, ingest_out, ingest_label = "unlabeled";
    ingest->add_option("--pcap", in_pcap, "capture file")->required();
    ingest->add_option("--out", ingest_out, "canonical trace path")
        ->required();
    ingest->add_option("--label", ingest_label,
                       "label applied to every record "
                       "(benign|malicious|unlabeled)");
    ingest->callback([&] {
      cadence::TrafficTrace trace =
          cadence::ingest_pcap(in_pcap, cadence::parse_label(ingest_label));
      cadence::write_canonical(trace, ingest_out);
      std::cout << "wrote " << trace.size() << " records to " << ingest_out
                << (trace.truncated ? " (input truncated)" : "") << "\n";
    });

    // ---- synth -----------------------------------------------------------
    auto* synth = app.add_subcommand(
        "synth", "Generate a synthetic trace from a timing profile");
    cadence::TrafficProfile profile;
    std::string synth_kind = "periodic_benign", synth_out;
    synth->add_option("--kind", synth_kind,
                      "periodic_benign|bursty_benign|flood_attack|"
                      "scan_attack|mitm_like");
    synth->add_option("--n", profile.n_packets, "packet count")->required();
    synth->add_option("--base-delta", profile.base_delta,
                      "base inter-packet delay, seconds")
        ->required();
    synth->add_option("--jitter", profile.jitter, "delta jitter in [0,1)");
    synth->add_option("--size-mean", profile.size_mean, "mean packet size");
    synth->add_option("--size-std", profile.size_std, "size std deviation");
    synth->add_option("--endpoints", profile.endpoint_pool, "endpoint pool");
    synth->add_option("--seed", profile.seed, "generator seed");
    synth->add_option("--out", synth_out, "canonical trace path")->required();
    synth->callback([&] {
      profile.kind = cadence::parse_profile_kind(synth_kind);
      cadence::TrafficTrace trace = cadence::generate(profile);
      cadence::write_canonical(trace, synth_out);
      std::cout << "wrote " << trace.size() << " records to " << synth_out
                << "\n";
    });

    // ---- featurize -------------------------------------------------------
    auto* featurize = app.add_subcommand(
        "featurize", "Extract damped per-channel statistics per packet");
    std::string feat_in, feat_out;
    std::vector<double> lambdas = cadence::kDefaultLambdas;
    featurize->add_option("--in", feat_in, "canonical trace")->required();
    featurize->add_option("--out", feat_out, "feature CSV")->required();
    featurize->add_option("--lambdas", lambdas, "decay rates");
    featurize->callback([&] {
      const cadence::TrafficTrace trace = cadence::read_canonical(feat_in);
      write_matrix_csv(cadence::featurize_trace(trace, lambdas), feat_out);
      std::cout << "wrote " << trace.size() << " rows to " << feat_out
                << "\n";
    });

    // ---- train-reshaper --------------------------------------------------
    auto* trainr = app.add_subcommand(
        "train-reshaper",
        "Fit the timing model on a benign trace and save it");
    cadence::ReshaperConfig rcfg;
    std::string trainr_benign, trainr_out;
    trainr->add_option("--benign", trainr_benign, "benign trace")->required();
    trainr->add_option("--out", trainr_out, "model path")->required();
    trainr->add_option("--window", rcfg.window, "history length");
    trainr->add_option("--hidden", rcfg.hidden, "hidden-state width");
    trainr->add_option("--epochs", rcfg.epochs, "training epochs");
    trainr->add_option("--batch", rcfg.batch, "batch size");
    trainr->add_option("--lr", rcfg.lr, "learning rate");
    trainr->add_option("--seed", rcfg.seed, "init/shuffle seed");
    trainr->callback([&] {
      cadence::ReshaperModel model(rcfg);
      model.fit(cadence::read_canonical(trainr_benign));
      model.save_file(trainr_out);
      std::cout << "trained window=" << rcfg.window
                << " final-loss=" << model.loss_curve().back() << ", saved "
                << trainr_out << "\n";
    });

    // ---- reshape ---------------------------------------------------------
    auto* reshape = app.add_subcommand(
        "reshape", "Rewrite a trace's timestamps with a trained model");
    std::string resh_model, resh_in, resh_out;
    reshape->add_option("--model", resh_model, "reshaper model")->required();
    reshape->add_option("--in", resh_in, "trace to rewrite")->required();
    reshape->add_option("--out", resh_out, "output trace")->required();
    reshape->callback([&] {
      const cadence::ReshaperModel model =
          cadence::ReshaperModel::load_file(resh_model);
      const cadence::TrafficTrace in = cadence::read_canonical(resh_in);
      cadence::write_canonical(model.reshape_offline(in), resh_out);
      std::cout << "reshaped " << in.size() << " records to " << resh_out
                << "\n";
    });

    // ---- train-nids ------------------------------------------------------
    auto* trainn = app.add_subcommand(
        "train-nids", "Train an anomaly detector on benign traffic");
    std::string nids_kind = "ae", nids_benign, nids_out;
    std::uint64_t nids_seed = 1;
    trainn->add_option("--kind", nids_kind, "ae|kitnet|iforest");
    trainn->add_option("--benign", nids_benign, "benign trace")->required();
    trainn->add_option("--out", nids_out, "model path")->required();
    trainn->add_option("--seed", nids_seed, "training seed");
    trainn->callback([&] {
      auto model = cadence::make_model(nids_kind, nids_seed);
      const cadence::TrafficTrace trace = cadence::read_canonical(nids_benign);
      model->fit(cadence::featurize_trace(trace));
      cadence::save_model(*model, nids_out);
      std::cout << "trained " << model->kind() << " on " << trace.size()
                << " packets, saved " << nids_out << "\n";
    });

    // ---- score -----------------------------------------------------------
    auto* score = app.add_subcommand(
        "score", "Score a trace with a trained detector and report alarms");
    std::string score_model, score_in, score_calibrate, score_report;
    std::string score_method = "pctl:99.5";
    double score_phi = 1.0;
    double score_threshold = -1.0;
    bool have_threshold = false;
    score->add_option("--model", score_model, "detector model")->required();
    score->add_option("--in", score_in, "trace to score")->required();
    score
        ->add_option_function<double>(
            "--threshold",
            [&](double v) {
              score_threshold = v;
              have_threshold = true;
            },
            "fixed alarm threshold")
        ->expected(1);
    score->add_option("--calibrate", score_calibrate,
                      "benign trace that sets the threshold");
    score->add_option("--method", score_method,
                      "calibration rule: max or pctl:<p>");
    score->add_option("--phi", score_phi, "threshold safety multiplier");
    std::string score_prefix;
    score->add_option("--prefix", score_prefix,
                      "benign trace the scored trace continues: warms the "
                      "extractor before scoring");
    score->add_option("--report", score_report, "per-packet CSV");
    score->callback([&] {
      const auto model = cadence::load_model(score_model);
      const cadence::TrafficTrace trace = cadence::read_canonical(score_in);
      const Eigen::MatrixXd rows =
          score_prefix.empty()
              ? cadence::featurize_trace(trace)
              : cadence::featurize_continuation(
                    cadence::read_canonical(score_prefix), trace);
      const std::vector<double> scores = model->score_rows(rows);

      double threshold = score_threshold;
      if (!have_threshold) {
        if (score_calibrate.empty()) {
          throw std::runtime_error(
              "pass --threshold or --calibrate <benign trace>");
        }
        const cadence::TrafficTrace benign =
            cadence::read_canonical(score_calibrate);
        threshold = cadence::calibrate_threshold(
            model->score_rows(cadence::featurize_trace(benign)),
            cadence::ThresholdSpec::parse(score_method, score_phi));
      }

      std::vector<cadence::Label> labels;
      for (const auto& rec : trace.records) labels.push_back(rec.label);
      const cadence::DetectionReport report =
          cadence::detect(scores, labels, threshold);

      if (!score_report.empty()) {
        std::ofstream os(score_report);
        if (!os) throw std::runtime_error("cannot write " + score_report);
        os << "seq_index,score,threshold,alarm,label\n";
        for (std::size_t i = 0; i < scores.size(); ++i) {
          char buf[120];
          std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%d,",
                        static_cast<unsigned long long>(
                            trace.records[i].seq_index),
                        scores[i], threshold, scores[i] > threshold ? 1 : 0);
          os << buf << cadence::to_string(labels[i]) << '\n';
        }
      }
      std::cout << "packets=" << scores.size() << " threshold=" << threshold
                << " dr=" << fmt_opt(report.detection_rate())
                << " fpr=" << fmt_opt(report.false_positive_rate()) << "\n";
    });

    // ---- mitigate --------------------------------------------------------
    auto* mitigate = app.add_subcommand(
        "mitigate",
        "Leave-one-attack-out supervised evaluation over reshaped attacks");
    std::string mit_benign, mit_kind = "lr", mit_report;
    std::vector<std::string> mit_attacks;
    std::uint64_t mit_seed = 5;
    mitigate->add_option("--benign", mit_benign, "benign trace")->required();
    mitigate
        ->add_option("--attack", mit_attacks,
                     "name=path of a malicious trace (repeatable)")
        ->required();
    mitigate->add_option("--kind", mit_kind, "lr|gnb|rf");
    mitigate->add_option("--seed", mit_seed, "sampling seed");
    mitigate->add_option("--report", mit_report, "output CSV");
    mitigate->callback([&] {
      const Eigen::MatrixXd benign_rows = cadence::featurize_trace(
          cadence::read_canonical(mit_benign));
      cadence::CvPlan plan;
      // Alternate benign rows between the train and test sides so both
      // cover the same regime.
      const Eigen::Index nb = benign_rows.rows();
      plan.benign_train.resize((nb + 1) / 2, benign_rows.cols());
      plan.benign_test.resize(nb / 2, benign_rows.cols());
      for (Eigen::Index i = 0; i < nb; ++i) {
        if (i % 2 == 0) {
          plan.benign_train.row(i / 2) = benign_rows.row(i);
        } else {
          plan.benign_test.row(i / 2) = benign_rows.row(i);
        }
      }
      for (const std::string& spec : mit_attacks) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) {
          throw std::runtime_error("--attack expects name=path, got " + spec);
        }
        plan.attacks.emplace_back(
            spec.substr(0, eq),
            cadence::featurize_trace(
                cadence::read_canonical(spec.substr(eq + 1))));
      }
      const cadence::ClassifierKind kind =
          cadence::parse_classifier_kind(mit_kind);
      const cadence::CvReport report =
          cadence::run_cv(plan, kind, mit_seed);
      std::vector<std::pair<std::string, cadence::CvReport>> reports{
          {mit_kind, report}};
      if (!mit_report.empty()) {
        std::ofstream os(mit_report);
        if (!os) throw std::runtime_error("cannot write " + mit_report);
        cadence::emit_mitigation_table(reports, os);
      } else {
        cadence::emit_mitigation_table(reports, std::cout);
      }
      std::cout << "average dr=" << fmt_opt(report.average_dr())
                << " fpr=" << fmt_opt(report.average_fpr()) << "\n";
    });

    // ---- e2e -------------------------------------------------------------
    auto* e2e = app.add_subcommand(
        "e2e",
        "Pace a malicious trace live through the simulated network while a "
        "detector watches");
    std::string e2e_reshaper, e2e_nids, e2e_in, e2e_net, e2e_events;
    double e2e_threshold = 0.0;
    e2e->add_option("--reshaper", e2e_reshaper, "reshaper model")->required();
    e2e->add_option("--nids", e2e_nids, "detector model")->required();
    e2e->add_option("--in", e2e_in, "malicious trace")->required();
    e2e->add_option("--net", e2e_net, "network model config (net.* keys)");
    e2e->add_option("--threshold", e2e_threshold, "alarm threshold")
        ->required();
    std::string e2e_prefix;
    e2e->add_option("--prefix", e2e_prefix,
                    "benign trace the detector watched before the attack");
    e2e->add_option("--events", e2e_events, "event log (JSON lines)");
    e2e->callback([&] {
      const cadence::ReshaperModel reshaper =
          cadence::ReshaperModel::load_file(e2e_reshaper);
      const auto nids = cadence::load_model(e2e_nids);
      const cadence::TrafficTrace malicious = cadence::read_canonical(e2e_in);
      cadence::NetworkModel net;
      if (!e2e_net.empty()) {
        net = cadence::NetworkModel::from_config(
            cadence::KvConfig::parse_file(e2e_net));
      }
      cadence::TrafficTrace warm;
      cadence::E2eOptions e2e_opts;
      if (!e2e_prefix.empty()) {
        warm = cadence::read_canonical(e2e_prefix);
        e2e_opts.warm_prefix = &warm;
      }
      const cadence::E2eResult result = cadence::run_e2e(
          reshaper, malicious, net, *nids, e2e_threshold, e2e_opts);
      if (!e2e_events.empty()) {
        cadence::write_events_jsonl(result.events, e2e_events);
      }
      std::cout << "events=" << result.events.size()
                << " dr=" << fmt_opt(result.report.detection_rate())
                << " response_alarms="
                << fmt_opt(result.report.false_positive_rate()) << "\n";
    });

    // ---- run -------------------------------------------------------------
    auto* run = app.add_subcommand(
        "run", "Full evaluation from a declarative config file");
    std::string run_config, run_out;
    run->add_option("--config", run_config, "key-value config")->required();
    run->add_option("--out", run_out, "output directory (overrides config)");
    run->callback([&] {
      cadence::ExperimentConfig cfg =
          cadence::ExperimentConfig::from_file(run_config);
      if (!run_out.empty()) cfg.out_dir = run_out;
      cadence::run_experiment(cfg);
      std::cout << "run complete; tables and artifacts under " << cfg.out_dir
                << "\n";
    });

    CLI11_PARSE(app, argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
