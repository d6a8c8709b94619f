#ifndef LADPROTO_HARNESS_COMMANDS_H_
#define LADPROTO_HARNESS_COMMANDS_H_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "curation/curation.h"
#include "harness/config.h"
#include "metrics/metrics.h"

namespace ladproto {

// Every command rethrows failures as Error with the stage name prefixed, e.g.
// "train: class '/m/0jbk' has 3 examples, need at least 6".

struct SynthResult {
  std::filesystem::path ontology, metadata, audio_dir;
  size_t classes = 0;
  size_t clips = 0;
  size_t waveforms = 0;
};

// Writes ontology JSON and metadata CSV to paths.ontology / paths.metadata
// (default: under paths.output), plus one WAV per clip under paths.audio
// (default: <paths.output>/audio) when synth.audio is on.
SynthResult cmd_synth(const Config& config);

struct CurateResult {
  CuratedDataset dataset;
  std::filesystem::path manifest;
  std::string summary;  // printed class and clip counts
};

CurateResult cmd_curate(const Config& config);

struct TrainResult {
  std::vector<double> losses;  // mean episode loss per step
  std::filesystem::path checkpoint, manifest;
  std::string arch_fingerprint;
};

TrainResult cmd_train(const Config& config);

struct EvalResult {
  MetricsReport report;
  std::map<std::string, double> control_map;   // uniform-score mAP per split
  std::map<std::string, Interval> accuracy;    // N-way K-shot accuracy per split
  std::filesystem::path report_json, report_csv;
};

EvalResult cmd_eval(const Config& config);

struct SweepResult {
  std::vector<double> betas;
  std::vector<EvalResult> evals;  // one per beta
  std::filesystem::path table;
};

// Trains and evaluates once per beta in sweep.betas, each under
// <paths.output>/beta_<value>, sharing the split manifest and feature cache.
SweepResult cmd_sweep_beta(const Config& config);

// Merges report.json files (report.inputs: files or run directories) into one
// CSV at <paths.output>/report.csv; returns the CSV text.
std::string cmd_report(const Config& config);

MetricsReport report_from_json(const std::string& text);

}  // namespace ladproto

#endif  // LADPROTO_HARNESS_COMMANDS_H_
