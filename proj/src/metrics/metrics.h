#ifndef LADPROTO_METRICS_METRICS_H_
#define LADPROTO_METRICS_METRICS_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ladproto {

// Mean over positives of precision at that positive's score threshold. Tied
// scores share one threshold. Throws kUndefined without positives.
double average_precision(const std::vector<double>& scores, const std::vector<int>& truth);

// Mann-Whitney U / (P * N) with ties counted one half. Throws kUndefined
// unless both classes are present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& truth);

// Predicted positive when score >= threshold; 0 when precision + recall = 0.
double f1(const std::vector<double>& scores, const std::vector<int>& truth, double threshold);

// Scores and ground truth collected for one class over an evaluation run.
struct ClassScores {
  std::vector<double> scores;
  std::vector<int> truth;
};

struct ClassMetrics {
  double ap = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
  bool has_ap = false;
  bool has_auc = false;
  size_t n = 0;
  size_t positives = 0;
};

// Macro averages over the classes of one run.
struct RunMetrics {
  double map = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
  std::map<std::string, ClassMetrics> per_class;
  std::vector<std::string> skipped;  // classes with an undefined AP or AUC
};

RunMetrics macro_metrics(const std::map<std::string, ClassScores>& by_class, double threshold);

struct Interval {
  double mean = 0.0;
  double half_width = 0.0;
};

// Student-t half-width at the given confidence; zero for a single run.
Interval mean_interval(const std::vector<double>& values, double confidence = 0.95);

struct SplitReport {
  Interval map, auc, f1;
  std::vector<RunMetrics> runs;
  std::map<std::string, double> per_class_ap;  // mean AP over runs that define it
  uint64_t episodes_per_run = 0;
  std::vector<uint64_t> seeds;
};

SplitReport aggregate(const std::vector<RunMetrics>& runs);

struct MetricsReport {
  std::string method;
  std::string beta;  // "-" when smoothing is off
  std::map<std::string, SplitReport> splits;  // "validation", "evaluation"
};

std::string report_to_json(const MetricsReport& report);
// One row per split; metric columns are percentages with half-widths.
std::string report_to_csv(const std::vector<MetricsReport>& reports);

}  // namespace ladproto

#endif  // LADPROTO_METRICS_METRICS_H_
