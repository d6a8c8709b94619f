#include "metrics/metrics.h"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>
#include <sstream>

#include "common/error.h"
#include "json.hpp"

namespace ladproto {

namespace {

void check_inputs(const std::vector<double>& scores, const std::vector<int>& truth, const char* what) {
  if (scores.size() != truth.size()) {
    fail(ErrorKind::kShape, std::string(what) + ": " + std::to_string(scores.size()) + " scores vs " +
                                std::to_string(truth.size()) + " labels");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) fail(ErrorKind::kNumeric, std::string(what) + ": non-finite score");
  }
}

// Indices sorted by descending score.
std::vector<size_t> descending(const std::vector<double>& scores) {
  std::vector<size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double average_precision(const std::vector<double>& scores, const std::vector<int>& truth) {
  check_inputs(scores, truth, "average precision");
  const auto idx = descending(scores);
  size_t positives = 0;
  for (int t : truth) positives += t != 0;
  if (positives == 0) fail(ErrorKind::kUndefined, "average precision is undefined without positives");
  double sum = 0.0;
  size_t seen = 0, tp = 0;
  for (size_t i = 0; i < idx.size();) {
    // One group of tied scores forms one threshold.
    size_t j = i, group_pos = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      group_pos += truth[idx[j]] != 0;
      ++j;
    }
    seen += j - i;
    tp += group_pos;
    sum += static_cast<double>(group_pos) * static_cast<double>(tp) / static_cast<double>(seen);
    i = j;
  }
  return sum / static_cast<double>(positives);
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& truth) {
  check_inputs(scores, truth, "ROC AUC");
  size_t pos = 0;
  for (int t : truth) pos += t != 0;
  const size_t neg = truth.size() - pos;
  if (pos == 0 || neg == 0) fail(ErrorKind::kUndefined, "ROC AUC is undefined unless both classes are present");
  // Ascending midranks.
  std::vector<size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (size_t i = 0; i < idx.size();) {
    size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (size_t k = i; k < j; ++k) {
      if (truth[idx[k]]) rank_sum += midrank;
    }
    i = j;
  }
  const double u = rank_sum - static_cast<double>(pos) * static_cast<double>(pos + 1) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double f1(const std::vector<double>& scores, const std::vector<int>& truth, double threshold) {
  check_inputs(scores, truth, "F1");
  double tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (pred && truth[i]) ++tp;
    else if (pred) ++fp;
    else if (truth[i]) ++fn;
  }
  if (tp == 0) return 0.0;
  const double p = tp / (tp + fp), r = tp / (tp + fn);
  return 2.0 * p * r / (p + r);
}

RunMetrics macro_metrics(const std::map<std::string, ClassScores>& by_class, double threshold) {
  RunMetrics run;
  double ap_sum = 0, auc_sum = 0, f1_sum = 0;
  size_t ap_n = 0, auc_n = 0, f1_n = 0;
  for (const auto& [cls, cs] : by_class) {
    ClassMetrics m;
    m.n = cs.scores.size();
    for (int t : cs.truth) m.positives += t != 0;
    if (m.n == 0) continue;
    if (m.positives > 0) {
      m.ap = average_precision(cs.scores, cs.truth);
      m.has_ap = true;
      ap_sum += m.ap;
      ++ap_n;
    }
    if (m.positives > 0 && m.positives < m.n) {
      m.auc = roc_auc(cs.scores, cs.truth);
      m.has_auc = true;
      auc_sum += m.auc;
      ++auc_n;
    }
    if (!m.has_ap || !m.has_auc) run.skipped.push_back(cls);
    m.f1 = f1(cs.scores, cs.truth, threshold);
    if (m.has_ap) {
      f1_sum += m.f1;
      ++f1_n;
    }
    run.per_class[cls] = m;
  }
  if (ap_n == 0) fail(ErrorKind::kUndefined, "no class has a positive example; mAP is undefined");
  run.map = ap_sum / static_cast<double>(ap_n);
  run.auc = auc_n ? auc_sum / static_cast<double>(auc_n) : 0.0;
  run.f1 = f1_sum / static_cast<double>(f1_n);
  return run;
}

Interval mean_interval(const std::vector<double>& values, double confidence) {
  if (values.empty()) fail(ErrorKind::kUndefined, "confidence interval over zero runs");
  Interval iv;
  const double n = static_cast<double>(values.size());
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) {
    iv.mean = *lo;  // identical runs: exact mean, zero width
    return iv;
  }
  iv.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - iv.mean) * (v - iv.mean);
  const double s = std::sqrt(ss / (n - 1.0));
  boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(dist, 0.5 + confidence / 2.0);
  iv.half_width = t * s / std::sqrt(n);
  return iv;
}

SplitReport aggregate(const std::vector<RunMetrics>& runs) {
  SplitReport rep;
  rep.runs = runs;
  std::vector<double> maps, aucs, f1s;
  std::map<std::string, std::pair<double, size_t>> ap;
  for (const auto& r : runs) {
    maps.push_back(r.map);
    aucs.push_back(r.auc);
    f1s.push_back(r.f1);
    for (const auto& [cls, m] : r.per_class) {
      if (!m.has_ap) continue;
      ap[cls].first += m.ap;
      ++ap[cls].second;
    }
  }
  // Sorting makes the result independent of run order.
  auto sorted = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  rep.map = mean_interval(sorted(maps));
  rep.auc = mean_interval(sorted(aucs));
  rep.f1 = mean_interval(sorted(f1s));
  for (const auto& [cls, acc] : ap) rep.per_class_ap[cls] = acc.first / static_cast<double>(acc.second);
  return rep;
}

std::string report_to_json(const MetricsReport& report) {
  using nlohmann::json;
  json splits = json::object();
  for (const auto& [name, s] : report.splits) {
    auto iv = [](const Interval& i) { return json{{"mean", i.mean}, {"half_width", i.half_width}}; };
    json runs = json::array();
    for (const auto& r : s.runs) {
      runs.push_back({{"mAP", r.map}, {"AUC", r.auc}, {"F1", r.f1}, {"skipped_classes", r.skipped}});
    }
    splits[name] = {{"mAP", iv(s.map)},
                    {"AUC", iv(s.auc)},
                    {"F1", iv(s.f1)},
                    {"confidence", 0.95},
                    {"episodes_per_run", s.episodes_per_run},
                    {"seeds", s.seeds},
                    {"runs", runs},
                    {"per_class_ap", s.per_class_ap}};
  }
  return json{{"method", report.method}, {"beta", report.beta}, {"splits", splits}}.dump(2) + "\n";
}

std::string report_to_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream out;
  out << "method,beta,split,mAP,mAP_hw,AUC,AUC_hw,F1,F1_hw\n";
  char buf[64];
  auto pct = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return std::string(buf);
  };
  for (const auto& r : reports) {
    for (const auto& [name, s] : r.splits) {
      out << r.method << "," << r.beta << "," << name << "," << pct(s.map.mean) << "," << pct(s.map.half_width) << ","
          << pct(s.auc.mean) << "," << pct(s.auc.half_width) << "," << pct(s.f1.mean) << ","
          << pct(s.f1.half_width) << "\n";
    }
  }
  return out.str();
}

}  // namespace ladproto
