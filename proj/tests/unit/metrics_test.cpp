#include "metrics/metrics.h"

#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "common/error.h"
#include "common/rng.h"
#include "support/oracles.h"

namespace ladproto {
namespace {

struct Instance {
  std::vector<double> scores;
  std::vector<int> truth;
};

// n <= 8, at least one positive and one negative; optionally coarse scores
// so that ties occur.
Instance random_instance(Rng& rng, bool ties) {
  Instance in;
  const size_t n = 2 + rng.uniform_index(7);
  for (size_t i = 0; i < n; ++i) {
    in.scores.push_back(ties ? static_cast<double>(rng.uniform_index(4)) / 4.0 : rng.uniform01());
    in.truth.push_back(rng.bernoulli(0.4));
  }
  in.truth[0] = 1;
  in.truth[1] = 0;
  return in;
}

TEST(AveragePrecision, Examples) {
  EXPECT_DOUBLE_EQ(average_precision({0.9, 0.8, 0.1}, {1, 1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(average_precision({0.1, 0.9}, {1, 0}), 0.5);
  EXPECT_THROW(average_precision({0.1, 0.2}, {0, 0}), Error);
  EXPECT_THROW(average_precision({0.1}, {1, 0}), Error);
  EXPECT_THROW(average_precision({NAN}, {1}), Error);
}

TEST(AveragePrecision, MatchesStaircaseOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto in = random_instance(rng, trial % 2);
    EXPECT_NEAR(average_precision(in.scores, in.truth), oracle::staircase_ap(in.scores, in.truth), 1e-9);
  }
}

TEST(RocAuc, ExamplesAndPairCountingOracle) {
  EXPECT_DOUBLE_EQ(roc_auc({0.9, 0.8, 0.1}, {1, 1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}), 0.5);
  EXPECT_THROW(roc_auc({0.1, 0.2}, {1, 1}), Error);
  try {
    roc_auc({0.1, 0.2}, {0, 0});
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUndefined);
  }
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto in = random_instance(rng, trial % 2);
    EXPECT_NEAR(roc_auc(in.scores, in.truth), oracle::pair_count_auc(in.scores, in.truth), 1e-9);
  }
}

TEST(F1, ExamplesAndCountingOracle) {
  EXPECT_DOUBLE_EQ(f1({1, 0, 1}, {1, 0, 1}, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(f1({0.1, 0.2}, {1, 1}, 0.5), 0.0);
  // tp=2, fp=1, fn=1.
  EXPECT_NEAR(f1({0.9, 0.8, 0.7, 0.1}, {1, 1, 0, 1}, 0.5), 2.0 / 3.0, 1e-15);
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto in = random_instance(rng, trial % 2);
    EXPECT_NEAR(f1(in.scores, in.truth, 0.5), oracle::counted_f1(in.scores, in.truth, 0.5), 1e-9);
  }
}

TEST(Metrics, InvariantUnderMonotoneTransform) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = random_instance(rng, false);
    std::vector<double> mapped;
    for (double s : in.scores) mapped.push_back(std::exp(3 * s) - 7);
    EXPECT_NEAR(average_precision(mapped, in.truth), average_precision(in.scores, in.truth), 1e-12);
    EXPECT_NEAR(roc_auc(mapped, in.truth), roc_auc(in.scores, in.truth), 1e-12);
    EXPECT_NEAR(f1(mapped, in.truth, std::exp(1.5) - 7), f1(in.scores, in.truth, 0.5), 1e-12);
  }
}

TEST(Metrics, ReversedCleanSeparation) {
  // 2 positives ranked last among 5: AUC flips to 0; AP hits its floor
  // (1/4 + 2/5) / 2 by the staircase.
  const std::vector<double> scores{0.9, 0.8, 0.7, 0.2, 0.1};
  const std::vector<int> truth{0, 0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(roc_auc(scores, truth), 0.0);
  EXPECT_NEAR(average_precision(scores, truth), oracle::staircase_ap(scores, truth), 1e-15);
  EXPECT_NEAR(average_precision(scores, truth), (0.25 + 0.4) / 2, 1e-15);
}

TEST(Aggregate, IntervalsAndOrderInvariance) {
  EXPECT_EQ(mean_interval({0.4, 0.4, 0.4}).half_width, 0.0);
  EXPECT_EQ(mean_interval({0.7}).half_width, 0.0);
  const auto two = mean_interval({0.3, 0.5});
  EXPECT_NEAR(two.mean, 0.4, 1e-15);
  // s = 0.1 * sqrt(2), so the half-width is t_{0.975,1} * 0.1; t_{0.975,1} = tan(0.475 pi).
  EXPECT_NEAR(two.half_width, std::tan(0.475 * M_PI) * 0.1, 1e-9);
  EXPECT_NEAR(two.half_width, 1.2706204736174705, 1e-9);

  std::vector<RunMetrics> runs(3);
  runs[0].map = 0.2;
  runs[1].map = 0.5;
  runs[2].map = 0.35;
  for (auto& r : runs) r.per_class["a"] = {0.5, 0.5, 0.5, true, true, 4, 2};
  const auto a = aggregate(runs);
  std::swap(runs[0], runs[2]);
  const auto b = aggregate(runs);
  EXPECT_EQ(a.map.mean, b.map.mean);
  EXPECT_EQ(a.map.half_width, b.map.half_width);
  EXPECT_EQ(a.per_class_ap.at("a"), 0.5);
}

TEST(MacroMetrics, SkipsUndefinedClasses) {
  std::map<std::string, ClassScores> by_class;
  by_class["a"] = {{0.9, 0.2, 0.4}, {1, 0, 0}};
  by_class["b"] = {{0.6, 0.7}, {1, 1}};  // AUC undefined
  by_class["c"] = {{0.1, 0.3}, {0, 0}};  // AP undefined
  const auto run = macro_metrics(by_class, 0.5);
  EXPECT_DOUBLE_EQ(run.map, 1.0);
  EXPECT_DOUBLE_EQ(run.auc, 1.0);
  EXPECT_DOUBLE_EQ(run.f1, (1.0 + 1.0) / 2);
  EXPECT_EQ(run.skipped, (std::vector<std::string>{"b", "c"}));
  EXPECT_THROW(macro_metrics({{"c", by_class["c"]}}, 0.5), Error);
}

TEST(Report, CsvAndJsonColumns) {
  MetricsReport rep;
  rep.method = "lad";
  rep.beta = "30";
  SplitReport s;
  s.map = {0.4033, 0.0157};
  s.auc = {0.871, 0.0073};
  s.f1 = {0.4382, 0.0121};
  rep.splits["evaluation"] = s;
  rep.splits["validation"] = s;
  const auto csv = report_to_csv({rep});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,beta,split,mAP,mAP_hw,AUC,AUC_hw,F1,F1_hw");
  EXPECT_NE(csv.find("lad,30,evaluation,40.33,1.57,87.10,0.73,43.82,1.21"), std::string::npos) << csv;
  const auto json = report_to_json(rep);
  EXPECT_NE(json.find("\"validation\""), std::string::npos);
  EXPECT_NE(json.find("\"half_width\""), std::string::npos);
}

}  // namespace
}  // namespace ladproto
