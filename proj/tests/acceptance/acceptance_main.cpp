// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances are pinned below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "common/error.h"
#include "common/io.h"
#include "common/rng.h"
#include "curation/curation.h"
#include "dsp/dsp.h"
#include "episodic/episodic.h"
#include "harness/commands.h"
#include "harness/config.h"
#include "harness/features.h"
#include "metrics/metrics.h"
#include "neural/neural.h"
#include "support/oracles.h"
#include "taxonomy/taxonomy.h"

namespace ladproto {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr double kFdStep = 1e-4;
constexpr double kFdRel = 1e-4;
constexpr double kFdAbs = 1e-6;
constexpr double kGradientBudgetSeconds = 60.0;
constexpr double kOracleTol = 1e-9;
constexpr int kOracleInstances = 100;
constexpr double kReductionTol = 1e-9;
constexpr int kReductionSteps = 200;
constexpr double kSumTol = 1e-9;
constexpr double kMinNovelAccuracy = 0.90;
constexpr double kBenchmarkBudgetSeconds = 600.0;
constexpr double kParsevalRel = 1e-6;
constexpr size_t kFsdEligible = 143;
constexpr size_t kFsdSplit[3] = {100, 29, 14};
constexpr size_t kFsdSlack = 3;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Collects failures; keeps the first few messages for the report line.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (ok) return;
    ++failures_;
    if (messages_.size() < 3) messages_.push_back(what);
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return failures_ == 0; }
  size_t count() const { return count_; }
  std::string summary() const {
    std::ostringstream out;
    if (ok()) {
      out << count_ << " checks";
    } else {
      out << failures_ << " of " << count_ << " checks failed";
      for (const auto& m : messages_) out << "; " << m;
    }
    for (const auto& n : notes_) out << "; " << n;
    return out.str();
  }

 private:
  size_t count_ = 0, failures_ = 0;
  std::vector<std::string> messages_, notes_;
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream out;
  out.precision(digits);
  out << v;
  return out.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ladproto_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<double> random_vec(Rng& rng, size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

Tensor<double> random_tensor(std::vector<size_t> shape, Rng& rng) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values) v = rng.normal();
  return t;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_gradient(Check& check, std::vector<double>* x, const std::vector<double>& analytic,
                    const std::function<double()>& f, const std::string& what) {
  if (x->size() != analytic.size()) {
    check.expect(false, what + ": gradient size mismatch");
    return;
  }
  for (size_t i = 0; i < x->size(); ++i) {
    const double saved = (*x)[i];
    (*x)[i] = saved + kFdStep;
    const double up = f();
    (*x)[i] = saved - kFdStep;
    const double down = f();
    (*x)[i] = saved;
    const double numeric = (up - down) / (2 * kFdStep);
    const double tol = kFdAbs + kFdRel * std::max(std::abs(analytic[i]), std::abs(numeric));
    check.expect(std::abs(analytic[i] - numeric) <= tol,
                 what + "[" + std::to_string(i) + "] analytic " + fmt(analytic[i]) + " numeric " + fmt(numeric));
  }
}

// Dog -> Bark, Animal -> {Dog, Cat}; Music -> Guitar; Bell.
Taxonomy small_taxonomy() {
  return Taxonomy({{"animal", "Animal", {"dog", "cat"}},
                   {"dog", "Dog", {"bark"}},
                   {"bark", "Bark", {}},
                   {"cat", "Cat", {}},
                   {"music", "Music", {"guitar"}},
                   {"guitar", "Guitar", {}},
                   {"bell", "Bell", {}}});
}

std::vector<ClipRecord> clips_for(const std::vector<ClassId>& classes, int per_class,
                                  const std::vector<std::vector<ClassId>>& extra) {
  std::vector<ClipRecord> out;
  int n = 0;
  auto add = [&](std::vector<ClassId> labels) {
    std::sort(labels.begin(), labels.end());
    out.push_back({"x" + std::to_string(n++), labels, SourceSplit::kDev});
  };
  for (const auto& c : classes) {
    for (int i = 0; i < per_class; ++i) add({c});
  }
  for (const auto& labels : extra) add(labels);
  return out;
}

void attach_features(ExamplePool& pool, size_t rows, size_t cols, uint64_t seed) {
  Rng rng(seed);
  std::map<ClassId, std::vector<double>> centers;
  for (const auto& c : pool.classes()) centers[c] = random_vec(rng, rows * cols);
  for (const auto& rec : pool.records()) {
    Tensor<float> x({1, rows, cols});
    for (size_t i = 0; i < x.size(); ++i) {
      double v = 0.3 * rng.normal();
      for (const auto& l : rec.labels) v += centers[l][i];
      x.values[i] = static_cast<float>(v);
    }
    pool.features.push_back(std::move(x));
  }
}

// 1. Every layer, the full network and the full LaD episode loss against
// central finite differences in double precision.
Check criterion_gradients() {
  Check check;
  const auto start = Clock::now();
  Rng rng(101);
  for (int trial = 0; trial < 4; ++trial) {
    const size_t cin = 1 + rng.uniform_index(3), cout = 1 + rng.uniform_index(3);
    const size_t h = 2 + rng.uniform_index(5), w = 2 + rng.uniform_index(5);
    auto x = random_tensor({cin, h, w}, rng);
    auto W = random_tensor({cout, cin, 3, 3}, rng);
    auto B = random_tensor({cout}, rng);
    const auto r = random_tensor({cout, h, w}, rng).values;
    auto conv = [&] { return dot(layers::conv2d_forward(x, W, B).values, r); };
    std::vector<double> dx(x.size()), dw(W.size()), db(B.size());
    layers::conv2d_backward(x, W, r, dx, dw, db);
    check_gradient(check, &x.values, dx, conv, "conv dx");
    check_gradient(check, &W.values, dw, conv, "conv dw");
    check_gradient(check, &B.values, db, conv, "conv db");

    // Inputs on a 0.05 lattice keep every perturbation away from relu kinks
    // and max-pool ties.
    auto y = random_tensor({cin, h, w}, rng);
    std::vector<size_t> order(y.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (size_t i = 0; i < order.size(); ++i) y.values[order[i]] = 0.05 * (static_cast<double>(i) + 0.5 - order.size() / 2.0);
    const auto r_same = random_tensor({cin, h, w}, rng).values;
    std::vector<double> dy(y.size());
    layers::relu_backward(layers::relu_forward(y), r_same, dy);
    check_gradient(check, &y.values, dy, [&] { return dot(layers::relu_forward(y).values, r_same); }, "relu");

    std::vector<uint32_t> argmax;
    const auto pooled = layers::maxpool_forward(y, argmax);
    const auto r_pool = random_tensor(pooled.shape, rng).values;
    dy.assign(y.size(), 0.0);
    layers::maxpool_backward(argmax, r_pool, dy);
    check_gradient(check, &y.values, dy, [&] {
      std::vector<uint32_t> unused;
      return dot(layers::maxpool_forward(y, unused).values, r_pool);
    }, "maxpool");

    const auto r_gap = random_tensor({cin}, rng).values;
    dy.assign(y.size(), 0.0);
    layers::global_avg_pool_backward(y, r_gap, dy);
    check_gradient(check, &y.values, dy, [&] { return dot(layers::global_avg_pool_forward(y).values, r_gap); },
                   "global pool");

    auto gamma = random_tensor({cin}, rng), beta = random_tensor({cin}, rng), mean = random_tensor({cin}, rng);
    Tensor<double> var({cin});
    for (auto& v : var.values) v = 0.5 + rng.uniform01();
    auto norm = [&] { return dot(layers::channel_norm_forward(y, gamma, beta, mean, var).values, r_same); };
    std::vector<double> dg(cin), dbeta(cin);
    dy.assign(y.size(), 0.0);
    layers::channel_norm_backward(y, gamma, mean, var, r_same, dy, dg, dbeta);
    check_gradient(check, &y.values, dy, norm, "norm dx");
    check_gradient(check, &gamma.values, dg, norm, "norm dgamma");
    check_gradient(check, &beta.values, dbeta, norm, "norm dbeta");
  }

  for (bool with_norm : {false, true}) {
    ArchConfig arch;
    arch.channels = {2, 3, 2, 3};
    arch.norm = with_norm;
    auto net = init_parameters<double>(arch, with_norm ? 12 : 11);
    for (auto& p : net.parameters()) {
      if (p.tensor.shape.size() == 1) {
        for (auto& v : p.tensor.values) v += 0.1 * rng.normal();
      }
    }
    for (auto& b : net.buffers()) {
      for (auto& v : b.tensor.values) v = b.name.ends_with("var") ? 0.5 + rng.uniform01() : 0.1 * rng.normal();
    }
    auto x = random_tensor({1, 9, 8}, rng);
    const auto r = random_tensor({3}, rng).values;
    Tape<double> tape;
    net.forward(x, &tape);
    const auto dx = net.backward(tape, r);
    auto loss = [&] { return dot(net.forward(x).values, r); };
    const std::string tag = with_norm ? "net+norm " : "net ";
    for (auto& p : net.parameters()) {
      const auto analytic = p.tensor.grad;
      check_gradient(check, &p.tensor.values, analytic, loss, tag + p.name);
    }
    check_gradient(check, &x.values, dx, loss, tag + "input");
  }

  // Full LaD episode: multi-label queries with parent/child pairs, taxonomy
  // smoothing, alignment and the max combination.
  const auto t = small_taxonomy();
  ExamplePool pool(clips_for(t.ids(), 3, {{"bark", "dog", "animal"}, {"guitar", "music", "bell"}}),
                   {t.ids().begin(), t.ids().end()});
  attach_features(pool, 8, 8, 3);
  ArchConfig arch;
  arch.channels = {3, 3, 4, 4};
  for (Smoothing smoothing : {Smoothing::kOneHot, Smoothing::kTaxonomy}) {
    EpisodeConfig cfg;
    cfg.n_way = 3;
    cfg.k_shot = 2;
    cfg.smoothing = smoothing;
    cfg.beta = 1.0;
    auto net = init_parameters<double>(arch, 5);
    for (size_t query : {pool.size() - 2, pool.size() - 1}) {
      const Rng origin(21 + query);
      Rng rng_episode = origin;
      net.zero_grad();
      run_episode(query, pool, net, cfg, Method::kLad, t, rng_episode, true);
      auto loss = [&] {
        Rng r = origin;
        return run_episode(query, pool, net, cfg, Method::kLad, t, r, false).loss;
      };
      for (auto& p : net.parameters()) {
        const auto analytic = p.tensor.grad;
        check_gradient(check, &p.tensor.values, analytic, loss, "episode " + p.name);
      }
    }
  }
  const double elapsed = seconds_since(start);
  check.expect(elapsed < kGradientBudgetSeconds, "gradient suite took " + fmt(elapsed) + " s");
  check.note(fmt(elapsed, 3) + " s");
  return check;
}

// 2. Library routines against independent straight-line oracles.
Check criterion_oracles() {
  Check check;
  Rng rng(202);
  auto near = [&](double a, double b, const std::string& what) {
    check.expect(std::abs(a - b) <= kOracleTol, what + ": " + fmt(a, 17) + " vs " + fmt(b, 17));
  };
  size_t instances[7] = {};
  for (int trial = 0; trial < kOracleInstances; ++trial) {
    const size_t dim = 1 + rng.uniform_index(6), n = 2 + rng.uniform_index(6);
    std::vector<std::vector<Embedding>> supports(n);
    for (auto& s : supports) {
      s.resize(1 + rng.uniform_index(5));
      for (auto& e : s) e = random_vec(rng, dim);
    }
    const auto protos = compute_prototypes(supports);
    for (size_t k = 0; k < n; ++k) {
      const auto ref = oracle::mean(supports[k]);
      for (size_t i = 0; i < dim; ++i) near(protos[k][i], ref[i], "prototype");
    }
    ++instances[0];

    const auto q = random_vec(rng, dim);
    std::vector<double> d;
    for (const auto& p : protos) d.push_back(oracle::sq_euclidean(q, p));
    const auto probs = class_probabilities(q, protos, Distance::kSquaredEuclidean);
    const auto ref_probs = oracle::softmax_of_negated(d);
    for (size_t k = 0; k < n; ++k) near(probs[k], ref_probs[k], "class_probabilities");
    ++instances[1];

    const auto target = oracle::softmax_of_negated(random_vec(rng, n));
    near(task_loss(probs, target), oracle::cross_entropy(target, probs), "task_loss");
    ++instances[2];

    // Redraw single-node forests, which admit no roster of two.
    Taxonomy tax(oracle::random_forest(rng, 25));
    while (tax.size() < 2) tax = Taxonomy(oracle::random_forest(rng, 25));
    const auto& ids = tax.ids();
    const size_t m = std::min<size_t>(ids.size(), 2 + rng.uniform_index(8));
    {
      std::vector<ClassId> roster;
      for (size_t i : rng.sample_without_replacement(ids.size(), m)) roster.push_back(ids[i]);
      const ClassId positive = roster[rng.uniform_index(m)];
      const double beta = 0.1 + 3.0 * rng.uniform01();
      const auto labels = embed_labels(roster, positive, tax, beta);
      std::vector<double> scaled;
      for (const auto& c : roster) scaled.push_back(beta * oracle::bfs_distance(tax, c, positive));
      const auto ref = oracle::softmax_of_negated(scaled);
      for (size_t i = 0; i < m; ++i) near(labels[i], ref[i], "embed_labels");
      ++instances[3];
    }

    // Scores on a coarse grid so ties occur.
    const size_t len = 2 + rng.uniform_index(30);
    std::vector<double> scores(len);
    std::vector<int> truth(len);
    for (size_t i = 0; i < len; ++i) {
      scores[i] = static_cast<double>(rng.uniform_index(8)) / 8.0;
      truth[i] = rng.bernoulli(0.4) ? 1 : 0;
    }
    truth[0] = 1;
    truth[1] = 0;
    near(average_precision(scores, truth), oracle::staircase_ap(scores, truth), "average_precision");
    near(roc_auc(scores, truth), oracle::pair_count_auc(scores, truth), "roc_auc");
    const double threshold = rng.uniform01();
    near(f1(scores, truth, threshold), oracle::counted_f1(scores, truth, threshold), "f1");
    instances[4] += 1;
    instances[5] += 1;
    instances[6] += 1;
  }
  const char* names[7] = {"prototypes", "probabilities", "task_loss", "embed_labels", "ap", "auc", "f1"};
  std::string counts;
  for (int i = 0; i < 7; ++i) {
    check.expect(instances[i] >= static_cast<size_t>(kOracleInstances),
                 std::string(names[i]) + " saw only " + std::to_string(instances[i]) + " instances");
    counts += (i ? "," : "") + std::string(names[i]) + "=" + std::to_string(instances[i]);
  }
  check.note(counts);
  return check;
}

const char* kFlatConfig = R"(paths.ontology = ontology.json
paths.metadata = metadata.csv
paths.output = out
synth.n_roots = 10
synth.depth = 1
synth.n_clips = 300
synth.labels_per_clip = 2
synth.seed = 4
curation.keep_depths = 0
curation.ratio = 6:2:2
features.frames = 8
features.mels = 8
net.channels = 4,4,8,8
episode.n_way = 4
episode.k_shot = 3
train.steps = 200
)";

// 3. On a flat taxonomy LaD reduces to one-vs-rest: identical loss traces.
Check criterion_reduction() {
  Check check;
  const fs::path dir = scratch("flat");
  std::string text = kFlatConfig;
  text = text.replace(text.find("train.steps = 200"), 17, "train.steps = " + std::to_string(kReductionSteps));
  Config c = Config::parse(text, dir);
  cmd_synth(c);
  cmd_curate(c);
  c.set("method", "lad", dir);
  const auto lad = cmd_train(c).losses;
  c.set("method", "one-vs-rest", dir);
  const auto ovr = cmd_train(c).losses;
  check.expect(lad.size() == static_cast<size_t>(kReductionSteps) && ovr.size() == lad.size(),
               "expected " + std::to_string(kReductionSteps) + " losses, got " + std::to_string(lad.size()) + " and " +
                   std::to_string(ovr.size()));
  double worst = 0.0;
  for (size_t i = 0; i < std::min(lad.size(), ovr.size()); ++i) {
    worst = std::max(worst, std::abs(lad[i] - ovr[i]));
    check.expect(std::abs(lad[i] - ovr[i]) <= kReductionTol, "step " + std::to_string(i) + " diverges");
  }
  check.note("max |delta| " + fmt(worst, 3));
  return check;
}

// 4. Taxonomy-smoothed labels on random forests and rosters.
Check criterion_smoothing() {
  Check check;
  Rng rng(404);
  const double betas[3] = {15, 30, 45};
  size_t instances = 0, skipped = 0;
  while (instances < static_cast<size_t>(kOracleInstances)) {
    Taxonomy t(oracle::random_forest(rng, 20));
    const auto& ids = t.ids();
    if (ids.size() < 2) continue;
    const size_t n = std::min<size_t>(ids.size(), 2 + rng.uniform_index(8));
    std::vector<ClassId> roster;
    for (size_t i : rng.sample_without_replacement(ids.size(), n)) roster.push_back(ids[i]);
    const size_t pos = rng.uniform_index(n);
    std::vector<int> d;
    int nearest = 1 << 30;
    for (size_t i = 0; i < n; ++i) {
      d.push_back(oracle::bfs_distance(t, roster[i], roster[pos]));
      if (i != pos) nearest = std::min(nearest, d.back());
    }
    // exp(-45 * 16) is below the smallest double; such rosters cannot show a
    // strict decrease in floating point.
    if (nearest > 15) {
      ++skipped;
      continue;
    }
    ++instances;
    std::vector<double> ce;
    for (double beta : betas) {
      const auto q = embed_labels(roster, roster[pos], t, beta);
      double sum = 0.0, neg_ratio = 0.0;
      for (size_t i = 0; i < n; ++i) {
        sum += q[i];
        if (i != pos) {
          check.expect(q[i] < q[pos], "argmax is not the positive class");
          neg_ratio += q[i] / q[pos];
        }
        for (size_t j = 0; j < n; ++j) {
          if (d[i] < d[j]) check.expect(q[i] >= q[j], "entries increase with distance");
          if (d[i] == d[j]) check.expect(q[i] == q[j], "equal distances, unequal entries");
        }
      }
      check.expect(std::abs(sum - 1.0) <= kSumTol, "sum " + fmt(sum, 17));
      // -log q_pos written as log1p of the negative mass, which stays
      // representable where 1 - q_pos rounds to zero.
      ce.push_back(std::log1p(neg_ratio));
    }
    check.expect(ce[0] > ce[1] && ce[1] > ce[2],
                 "cross-entropy not strictly decreasing: " + fmt(ce[0]) + ", " + fmt(ce[1]) + ", " + fmt(ce[2]));
  }
  check.note(std::to_string(instances) + " rosters, " + std::to_string(skipped) + " with nearest negative beyond 15 hops");
  return check;
}

// Hand formula: each label whose parent is also present contributes
// max(child, parent); labels in no such pair contribute their own loss.
double hand_sum_of_max(const std::map<ClassId, double>& losses, const std::vector<ClassId>& labels,
                       const Taxonomy& t) {
  std::set<ClassId> present(labels.begin(), labels.end()), paired;
  double total = 0.0;
  for (const auto& l : labels) {
    const auto parent = t.parent_of(l);
    if (parent && present.count(*parent)) {
      total += std::max(losses.at(l), losses.at(*parent));
      paired.insert(l);
      paired.insert(*parent);
    }
  }
  for (const auto& l : labels) {
    if (!paired.count(l)) total += losses.at(l);
  }
  return total;
}

// 5. The max combination on constructed episodes.
Check criterion_episode_loss() {
  Check check;
  const auto t = small_taxonomy();
  const std::vector<std::vector<ClassId>> hierarchical = {
      {"dog", "animal"},          {"bark", "dog"},         {"bark", "dog", "animal"},
      {"dog", "cat", "animal"},   {"guitar", "music"},     {"bark", "dog", "animal", "guitar", "music"},
      {"cat", "animal", "bell"},  {"bark", "animal"},      {"guitar", "music", "bell", "cat"}};
  const std::vector<std::vector<ClassId>> independent = {
      {"cat", "bell"}, {"dog", "guitar"}, {"bark", "cat", "music", "bell"}, {"animal", "music", "bell"}, {"cat"}};
  Rng rng(505);
  // Multiples of 1/64 keep every sum exact, so equality is bitwise.
  auto dyadic = [&] { return static_cast<double>(rng.uniform_index(640)) / 64.0; };
  for (int trial = 0; trial < 50; ++trial) {
    for (const auto& labels : hierarchical) {
      std::map<ClassId, double> losses;
      for (const auto& l : labels) losses[l] = dyadic();
      const double got = episode_loss(losses, labels, t).total;
      const double want = hand_sum_of_max(losses, labels, t);
      check.expect(got == want, "hierarchical episode: " + fmt(got, 17) + " vs " + fmt(want, 17));
    }
    for (const auto& labels : independent) {
      std::map<ClassId, double> losses;
      double plain = 0.0;
      for (const auto& l : labels) plain += (losses[l] = dyadic());
      const double got = episode_loss(losses, labels, t).total;
      check.expect(got == plain, "independent labels: " + fmt(got, 17) + " vs plain sum " + fmt(plain, 17));
    }
  }
  // Fixed worked cases.
  check.expect(episode_loss({{"dog", 0.5}, {"animal", 0.75}}, {"dog", "animal"}, t).total == 0.75, "max(0.5, 0.75)");
  check.expect(episode_loss({{"bark", 0.25}, {"dog", 0.5}, {"animal", 0.125}}, {"bark", "dog", "animal"}, t).total ==
                   0.5 + 0.5,
               "chain bark/dog/animal");
  check.expect(episode_loss({{"cat", 0.5}, {"bell", 0.75}}, {"cat", "bell"}, t).total == 1.25, "independent pair");

  // Real episodes: the combined loss over sampled tasks equals the hand
  // formula applied to the per-task losses.
  ExamplePool pool(clips_for(t.ids(), 4, {{"bark", "dog", "animal"}, {"guitar", "music", "bell"}, {"cat", "bell"}}),
                   {t.ids().begin(), t.ids().end()});
  EpisodeConfig cfg;
  cfg.n_way = 3;
  cfg.k_shot = 2;
  for (size_t query : {pool.size() - 3, pool.size() - 2, pool.size() - 1}) {
    const auto& labels = pool.records()[query].labels;
    const auto tasks = build_tasks(query, pool, cfg, Method::kLad, t, rng);
    std::map<size_t, Embedding> emb;
    for (size_t i = 0; i < pool.size(); ++i) emb[i] = random_vec(rng, 4);
    const auto with_max = evaluate_tasks(tasks, emb, cfg, t, true, labels);
    const auto plain = evaluate_tasks(tasks, emb, cfg, t, false, labels);
    std::map<ClassId, double> per_label;
    double sum = 0.0;
    for (const auto& r : with_max.tasks) {
      per_label[r.task.active_class] = r.loss;
      sum += r.loss;
    }
    const double want = hand_sum_of_max(per_label, labels, t);
    check.expect(std::abs(with_max.loss - want) <= 1e-12 * std::max(1.0, want),
                 "sampled episode: " + fmt(with_max.loss, 17) + " vs " + fmt(want, 17));
    check.expect(std::abs(plain.loss - sum) <= 1e-12 * std::max(1.0, sum), "sampled episode plain sum");
  }
  return check;
}

// 6. Bundled benchmark end to end: LaD and baseline with paired seeds.
Check criterion_benchmark() {
  Check check;
  const auto start = Clock::now();
  const fs::path dir = scratch("benchmark");
  Config c = Config::load(fs::path(LADPROTO_DATA_DIR) / "synthetic" / "benchmark.cfg");
  c.set("paths.split_manifest", (dir / "split_manifest.json").string());
  c.set("paths.output", dir.string());
  cmd_curate(c);
  std::map<std::string, EvalResult> results;
  for (const std::string method : {"lad", "baseline"}) {
    c.set("method", method);
    c.set("paths.output", (dir / method).string());
    cmd_train(c);
    results[method] = cmd_eval(c);
  }
  const double elapsed = seconds_since(start);
  const auto& lad = results["lad"];
  const auto& base = results["baseline"];
  const double accuracy = lad.accuracy.count("novel") ? lad.accuracy.at("novel").mean : 0.0;
  const double lad_map = lad.report.splits.at("novel").map.mean;
  const double base_map = base.report.splits.at("novel").map.mean;
  check.expect(accuracy >= kMinNovelAccuracy, "novel 5-way 5-shot accuracy " + fmt(accuracy, 4));
  check.expect(lad_map >= base_map, "LaD mAP " + fmt(lad_map, 4) + " below baseline " + fmt(base_map, 4));
  check.expect(elapsed < kBenchmarkBudgetSeconds, "benchmark took " + fmt(elapsed, 4) + " s");
  check.note("accuracy " + fmt(accuracy, 4) + ", mAP lad " + fmt(lad_map, 4) + " vs baseline " + fmt(base_map, 4) +
             ", " + fmt(elapsed, 4) + " s");
  return check;
}

// 7. Golden manifest for the bundled metadata; optional real-data check.
Check criterion_curation() {
  Check check;
  const fs::path dir = scratch("curation");
  Config c = Config::load(fs::path(LADPROTO_DATA_DIR) / "synthetic" / "benchmark.cfg");
  c.set("paths.output", dir.string());
  c.set("paths.split_manifest", (dir / "manifest.json").string());
  for (int run = 0; run < 2; ++run) {
    cmd_curate(c);
    const std::string produced = read_file(dir / "manifest.json");
    const std::string golden = read_file(fs::path(LADPROTO_GOLDEN_DIR) / "synthetic_split_manifest.json");
    check.expect(produced == golden, "manifest differs from the golden file");
  }
  const char* real = std::getenv("LADPROTO_FSD50K_DIR");
  if (!real) {
    check.note("FSD50K check skipped (set LADPROTO_FSD50K_DIR; network-dependent)");
    return check;
  }
  const fs::path root(real);
  const auto t = load_taxonomy_file(root / "ontology.json");
  const auto records = load_metadata_csv(root / "dev.csv", SourceSplit::kDev);
  CurationOptions options;
  options.keep_depths = {1, 2};
  const auto data = curate(t, records, options);
  check.expect(data.eligible_count == kFsdEligible, "eligible classes " + std::to_string(data.eligible_count));
  const size_t sizes[3] = {data.split.base.size(), data.split.validation.size(), data.split.evaluation.size()};
  for (int i = 0; i < 3; ++i) {
    const size_t gap = sizes[i] > kFsdSplit[i] ? sizes[i] - kFsdSplit[i] : kFsdSplit[i] - sizes[i];
    check.expect(gap <= kFsdSlack, "split part " + std::to_string(i) + " has " + std::to_string(sizes[i]));
  }
  check.note("FSD50K split " + std::to_string(sizes[0]) + "/" + std::to_string(sizes[1]) + "/" +
             std::to_string(sizes[2]));
  return check;
}

// 8. Front end: framing, energy, localization, caching and default shape.
Check criterion_dsp() {
  Check check;
  const double pi = std::numbers::pi;
  DspConfig cfg;
  for (size_t n : {1ul, 100ul, 881ul, 882ul, 883ul, 1322ul, 1323ul, 44100ul, 44101ul, 100000ul}) {
    const size_t expected = n < 882 ? 1 : 1 + (n - 882) / 441;
    check.expect(frame_count(n, cfg) == expected, "frame_count(" + std::to_string(n) + ")");
    Waveform w;
    w.samples.assign(n, 0.25);
    check.expect(stft(w, cfg).rows == expected, "stft rows for " + std::to_string(n));
  }

  Rng rng(808);
  Waveform noise;
  noise.samples.resize(12000);
  for (auto& x : noise.samples) x = 0.1 * rng.normal();
  const auto spec = stft(noise, cfg);
  const auto window = hann_window(cfg.window_length);
  const int nfft = cfg.resolved_fft_size();
  for (size_t f = 0; f < spec.rows; ++f) {
    double time_energy = 0.0;
    for (int i = 0; i < cfg.window_length; ++i) {
      const double x = noise.samples[f * cfg.hop + i] * window[i];
      time_energy += x * x;
    }
    double freq_energy = std::norm(spec.at(f, 0)) + std::norm(spec.at(f, nfft / 2));
    for (int k = 1; k < nfft / 2; ++k) freq_energy += 2.0 * std::norm(spec.at(f, k));
    freq_energy /= nfft;
    check.expect(std::abs(freq_energy / time_energy - 1.0) <= kParsevalRel, "Parseval frame " + std::to_string(f));
  }

  const auto edges = mel_band_edges_hz(cfg);
  for (int bin : {20, 57, 133, 301}) {
    const double freq = bin * cfg.sample_rate / nfft;
    Waveform tone;
    tone.samples.resize(8000);
    for (size_t i = 0; i < tone.samples.size(); ++i) tone.samples[i] = 0.5 * std::sin(2 * pi * freq * i / cfg.sample_rate);
    const auto s = stft(tone, cfg);
    for (size_t f = 0; f < s.rows; ++f) {
      size_t peak = 0;
      for (size_t k = 1; k < s.cols; ++k) {
        if (std::abs(s.at(f, k)) > std::abs(s.at(f, peak))) peak = k;
      }
      check.expect(peak == static_cast<size_t>(bin), "sine peak at bin " + std::to_string(peak));
    }
    // The loudest mel band is one whose triangle contains the tone.
    const auto lm = logmel(tone, cfg);
    size_t band = 0;
    for (size_t m = 1; m < lm.values.cols; ++m) {
      if (lm.values.at(0, m) > lm.values.at(0, band)) band = m;
    }
    check.expect(edges[band] <= freq && freq <= edges[band + 2],
                 "tone " + fmt(freq) + " Hz peaks in band " + std::to_string(band));
  }

  Waveform second;
  second.samples.resize(44100);
  for (auto& x : second.samples) x = 0.1 * rng.normal();
  const auto one_second = logmel(second, cfg);
  check.expect(one_second.values.rows == 99 && one_second.values.cols == 64,
               "1 s clip gives " + std::to_string(one_second.values.rows) + "x" +
                   std::to_string(one_second.values.cols));

  FeatureFile file{one_second.values, one_second.config_fingerprint, "clip"};
  const std::string bytes = encode_feature_file(file);
  const auto back = decode_feature_file(bytes);
  bool exact = back.values.rows == 99 && back.values.cols == 64;
  for (size_t i = 0; exact && i < back.values.data.size(); ++i) {
    exact = back.values.data[i] == static_cast<double>(static_cast<float>(one_second.values.data[i]));
  }
  check.expect(exact, "decoded payload differs from float32 values");
  check.expect(encode_feature_file(back) == bytes, "re-encoding changes bytes");

  // Cache miss then hit through the extraction path.
  const fs::path dir = scratch("dsp_cache");
  fs::create_directories(dir / "audio");
  write_file(dir / "audio" / "clip.wav", encode_wav_pcm16(second));
  const std::vector<ClipRecord> records = {{"clip", {"a"}, SourceSplit::kDev}};
  const auto miss = extract_logmels(records, dir / "audio", cfg, dir / "cache", 99, 1);
  const auto hit = extract_logmels(records, dir / "audio", cfg, dir / "cache", 99, 1);
  size_t cached = 0;
  for (const auto& e : fs::directory_iterator(dir / "cache")) cached += e.path().extension() == ".lpfeat";
  check.expect(cached == 1, "expected one cache file, found " + std::to_string(cached));
  check.expect(miss.size() == 1 && hit.size() == 1 && miss[0].data == hit[0].data, "cache hit differs from miss");
  return check;
}

}  // namespace
}  // namespace ladproto

// Optional arguments pick criteria by number, e.g. `acceptance 1 8`.
int main(int argc, char** argv) {
  using namespace ladproto;
  set_log_sink([](const std::string&) {});
  struct Criterion {
    const char* title;
    std::function<Check()> run;
  };
  const std::vector<Criterion> criteria = {
      {"gradient correctness", criterion_gradients},
      {"oracle equivalence", criterion_oracles},
      {"flat-taxonomy reduction to one-vs-rest", criterion_reduction},
      {"label smoothing properties", criterion_smoothing},
      {"max-pair episode loss", criterion_episode_loss},
      {"end-to-end synthetic benchmark", criterion_benchmark},
      {"curation golden manifest", criterion_curation},
      {"DSP front end", criterion_dsp},
  };
  std::set<size_t> selected;
  for (int a = 1; a < argc; ++a) selected.insert(std::strtoul(argv[a], nullptr, 10));
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && !selected.count(i + 1)) continue;
    Check check;
    try {
      check = criteria[i].run();
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    std::printf("%s [%zu] %s: %s\n", check.ok() ? "PASS" : "FAIL", i + 1, criteria[i].title, check.summary().c_str());
    std::fflush(stdout);
    failed += !check.ok();
  }
  return failed == 0 ? 0 : 1;
}
