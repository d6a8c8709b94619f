#include "harness/evaluation.h"

#include <algorithm>
#include <set>

#include "common/error.h"
#include "common/rng.h"
#include "harness/features.h"

namespace ladproto {

std::vector<Embedding> embed_pool(const EmbeddingNetwork<float>& net, const ExamplePool& pool, int threads) {
  if (pool.features.size() != pool.size()) fail(ErrorKind::kState, "embed_pool: pool has no features");
  std::vector<Embedding> out(pool.size());
  parallel_for(pool.size(), threads, [&](size_t i) {
    const Tensor<float> z = net.forward(pool.features[i]);
    out[i].assign(z.values.begin(), z.values.end());
  });
  return out;
}

namespace {

std::vector<Embedding> prototypes_for(const std::vector<std::vector<size_t>>& support,
                                      const std::vector<Embedding>& embeddings) {
  std::vector<std::vector<Embedding>> sets;
  for (const auto& slot : support) {
    std::vector<Embedding> s;
    for (size_t i : slot) s.push_back(embeddings[i]);
    sets.push_back(std::move(s));
  }
  return compute_prototypes(sets);
}

}  // namespace

RunMetrics evaluate_run(const ExamplePool& pool, const std::vector<Embedding>& embeddings, const EvalConfig& eval,
                        Distance distance, uint64_t seed, RunMetrics* control) {
  if (embeddings.size() != pool.size()) fail(ErrorKind::kState, "evaluate_run: embeddings do not match the pool");
  if (pool.size() == 0) fail(ErrorKind::kInfeasible, "evaluate_run: novel pool is empty");
  if (pool.classes().size() < static_cast<size_t>(eval.n_way)) {
    fail(ErrorKind::kInfeasible, "evaluate_run: " + std::to_string(eval.n_way) + "-way episodes need " +
                                     std::to_string(eval.n_way) + " classes, pool has " +
                                     std::to_string(pool.classes().size()));
  }
  pool.require_examples(static_cast<size_t>(eval.k_shot) + 1, "evaluation");
  Rng rng(seed);
  std::map<std::string, ClassScores> scores, uniform;
  for (int e = 0; e < eval.episodes; ++e) {
    const size_t query = rng.uniform_index(pool.size());
    const auto& labels = pool.records()[query].labels;
    std::vector<ClassId> roster(labels.begin(), labels.end());
    std::vector<ClassId> others;
    for (const auto& c : pool.classes()) {
      if (!std::binary_search(labels.begin(), labels.end(), c)) others.push_back(c);
    }
    const size_t extra = roster.size() < static_cast<size_t>(eval.n_way) ? eval.n_way - roster.size() : 0;
    for (size_t i : rng.sample_without_replacement(others.size(), extra)) roster.push_back(others[i]);
    const std::set<ClassId> roster_set(roster.begin(), roster.end());
    std::vector<std::vector<size_t>> support;
    for (const auto& c : roster) {
      support.push_back(sample_supports(pool, c, roster_set, static_cast<size_t>(eval.k_shot), query, rng));
    }
    const auto probs = class_probabilities(embeddings[query], prototypes_for(support, embeddings), distance);
    for (size_t s = 0; s < roster.size(); ++s) {
      const int truth = std::binary_search(labels.begin(), labels.end(), roster[s]) ? 1 : 0;
      scores[roster[s]].scores.push_back(probs[s]);
      scores[roster[s]].truth.push_back(truth);
      uniform[roster[s]].scores.push_back(1.0 / static_cast<double>(roster.size()));
      uniform[roster[s]].truth.push_back(truth);
    }
  }
  if (control) *control = macro_metrics(uniform, eval.threshold);
  return macro_metrics(scores, eval.threshold);
}

double evaluate_accuracy(const ExamplePool& pool, const std::vector<Embedding>& embeddings, int way, int shot,
                         int queries, int episodes, Distance distance, uint64_t seed) {
  if (embeddings.size() != pool.size()) fail(ErrorKind::kState, "evaluate_accuracy: embeddings do not match the pool");
  const auto& classes = pool.classes();
  if (classes.size() < static_cast<size_t>(way)) {
    fail(ErrorKind::kInfeasible, "accuracy: " + std::to_string(way) + "-way episodes need " + std::to_string(way) +
                                     " classes, pool has " + std::to_string(classes.size()));
  }
  Rng rng(seed);
  size_t correct = 0, total = 0;
  for (int e = 0; e < episodes; ++e) {
    std::vector<ClassId> roster;
    for (size_t i : rng.sample_without_replacement(classes.size(), static_cast<size_t>(way))) roster.push_back(classes[i]);
    const std::set<ClassId> roster_set(roster.begin(), roster.end());
    std::vector<std::vector<size_t>> support, query;
    for (const auto& c : roster) {
      std::vector<size_t> clean;
      for (size_t i : pool.examples_of(c)) {
        const auto& labels = pool.records()[i].labels;
        const bool single = std::none_of(labels.begin(), labels.end(),
                                         [&](const ClassId& l) { return l != c && roster_set.count(l); });
        if (single) clean.push_back(i);
      }
      const size_t need = static_cast<size_t>(shot + queries);
      if (clean.size() < need) {
        fail(ErrorKind::kInfeasible, "accuracy: class '" + c + "' has " + std::to_string(clean.size()) +
                                         " single-label examples in this roster, needs " + std::to_string(need));
      }
      std::vector<size_t> picked;
      for (size_t i : rng.sample_without_replacement(clean.size(), need)) picked.push_back(clean[i]);
      support.emplace_back(picked.begin(), picked.begin() + shot);
      query.emplace_back(picked.begin() + shot, picked.end());
    }
    const auto protos = prototypes_for(support, embeddings);
    for (size_t s = 0; s < roster.size(); ++s) {
      for (size_t q : query[s]) {
        const auto p = class_probabilities(embeddings[q], protos, distance);
        const size_t best = static_cast<size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        correct += best == s ? 1 : 0;
        ++total;
      }
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace ladproto
