#ifndef LADPROTO_HARNESS_EVALUATION_H_
#define LADPROTO_HARNESS_EVALUATION_H_

#include <cstdint>
#include <vector>

#include "episodic/episodic.h"
#include "harness/config.h"
#include "metrics/metrics.h"

namespace ladproto {

// Frozen-network embeddings of every pool example, in pool order.
std::vector<Embedding> embed_pool(const EmbeddingNetwork<float>& net, const ExamplePool& pool, int threads);

// One evaluation run. Each episode draws a query, builds a roster of all its
// labels plus random other classes up to n_way, samples k_shot supports per
// roster class and scores every roster class by its prototype probability.
// Scores are pooled per class over the run. `control` receives the same
// episodes scored uniformly.
RunMetrics evaluate_run(const ExamplePool& pool, const std::vector<Embedding>& embeddings, const EvalConfig& eval,
                        Distance distance, uint64_t seed, RunMetrics* control = nullptr);

// Mean N-way K-shot accuracy over single-label episodes: every query and
// support carries exactly one roster label.
double evaluate_accuracy(const ExamplePool& pool, const std::vector<Embedding>& embeddings, int way, int shot,
                         int queries, int episodes, Distance distance, uint64_t seed);

}  // namespace ladproto

#endif  // LADPROTO_HARNESS_EVALUATION_H_
