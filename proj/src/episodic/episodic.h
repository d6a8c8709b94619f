#ifndef LADPROTO_EPISODIC_EPISODIC_H_
#define LADPROTO_EPISODIC_EPISODIC_H_

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "common/rng.h"
#include "curation/curation.h"
#include "neural/neural.h"
#include "taxonomy/taxonomy.h"

namespace ladproto {

enum class Distance { kSquaredEuclidean, kCosine, kDot };
enum class Method { kBaseline, kOneVsRest, kLad };

Distance parse_distance(const std::string& name);
std::string distance_name(Distance d);
Method parse_method(const std::string& name);
std::string method_name(Method m);

enum class Smoothing { kOneHot, kTaxonomy, kUniform };

struct EpisodeConfig {
  int n_way = 12;
  int k_shot = 5;
  Distance distance = Distance::kSquaredEuclidean;
  Smoothing smoothing = Smoothing::kOneHot;
  double beta = 0.0;  // used when smoothing == kTaxonomy

  void validate() const;
};

// Clips restricted to one class set. Labels outside the set are dropped and
// clips left without labels are excluded.
class ExamplePool {
 public:
  ExamplePool() = default;
  ExamplePool(const std::vector<ClipRecord>& records, const std::set<ClassId>& classes);

  const std::vector<ClassId>& classes() const { return classes_; }
  bool has_class(const ClassId& c) const { return index_.count(c) > 0; }
  const std::vector<ClipRecord>& records() const { return records_; }
  size_t size() const { return records_.size(); }
  const std::vector<size_t>& examples_of(const ClassId& c) const;
  std::optional<size_t> find(const std::string& clip_id) const;

  // Every class needs at least `min_examples` clips; throws kInfeasible naming
  // the scarcest class otherwise.
  void require_examples(size_t min_examples, const std::string& what) const;

  // Optional network inputs, parallel to records().
  std::vector<Tensor<float>> features;

 private:
  std::vector<ClassId> classes_;
  std::vector<ClipRecord> records_;
  std::map<ClassId, std::vector<size_t>> index_;
  std::map<std::string, size_t> by_clip_;
};

struct Task {
  size_t query = 0;                          // pool example index
  ClassId active_class;                      // query label this task was formed for
  std::vector<ClassId> roster;               // slot labels; target slot first
  std::vector<std::vector<size_t>> support;  // per roster slot
  size_t target_slot = 0;
  bool aligned = false;  // target slot carries the parent's supports
};

// k examples of class c for one roster, excluding `exclude`. Examples whose
// labels meet the roster only at c are preferred.
std::vector<size_t> sample_supports(const ExamplePool& pool, const ClassId& c,
                                    const std::set<ClassId>& roster, size_t k, size_t exclude, Rng& rng);

// One task per query label present in the pool. With exclude_query_labels the
// negatives avoid every label of the query (one-vs-rest); otherwise only the
// active class is avoided (single-label baseline).
std::vector<Task> form_tasks(size_t query, const ExamplePool& pool, const EpisodeConfig& cfg, Rng& rng,
                             bool exclude_query_labels = true);

std::vector<Task> align_parent_child(const std::vector<Task>& tasks, const Taxonomy& t);

using Embedding = std::vector<double>;

std::vector<Embedding> compute_prototypes(const std::vector<std::vector<Embedding>>& supports);

double distance(const Embedding& a, const Embedding& b, Distance d);

std::vector<double> class_probabilities(const Embedding& query, const std::vector<Embedding>& prototypes, Distance d);

std::vector<double> embed_labels(const std::vector<ClassId>& roster, const ClassId& positive, const Taxonomy& t,
                                 double beta);
std::vector<double> uniform_labels(size_t n);
std::vector<double> one_hot(size_t n, size_t index);

constexpr double kProbFloor = 1e-12;

double task_loss(const std::vector<double>& probabilities, const std::vector<double>& target);

struct EpisodeLoss {
  double total = 0.0;
  // d total / d per-label loss; the max picks its attaining branch, ties
  // going to the parent.
  std::map<ClassId, double> weights;
};

EpisodeLoss episode_loss(const std::map<ClassId, double>& per_label_losses, const std::vector<ClassId>& query_labels,
                         const Taxonomy& t);

struct TaskResult {
  Task task;
  std::vector<double> target;
  std::vector<double> probabilities;
  double loss = 0.0;
};

struct EpisodeResult {
  double loss = 0.0;
  std::vector<TaskResult> tasks;
  // d loss / d embedding for each example that took part, keyed by pool index.
  std::map<size_t, Embedding> embedding_grads;
};

// Loss and embedding gradients for already formed tasks. With use_max the
// per-label losses combine through episode_loss, otherwise they are summed.
EpisodeResult evaluate_tasks(const std::vector<Task>& tasks, const std::map<size_t, Embedding>& embeddings,
                             const EpisodeConfig& cfg, const Taxonomy& t, bool use_max,
                             const std::vector<ClassId>& query_labels);

// Samples tasks for `query` under `method`: baseline (single-label tasks),
// one-vs-rest, or lad (one-vs-rest + alignment + max loss).
std::vector<Task> build_tasks(size_t query, const ExamplePool& pool, const EpisodeConfig& cfg, Method method,
                              const Taxonomy& t, Rng& rng);

// Full episode: tasks, forward passes, loss. With accumulate_grads, parameter
// gradients are accumulated into `net` in a fixed example order.
template <typename T>
EpisodeResult run_episode(size_t query, const ExamplePool& pool, EmbeddingNetwork<T>& net, const EpisodeConfig& cfg,
                          Method method, const Taxonomy& t, Rng& rng, bool accumulate_grads);

std::string transcript_json(const ExamplePool& pool, const EpisodeResult& result);

}  // namespace ladproto

#endif  // LADPROTO_EPISODIC_EPISODIC_H_
