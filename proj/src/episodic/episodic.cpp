#include "episodic/episodic.h"

#include <algorithm>
#include <cmath>

#include "common/error.h"
#include "json.hpp"

namespace ladproto {

Distance parse_distance(const std::string& name) {
  if (name == "sqeuclidean" || name == "squared-euclidean" || name == "l2") return Distance::kSquaredEuclidean;
  if (name == "cosine") return Distance::kCosine;
  if (name == "dot") return Distance::kDot;
  fail(ErrorKind::kConfig, "unknown distance '" + name + "' (expected sqeuclidean, cosine or dot)");
}

std::string distance_name(Distance d) {
  switch (d) {
    case Distance::kSquaredEuclidean:
      return "sqeuclidean";
    case Distance::kCosine:
      return "cosine";
    case Distance::kDot:
      return "dot";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "baseline" || name == "baseline-protonet") return Method::kBaseline;
  if (name == "one-vs-rest" || name == "ovr") return Method::kOneVsRest;
  if (name == "lad" || name == "lad-protonet") return Method::kLad;
  fail(ErrorKind::kConfig, "unknown method '" + name + "' (expected baseline, one-vs-rest or lad)");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kBaseline:
      return "baseline";
    case Method::kOneVsRest:
      return "one-vs-rest";
    case Method::kLad:
      return "lad";
  }
  return "?";
}

void EpisodeConfig::validate() const {
  if (n_way < 2) fail(ErrorKind::kConfig, "episode: n_way must be >= 2");
  if (k_shot < 1) fail(ErrorKind::kConfig, "episode: k_shot must be >= 1");
  if (smoothing == Smoothing::kTaxonomy && !(beta > 0.0 && std::isfinite(beta))) {
    fail(ErrorKind::kConfig, "episode: beta must be a positive finite number (use uniform smoothing for the beta -> 0 limit)");
  }
}

ExamplePool::ExamplePool(const std::vector<ClipRecord>& records, const std::set<ClassId>& classes)
    : classes_(classes.begin(), classes.end()) {
  for (const auto& c : classes_) index_[c];
  for (const auto& rec : records) {
    ClipRecord r = rec;
    std::erase_if(r.labels, [&](const ClassId& c) { return !classes.count(c); });
    if (r.labels.empty()) continue;
    if (by_clip_.count(r.clip_id)) fail(ErrorKind::kValidation, "example pool: duplicate clip id '" + r.clip_id + "'");
    const size_t idx = records_.size();
    by_clip_[r.clip_id] = idx;
    for (const auto& l : r.labels) index_[l].push_back(idx);
    records_.push_back(std::move(r));
  }
}

const std::vector<size_t>& ExamplePool::examples_of(const ClassId& c) const {
  auto it = index_.find(c);
  if (it == index_.end()) fail(ErrorKind::kLookup, "example pool has no class '" + c + "'");
  return it->second;
}

std::optional<size_t> ExamplePool::find(const std::string& clip_id) const {
  auto it = by_clip_.find(clip_id);
  if (it == by_clip_.end()) return std::nullopt;
  return it->second;
}

void ExamplePool::require_examples(size_t min_examples, const std::string& what) const {
  const ClassId* worst = nullptr;
  size_t lowest = 0;
  for (const auto& [c, ex] : index_) {
    if (ex.size() < min_examples && (!worst || ex.size() < lowest)) {
      worst = &c;
      lowest = ex.size();
    }
  }
  if (worst) {
    fail(ErrorKind::kInfeasible, what + ": class '" + *worst + "' has " + std::to_string(lowest) +
                                     " examples, need at least " + std::to_string(min_examples));
  }
}

std::vector<size_t> sample_supports(const ExamplePool& pool, const ClassId& c, const std::set<ClassId>& roster,
                                    size_t k, size_t exclude, Rng& rng) {
  std::vector<size_t> preferred, fallback;
  for (size_t ex : pool.examples_of(c)) {
    if (ex == exclude) continue;
    bool clean = true;
    for (const auto& l : pool.records()[ex].labels) {
      if (l != c && roster.count(l)) {
        clean = false;
        break;
      }
    }
    (clean ? preferred : fallback).push_back(ex);
  }
  if (preferred.size() + fallback.size() < k) {
    fail(ErrorKind::kInfeasible, "class '" + c + "' has " + std::to_string(preferred.size() + fallback.size()) +
                                     " support candidates, need " + std::to_string(k));
  }
  std::vector<size_t> out;
  if (preferred.size() >= k) {
    for (size_t i : rng.sample_without_replacement(preferred.size(), k)) out.push_back(preferred[i]);
  } else {
    out = preferred;
    for (size_t i : rng.sample_without_replacement(fallback.size(), k - preferred.size())) out.push_back(fallback[i]);
  }
  return out;
}

std::vector<Task> form_tasks(size_t query, const ExamplePool& pool, const EpisodeConfig& cfg, Rng& rng,
                             bool exclude_query_labels) {
  cfg.validate();
  if (query >= pool.size()) fail(ErrorKind::kLookup, "query index out of range");
  const auto& labels = pool.records()[query].labels;
  const std::set<ClassId> label_set(labels.begin(), labels.end());
  std::vector<Task> tasks;
  for (const auto& active : labels) {
    std::vector<ClassId> candidates;
    for (const auto& c : pool.classes()) {
      if (c == active || (exclude_query_labels && label_set.count(c))) continue;
      candidates.push_back(c);
    }
    const size_t need = static_cast<size_t>(cfg.n_way - 1);
    if (candidates.size() < need) {
      fail(ErrorKind::kInfeasible, "task for '" + active + "': " + std::to_string(need) + " negative classes needed, " +
                                       std::to_string(candidates.size()) + " available");
    }
    Task task;
    task.query = query;
    task.active_class = active;
    task.roster.push_back(active);
    for (size_t i : rng.sample_without_replacement(candidates.size(), need)) task.roster.push_back(candidates[i]);
    const std::set<ClassId> roster(task.roster.begin(), task.roster.end());
    for (const auto& c : task.roster) {
      task.support.push_back(sample_supports(pool, c, roster, static_cast<size_t>(cfg.k_shot), query, rng));
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::vector<Task> align_parent_child(const std::vector<Task>& tasks, const Taxonomy& t) {
  std::vector<Task> out = tasks;
  for (size_t i = 0; i < tasks.size(); ++i) {
    const auto& child = tasks[i];
    if (!t.contains(child.active_class) || !t.is_single_path(child.active_class)) continue;
    const auto parent = t.parent_of(child.active_class);
    if (!parent) continue;
    for (const auto& other : tasks) {
      if (other.active_class != *parent) continue;
      // Supports come from the parent's own task, so chains align pairwise.
      out[i].roster[child.target_slot] = *parent;
      out[i].support[child.target_slot] = other.support[other.target_slot];
      out[i].aligned = true;
    }
  }
  return out;
}

std::vector<Embedding> compute_prototypes(const std::vector<std::vector<Embedding>>& supports) {
  std::vector<Embedding> protos;
  protos.reserve(supports.size());
  for (size_t k = 0; k < supports.size(); ++k) {
    const auto& s = supports[k];
    if (s.empty()) fail(ErrorKind::kShape, "prototype " + std::to_string(k) + ": empty support list");
    Embedding a(s[0].size(), 0.0);
    for (const auto& e : s) {
      if (e.size() != a.size()) fail(ErrorKind::kShape, "prototype: support embeddings differ in dimension");
      for (size_t i = 0; i < a.size(); ++i) a[i] += e[i];
    }
    for (auto& v : a) v /= static_cast<double>(s.size());
    protos.push_back(std::move(a));
  }
  return protos;
}

namespace {

double norm(const Embedding& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

double dot(const Embedding& a, const Embedding& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

constexpr double kNormFloor = 1e-12;

// Adds scale * d distance(q, a) / dq into dq and scale * d distance / da into da.
void distance_grad(const Embedding& q, const Embedding& a, Distance d, double scale, Embedding& dq, Embedding& da) {
  switch (d) {
    case Distance::kSquaredEuclidean:
      for (size_t i = 0; i < q.size(); ++i) {
        const double g = 2.0 * (q[i] - a[i]) * scale;
        dq[i] += g;
        da[i] -= g;
      }
      break;
    case Distance::kDot:
      for (size_t i = 0; i < q.size(); ++i) {
        dq[i] -= a[i] * scale;
        da[i] -= q[i] * scale;
      }
      break;
    case Distance::kCosine: {
      const double nq = std::max(norm(q), kNormFloor), na = std::max(norm(a), kNormFloor);
      const double c = dot(q, a) / (nq * na);
      for (size_t i = 0; i < q.size(); ++i) {
        dq[i] -= scale * (a[i] / (nq * na) - c * q[i] / (nq * nq));
        da[i] -= scale * (q[i] / (nq * na) - c * a[i] / (na * na));
      }
      break;
    }
  }
}

void require_finite(const Embedding& e, const char* what) {
  for (double v : e) {
    if (!std::isfinite(v)) fail(ErrorKind::kNumeric, std::string(what) + ": non-finite embedding");
  }
}

}  // namespace

double distance(const Embedding& a, const Embedding& b, Distance d) {
  if (a.size() != b.size()) {
    fail(ErrorKind::kShape, "distance: dimensions " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  switch (d) {
    case Distance::kSquaredEuclidean: {
      double s = 0.0;
      for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
      return s;
    }
    case Distance::kDot:
      return -dot(a, b);
    case Distance::kCosine:
      return 1.0 - dot(a, b) / (std::max(norm(a), kNormFloor) * std::max(norm(b), kNormFloor));
  }
  return 0.0;
}

std::vector<double> class_probabilities(const Embedding& query, const std::vector<Embedding>& prototypes, Distance d) {
  require_finite(query, "class_probabilities");
  std::vector<double> z(prototypes.size());
  for (size_t k = 0; k < prototypes.size(); ++k) {
    require_finite(prototypes[k], "class_probabilities");
    z[k] = -distance(query, prototypes[k], d);
  }
  if (z.empty()) fail(ErrorKind::kShape, "class_probabilities: no prototypes");
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : z) v /= sum;
  return z;
}

std::vector<double> embed_labels(const std::vector<ClassId>& roster, const ClassId& positive, const Taxonomy& t,
                                 double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    fail(ErrorKind::kConfig, "embedded labels: beta must be positive and finite (use uniform mode for beta -> 0)");
  }
  if (std::find(roster.begin(), roster.end(), positive) == roster.end()) {
    fail(ErrorKind::kLookup, "embedded labels: positive class '" + positive + "' is not in the roster");
  }
  std::vector<double> p(roster.size());
  double sum = 0.0;
  for (size_t i = 0; i < roster.size(); ++i) {
    // The positive sits at distance 0, so the largest exponent is 0.
    p[i] = std::exp(-beta * static_cast<double>(t.distance(roster[i], positive)));
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

std::vector<double> uniform_labels(size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

std::vector<double> one_hot(size_t n, size_t index) {
  std::vector<double> v(n, 0.0);
  v.at(index) = 1.0;
  return v;
}

double task_loss(const std::vector<double>& probabilities, const std::vector<double>& target) {
  if (probabilities.size() != target.size()) {
    fail(ErrorKind::kShape, "task_loss: " + std::to_string(probabilities.size()) + " probabilities vs " +
                                std::to_string(target.size()) + " targets");
  }
  double loss = 0.0;
  for (size_t i = 0; i < target.size(); ++i) {
    if (target[i] > 0.0) loss -= target[i] * std::log(std::max(probabilities[i], kProbFloor));
  }
  return loss;
}

EpisodeLoss episode_loss(const std::map<ClassId, double>& per_label_losses, const std::vector<ClassId>& query_labels,
                         const Taxonomy& t) {
  const std::set<ClassId> labels(query_labels.begin(), query_labels.end());
  auto loss_of = [&](const ClassId& c) {
    auto it = per_label_losses.find(c);
    if (it == per_label_losses.end()) fail(ErrorKind::kState, "episode_loss: no task loss for label '" + c + "'");
    return it->second;
  };
  auto parent_in_query = [&](const ClassId& c) -> std::optional<ClassId> {
    if (!t.contains(c) || !t.is_single_path(c)) return std::nullopt;
    auto p = t.parent_of(c);
    if (p && labels.count(*p)) return p;
    return std::nullopt;
  };
  std::set<ClassId> parents;
  for (const auto& c : labels) {
    if (auto p = parent_in_query(c)) parents.insert(*p);
  }
  EpisodeLoss out;
  for (const auto& c : labels) out.weights[c] = 0.0;
  for (const auto& c : labels) {
    if (auto p = parent_in_query(c)) {
      const double lc = loss_of(c), lp = loss_of(*p);
      if (lc > lp) {
        out.total += lc;
        out.weights[c] += 1.0;
      } else {
        out.total += lp;
        out.weights[*p] += 1.0;
      }
    } else if (!parents.count(c)) {
      out.total += loss_of(c);
      out.weights[c] += 1.0;
    }
  }
  return out;
}

EpisodeResult evaluate_tasks(const std::vector<Task>& tasks, const std::map<size_t, Embedding>& embeddings,
                             const EpisodeConfig& cfg, const Taxonomy& t, bool use_max,
                             const std::vector<ClassId>& query_labels) {
  auto emb = [&](size_t ex) -> const Embedding& {
    auto it = embeddings.find(ex);
    if (it == embeddings.end()) fail(ErrorKind::kState, "missing embedding for example " + std::to_string(ex));
    return it->second;
  };
  EpisodeResult result;
  std::vector<std::vector<Embedding>> protos_per_task;
  std::map<ClassId, double> per_label;
  for (const auto& task : tasks) {
    std::vector<std::vector<Embedding>> supports;
    for (const auto& slot : task.support) {
      supports.emplace_back();
      for (size_t ex : slot) supports.back().push_back(emb(ex));
    }
    auto protos = compute_prototypes(supports);
    TaskResult tr;
    tr.task = task;
    tr.probabilities = class_probabilities(emb(task.query), protos, cfg.distance);
    switch (cfg.smoothing) {
      case Smoothing::kOneHot:
        tr.target = one_hot(task.roster.size(), task.target_slot);
        break;
      case Smoothing::kTaxonomy:
        tr.target = embed_labels(task.roster, task.roster[task.target_slot], t, cfg.beta);
        break;
      case Smoothing::kUniform:
        tr.target = uniform_labels(task.roster.size());
        break;
    }
    tr.loss = task_loss(tr.probabilities, tr.target);
    per_label[task.active_class] = tr.loss;
    protos_per_task.push_back(std::move(protos));
    result.tasks.push_back(std::move(tr));
  }

  std::map<ClassId, double> weights;
  if (use_max) {
    const auto combined = episode_loss(per_label, query_labels, t);
    result.loss = combined.total;
    weights = combined.weights;
  } else {
    for (const auto& [c, l] : per_label) {
      result.loss += l;
      weights[c] = 1.0;
    }
  }

  for (size_t ti = 0; ti < result.tasks.size(); ++ti) {
    const auto& tr = result.tasks[ti];
    const double w = weights[tr.task.active_class];
    if (w == 0.0) continue;
    const auto& q = tr.probabilities;
    const auto& p = tr.target;
    // loss = -sum_j p_j log max(q_j, eps), q = softmax(z), z_j = -d(e, a_j).
    double active_mass = 0.0;
    for (size_t j = 0; j < q.size(); ++j) {
      if (q[j] > kProbFloor) active_mass += p[j];
    }
    const Embedding& eq = emb(tr.task.query);
    Embedding& gq = result.embedding_grads.try_emplace(tr.task.query, Embedding(eq.size(), 0.0)).first->second;
    for (size_t j = 0; j < q.size(); ++j) {
      const double dz = -(q[j] > kProbFloor ? p[j] : 0.0) + q[j] * active_mass;
      if (dz == 0.0) continue;
      Embedding da(eq.size(), 0.0);
      // dz/dd = -1.
      distance_grad(eq, protos_per_task[ti][j], cfg.distance, -w * dz, gq, da);
      const auto& slot = tr.task.support[j];
      const double share = 1.0 / static_cast<double>(slot.size());
      for (size_t ex : slot) {
        Embedding& gs = result.embedding_grads.try_emplace(ex, Embedding(eq.size(), 0.0)).first->second;
        for (size_t i = 0; i < da.size(); ++i) gs[i] += share * da[i];
      }
    }
  }
  return result;
}

std::vector<Task> build_tasks(size_t query, const ExamplePool& pool, const EpisodeConfig& cfg, Method method,
                              const Taxonomy& t, Rng& rng) {
  switch (method) {
    case Method::kBaseline:
      return form_tasks(query, pool, cfg, rng, false);
    case Method::kOneVsRest:
      return form_tasks(query, pool, cfg, rng, true);
    case Method::kLad:
      return align_parent_child(form_tasks(query, pool, cfg, rng, true), t);
  }
  return {};
}

template <typename T>
EpisodeResult run_episode(size_t query, const ExamplePool& pool, EmbeddingNetwork<T>& net, const EpisodeConfig& cfg,
                          Method method, const Taxonomy& t, Rng& rng, bool accumulate_grads) {
  const auto tasks = build_tasks(query, pool, cfg, method, t, rng);
  if (tasks.empty()) return {};
  if (pool.features.size() != pool.size()) fail(ErrorKind::kState, "run_episode: pool has no features");

  // Each example is embedded once, in first-appearance order.
  std::vector<size_t> order{query};
  std::set<size_t> seen{query};
  for (const auto& task : tasks) {
    for (const auto& slot : task.support) {
      for (size_t ex : slot) {
        if (seen.insert(ex).second) order.push_back(ex);
      }
    }
  }
  std::map<size_t, Embedding> embeddings;
  std::vector<Tape<T>> tapes(accumulate_grads ? order.size() : 0);
  for (size_t i = 0; i < order.size(); ++i) {
    const auto& f = pool.features[order[i]];
    Tensor<T> x(f.shape);
    std::copy(f.values.begin(), f.values.end(), x.values.begin());
    const auto e = net.forward(x, accumulate_grads ? &tapes[i] : nullptr);
    embeddings[order[i]] = Embedding(e.values.begin(), e.values.end());
  }
  auto result = evaluate_tasks(tasks, embeddings, cfg, t, method == Method::kLad, pool.records()[query].labels);
  if (!std::isfinite(result.loss)) fail(ErrorKind::kNumeric, "episode loss is not finite");
  if (accumulate_grads) {
    for (size_t i = 0; i < order.size(); ++i) {
      auto it = result.embedding_grads.find(order[i]);
      if (it == result.embedding_grads.end()) continue;
      net.backward(tapes[i], std::vector<T>(it->second.begin(), it->second.end()));
    }
  }
  return result;
}

template EpisodeResult run_episode<float>(size_t, const ExamplePool&, EmbeddingNetwork<float>&, const EpisodeConfig&,
                                          Method, const Taxonomy&, Rng&, bool);
template EpisodeResult run_episode<double>(size_t, const ExamplePool&, EmbeddingNetwork<double>&,
                                           const EpisodeConfig&, Method, const Taxonomy&, Rng&, bool);

std::string transcript_json(const ExamplePool& pool, const EpisodeResult& result) {
  using nlohmann::json;
  json tasks = json::array();
  for (const auto& tr : result.tasks) {
    json supports = json::array();
    for (const auto& slot : tr.task.support) {
      json ids = json::array();
      for (size_t ex : slot) ids.push_back(pool.records()[ex].clip_id);
      supports.push_back(ids);
    }
    tasks.push_back({{"active", tr.task.active_class},
                     {"roster", tr.task.roster},
                     {"aligned", tr.task.aligned},
                     {"supports", supports},
                     {"loss", tr.loss}});
  }
  const std::string query = result.tasks.empty() ? "" : pool.records()[result.tasks[0].task.query].clip_id;
  return json{{"query", query}, {"tasks", tasks}, {"loss", result.loss}}.dump();
}

}  // namespace ladproto
