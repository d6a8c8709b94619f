#include "curation/curation.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "common/error.h"
#include "common/rng.h"

namespace ladproto {

namespace {

size_t count_in(const std::vector<ClassId>& labels, const std::set<ClassId>& set) {
  size_t n = 0;
  for (const auto& l : labels) n += set.count(l);
  return n;
}

}  // namespace

std::set<ClassId> filter_classes(const Taxonomy& taxonomy, const std::set<int>& keep_depths) {
  std::set<ClassId> eligible = taxonomy.level_filter(keep_depths);
  for (const auto& id : taxonomy.multipath_blacklist()) eligible.erase(id);
  return eligible;
}

std::array<size_t, 3> apportion(size_t n, const SplitRatio& ratio) {
  const std::array<double, 3> r{ratio.base, ratio.validation, ratio.evaluation};
  double total = 0.0;
  for (double x : r) {
    if (!(x >= 0.0) || !std::isfinite(x)) fail(ErrorKind::kConfig, "split ratio parts must be finite and non-negative");
    total += x;
  }
  if (total <= 0.0) fail(ErrorKind::kConfig, "split ratio must sum to a positive value");

  std::array<size_t, 3> sizes{};
  std::array<double, 3> remainder{};
  size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double quota = static_cast<double>(n) * r[i] / total;
    sizes[i] = static_cast<size_t>(std::floor(quota + 1e-9));
    remainder[i] = quota - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (remainder[i] > remainder[best] + 1e-12) best = i;
    }
    ++sizes[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  return sizes;
}

LabelSplit split_labels(const std::set<ClassId>& classes, const SplitRatio& ratio, uint64_t seed) {
  const auto sizes = apportion(classes.size(), ratio);
  if (classes.size() < 3) {
    fail(ErrorKind::kInfeasible, "cannot split " + std::to_string(classes.size()) +
                                     " classes into base/validation/evaluation sets");
  }
  static const char* kNames[] = {"base", "validation", "evaluation"};
  for (int i = 0; i < 3; ++i) {
    if (sizes[i] == 0) {
      fail(ErrorKind::kInfeasible, std::string("split leaves the ") + kNames[i] + " set empty (" +
                                       std::to_string(classes.size()) + " classes)");
    }
  }
  std::vector<ClassId> order(classes.begin(), classes.end());
  Rng rng(seed);
  rng.shuffle(order);
  LabelSplit split;
  size_t i = 0;
  for (; i < sizes[0]; ++i) split.base.insert(order[i]);
  for (; i < sizes[0] + sizes[1]; ++i) split.validation.insert(order[i]);
  for (; i < order.size(); ++i) split.evaluation.insert(order[i]);
  return split;
}

PoolAssignment retain_cross_split_records(const std::vector<ClipRecord>& records,
                                          const LabelSplit& split) {
  PoolAssignment pools;
  for (const auto& rec : records) {
    const size_t n_val = count_in(rec.labels, split.validation);
    const size_t n_eval = count_in(rec.labels, split.evaluation);
    if (n_val == 0 && n_eval == 0) {
      if (count_in(rec.labels, split.base) > 0) pools.base.push_back(rec);
    } else if (n_eval > n_val) {
      pools.evaluation.push_back(rec);
    } else {
      pools.validation.push_back(rec);
    }
  }
  return pools;
}

DesmearResult desmear(const std::vector<ClipRecord>& records, const LabelSplit& split,
                      const std::set<ClassId>& eligible, int min_per_class) {
  DesmearResult out;
  out.split = split;
  for (const auto& rec : records) {
    ClipRecord r = rec;
    std::erase_if(r.labels, [&](const ClassId& c) { return !eligible.count(c); });
    if (!r.labels.empty()) out.records.push_back(std::move(r));
  }

  while (true) {
    const PoolAssignment pools = retain_cross_split_records(out.records, out.split);
    std::map<ClassId, size_t> counts;
    for (const auto& c : out.split.base) counts[c] = 0;
    for (const auto& rec : pools.base) {
      for (const auto& l : rec.labels) ++counts[l];
    }
    const ClassId* scarcest = nullptr;
    size_t lowest = 0;
    for (const auto& [cls, n] : counts) {
      if (n < static_cast<size_t>(std::max(min_per_class, 0)) && (!scarcest || n < lowest)) {
        scarcest = &cls;
        lowest = n;
      }
    }
    if (!scarcest) break;
    const ClassId moved = *scarcest;
    out.split.base.erase(moved);
    if (out.split.evaluation.size() < out.split.validation.size()) {
      out.split.evaluation.insert(moved);
    } else {
      out.split.validation.insert(moved);
    }
    if (out.split.base.empty()) {
      fail(ErrorKind::kInfeasible, "no base class reaches " + std::to_string(min_per_class) +
                                       " examples; last moved '" + moved + "'");
    }
  }
  return out;
}

OverlapReport audit_overlap(const std::vector<ClipRecord>& train,
                            const std::vector<ClipRecord>& test) {
  std::set<std::string> train_ids;
  for (const auto& r : train) train_ids.insert(r.clip_id);
  std::set<std::string> shared;
  for (const auto& r : test) {
    if (train_ids.count(r.clip_id)) shared.insert(r.clip_id);
  }
  return OverlapReport{{shared.begin(), shared.end()}};
}

CuratedDataset curate(const Taxonomy& taxonomy, const std::vector<ClipRecord>& records,
                      const CurationOptions& options) {
  CuratedDataset ds;
  ds.options = options;
  // Eligible = kept levels, minus the blacklist, restricted to the classes the
  // metadata actually uses.
  std::set<ClassId> vocabulary;
  for (const auto& r : records) vocabulary.insert(r.labels.begin(), r.labels.end());
  std::set<ClassId> eligible;
  for (const auto& c : filter_classes(taxonomy, options.keep_depths)) {
    if (vocabulary.count(c)) eligible.insert(c);
  }
  ds.eligible_count = eligible.size();
  ds.raw_sizes = apportion(eligible.size(), options.ratio);
  const LabelSplit raw = split_labels(eligible, options.ratio, options.seed);
  DesmearResult adjusted = desmear(records, raw, eligible, options.min_per_class);
  ds.split = std::move(adjusted.split);
  ds.pools = retain_cross_split_records(adjusted.records, ds.split);
  auto by_id = [](const ClipRecord& a, const ClipRecord& b) { return a.clip_id < b.clip_id; };
  std::sort(ds.pools.base.begin(), ds.pools.base.end(), by_id);
  std::sort(ds.pools.validation.begin(), ds.pools.validation.end(), by_id);
  std::sort(ds.pools.evaluation.begin(), ds.pools.evaluation.end(), by_id);

  std::vector<ClipRecord> test = ds.pools.validation;
  test.insert(test.end(), ds.pools.evaluation.begin(), ds.pools.evaluation.end());
  ds.audit = audit_overlap(ds.pools.base, test);
  return ds;
}

SyntheticDataset generate_synthetic(const SynthSpec& spec) {
  if (spec.n_roots < 1 || spec.depth < 1 || spec.branching < 1 || spec.labels_per_clip < 1) {
    fail(ErrorKind::kConfig, "synthetic spec: n_roots, depth, branching and labels_per_clip must be positive");
  }
  if (spec.n_clips < 0) fail(ErrorKind::kConfig, "synthetic spec: n_clips must be non-negative");
  if (!(spec.pair_probability >= 0.0 && spec.pair_probability <= 1.0)) {
    fail(ErrorKind::kConfig, "synthetic spec: pair_probability must lie in [0, 1]");
  }

  std::vector<OntologyRecord> nodes;
  // Pre-order walk; ids encode the path, e.g. "/syn/r1.0.3".
  auto build = [&](auto&& self, const std::string& path, int level) -> void {
    const size_t slot = nodes.size();
    nodes.push_back({"/syn/" + path, "Synthetic " + path, {}});
    if (level + 1 >= spec.depth) return;
    for (int b = 0; b < spec.branching; ++b) {
      const std::string child = path + "." + std::to_string(b);
      nodes[slot].child_ids.push_back("/syn/" + child);
      self(self, child, level + 1);
    }
  };
  for (int r = 0; r < spec.n_roots; ++r) build(build, "r" + std::to_string(r), 0);

  Taxonomy taxonomy(nodes);
  Rng rng(spec.seed);
  const auto& ids = taxonomy.ids();
  std::vector<ClipRecord> records;
  records.reserve(static_cast<size_t>(spec.n_clips));
  const size_t anchors = std::min(ids.size(), static_cast<size_t>(spec.labels_per_clip));
  for (int i = 0; i < spec.n_clips; ++i) {
    ClipRecord rec;
    rec.clip_id = std::to_string(100000 + i);
    for (size_t a : rng.sample_without_replacement(ids.size(), anchors)) {
      rec.labels.push_back(ids[a]);
      const bool smear = rng.bernoulli(spec.pair_probability);
      if (auto parent = taxonomy.parent_of(ids[a]); parent && smear) rec.labels.push_back(*parent);
    }
    std::sort(rec.labels.begin(), rec.labels.end());
    rec.labels.erase(std::unique(rec.labels.begin(), rec.labels.end()), rec.labels.end());
    records.push_back(std::move(rec));
  }
  return SyntheticDataset{std::move(taxonomy), std::move(records)};
}

}  // namespace ladproto
