#ifndef LADPROTO_CURATION_CURATION_H_
#define LADPROTO_CURATION_CURATION_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "taxonomy/taxonomy.h"

namespace ladproto {

enum class SourceSplit { kDev, kEval };

struct ClipRecord {
  std::string clip_id;
  std::vector<ClassId> labels;  // sorted, unique, non-empty
  SourceSplit source_split = SourceSplit::kDev;
};

struct LabelSplit {
  std::set<ClassId> base;
  std::set<ClassId> validation;
  std::set<ClassId> evaluation;
};

// Relative weights of the base / validation / evaluation label sets.
struct SplitRatio {
  double base = 7.0;
  double validation = 2.0;
  double evaluation = 1.0;
};

struct OverlapReport {
  std::vector<std::string> shared_clip_ids;
  bool empty() const { return shared_clip_ids.empty(); }
};

struct PoolAssignment {
  std::vector<ClipRecord> base;
  std::vector<ClipRecord> validation;
  std::vector<ClipRecord> evaluation;
};

struct CurationOptions {
  std::set<int> keep_depths{1, 2};
  SplitRatio ratio;
  uint64_t seed = 0;
  int min_per_class = 6;
};

struct CuratedDataset {
  CurationOptions options;
  size_t eligible_count = 0;
  std::array<size_t, 3> raw_sizes{};  // apportionment before de-smearing
  LabelSplit split;
  PoolAssignment pools;
  OverlapReport audit;
};

// Eligible classes: single-path nodes at the kept depths, minus the
// multi-path blacklist.
std::set<ClassId> filter_classes(const Taxonomy& taxonomy, const std::set<int>& keep_depths);

// Largest-remainder apportionment of n items by ratio; ties in the remainder
// go to the earlier part.
std::array<size_t, 3> apportion(size_t n, const SplitRatio& ratio);

// Shuffles the (sorted) class set with a seeded generator and cuts it by the
// apportioned sizes. Every part must come out non-empty.
LabelSplit split_labels(const std::set<ClassId>& classes, const SplitRatio& ratio, uint64_t seed);

struct DesmearResult {
  std::vector<ClipRecord> records;
  LabelSplit split;
};

// Restricts labels to the eligible set, drops clips left without labels, then
// migrates the scarcest base class into the smaller novel set until every
// base class has at least min_per_class base-pool examples.
DesmearResult desmear(const std::vector<ClipRecord>& records, const LabelSplit& split,
                      const std::set<ClassId>& eligible, int min_per_class);

OverlapReport audit_overlap(const std::vector<ClipRecord>& train,
                            const std::vector<ClipRecord>& test);

// Clips touching any novel class go to a novel pool with all labels kept.
// Clips touching both novel sets go to the one holding more of their labels,
// ties to validation. Clips with base labels only form the base pool.
PoolAssignment retain_cross_split_records(const std::vector<ClipRecord>& records,
                                          const LabelSplit& split);

// Full four-step pipeline.
CuratedDataset curate(const Taxonomy& taxonomy, const std::vector<ClipRecord>& records,
                      const CurationOptions& options);

// FSD50K-style metadata: header with columns fname, labels, mids and an
// optional split column. Class identity keys on mids.
std::vector<ClipRecord> parse_metadata_csv(std::string_view text, SourceSplit source);
std::vector<ClipRecord> load_metadata_csv(const std::filesystem::path& path, SourceSplit source);
std::string metadata_to_csv(const std::vector<ClipRecord>& records, const Taxonomy& taxonomy);

// Split manifest as JSON with sorted keys and sorted clip lists.
std::string manifest_to_json(const CuratedDataset& dataset);
CuratedDataset manifest_from_json(std::string_view text);

struct SynthSpec {
  int n_roots = 4;
  int depth = 2;  // levels per tree, including the root
  int branching = 4;
  int n_clips = 400;
  int labels_per_clip = 1;
  double pair_probability = 0.5;
  uint64_t seed = 0;
};

struct SyntheticDataset {
  Taxonomy taxonomy;
  std::vector<ClipRecord> records;
};

// Complete trees of the configured shape; node count is
// n_roots * (branching^depth - 1) / (branching - 1).
SyntheticDataset generate_synthetic(const SynthSpec& spec);

}  // namespace ladproto

#endif  // LADPROTO_CURATION_CURATION_H_
