#ifndef LADPROTO_HARNESS_FEATURES_H_
#define LADPROTO_HARNESS_FEATURES_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "common/rng.h"
#include "curation/curation.h"
#include "dsp/dsp.h"
#include "harness/config.h"
#include "neural/neural.h"
#include "taxonomy/taxonomy.h"

namespace ladproto {

// Labels of a clip that are not an ancestor of another of its labels.
std::vector<ClassId> most_specific_labels(const Taxonomy& taxonomy, const std::vector<ClassId>& labels);

// Feature-only mode. A shared bank of plane waves on the [frames x mels]
// grid; every class owns a distinct subset of `components` waves with fixed
// phases. A class signature is its own waves plus half of its parent's
// signature, so siblings share structure. A clip sums the signatures of its
// most specific labels plus white noise, giving one cluster per label set.
// Noise depends only on (spec.seed, clip id).
class SyntheticFeatures {
 public:
  SyntheticFeatures(const Taxonomy& taxonomy, const SyntheticFeatureSpec& spec);

  Tensor<float> clip(const ClipRecord& record) const;
  std::vector<Tensor<float>> clips(const std::vector<ClipRecord>& records) const;

  struct Wave {
    double f_time = 0.0;  // cycles over the frame axis
    double f_mel = 0.0;   // cycles over the mel axis
    double phase = 0.0;
  };
  struct Texture {
    std::vector<Wave> waves;
  };
  const Texture& texture(const ClassId& c) const;

 private:
  void add_signature(std::vector<double>& out, const ClassId& c, double gain) const;

  const Taxonomy* taxonomy_;
  SyntheticFeatureSpec spec_;
  std::map<ClassId, Texture> textures_;
};

// Audio mode. Reads <audio_dir>/<clip_id>.wav, computes log-mel features and
// caches them under cache_dir keyed by (clip fingerprint, DSP fingerprint).
// Results are cropped or padded to `frames` and returned in record order.
std::vector<Matrix> extract_logmels(const std::vector<ClipRecord>& records, const std::filesystem::path& audio_dir,
                                    const DspConfig& dsp, const std::filesystem::path& cache_dir, size_t frames,
                                    int threads);

Tensor<float> to_network_input(const Matrix& spec);

// Network inputs for several pools at once. In audio mode the z-score
// statistics are fitted on `fit_pool` (the base pool) and applied to all.
std::vector<std::vector<Tensor<float>>> build_features(const RunConfig& config, const Taxonomy& taxonomy,
                                                       const std::vector<ClipRecord>& fit_pool,
                                                       const std::vector<const std::vector<ClipRecord>*>& pools);

// Fingerprint of the feature pipeline, recorded in run manifests.
std::string feature_fingerprint(const RunConfig& config);

// Runs body(i) for i in [0, n) on up to `threads` workers (0: hardware
// concurrency). The first exception is rethrown after all workers stop.
void parallel_for(size_t n, int threads, const std::function<void(size_t)>& body);

}  // namespace ladproto

#endif  // LADPROTO_HARNESS_FEATURES_H_
