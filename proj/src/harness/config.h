#ifndef LADPROTO_HARNESS_CONFIG_H_
#define LADPROTO_HARNESS_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "curation/curation.h"
#include "dsp/dsp.h"
#include "episodic/episodic.h"
#include "neural/neural.h"

namespace ladproto {

// Flat "key = value" settings. Lines starting with '#' are comments and
// "include = other.cfg" splices another file in place (relative to the
// including file). Relative paths resolve against the file that set them.
class Config {
 public:
  static Config load(const std::filesystem::path& file);
  static Config parse(const std::string& text, const std::filesystem::path& base_dir);

  // Later settings override earlier ones; unknown keys are config errors.
  void set(const std::string& key, const std::string& value,
           const std::filesystem::path& base_dir = std::filesystem::current_path());
  void merge_file(const std::filesystem::path& file);

  bool is_set(const std::string& key) const { return entries_.count(key) > 0; }
  std::string get(const std::string& key) const;  // explicit value or default
  std::filesystem::path path(const std::string& key) const;  // resolved, empty if unset

  int64_t integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<std::string> list(const std::string& key) const;  // comma separated

  // Every known key with its effective value, sorted; paths are resolved.
  std::string dump() const;

  static const std::map<std::string, std::string>& defaults();

 private:
  struct Entry {
    std::string value;
    std::filesystem::path base;
  };
  void parse_into(const std::string& text, const std::filesystem::path& base_dir,
                  std::vector<std::filesystem::path>& stack);

  std::map<std::string, Entry> entries_;
};

enum class FeatureMode { kSynthetic, kAudio };

struct SyntheticFeatureSpec {
  size_t frames = 16;
  size_t mels = 16;
  size_t components = 1;  // waves per class
  size_t bank = 0;        // shared wave vocabulary; 0 uses the whole grid
  double noise = 0.5;
  uint64_t seed = 0;
};

struct EvalConfig {
  int episodes = 1000;
  int runs = 5;
  int n_way = 12;
  int k_shot = 5;
  double threshold = 0.5;
  std::vector<std::string> splits{"validation", "evaluation"};
  int accuracy_episodes = 0;
  int accuracy_way = 5;
  int accuracy_shot = 5;
  int accuracy_queries = 5;
};

struct Seeds {
  uint64_t split = 0;
  uint64_t init = 0;
  uint64_t episode = 0;
  uint64_t eval = 0;
};

struct RunConfig {
  std::filesystem::path ontology, metadata, metadata_eval, audio_dir, output_dir, cache_dir;
  std::filesystem::path split_manifest, checkpoint, transcript;
  FeatureMode feature_mode = FeatureMode::kSynthetic;
  SyntheticFeatureSpec synthetic_features;
  DspConfig dsp;
  size_t audio_frames = 0;  // 0: frames of a one-second clip
  CurationOptions curation;
  EpisodeConfig episode;
  Method method = Method::kLad;
  ArchConfig arch;
  OptimizerConfig optimizer;
  int train_steps = 1000;
  int queries_per_step = 1;
  int log_every = 1;
  EvalConfig eval;
  Seeds seeds;
  SynthSpec synth;
  bool synth_audio = false;
  double synth_clip_seconds = 1.0;
  std::vector<double> sweep_betas{15, 30, 45};
  std::vector<std::filesystem::path> report_inputs;
  int threads = 0;

  std::string beta_label() const;  // "-", "uniform" or the beta value
};

RunConfig resolve_run_config(const Config& config);

}  // namespace ladproto

#endif  // LADPROTO_HARNESS_CONFIG_H_
