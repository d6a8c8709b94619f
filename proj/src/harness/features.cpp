#include "harness/features.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <set>
#include <thread>

#include "common/error.h"
#include "common/io.h"

namespace ladproto {

namespace fs = std::filesystem;

namespace {

uint64_t string_seed(const std::string& s) { return std::stoull(short_hash(s), nullptr, 16); }

bool is_ancestor(const Taxonomy& t, const ClassId& ancestor, ClassId node) {
  while (t.is_single_path(node)) {
    auto parent = t.parent_of(node);
    if (!parent) return false;
    if (*parent == ancestor) return true;
    node = *parent;
  }
  return false;
}

}  // namespace

std::vector<ClassId> most_specific_labels(const Taxonomy& taxonomy, const std::vector<ClassId>& labels) {
  std::vector<ClassId> out;
  for (const auto& label : labels) {
    const bool covered = std::any_of(labels.begin(), labels.end(), [&](const ClassId& other) {
      return other != label && taxonomy.contains(other) && is_ancestor(taxonomy, label, other);
    });
    if (!covered) out.push_back(label);
  }
  return out;
}

SyntheticFeatures::SyntheticFeatures(const Taxonomy& taxonomy, const SyntheticFeatureSpec& spec)
    : taxonomy_(&taxonomy), spec_(spec) {
  if (spec.frames < 4 || spec.mels < 4) fail(ErrorKind::kConfig, "synthetic features need at least 4 frames and 4 mels");
  std::vector<Wave> grid;
  for (size_t ft = 1; ft < spec.frames / 2; ++ft) {
    for (size_t fm = 1; fm < spec.mels / 2; ++fm) {
      grid.push_back({static_cast<double>(ft), static_cast<double>(fm), 0.0});
      grid.push_back({static_cast<double>(ft), -static_cast<double>(fm), 0.0});
    }
  }
  const size_t bank = spec.bank ? spec.bank : grid.size();
  if (spec.components < 1 || bank < spec.components || bank > grid.size()) {
    fail(ErrorKind::kConfig, "synthetic features: need 1 <= components <= bank <= " + std::to_string(grid.size()) +
                                 " for a " + std::to_string(spec.frames) + "x" + std::to_string(spec.mels) + " grid");
  }
  Rng rng(Rng::mix(spec.seed, 0x7e7));
  rng.shuffle(grid);
  grid.resize(bank);
  // Each class draws a distinct subset of the shared wave bank while distinct
  // subsets remain; phases are per class.
  std::set<std::vector<size_t>> used;
  for (const auto& id : taxonomy.ids()) {
    std::vector<size_t> pick;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      pick = rng.sample_without_replacement(bank, spec.components);
      std::sort(pick.begin(), pick.end());
      if (!used.count(pick)) break;
    }
    used.insert(pick);
    Texture tex;
    for (size_t k : pick) {
      Wave w = grid[k];
      w.phase = 2.0 * std::numbers::pi * rng.uniform01();
      tex.waves.push_back(w);
    }
    textures_[id] = std::move(tex);
  }
}

const SyntheticFeatures::Texture& SyntheticFeatures::texture(const ClassId& c) const {
  auto it = textures_.find(c);
  if (it == textures_.end()) fail(ErrorKind::kLookup, "synthetic features: unknown class '" + c + "'");
  return it->second;
}

void SyntheticFeatures::add_signature(std::vector<double>& out, const ClassId& c, double gain) const {
  const double T = static_cast<double>(spec_.frames), M = static_cast<double>(spec_.mels);
  const double amp = gain / std::sqrt(static_cast<double>(spec_.components));
  for (const Wave& w : texture(c).waves) {
    for (size_t t = 0; t < spec_.frames; ++t) {
      for (size_t m = 0; m < spec_.mels; ++m) {
        const double arg =
            2.0 * std::numbers::pi * (w.f_time * static_cast<double>(t) / T + w.f_mel * static_cast<double>(m) / M);
        out[t * spec_.mels + m] += amp * std::cos(arg + w.phase);
      }
    }
  }
  if (taxonomy_->is_single_path(c)) {
    if (auto parent = taxonomy_->parent_of(c)) add_signature(out, *parent, 0.5 * gain);
  }
}

Tensor<float> SyntheticFeatures::clip(const ClipRecord& record) const {
  Rng rng(Rng::mix(spec_.seed, string_seed(record.clip_id)));
  std::vector<double> acc(spec_.frames * spec_.mels, 0.0);
  for (const auto& label : most_specific_labels(*taxonomy_, record.labels)) add_signature(acc, label, 1.0);
  Tensor<float> out({1, spec_.frames, spec_.mels});
  for (size_t i = 0; i < acc.size(); ++i) out.values[i] = static_cast<float>(acc[i] + spec_.noise * rng.normal());
  return out;
}

std::vector<Tensor<float>> SyntheticFeatures::clips(const std::vector<ClipRecord>& records) const {
  std::vector<Tensor<float>> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(clip(r));
  return out;
}

void parallel_for(size_t n, int threads, const std::function<void(size_t)>& body) {
  size_t workers = threads > 0 ? static_cast<size_t>(threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<Matrix> extract_logmels(const std::vector<ClipRecord>& records, const fs::path& audio_dir,
                                    const DspConfig& dsp, const fs::path& cache_dir, size_t frames, int threads) {
  dsp.validate();
  const std::string dsp_fp = dsp.fingerprint();
  if (!cache_dir.empty()) fs::create_directories(cache_dir);
  const double pad = std::log(dsp.log_floor);
  std::vector<Matrix> out(records.size());
  parallel_for(records.size(), threads, [&](size_t i) {
    const fs::path wav = audio_dir / (records[i].clip_id + ".wav");
    if (!fs::exists(wav)) fail(ErrorKind::kIo, "audio file missing for clip '" + records[i].clip_id + "': " + wav.string());
    const std::string bytes = read_file(wav);
    const std::string clip_fp = content_fingerprint(bytes);
    const fs::path cached = cache_dir.empty() ? fs::path() : cache_dir / (clip_fp + "-" + dsp_fp + ".lpfeat");
    Matrix values;
    bool hit = false;
    if (!cached.empty() && fs::exists(cached)) {
      try {
        FeatureFile f = decode_feature_file(read_file(cached));
        if (f.clip_fingerprint == clip_fp && f.config_fingerprint == dsp_fp) {
          values = std::move(f.values);
          hit = true;
        }
      } catch (const Error&) {
        hit = false;  // unreadable entries are recomputed
      }
    }
    if (!hit) {
      values = logmel(parse_wav(bytes), dsp).values;
      // Match the float32 cache payload so hits and misses agree bit for bit.
      for (double& v : values.data) v = static_cast<float>(v);
      if (!cached.empty()) write_file(cached, encode_feature_file({values, dsp_fp, clip_fp}));
    }
    out[i] = fit_frames(values, frames, pad);
  });
  return out;
}

Tensor<float> to_network_input(const Matrix& spec) {
  Tensor<float> out({1, spec.rows, spec.cols});
  for (size_t i = 0; i < spec.data.size(); ++i) out.values[i] = static_cast<float>(spec.data[i]);
  return out;
}

std::vector<std::vector<Tensor<float>>> build_features(const RunConfig& config, const Taxonomy& taxonomy,
                                                       const std::vector<ClipRecord>& fit_pool,
                                                       const std::vector<const std::vector<ClipRecord>*>& pools) {
  std::vector<std::vector<Tensor<float>>> out;
  if (config.feature_mode == FeatureMode::kSynthetic) {
    SyntheticFeatures synth(taxonomy, config.synthetic_features);
    for (const auto* pool : pools) out.push_back(synth.clips(*pool));
    return out;
  }
  const size_t frames =
      config.audio_frames ? config.audio_frames : frame_count(static_cast<size_t>(config.dsp.sample_rate), config.dsp);
  auto extract = [&](const std::vector<ClipRecord>& records) {
    return extract_logmels(records, config.audio_dir, config.dsp, config.cache_dir, frames, config.threads);
  };
  const std::vector<Matrix> fit = extract(fit_pool);
  std::vector<const Matrix*> ptrs;
  for (const auto& m : fit) ptrs.push_back(&m);
  if (ptrs.empty()) fail(ErrorKind::kInfeasible, "features: base pool is empty, cannot fit z-score statistics");
  const ZScoreStats stats = zscore_fit(ptrs);
  for (const auto* pool : pools) {
    std::vector<Tensor<float>> tensors;
    for (const auto& m : extract(*pool)) tensors.push_back(to_network_input(zscore_apply(m, stats)));
    out.push_back(std::move(tensors));
  }
  return out;
}

std::string feature_fingerprint(const RunConfig& config) {
  if (config.feature_mode == FeatureMode::kSynthetic) {
    const auto& s = config.synthetic_features;
    return short_hash("synthetic " + std::to_string(s.frames) + " " + std::to_string(s.mels) + " " +
                      std::to_string(s.components) + " " + std::to_string(s.bank) + " " + std::to_string(s.noise) +
                      " " + std::to_string(s.seed));
  }
  return short_hash("audio " + config.dsp.fingerprint() + " " + std::to_string(config.audio_frames));
}

}  // namespace ladproto
