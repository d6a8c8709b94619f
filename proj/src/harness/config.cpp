#include "harness/config.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <sstream>

#include "common/error.h"
#include "common/io.h"

namespace ladproto {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool is_path_key(const std::string& key) { return key.rfind("paths.", 0) == 0 || key == "train.transcript"; }

}  // namespace

const std::map<std::string, std::string>& Config::defaults() {
  static const std::map<std::string, std::string> table = {
      {"paths.ontology", ""},
      {"paths.metadata", ""},
      {"paths.metadata_eval", ""},
      {"paths.audio", ""},
      {"paths.output", "out"},
      {"paths.cache", ""},
      {"paths.split_manifest", ""},
      {"paths.checkpoint", ""},
      {"features.mode", "synthetic"},
      {"features.frames", "16"},
      {"features.mels", "16"},
      {"features.components", "1"},
      {"features.bank", "0"},
      {"features.noise", "0.5"},
      {"features.seed", "0"},
      {"features.audio_frames", "0"},
      {"dsp.sample_rate", "44100"},
      {"dsp.window_length", "882"},
      {"dsp.hop", "441"},
      {"dsp.fft_size", "0"},
      {"dsp.n_mels", "64"},
      {"dsp.fmin", "0"},
      {"dsp.fmax", "0"},
      {"dsp.log_floor", "1e-10"},
      {"curation.keep_depths", "1,2"},
      {"curation.ratio", "7:2:1"},
      {"curation.min_per_class", "auto"},
      {"episode.n_way", "12"},
      {"episode.k_shot", "5"},
      {"episode.distance", "sqeuclidean"},
      {"episode.beta", "none"},
      {"method", "lad"},
      {"net.channels", "32,64,128,256"},
      {"net.kernel_size", "3"},
      {"net.norm", "false"},
      {"optimizer.kind", "adam"},
      {"optimizer.lr", "0.001"},
      {"optimizer.momentum", "0.9"},
      {"train.steps", "1000"},
      {"train.queries_per_step", "1"},
      {"train.log_every", "1"},
      {"train.transcript", ""},
      {"eval.episodes", "1000"},
      {"eval.runs", "5"},
      {"eval.n_way", "12"},
      {"eval.k_shot", "5"},
      {"eval.threshold", "0.5"},
      {"eval.splits", "validation,evaluation"},
      {"eval.accuracy_episodes", "0"},
      {"eval.accuracy_way", "5"},
      {"eval.accuracy_shot", "5"},
      {"eval.accuracy_queries", "5"},
      {"seed.split", "0"},
      {"seed.init", "0"},
      {"seed.episode", "0"},
      {"seed.eval", "0"},
      {"synth.n_roots", "4"},
      {"synth.depth", "2"},
      {"synth.branching", "4"},
      {"synth.n_clips", "400"},
      {"synth.labels_per_clip", "1"},
      {"synth.pair_probability", "0.5"},
      {"synth.seed", "0"},
      {"synth.audio", "false"},
      {"synth.clip_seconds", "1.0"},
      {"sweep.betas", "15,30,45"},
      {"report.inputs", ""},
      {"run.threads", "0"},
  };
  return table;
}

Config Config::load(const fs::path& file) {
  Config c;
  c.merge_file(file);
  return c;
}

Config Config::parse(const std::string& text, const fs::path& base_dir) {
  Config c;
  std::vector<fs::path> stack;
  c.parse_into(text, base_dir, stack);
  return c;
}

void Config::merge_file(const fs::path& file) {
  std::vector<fs::path> stack;
  const fs::path abs = fs::absolute(file).lexically_normal();
  std::string text;
  try {
    text = read_file(abs);
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, "cannot read config file '" + file.string() + "'");
  }
  stack.push_back(abs);
  parse_into(text, abs.parent_path(), stack);
}

void Config::parse_into(const std::string& text, const fs::path& base_dir, std::vector<fs::path>& stack) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  const std::string where = stack.empty() ? "config" : stack.back().string();
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::kConfig, where + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key == "include") {
      const fs::path inc = (base_dir / value).lexically_normal();
      if (std::find(stack.begin(), stack.end(), inc) != stack.end()) {
        fail(ErrorKind::kConfig, where + ":" + std::to_string(lineno) + ": include cycle through '" + inc.string() + "'");
      }
      std::string sub;
      try {
        sub = read_file(inc);
      } catch (const Error&) {
        fail(ErrorKind::kConfig, where + ":" + std::to_string(lineno) + ": cannot read include '" + inc.string() + "'");
      }
      stack.push_back(inc);
      parse_into(sub, inc.parent_path(), stack);
      stack.pop_back();
      continue;
    }
    try {
      set(key, value, base_dir);
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, where + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void Config::set(const std::string& key, const std::string& value, const fs::path& base_dir) {
  if (!defaults().count(key)) fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
  entries_[key] = {value, base_dir};
}

std::string Config::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it != entries_.end()) return it->second.value;
  auto d = defaults().find(key);
  if (d == defaults().end()) fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
  return d->second;
}

fs::path Config::path(const std::string& key) const {
  const std::string v = get(key);
  if (v.empty()) return {};
  auto it = entries_.find(key);
  const fs::path base = it != entries_.end() ? it->second.base : fs::current_path();
  return (base / v).lexically_normal();
}

int64_t Config::integer(const std::string& key) const {
  const std::string v = get(key);
  int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    fail(ErrorKind::kConfig, "config key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

double Config::real(const std::string& key) const {
  const std::string v = get(key);
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) {
    fail(ErrorKind::kConfig, "config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

bool Config::boolean(const std::string& key) const {
  const std::string v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorKind::kConfig, "config key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<std::string> Config::list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(get(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string Config::dump() const {
  std::string out;
  for (const auto& [key, def] : defaults()) {
    const std::string v = is_path_key(key) ? path(key).string() : get(key);
    out += key + " = " + v + "\n";
  }
  return out;
}

std::string RunConfig::beta_label() const {
  switch (episode.smoothing) {
    case Smoothing::kOneHot:
      return "-";
    case Smoothing::kUniform:
      return "uniform";
    case Smoothing::kTaxonomy: {
      std::ostringstream s;
      s << episode.beta;
      return s.str();
    }
  }
  return "-";
}

namespace {

std::vector<double> parse_reals(const Config& c, const std::string& key) {
  std::vector<double> out;
  for (const auto& item : c.list(key)) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end != item.c_str() + item.size()) {
      fail(ErrorKind::kConfig, "config key '" + key + "': '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  return out;
}

int positive_int(const Config& c, const std::string& key, int64_t min = 1) {
  const int64_t v = c.integer(key);
  if (v < min || v > (int64_t{1} << 30)) {
    fail(ErrorKind::kConfig, "config key '" + key + "' must be >= " + std::to_string(min) + ", got " + std::to_string(v));
  }
  return static_cast<int>(v);
}

uint64_t seed_of(const Config& c, const std::string& key) {
  const int64_t v = c.integer(key);
  if (v < 0) fail(ErrorKind::kConfig, "config key '" + key + "' must be non-negative");
  return static_cast<uint64_t>(v);
}

}  // namespace

RunConfig resolve_run_config(const Config& c) {
  RunConfig r;
  r.ontology = c.path("paths.ontology");
  r.metadata = c.path("paths.metadata");
  r.metadata_eval = c.path("paths.metadata_eval");
  r.audio_dir = c.path("paths.audio");

  // Environment variables only supply roots that the config leaves unset.
  if (!c.is_set("paths.output") && std::getenv("LADPROTO_OUTPUT_DIR")) {
    r.output_dir = fs::path(std::getenv("LADPROTO_OUTPUT_DIR"));
  } else {
    r.output_dir = c.path("paths.output");
  }
  if (c.is_set("paths.cache")) {
    r.cache_dir = c.path("paths.cache");
  } else if (std::getenv("LADPROTO_CACHE_DIR")) {
    r.cache_dir = fs::path(std::getenv("LADPROTO_CACHE_DIR"));
  } else {
    r.cache_dir = r.output_dir / "cache";
  }
  if (r.audio_dir.empty()) r.audio_dir = r.output_dir / "audio";
  r.split_manifest = c.is_set("paths.split_manifest") ? c.path("paths.split_manifest") : r.output_dir / "split_manifest.json";
  r.checkpoint = c.is_set("paths.checkpoint") ? c.path("paths.checkpoint") : r.output_dir / "checkpoint.bin";
  r.transcript = c.path("train.transcript");

  const std::string mode = c.get("features.mode");
  if (mode == "synthetic") {
    r.feature_mode = FeatureMode::kSynthetic;
  } else if (mode == "audio") {
    r.feature_mode = FeatureMode::kAudio;
  } else {
    fail(ErrorKind::kConfig, "features.mode must be 'synthetic' or 'audio', got '" + mode + "'");
  }
  r.synthetic_features.frames = static_cast<size_t>(positive_int(c, "features.frames"));
  r.synthetic_features.mels = static_cast<size_t>(positive_int(c, "features.mels"));
  r.synthetic_features.components = static_cast<size_t>(positive_int(c, "features.components"));
  r.synthetic_features.bank = static_cast<size_t>(positive_int(c, "features.bank", 0));
  r.synthetic_features.noise = c.real("features.noise");
  if (!(r.synthetic_features.noise >= 0.0)) fail(ErrorKind::kConfig, "features.noise must be non-negative");
  r.synthetic_features.seed = seed_of(c, "features.seed");
  r.audio_frames = static_cast<size_t>(positive_int(c, "features.audio_frames", 0));

  r.dsp.sample_rate = c.real("dsp.sample_rate");
  r.dsp.window_length = positive_int(c, "dsp.window_length");
  r.dsp.hop = positive_int(c, "dsp.hop");
  r.dsp.fft_size = positive_int(c, "dsp.fft_size", 0);
  r.dsp.n_mels = positive_int(c, "dsp.n_mels");
  r.dsp.fmin = c.real("dsp.fmin");
  r.dsp.fmax = c.real("dsp.fmax");
  r.dsp.log_floor = c.real("dsp.log_floor");
  if (r.feature_mode == FeatureMode::kAudio) r.dsp.validate();

  r.curation.keep_depths.clear();
  for (const auto& d : c.list("curation.keep_depths")) {
    try {
      const int v = std::stoi(d);
      if (v < 0) throw std::invalid_argument("negative");
      r.curation.keep_depths.insert(v);
    } catch (const std::exception&) {
      fail(ErrorKind::kConfig, "curation.keep_depths: '" + d + "' is not a non-negative integer");
    }
  }
  {
    const std::string ratio = c.get("curation.ratio");
    std::vector<double> parts;
    std::istringstream in(ratio);
    std::string item;
    while (std::getline(in, item, ':')) {
      char* end = nullptr;
      const double v = std::strtod(item.c_str(), &end);
      if (item.empty() || end != item.c_str() + item.size()) {
        fail(ErrorKind::kConfig, "curation.ratio must look like 7:2:1, got '" + ratio + "'");
      }
      parts.push_back(v);
    }
    if (parts.size() != 3) fail(ErrorKind::kConfig, "curation.ratio must have three parts, got '" + ratio + "'");
    r.curation.ratio = {parts[0], parts[1], parts[2]};
  }
  r.curation.seed = seed_of(c, "seed.split");

  r.episode.n_way = positive_int(c, "episode.n_way", 2);
  r.episode.k_shot = positive_int(c, "episode.k_shot");
  r.episode.distance = parse_distance(c.get("episode.distance"));
  const std::string beta = c.get("episode.beta");
  if (beta == "none" || beta.empty()) {
    r.episode.smoothing = Smoothing::kOneHot;
  } else if (beta == "uniform") {
    r.episode.smoothing = Smoothing::kUniform;
  } else {
    r.episode.smoothing = Smoothing::kTaxonomy;
    r.episode.beta = c.real("episode.beta");
  }
  r.episode.validate();
  const std::string mpc = c.get("curation.min_per_class");
  r.curation.min_per_class = mpc == "auto" ? r.episode.k_shot + 1 : positive_int(c, "curation.min_per_class", 0);

  r.method = parse_method(c.get("method"));

  r.arch = ArchConfig{};
  r.arch.channels.clear();
  for (const auto& ch : c.list("net.channels")) {
    try {
      r.arch.channels.push_back(std::stoi(ch));
    } catch (const std::exception&) {
      fail(ErrorKind::kConfig, "net.channels: '" + ch + "' is not an integer");
    }
  }
  r.arch.kernel_size = positive_int(c, "net.kernel_size");
  r.arch.norm = c.boolean("net.norm");
  r.arch.input_mels = static_cast<int>(r.feature_mode == FeatureMode::kSynthetic ? r.synthetic_features.mels
                                                                                  : static_cast<size_t>(r.dsp.n_mels));
  r.arch.validate();

  r.optimizer.kind = parse_optimizer_kind(c.get("optimizer.kind"));
  r.optimizer.lr = c.real("optimizer.lr");
  r.optimizer.momentum = c.real("optimizer.momentum");
  r.optimizer.validate();

  r.train_steps = positive_int(c, "train.steps", 0);
  r.queries_per_step = positive_int(c, "train.queries_per_step");
  r.log_every = positive_int(c, "train.log_every");

  r.eval.episodes = positive_int(c, "eval.episodes");
  r.eval.runs = positive_int(c, "eval.runs");
  r.eval.n_way = positive_int(c, "eval.n_way", 2);
  r.eval.k_shot = positive_int(c, "eval.k_shot");
  r.eval.threshold = c.real("eval.threshold");
  r.eval.splits = c.list("eval.splits");
  for (const auto& s : r.eval.splits) {
    if (s != "validation" && s != "evaluation" && s != "novel") {
      fail(ErrorKind::kConfig, "eval.splits: unknown split '" + s + "' (expected validation, evaluation or novel)");
    }
  }
  r.eval.accuracy_episodes = positive_int(c, "eval.accuracy_episodes", 0);
  r.eval.accuracy_way = positive_int(c, "eval.accuracy_way", 2);
  r.eval.accuracy_shot = positive_int(c, "eval.accuracy_shot");
  r.eval.accuracy_queries = positive_int(c, "eval.accuracy_queries");

  r.seeds.split = seed_of(c, "seed.split");
  r.seeds.init = seed_of(c, "seed.init");
  r.seeds.episode = seed_of(c, "seed.episode");
  r.seeds.eval = seed_of(c, "seed.eval");

  r.synth.n_roots = positive_int(c, "synth.n_roots");
  r.synth.depth = positive_int(c, "synth.depth");
  r.synth.branching = positive_int(c, "synth.branching");
  r.synth.n_clips = positive_int(c, "synth.n_clips", 0);
  r.synth.labels_per_clip = positive_int(c, "synth.labels_per_clip");
  r.synth.pair_probability = c.real("synth.pair_probability");
  r.synth.seed = seed_of(c, "synth.seed");
  r.synth_audio = c.boolean("synth.audio");
  r.synth_clip_seconds = c.real("synth.clip_seconds");
  if (!(r.synth_clip_seconds > 0.0)) fail(ErrorKind::kConfig, "synth.clip_seconds must be positive");

  r.sweep_betas = parse_reals(c, "sweep.betas");
  for (double b : r.sweep_betas) {
    if (!(b > 0.0)) fail(ErrorKind::kConfig, "sweep.betas: every beta must be positive");
  }
  for (const auto& p : c.list("report.inputs")) {
    r.report_inputs.push_back(fs::path(p).is_absolute() ? fs::path(p) : fs::current_path() / p);
  }
  r.threads = positive_int(c, "run.threads", 0);
  return r;
}

}  // namespace ladproto
