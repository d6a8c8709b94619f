#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "common/error.h"
#include "common/io.h"
#include "dsp/dsp.h"
#include "harness/commands.h"
#include "harness/config.h"
#include "harness/evaluation.h"
#include "harness/features.h"
#include "json.hpp"

namespace ladproto {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ladproto_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void quiet() {
  set_log_sink([](const std::string&) {});
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::kState;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected an Error";
  return "";
}

// Small hierarchical benchmark: 3 roots x 3 children, cluster features on an
// 8 x 8 grid, a 4-block net with a handful of channels.
const char* kTinyConfig = R"(# tiny benchmark
paths.ontology = ontology.json
paths.metadata = metadata.csv
paths.output = out
synth.n_roots = 3
synth.depth = 2
synth.branching = 3
synth.n_clips = 240
synth.seed = 5
curation.keep_depths = 0,1
features.frames = 8
features.mels = 8
features.noise = 0.25
net.channels = 4,4,8,8
episode.n_way = 3
episode.k_shot = 2
train.steps = 30
train.log_every = 10
eval.splits = novel
eval.n_way = 2
eval.k_shot = 2
eval.episodes = 40
eval.runs = 2
eval.accuracy_episodes = 10
eval.accuracy_way = 2
eval.accuracy_shot = 2
eval.accuracy_queries = 2
)";

Config tiny_config(const fs::path& dir) {
  write_file(dir / "run.cfg", kTinyConfig);
  return Config::load(dir / "run.cfg");
}

Config prepared(const std::string& name) {
  quiet();
  const fs::path dir = fresh_dir(name);
  Config c = tiny_config(dir);
  cmd_synth(c);
  cmd_curate(c);
  return c;
}

TEST(Config, CommentsIncludesAndOverrides) {
  const fs::path dir = fresh_dir("config_include");
  write_file(dir / "sub" / "base.cfg", "# shared\nepisode.k_shot = 3\npaths.ontology = onto.json\n");
  write_file(dir / "main.cfg", "include = sub/base.cfg\n\n  episode.n_way = 7  \nepisode.k_shot = 4\n");
  Config c = Config::load(dir / "main.cfg");
  EXPECT_EQ(c.get("episode.n_way"), "7");
  EXPECT_EQ(c.get("episode.k_shot"), "4");
  EXPECT_EQ(c.path("paths.ontology"), (dir / "sub" / "onto.json").lexically_normal());
  EXPECT_EQ(c.get("episode.distance"), "sqeuclidean");
  EXPECT_FALSE(c.is_set("episode.distance"));
}

TEST(Config, ErrorsNameFileLineAndKey) {
  const fs::path dir = fresh_dir("config_errors");
  write_file(dir / "a.cfg", "include = b.cfg\n");
  write_file(dir / "b.cfg", "include = a.cfg\n");
  EXPECT_EQ(kind_of([&] { Config::load(dir / "a.cfg"); }), ErrorKind::kConfig);
  EXPECT_NE(message_of([&] { Config::load(dir / "a.cfg"); }).find("include cycle"), std::string::npos);

  write_file(dir / "bad.cfg", "episode.n_way = 3\nepisode.nway = 4\n");
  const std::string msg = message_of([&] { Config::load(dir / "bad.cfg"); });
  EXPECT_NE(msg.find("bad.cfg:2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("episode.nway"), std::string::npos) << msg;

  write_file(dir / "noeq.cfg", "just words\n");
  EXPECT_EQ(kind_of([&] { Config::load(dir / "noeq.cfg"); }), ErrorKind::kConfig);

  Config c;
  c.set("episode.n_way", "twelve");
  EXPECT_NE(message_of([&] { c.integer("episode.n_way"); }).find("episode.n_way"), std::string::npos);
  EXPECT_EQ(kind_of([&] { resolve_run_config(c); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([&] { c.set("no.such.key", "1"); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { Config::load("/nonexistent/run.cfg"); }), ErrorKind::kConfig);
}

TEST(Config, ResolvedDefaultsAndComputedValues) {
  Config c;
  c.set("paths.output", "/tmp/run1", "/");
  c.set("episode.k_shot", "4");
  const RunConfig r = resolve_run_config(c);
  EXPECT_EQ(r.split_manifest, fs::path("/tmp/run1/split_manifest.json"));
  EXPECT_EQ(r.checkpoint, fs::path("/tmp/run1/checkpoint.bin"));
  EXPECT_EQ(r.cache_dir, fs::path("/tmp/run1/cache"));
  EXPECT_EQ(r.curation.min_per_class, 5);
  EXPECT_EQ(r.curation.keep_depths, (std::set<int>{1, 2}));
  EXPECT_EQ(r.episode.n_way, 12);
  EXPECT_EQ(r.method, Method::kLad);
  EXPECT_EQ(r.episode.smoothing, Smoothing::kOneHot);
  EXPECT_EQ(r.sweep_betas, (std::vector<double>{15, 30, 45}));
  EXPECT_EQ(r.arch.input_mels, 16);

  c.set("episode.beta", "30");
  EXPECT_EQ(resolve_run_config(c).episode.smoothing, Smoothing::kTaxonomy);
  EXPECT_DOUBLE_EQ(resolve_run_config(c).episode.beta, 30.0);
  EXPECT_EQ(resolve_run_config(c).beta_label(), "30");
  c.set("episode.beta", "uniform");
  EXPECT_EQ(resolve_run_config(c).episode.smoothing, Smoothing::kUniform);

  c.set("curation.ratio", "7:2");
  EXPECT_EQ(kind_of([&] { resolve_run_config(c); }), ErrorKind::kConfig);
  c.set("curation.ratio", "7:2:1");
  c.set("eval.splits", "validation,test");
  EXPECT_EQ(kind_of([&] { resolve_run_config(c); }), ErrorKind::kConfig);
}

TEST(Config, EnvironmentSuppliesRootsOnlyWhenUnset) {
  ::setenv("LADPROTO_OUTPUT_DIR", "/tmp/env_out", 1);
  ::setenv("LADPROTO_CACHE_DIR", "/tmp/env_cache", 1);
  Config c;
  RunConfig r = resolve_run_config(c);
  EXPECT_EQ(r.output_dir, fs::path("/tmp/env_out"));
  EXPECT_EQ(r.cache_dir, fs::path("/tmp/env_cache"));
  c.set("paths.output", "/tmp/explicit", "/");
  c.set("paths.cache", "/tmp/explicit_cache", "/");
  r = resolve_run_config(c);
  EXPECT_EQ(r.output_dir, fs::path("/tmp/explicit"));
  EXPECT_EQ(r.cache_dir, fs::path("/tmp/explicit_cache"));
  ::unsetenv("LADPROTO_OUTPUT_DIR");
  ::unsetenv("LADPROTO_CACHE_DIR");
}

TEST(Config, DumpListsEveryKeyOnce) {
  Config c;
  c.set("method", "baseline");
  const std::string dump = c.dump();
  size_t lines = 0;
  std::istringstream in(dump);
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, Config::defaults().size());
  EXPECT_NE(dump.find("method = baseline\n"), std::string::npos);
}

TEST(SyntheticFeatures, DeterministicPerClipAndLabelSetClusters) {
  auto ds = generate_synthetic({2, 2, 3, 0, 1, 0.5, 1});
  SyntheticFeatureSpec spec{8, 8, 1, 0, 0.0, 3};
  SyntheticFeatures f(ds.taxonomy, spec);
  const ClipRecord child{"a", {"/syn/r0.1"}, SourceSplit::kDev};
  const ClipRecord smeared{"b", {"/syn/r0", "/syn/r0.1"}, SourceSplit::kDev};
  // Without noise a smeared parent label adds nothing: same cluster center.
  EXPECT_EQ(f.clip(child).values, f.clip(smeared).values);

  spec.noise = 0.5;
  SyntheticFeatures noisy(ds.taxonomy, spec);
  EXPECT_EQ(noisy.clip(child).values, noisy.clip(child).values);
  EXPECT_NE(noisy.clip(child).values, noisy.clip({"c", child.labels, SourceSplit::kDev}).values);
  const auto batch = noisy.clips({smeared, child});
  EXPECT_EQ(batch[1].values, noisy.clip(child).values);
  EXPECT_EQ(batch[0].shape, (std::vector<size_t>{1, 8, 8}));

  // Distinct classes own distinct waves.
  std::set<std::pair<double, double>> seen;
  for (const auto& id : ds.taxonomy.ids()) {
    const auto& w = f.texture(id).waves.at(0);
    EXPECT_TRUE(seen.insert({w.f_time, w.f_mel}).second) << id;
  }
}

TEST(SyntheticFeatures, RawPrototypesSeparateClasses) {
  auto ds = generate_synthetic({3, 2, 3, 300, 1, 0.5, 2});
  SyntheticFeatures f(ds.taxonomy, {8, 8, 1, 0, 0.25, 4});
  std::set<ClassId> classes(ds.taxonomy.ids().begin(), ds.taxonomy.ids().end());
  ExamplePool pool(ds.records, classes);
  std::vector<Embedding> raw;
  for (const auto& r : pool.records()) {
    const auto t = f.clip(r);
    raw.emplace_back(t.values.begin(), t.values.end());
  }
  EXPECT_GE(evaluate_accuracy(pool, raw, 3, 3, 2, 50, Distance::kSquaredEuclidean, 9), 0.95);
}

TEST(Commands, SynthOutputsLoadThroughCuration) {
  const Config c = prepared("synth");
  const RunConfig r = resolve_run_config(c);
  const Taxonomy t = load_taxonomy_file(r.ontology);
  EXPECT_EQ(t.size(), 12u);
  const auto records = load_metadata_csv(r.metadata, SourceSplit::kDev);
  EXPECT_EQ(records.size(), 240u);
  const auto manifest = manifest_from_json(read_file(r.split_manifest));
  EXPECT_EQ(manifest.eligible_count, 12u);
  EXPECT_TRUE(manifest.audit.empty());
}

TEST(Commands, CurateSummaryEchoesRatioAndIsDeterministic) {
  Config c = prepared("curate");
  const RunConfig r = resolve_run_config(c);
  const std::string first = read_file(r.split_manifest);
  const CurateResult again = cmd_curate(c);
  EXPECT_EQ(read_file(again.manifest), first);
  EXPECT_EQ(again.summary.rfind("ratio 7:2:1\n", 0), 0u) << again.summary;
  EXPECT_NE(again.summary.find("base"), std::string::npos);
}

TEST(Commands, CurateSurfacesInfeasibleSplits) {
  Config c = prepared("curate_infeasible");
  c.set("curation.ratio", "1:0:0");
  const std::string msg = message_of([&] { cmd_curate(c); });
  EXPECT_EQ(msg.rfind("curate: ", 0), 0u) << msg;
  EXPECT_EQ(kind_of([&] { cmd_curate(c); }), ErrorKind::kInfeasible);
}

TEST(Commands, TrainIsReproducibleAndRecordsManifest) {
  Config c = prepared("train");
  c.set("episode.beta", "30");
  const TrainResult a = cmd_train(c);
  const std::string ckpt = read_file(a.checkpoint);
  const TrainResult b = cmd_train(c);
  EXPECT_EQ(a.losses, b.losses);
  EXPECT_EQ(read_file(b.checkpoint), ckpt);
  ASSERT_EQ(a.losses.size(), 30u);

  const json m = json::parse(read_file(a.manifest));
  EXPECT_EQ(m["smoothing"], "taxonomy");
  EXPECT_EQ(m["beta"], "30");
  EXPECT_EQ(m["method"], "lad");
  EXPECT_EQ(m["losses"].size(), 30u);
  EXPECT_EQ(m["checkpoint"], content_fingerprint(ckpt));
  EXPECT_EQ(m["config"]["episode.beta"], "30");
  EXPECT_FALSE(m["inputs"]["split_manifest"].get<std::string>().empty());
}

TEST(Commands, TrainingReducesLossOnSeparableData) {
  Config c = prepared("train_loss");
  c.set("train.steps", "200");
  const auto losses = cmd_train(c).losses;
  double head = 0, tail = 0;
  for (size_t i = 0; i < 40; ++i) {
    head += losses[i];
    tail += losses[losses.size() - 1 - i];
  }
  EXPECT_LT(tail, head);
}

TEST(Commands, BaselineAndLadCoincideOnFlatSingleLabelTaxonomy) {
  Config c = prepared("flat");
  c.set("synth.depth", "1");
  c.set("synth.n_roots", "8");
  c.set("curation.keep_depths", "0");
  cmd_synth(c);
  cmd_curate(c);
  c.set("method", "lad");
  const auto lad = cmd_train(c).losses;
  c.set("method", "baseline");
  const auto base = cmd_train(c).losses;
  ASSERT_EQ(lad.size(), base.size());
  for (size_t i = 0; i < lad.size(); ++i) EXPECT_NEAR(lad[i], base[i], 1e-9) << i;
}

TEST(Commands, TrainErrorsNameStageAndEntity) {
  Config c = prepared("train_errors");
  c.set("paths.split_manifest", "missing.json");
  std::string msg = message_of([&] { cmd_train(c); });
  EXPECT_EQ(msg.rfind("train: split manifest not found", 0), 0u) << msg;
  EXPECT_EQ(kind_of([&] { cmd_train(c); }), ErrorKind::kIo);

  Config scarce = prepared("train_scarce");
  scarce.set("episode.k_shot", "60");
  scarce.set("curation.min_per_class", "1");
  msg = message_of([&] { cmd_train(scarce); });
  EXPECT_NE(msg.find("class '/syn/"), std::string::npos) << msg;
  EXPECT_EQ(kind_of([&] { cmd_train(scarce); }), ErrorKind::kInfeasible);
}

TEST(Commands, EvalReportsAreReproducibleAndBeatUniformControl) {
  Config c = prepared("eval");
  c.set("train.steps", "150");
  cmd_train(c);
  const EvalResult a = cmd_eval(c);
  const std::string json_a = read_file(a.report_json), csv_a = read_file(a.report_csv);
  const EvalResult b = cmd_eval(c);
  EXPECT_EQ(read_file(b.report_json), json_a);
  EXPECT_EQ(read_file(b.report_csv), csv_a);

  ASSERT_TRUE(a.report.splits.count("novel"));
  EXPECT_GT(a.report.splits.at("novel").map.mean, a.control_map.at("novel"));
  EXPECT_EQ(a.report.splits.at("novel").runs.size(), 2u);
  EXPECT_EQ(csv_a.substr(0, csv_a.find('\n')), "method,beta,split,mAP,mAP_hw,AUC,AUC_hw,F1,F1_hw");
  const json doc = json::parse(json_a);
  EXPECT_TRUE(doc["controls"]["novel"].contains("uniform_control_mAP"));
  EXPECT_TRUE(doc["controls"]["novel"].contains("accuracy"));
}

TEST(Commands, EvalReportsValidationAndEvaluationColumns) {
  Config c = prepared("eval_splits");
  c.set("train.steps", "5");
  c.set("synth.n_roots", "6");
  c.set("synth.n_clips", "600");
  c.set("eval.splits", "validation,evaluation");
  c.set("eval.accuracy_episodes", "0");
  cmd_synth(c);
  cmd_curate(c);
  cmd_train(c);
  const EvalResult r = cmd_eval(c);
  EXPECT_EQ(r.report.splits.size(), 2u);
  EXPECT_TRUE(r.report.splits.count("validation"));
  EXPECT_TRUE(r.report.splits.count("evaluation"));
  EXPECT_TRUE(r.accuracy.empty());
}

TEST(Commands, EvalRejectsMismatchedArchitectureWithBothFingerprints) {
  Config c = prepared("eval_mismatch");
  c.set("train.steps", "1");
  cmd_train(c);
  const std::string trained = resolve_run_config(c).arch.fingerprint();
  c.set("net.channels", "4,4,8,16");
  const std::string configured = resolve_run_config(c).arch.fingerprint();
  const std::string msg = message_of([&] { cmd_eval(c); });
  EXPECT_NE(msg.find(trained), std::string::npos) << msg;
  EXPECT_NE(msg.find(configured), std::string::npos) << msg;
  EXPECT_EQ(kind_of([&] { cmd_eval(c); }), ErrorKind::kConfig);
}

TEST(Commands, SweepBetaTableHasOneRowPerBetaAndIsReproducible) {
  Config c = prepared("sweep");
  c.set("train.steps", "10");
  c.set("eval.accuracy_episodes", "0");
  const SweepResult a = cmd_sweep_beta(c);
  EXPECT_EQ(a.betas, (std::vector<double>{15, 30, 45}));
  const std::string table = read_file(a.table);
  size_t rows = 0;
  std::istringstream in(table);
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 1u + 3u);  // header + one novel row per beta
  EXPECT_NE(table.find("lad,30,novel"), std::string::npos) << table;

  const SweepResult b = cmd_sweep_beta(c);
  EXPECT_EQ(read_file(b.table), table);
  for (size_t i = 0; i < a.evals.size(); ++i) {
    EXPECT_EQ(read_file(a.evals[i].report_json), read_file(b.evals[i].report_json));
  }
}

TEST(Commands, ReportMergesRunDirectories) {
  Config c = prepared("report");
  c.set("train.steps", "3");
  c.set("eval.accuracy_episodes", "0");
  const fs::path root = resolve_run_config(c).output_dir;
  for (const char* m : {"baseline", "lad"}) {
    Config run = c;
    run.set("method", m);
    run.set("paths.output", (root / m).string());
    run.set("paths.split_manifest", (root / "split_manifest.json").string());
    cmd_train(run);
    cmd_eval(run);
  }
  c.set("report.inputs", (root / "baseline").string() + "," + (root / "lad" / "report.json").string());
  const std::string csv = cmd_report(c);
  EXPECT_NE(csv.find("\nbaseline,-,novel,"), std::string::npos) << csv;
  EXPECT_NE(csv.find("\nlad,-,novel,"), std::string::npos) << csv;
  EXPECT_EQ(read_file(root / "report.csv"), csv);

  c.set("report.inputs", (root / "nope").string());
  EXPECT_EQ(kind_of([&] { cmd_report(c); }), ErrorKind::kIo);
}

TEST(Commands, AudioModeRunsThroughCachedLogMels) {
  Config c = prepared("audio");
  c.set("synth.audio", "true");
  c.set("synth.n_clips", "150");
  c.set("synth.clip_seconds", "0.25");
  c.set("features.mode", "audio");
  c.set("features.audio_frames", "24");
  c.set("dsp.n_mels", "16");
  c.set("train.steps", "3");
  c.set("eval.episodes", "5");
  c.set("eval.runs", "1");
  c.set("eval.accuracy_episodes", "0");
  const SynthResult s = cmd_synth(c);
  EXPECT_EQ(s.waveforms, 150u);
  const Waveform w = read_wav(s.audio_dir / "100000.wav");
  EXPECT_EQ(w.samples.size(), 11025u);
  cmd_curate(c);
  const auto first = cmd_train(c).losses;
  const fs::path cache = resolve_run_config(c).cache_dir;
  size_t cached = 0;
  for (const auto& e : fs::directory_iterator(cache)) cached += e.path().extension() == ".lpfeat";
  EXPECT_GT(cached, 0u);
  EXPECT_EQ(cmd_train(c).losses, first);  // cache hits reproduce the features
  cmd_eval(c);
}

TEST(Features, LogMelExtractionFitsFramesAndCaches) {
  const fs::path dir = fresh_dir("logmel_cache");
  Waveform w;
  w.samples.resize(44100);
  for (size_t n = 0; n < w.samples.size(); ++n) w.samples[n] = 0.3 * std::sin(0.05 * static_cast<double>(n));
  write_file(dir / "audio" / "x.wav", encode_wav_pcm16(w));
  const std::vector<ClipRecord> recs{{"x", {"/c"}, SourceSplit::kDev}};
  const auto a = extract_logmels(recs, dir / "audio", DspConfig{}, dir / "cache", 99, 1);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].rows, 99u);
  EXPECT_EQ(a[0].cols, 64u);
  const auto b = extract_logmels(recs, dir / "audio", DspConfig{}, dir / "cache", 120, 1);
  EXPECT_EQ(b[0].rows, 120u);
  EXPECT_DOUBLE_EQ(b[0].at(119, 0), std::log(1e-10));
  EXPECT_EQ(kind_of([&] {
              extract_logmels({{"missing", {"/c"}, SourceSplit::kDev}}, dir / "audio", DspConfig{}, {}, 99, 1);
            }),
            ErrorKind::kIo);
}

TEST(ParallelFor, CoversEveryIndexAndRethrows) {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](size_t i) { hits[i] += 1; });
  EXPECT_EQ(std::count(hits.begin(), hits.end(), 1), 100);
  EXPECT_THROW(parallel_for(10, 3, [](size_t i) {
                 if (i == 7) fail(ErrorKind::kNumeric, "boom");
               }),
               Error);
}

}  // namespace
}  // namespace ladproto
