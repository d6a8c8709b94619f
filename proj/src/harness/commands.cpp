#include "harness/commands.h"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "common/error.h"
#include "common/io.h"
#include "common/rng.h"
#include "dsp/dsp.h"
#include "episodic/episodic.h"
#include "harness/evaluation.h"
#include "harness/features.h"
#include "json.hpp"
#include "neural/neural.h"
#include "taxonomy/taxonomy.h"

namespace ladproto {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename F>
auto staged(const std::string& stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.kind(), stage + ": " + e.what());
  } catch (const fs::filesystem_error& e) {
    throw Error(ErrorKind::kIo, stage + ": " + e.what());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, stage + ": " + e.what());
  }
}

std::string format_number(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

json config_snapshot(const Config& config) {
  json out = json::object();
  std::istringstream in(config.dump());
  std::string line;
  while (std::getline(in, line)) {
    const size_t eq = line.find(" = ");
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

std::string fingerprint_or_empty(const fs::path& p) {
  return !p.empty() && fs::exists(p) ? file_fingerprint(p) : std::string();
}

std::string smoothing_name(Smoothing s) {
  switch (s) {
    case Smoothing::kOneHot:
      return "one-hot";
    case Smoothing::kTaxonomy:
      return "taxonomy";
    case Smoothing::kUniform:
      return "uniform";
  }
  return "one-hot";
}

Taxonomy require_taxonomy(const RunConfig& r) {
  if (r.ontology.empty()) fail(ErrorKind::kConfig, "paths.ontology is not set");
  if (!fs::exists(r.ontology)) fail(ErrorKind::kIo, "ontology file not found: " + r.ontology.string());
  return load_taxonomy_file(r.ontology);
}

CuratedDataset require_manifest(const RunConfig& r) {
  if (!fs::exists(r.split_manifest)) {
    fail(ErrorKind::kIo, "split manifest not found: " + r.split_manifest.string() + " (run curate first)");
  }
  return manifest_from_json(read_file(r.split_manifest));
}

struct NovelPool {
  std::vector<ClipRecord> records;
  std::set<ClassId> classes;
};

NovelPool novel_pool(const CuratedDataset& ds, const std::string& split) {
  NovelPool p;
  if (split == "validation" || split == "novel") {
    p.records.insert(p.records.end(), ds.pools.validation.begin(), ds.pools.validation.end());
    p.classes.insert(ds.split.validation.begin(), ds.split.validation.end());
  }
  if (split == "evaluation" || split == "novel") {
    p.records.insert(p.records.end(), ds.pools.evaluation.begin(), ds.pools.evaluation.end());
    p.classes.insert(ds.split.evaluation.begin(), ds.split.evaluation.end());
  }
  return p;
}

// One tone per class on a mel-spaced grid; a clip mixes the tones of its most
// specific labels and, at half gain per level, of their ancestors.
Waveform synth_waveform(const Taxonomy& t, const std::map<ClassId, double>& tones, const ClipRecord& rec,
                        double seconds, double sample_rate, uint64_t seed) {
  Rng rng(Rng::mix(seed, std::stoull(short_hash(rec.clip_id), nullptr, 16)));
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(static_cast<size_t>(std::llround(seconds * sample_rate)), 0.0);
  for (const auto& label : most_specific_labels(t, rec.labels)) {
    std::optional<ClassId> c = label;
    double gain = 0.2;
    while (c) {
      const double f = tones.at(*c);
      const double phase = 2.0 * std::numbers::pi * rng.uniform01();
      for (size_t n = 0; n < w.samples.size(); ++n) {
        w.samples[n] += gain * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(n) / sample_rate + phase);
      }
      c = t.is_single_path(*c) ? t.parent_of(*c) : std::nullopt;
      gain *= 0.5;
    }
  }
  for (double& s : w.samples) s = std::clamp(s + 0.01 * rng.normal(), -1.0, 1.0);
  return w;
}

}  // namespace

SynthResult cmd_synth(const Config& config) {
  return staged("synth", [&] {
    const RunConfig r = resolve_run_config(config);
    const SyntheticDataset ds = generate_synthetic(r.synth);
    SynthResult out;
    out.ontology = r.ontology.empty() ? r.output_dir / "ontology.json" : r.ontology;
    out.metadata = r.metadata.empty() ? r.output_dir / "metadata.csv" : r.metadata;
    write_file(out.ontology, taxonomy_to_json(ds.taxonomy));
    write_file(out.metadata, metadata_to_csv(ds.records, ds.taxonomy));
    out.classes = ds.taxonomy.size();
    out.clips = ds.records.size();
    if (r.synth_audio) {
      out.audio_dir = r.audio_dir;
      fs::create_directories(out.audio_dir);
      const double lo = hz_to_mel(150.0), hi = hz_to_mel(std::min(8000.0, r.dsp.sample_rate / 2.5));
      std::map<ClassId, double> tones;
      const auto& ids = ds.taxonomy.ids();
      for (size_t i = 0; i < ids.size(); ++i) {
        const double frac = ids.size() > 1 ? static_cast<double>(i) / static_cast<double>(ids.size() - 1) : 0.5;
        tones[ids[i]] = mel_to_hz(lo + frac * (hi - lo));
      }
      parallel_for(ds.records.size(), r.threads, [&](size_t i) {
        const Waveform w =
            synth_waveform(ds.taxonomy, tones, ds.records[i], r.synth_clip_seconds, r.dsp.sample_rate, r.synth.seed);
        write_file(out.audio_dir / (ds.records[i].clip_id + ".wav"), encode_wav_pcm16(w));
      });
      out.waveforms = ds.records.size();
    }
    log_line("synth: " + std::to_string(out.classes) + " classes, " + std::to_string(out.clips) + " clips -> " +
             out.metadata.string());
    return out;
  });
}

CurateResult cmd_curate(const Config& config) {
  return staged("curate", [&] {
    const RunConfig r = resolve_run_config(config);
    const Taxonomy t = require_taxonomy(r);
    if (r.metadata.empty()) fail(ErrorKind::kConfig, "paths.metadata is not set");
    std::vector<ClipRecord> records = load_metadata_csv(r.metadata, SourceSplit::kDev);
    if (!r.metadata_eval.empty()) {
      auto more = load_metadata_csv(r.metadata_eval, SourceSplit::kEval);
      records.insert(records.end(), more.begin(), more.end());
    }
    CurateResult out;
    out.dataset = curate(t, records, r.curation);
    out.manifest = r.split_manifest;
    write_file(out.manifest, manifest_to_json(out.dataset));
    const auto& ds = out.dataset;
    std::ostringstream s;
    s << "ratio " << format_number(r.curation.ratio.base) << ":" << format_number(r.curation.ratio.validation) << ":"
      << format_number(r.curation.ratio.evaluation) << "\n";
    s << "eligible classes " << ds.eligible_count << "\n";
    s << "split     classes  clips\n";
    auto row = [&](const char* name, size_t classes, size_t clips) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%-10s%7zu%7zu\n", name, classes, clips);
      s << buf;
    };
    row("base", ds.split.base.size(), ds.pools.base.size());
    row("validation", ds.split.validation.size(), ds.pools.validation.size());
    row("evaluation", ds.split.evaluation.size(), ds.pools.evaluation.size());
    s << "overlap " << ds.audit.shared_clip_ids.size() << "\n";
    out.summary = s.str();
    log_line(out.summary + "manifest -> " + out.manifest.string());
    return out;
  });
}

TrainResult cmd_train(const Config& config) {
  return staged("train", [&] {
    const RunConfig r = resolve_run_config(config);
    const Taxonomy t = require_taxonomy(r);
    const CuratedDataset ds = require_manifest(r);
    ExamplePool pool(ds.pools.base, ds.split.base);
    pool.require_examples(static_cast<size_t>(r.episode.k_shot) + 1, "base pool");
    if (pool.classes().size() < static_cast<size_t>(r.episode.n_way)) {
      fail(ErrorKind::kInfeasible, std::to_string(r.episode.n_way) + "-way episodes need " +
                                       std::to_string(r.episode.n_way) + " base classes, found " +
                                       std::to_string(pool.classes().size()));
    }
    pool.features = std::move(build_features(r, t, pool.records(), {&pool.records()})[0]);

    EmbeddingNetwork<float> net = init_parameters<float>(r.arch, r.seeds.init);
    Optimizer<float> opt(r.optimizer);
    Rng rng(r.seeds.episode);
    TrainResult out;
    std::string transcript;
    const float scale = 1.0f / static_cast<float>(r.queries_per_step);
    for (int step = 0; step < r.train_steps; ++step) {
      double loss = 0.0;
      for (int q = 0; q < r.queries_per_step; ++q) {
        const size_t query = rng.uniform_index(pool.size());
        const EpisodeResult res = run_episode(query, pool, net, r.episode, r.method, t, rng, true);
        loss += res.loss;
        if (!r.transcript.empty()) transcript += transcript_json(pool, res) + "\n";
      }
      loss /= static_cast<double>(r.queries_per_step);
      if (!std::isfinite(loss)) fail(ErrorKind::kNumeric, "non-finite loss at step " + std::to_string(step));
      for (auto& p : net.parameters()) {
        for (float& g : p.tensor.grad) g *= scale;
      }
      opt.step(net);
      out.losses.push_back(loss);
      if ((step + 1) % r.log_every == 0 || step + 1 == r.train_steps) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "train step %d loss %.6f", step + 1, loss);
        log_line(buf);
      }
    }

    CheckpointMeta meta;
    meta.seed = r.seeds.init;
    meta.step = static_cast<uint64_t>(r.train_steps);
    meta.extra = json{{"method", method_name(r.method)}, {"beta", r.beta_label()}, {"features", feature_fingerprint(r)}}.dump();
    const std::string ckpt = encode_checkpoint(net, meta);
    out.checkpoint = r.checkpoint;
    write_file(out.checkpoint, ckpt);
    out.arch_fingerprint = r.arch.fingerprint();

    json manifest{{"format", "ladproto-train-manifest/1"},
                  {"config", config_snapshot(config)},
                  {"inputs",
                   {{"ontology", fingerprint_or_empty(r.ontology)},
                    {"metadata", fingerprint_or_empty(r.metadata)},
                    {"metadata_eval", fingerprint_or_empty(r.metadata_eval)},
                    {"split_manifest", fingerprint_or_empty(r.split_manifest)}}},
                  {"features", feature_fingerprint(r)},
                  {"method", method_name(r.method)},
                  {"smoothing", smoothing_name(r.episode.smoothing)},
                  {"beta", r.beta_label()},
                  {"arch_fingerprint", out.arch_fingerprint},
                  {"checkpoint", content_fingerprint(ckpt)},
                  {"losses", out.losses}};
    out.manifest = r.output_dir / "train_manifest.json";
    write_file(out.manifest, manifest.dump(2) + "\n");
    if (!r.transcript.empty()) write_file(r.transcript, transcript);
    log_line("checkpoint -> " + out.checkpoint.string());
    return out;
  });
}

EvalResult cmd_eval(const Config& config) {
  return staged("eval", [&] {
    const RunConfig r = resolve_run_config(config);
    const Taxonomy t = require_taxonomy(r);
    const CuratedDataset ds = require_manifest(r);
    if (!fs::exists(r.checkpoint)) fail(ErrorKind::kIo, "checkpoint not found: " + r.checkpoint.string());
    const std::string ckpt = read_file(r.checkpoint);
    const EmbeddingNetwork<float> net = decode_checkpoint(ckpt);
    const std::string have = net.config().fingerprint(), want = r.arch.fingerprint();
    if (have != want) {
      fail(ErrorKind::kConfig, "checkpoint architecture " + have + " does not match configured architecture " + want);
    }

    std::vector<NovelPool> novel;
    std::vector<ExamplePool> pools;
    for (const auto& split : r.eval.splits) {
      novel.push_back(novel_pool(ds, split));
      pools.emplace_back(novel.back().records, novel.back().classes);
      if (pools.back().size() == 0) fail(ErrorKind::kInfeasible, split + " pool is empty");
    }
    const ExamplePool base(ds.pools.base, ds.split.base);
    std::vector<const std::vector<ClipRecord>*> ptrs;
    for (const auto& p : pools) ptrs.push_back(&p.records());
    auto features = build_features(r, t, base.records(), ptrs);

    EvalResult out;
    out.report.method = method_name(r.method);
    out.report.beta = r.beta_label();
    json extras = json::object();
    for (size_t s = 0; s < pools.size(); ++s) {
      const std::string& split = r.eval.splits[s];
      pools[s].features = std::move(features[s]);
      const auto emb = embed_pool(net, pools[s], r.threads);
      const size_t runs = static_cast<size_t>(r.eval.runs);
      std::vector<RunMetrics> metrics(runs), controls(runs);
      std::vector<double> accuracy(runs, 0.0);
      std::vector<uint64_t> seeds(runs);
      for (size_t i = 0; i < runs; ++i) seeds[i] = Rng::mix(r.seeds.eval, i);
      parallel_for(runs, r.threads, [&](size_t i) {
        metrics[i] = evaluate_run(pools[s], emb, r.eval, r.episode.distance, seeds[i], &controls[i]);
        if (r.eval.accuracy_episodes > 0) {
          accuracy[i] = evaluate_accuracy(pools[s], emb, r.eval.accuracy_way, r.eval.accuracy_shot,
                                          r.eval.accuracy_queries, r.eval.accuracy_episodes, r.episode.distance,
                                          Rng::mix(seeds[i], 0xacc));
        }
      });
      SplitReport rep = aggregate(metrics);
      rep.episodes_per_run = static_cast<uint64_t>(r.eval.episodes);
      rep.seeds = seeds;
      out.report.splits[split] = rep;
      double control = 0.0;
      for (const auto& c : controls) control += c.map;
      out.control_map[split] = control / static_cast<double>(runs);
      extras[split] = {{"uniform_control_mAP", out.control_map[split]}};
      if (r.eval.accuracy_episodes > 0) {
        out.accuracy[split] = mean_interval(accuracy);
        extras[split]["accuracy"] = {{"mean", out.accuracy[split].mean},
                                     {"half_width", out.accuracy[split].half_width},
                                     {"way", r.eval.accuracy_way},
                                     {"shot", r.eval.accuracy_shot},
                                     {"episodes_per_run", r.eval.accuracy_episodes}};
      }
      char buf[160];
      std::snprintf(buf, sizeof buf, "eval %-10s mAP %6.2f +- %.2f  AUC %6.2f +- %.2f  F1 %6.2f +- %.2f  (uniform mAP %.2f)",
                    split.c_str(), 100 * rep.map.mean, 100 * rep.map.half_width, 100 * rep.auc.mean,
                    100 * rep.auc.half_width, 100 * rep.f1.mean, 100 * rep.f1.half_width,
                    100 * out.control_map[split]);
      log_line(buf);
      if (r.eval.accuracy_episodes > 0) {
        std::snprintf(buf, sizeof buf, "eval %-10s %d-way %d-shot accuracy %6.2f +- %.2f", split.c_str(),
                      r.eval.accuracy_way, r.eval.accuracy_shot, 100 * out.accuracy[split].mean,
                      100 * out.accuracy[split].half_width);
        log_line(buf);
      }
    }

    json doc = json::parse(report_to_json(out.report));
    doc["controls"] = extras;
    doc["checkpoint"] = content_fingerprint(ckpt);
    doc["distance"] = distance_name(r.episode.distance);
    out.report_json = r.output_dir / "report.json";
    out.report_csv = r.output_dir / "report.csv";
    write_file(out.report_json, doc.dump(2) + "\n");
    write_file(out.report_csv, report_to_csv({out.report}));
    log_line("report -> " + out.report_json.string());
    return out;
  });
}

SweepResult cmd_sweep_beta(const Config& config) {
  return staged("sweep-beta", [&] {
    const RunConfig r = resolve_run_config(config);
    SweepResult out;
    std::vector<MetricsReport> reports;
    const fs::path root = fs::absolute(r.output_dir);
    for (double beta : r.sweep_betas) {
      Config c = config;
      const std::string label = format_number(beta);
      const fs::path dir = root / ("beta_" + label);
      c.set("episode.beta", label);
      c.set("paths.output", dir.string());
      c.set("paths.split_manifest", fs::absolute(r.split_manifest).string());
      c.set("paths.cache", fs::absolute(r.cache_dir).string());
      c.set("paths.checkpoint", (dir / "checkpoint.bin").string());
      if (!r.transcript.empty()) c.set("train.transcript", (dir / "transcript.jsonl").string());
      log_line("sweep-beta: beta " + label);
      cmd_train(c);
      out.evals.push_back(cmd_eval(c));
      out.betas.push_back(beta);
      reports.push_back(out.evals.back().report);
    }
    out.table = root / "sweep_beta.csv";
    write_file(out.table, report_to_csv(reports));
    log_line("sweep table -> " + out.table.string());
    return out;
  });
}

MetricsReport report_from_json(const std::string& text) {
  const json doc = json::parse(text);
  MetricsReport rep;
  rep.method = doc.at("method").get<std::string>();
  rep.beta = doc.at("beta").get<std::string>();
  for (const auto& [name, s] : doc.at("splits").items()) {
    SplitReport sr;
    auto iv = [&](const char* key) {
      return Interval{s.at(key).at("mean").get<double>(), s.at(key).at("half_width").get<double>()};
    };
    sr.map = iv("mAP");
    sr.auc = iv("AUC");
    sr.f1 = iv("F1");
    sr.episodes_per_run = s.value("episodes_per_run", uint64_t{0});
    rep.splits[name] = sr;
  }
  return rep;
}

std::string cmd_report(const Config& config) {
  return staged("report", [&] {
    const RunConfig r = resolve_run_config(config);
    if (r.report_inputs.empty()) fail(ErrorKind::kConfig, "report.inputs is empty");
    std::vector<MetricsReport> reports;
    for (const auto& input : r.report_inputs) {
      const fs::path file = fs::is_directory(input) ? input / "report.json" : input;
      if (!fs::exists(file)) fail(ErrorKind::kIo, "report not found: " + file.string());
      try {
        reports.push_back(report_from_json(read_file(file)));
      } catch (const json::exception& e) {
        fail(ErrorKind::kParse, file.string() + ": " + e.what());
      }
    }
    const std::string csv = report_to_csv(reports);
    write_file(r.output_dir / "report.csv", csv);
    log_line(csv);
    return csv;
  });
}

}  // namespace ladproto
