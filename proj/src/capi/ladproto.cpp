#include "ladproto/ladproto.h"

#include <cstdio>
#include <cstring>
#include <memory>
#include <mutex>
#include <new>
#include <string>
#include <vector>

#include "common/error.h"
#include "common/io.h"
#include "dsp/dsp.h"
#include "harness/commands.h"
#include "harness/config.h"
#include "metrics/metrics.h"
#include "taxonomy/taxonomy.h"

struct lp_config {
  ladproto::Config config;
};

struct lp_taxonomy {
  ladproto::Taxonomy taxonomy;
};

namespace {

using ladproto::Error;
using ladproto::ErrorKind;

thread_local std::string last_error;

lp_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kShape:
      return LP_ERR_CONFIG;
    case ErrorKind::kParse:
    case ErrorKind::kValidation:
    case ErrorKind::kLookup:
    case ErrorKind::kAmbiguity:
    case ErrorKind::kInfeasible:
    case ErrorKind::kUndefined:
    case ErrorKind::kIo:
      return LP_ERR_DATA;
    case ErrorKind::kNumeric:
      return LP_ERR_NUMERIC;
    case ErrorKind::kState:
      return LP_ERR_INTERNAL;
  }
  return LP_ERR_INTERNAL;
}

template <typename F>
lp_status guarded(F&& body) {
  last_error.clear();
  try {
    body();
    return LP_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return LP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = std::string("internal error: ") + e.what();
    return LP_ERR_INTERNAL;
  } catch (...) {
    last_error = "internal error";
    return LP_ERR_INTERNAL;
  }
}

lp_status argument_error(const char* message) {
  last_error = message;
  return LP_ERR_ARGUMENT;
}

lp_status copy_out(const std::string& s, char* buf, size_t capacity, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (!buf) return LP_OK;
  if (capacity < s.size() + 1) return argument_error("buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return LP_OK;
}

std::vector<int> truth_vector(const int* truth, size_t n) { return std::vector<int>(truth, truth + n); }

}  // namespace

extern "C" {

const char* lp_last_error(void) { return last_error.c_str(); }

const char* lp_status_name(lp_status status) {
  switch (status) {
    case LP_OK:
      return "ok";
    case LP_ERR_INTERNAL:
      return "internal error";
    case LP_ERR_CONFIG:
      return "config error";
    case LP_ERR_DATA:
      return "data error";
    case LP_ERR_NUMERIC:
      return "numeric error";
    case LP_ERR_ARGUMENT:
      return "argument error";
  }
  return "unknown status";
}

const char* lp_version(void) { return "0.1.0"; }

void lp_set_log_callback(lp_log_fn fn, void* user) {
  if (!fn) {
    ladproto::set_log_sink([](const std::string& line) {
      std::fputs((line + "\n").c_str(), stdout);
      std::fflush(stdout);
    });
    return;
  }
  auto mutex = std::make_shared<std::mutex>();
  ladproto::set_log_sink([fn, user, mutex](const std::string& line) {
    std::lock_guard lock(*mutex);
    fn(line.c_str(), user);
  });
}

lp_status lp_config_new(lp_config** out) {
  if (!out) return argument_error("lp_config_new: out is null");
  return guarded([&] { *out = new lp_config{}; });
}

lp_status lp_config_load(const char* path, lp_config** out) {
  if (!path || !out) return argument_error("lp_config_load: null argument");
  return guarded([&] { *out = new lp_config{ladproto::Config::load(path)}; });
}

lp_status lp_config_merge_file(lp_config* config, const char* path) {
  if (!config || !path) return argument_error("lp_config_merge_file: null argument");
  return guarded([&] { config->config.merge_file(path); });
}

lp_status lp_config_set(lp_config* config, const char* key, const char* value) {
  if (!config || !key || !value) return argument_error("lp_config_set: null argument");
  return guarded([&] { config->config.set(key, value); });
}

lp_status lp_config_get(const lp_config* config, const char* key, char* buf, size_t capacity, size_t* needed) {
  if (!config || !key) return argument_error("lp_config_get: null argument");
  std::string value;
  const lp_status st = guarded([&] { value = config->config.get(key); });
  return st == LP_OK ? copy_out(value, buf, capacity, needed) : st;
}

lp_status lp_config_dump(const lp_config* config, char* buf, size_t capacity, size_t* needed) {
  if (!config) return argument_error("lp_config_dump: config is null");
  std::string text;
  const lp_status st = guarded([&] { text = config->config.dump(); });
  return st == LP_OK ? copy_out(text, buf, capacity, needed) : st;
}

lp_status lp_config_validate(const lp_config* config) {
  if (!config) return argument_error("lp_config_validate: config is null");
  return guarded([&] { ladproto::resolve_run_config(config->config); });
}

void lp_config_free(lp_config* config) { delete config; }

lp_status lp_cmd_synth(const lp_config* config) {
  if (!config) return argument_error("lp_cmd_synth: config is null");
  return guarded([&] { ladproto::cmd_synth(config->config); });
}

lp_status lp_cmd_curate(const lp_config* config) {
  if (!config) return argument_error("lp_cmd_curate: config is null");
  return guarded([&] { ladproto::cmd_curate(config->config); });
}

lp_status lp_cmd_train(const lp_config* config) {
  if (!config) return argument_error("lp_cmd_train: config is null");
  return guarded([&] { ladproto::cmd_train(config->config); });
}

lp_status lp_cmd_eval(const lp_config* config) {
  if (!config) return argument_error("lp_cmd_eval: config is null");
  return guarded([&] { ladproto::cmd_eval(config->config); });
}

lp_status lp_cmd_sweep_beta(const lp_config* config) {
  if (!config) return argument_error("lp_cmd_sweep_beta: config is null");
  return guarded([&] { ladproto::cmd_sweep_beta(config->config); });
}

lp_status lp_cmd_report(const lp_config* config) {
  if (!config) return argument_error("lp_cmd_report: config is null");
  return guarded([&] { ladproto::cmd_report(config->config); });
}

lp_status lp_taxonomy_load(const char* path, lp_taxonomy** out) {
  if (!path || !out) return argument_error("lp_taxonomy_load: null argument");
  return guarded([&] { *out = new lp_taxonomy{ladproto::load_taxonomy_file(path)}; });
}

lp_status lp_taxonomy_size(const lp_taxonomy* taxonomy, size_t* out) {
  if (!taxonomy || !out) return argument_error("lp_taxonomy_size: null argument");
  *out = taxonomy->taxonomy.size();
  return LP_OK;
}

lp_status lp_taxonomy_distance(const lp_taxonomy* taxonomy, const char* a, const char* b, int* out) {
  if (!taxonomy || !a || !b || !out) return argument_error("lp_taxonomy_distance: null argument");
  return guarded([&] { *out = taxonomy->taxonomy.distance(a, b); });
}

lp_status lp_taxonomy_depth(const lp_taxonomy* taxonomy, const char* id, int* out) {
  if (!taxonomy || !id || !out) return argument_error("lp_taxonomy_depth: null argument");
  return guarded([&] { *out = taxonomy->taxonomy.depth(id); });
}

void lp_taxonomy_free(lp_taxonomy* taxonomy) { delete taxonomy; }

lp_status lp_average_precision(const double* scores, const int* truth, size_t n, double* out) {
  if ((n && (!scores || !truth)) || !out) return argument_error("lp_average_precision: null argument");
  return guarded([&] { *out = ladproto::average_precision({scores, scores + n}, truth_vector(truth, n)); });
}

lp_status lp_roc_auc(const double* scores, const int* truth, size_t n, double* out) {
  if ((n && (!scores || !truth)) || !out) return argument_error("lp_roc_auc: null argument");
  return guarded([&] { *out = ladproto::roc_auc({scores, scores + n}, truth_vector(truth, n)); });
}

lp_status lp_f1(const double* scores, const int* truth, size_t n, double threshold, double* out) {
  if ((n && (!scores || !truth)) || !out) return argument_error("lp_f1: null argument");
  return guarded([&] { *out = ladproto::f1({scores, scores + n}, truth_vector(truth, n), threshold); });
}

lp_status lp_logmel_wav(const char* path, double* out, size_t capacity, size_t* rows, size_t* cols) {
  if (!path || !rows || !cols) return argument_error("lp_logmel_wav: null argument");
  ladproto::Matrix values;
  const lp_status st = guarded([&] { values = ladproto::logmel(ladproto::read_wav(path), ladproto::DspConfig{}).values; });
  if (st != LP_OK) return st;
  *rows = values.rows;
  *cols = values.cols;
  if (!out) return LP_OK;
  if (capacity < values.data.size()) return argument_error("lp_logmel_wav: buffer too small");
  std::copy(values.data.begin(), values.data.end(), out);
  return LP_OK;
}

}  // extern "C"
