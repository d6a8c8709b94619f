// Command-line front end. Links only the public C API.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ladproto/ladproto.h"

namespace {

int exit_code(lp_status st) {
  switch (st) {
    case LP_OK:
      return 0;
    case LP_ERR_CONFIG:
    case LP_ERR_ARGUMENT:
      return 2;
    case LP_ERR_DATA:
      return 3;
    case LP_ERR_NUMERIC:
      return 4;
    case LP_ERR_INTERNAL:
      return 1;
  }
  return 1;
}

int report_failure(lp_status st) {
  std::fprintf(stderr, "ladproto: %s: %s\n", lp_status_name(st), lp_last_error());
  return exit_code(st);
}

struct Options {
  std::vector<std::string> configs;
  std::vector<std::string> sets;
  std::vector<std::string> inputs;
  bool print_config = false;
  bool quiet = false;
};

// "--key=value" or "--key value" pairs left over after option parsing.
bool parse_overrides(const std::vector<std::string>& extras, std::vector<std::pair<std::string, std::string>>& out,
                     std::string& error) {
  for (size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() < 3) {
      error = "unexpected argument '" + arg + "'";
      return false;
    }
    const size_t eq = arg.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(arg.substr(2, eq - 2), arg.substr(eq + 1));
    } else if (i + 1 < extras.size()) {
      out.emplace_back(arg.substr(2), extras[++i]);
    } else {
      error = "missing value for '" + arg + "'";
      return false;
    }
  }
  return true;
}

void quiet_log(const char*, void*) {}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Taxonomy-aware prototypical networks for few-shot sound event detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", lp_version());

  Options opt;
  struct Sub {
    const char* name;
    const char* help;
    lp_status (*run)(const lp_config*);
  };
  const std::vector<Sub> subs = {
      {"synth", "Generate a synthetic ontology, metadata and optional audio", lp_cmd_synth},
      {"curate", "Split eligible classes into base/validation/evaluation and write the manifest", lp_cmd_curate},
      {"train", "Episodic training; writes checkpoint and train manifest", lp_cmd_train},
      {"eval", "Evaluate a checkpoint on the novel splits; writes report.json and report.csv", lp_cmd_eval},
      {"sweep-beta", "Train and evaluate once per smoothing beta", lp_cmd_sweep_beta},
      {"report", "Merge report.json files into one CSV", lp_cmd_report},
      {"config", "Validate and print the effective configuration", nullptr},
  };
  std::vector<CLI::App*> apps;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->allow_extras();
    sub->add_option("-c,--config", opt.configs, "Config file; repeatable, later files override earlier ones")
        ->allow_extra_args(false);
    sub->add_option("-s,--set", opt.sets, "Override one key, KEY=VALUE; repeatable")->allow_extra_args(false);
    sub->add_flag("--print-config", opt.print_config, "Print the effective configuration first");
    sub->add_flag("-q,--quiet", opt.quiet, "Suppress progress output");
    sub->footer("Any config key may also be given as --KEY=VALUE, e.g. --episode.beta=30.");
    if (std::string(s.name) == "report") sub->add_option("inputs", opt.inputs, "report.json files or run directories");
    apps.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage errors share the configuration exit code
  }

  size_t which = 0;
  while (which < apps.size() && !apps[which]->parsed()) ++which;
  CLI::App* sub = apps[which];

  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& kv : opt.sets) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "ladproto: config error: --set expects KEY=VALUE, got '%s'\n", kv.c_str());
      return 2;
    }
    overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  std::string error;
  if (!parse_overrides(sub->remaining(), overrides, error)) {
    std::fprintf(stderr, "ladproto: config error: %s\n", error.c_str());
    return 2;
  }
  if (!opt.inputs.empty()) {
    std::string joined;
    for (const auto& in : opt.inputs) joined += (joined.empty() ? "" : ",") + in;
    overrides.emplace_back("report.inputs", joined);
  }

  lp_config* config = nullptr;
  lp_status st = lp_config_new(&config);
  if (st != LP_OK) return report_failure(st);
  for (const auto& file : opt.configs) {
    if ((st = lp_config_merge_file(config, file.c_str())) != LP_OK) break;
  }
  for (size_t i = 0; st == LP_OK && i < overrides.size(); ++i) {
    st = lp_config_set(config, overrides[i].first.c_str(), overrides[i].second.c_str());
  }
  if (st == LP_OK) st = lp_config_validate(config);
  if (st == LP_OK && (opt.print_config || subs[which].run == nullptr)) {
    size_t needed = 0;
    lp_config_dump(config, nullptr, 0, &needed);
    std::string text(needed, '\0');
    st = lp_config_dump(config, text.data(), text.size(), &needed);
    if (st == LP_OK) std::fputs(text.c_str(), stdout);
  }
  if (opt.quiet) lp_set_log_callback(quiet_log, nullptr);
  if (st == LP_OK && subs[which].run) st = subs[which].run(config);
  lp_config_free(config);
  return st == LP_OK ? 0 : report_failure(st);
}
