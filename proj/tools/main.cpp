// altlab CLI. Talks to the library exclusively through the C API.
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "altlab.h"

namespace {

// 0 success, 1 config error, 2 runtime failure (I/O counts as runtime here)
int exit_code_for(int altlab_code) {
  if (altlab_code == ALTLAB_OK) return 0;
  return altlab_code == ALTLAB_ERR_CONFIG ? 1 : 2;
}

int report(int altlab_code) {
  if (altlab_code != ALTLAB_OK) std::fprintf(stderr, "altlab: %s\n", altlab_last_error());
  return exit_code_for(altlab_code);
}

struct ConfigHandle {
  altlab_config* cfg = nullptr;
  ~ConfigHandle() { altlab_config_free(cfg); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"altlab — continual-RL reset-strategy laboratory"};
  app.require_subcommand(1);

  std::string config_path, root_dir;
  bool quiet = false;

  CLI::App* run = app.add_subcommand("run", "Run one experiment from a config file");
  run->add_option("config", config_path, "JSON config file")->required();
  run->add_flag("-q,--quiet", quiet, "Suppress the manifest path on stdout");

  CLI::App* sweep = app.add_subcommand("sweep", "Run every strategy/replay-ratio cell of a config");
  sweep->add_option("config", config_path, "JSON config file")->required();
  sweep->add_flag("-q,--quiet", quiet, "Suppress the summary table on stdout");

  CLI::App* summarize = app.add_subcommand("summarize", "Aggregate run manifests under a directory");
  summarize->add_option("dir", root_dir, "Directory containing run outputs")->required();

  CLI::App* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", config_path, "JSON config file")->required();

  CLI11_PARSE(app, argc, argv);

  if (summarize->parsed()) {
    char* table = nullptr;
    const int rc = altlab_summarize(root_dir.c_str(), &table);
    if (rc == ALTLAB_OK && table) std::fputs(table, stdout);
    altlab_string_free(table);
    return report(rc);
  }

  ConfigHandle handle;
  const int load_rc = altlab_config_load(config_path.c_str(), &handle.cfg);
  if (load_rc != ALTLAB_OK) return report(load_rc);

  if (validate->parsed()) {
    const int rc = altlab_config_validate(handle.cfg);
    if (rc == ALTLAB_OK) std::puts("ok");
    return report(rc);
  }
  if (run->parsed()) {
    char* manifest = nullptr;
    const int rc = altlab_run(handle.cfg, &manifest);
    if (rc == ALTLAB_OK && manifest && !quiet) std::puts(manifest);
    altlab_string_free(manifest);
    return report(rc);
  }
  char* summary = nullptr;
  const int rc = altlab_sweep(handle.cfg, &summary);
  if (rc == ALTLAB_OK && summary && !quiet) std::fputs(summary, stdout);
  altlab_string_free(summary);
  return report(rc);
}
