#include "altlab.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>

#include "config.hpp"
#include "errors.hpp"
#include "plasticity.hpp"
#include "runner.hpp"
#include "strategies.hpp"

struct altlab_config {
  altlab::config::ExperimentConfig cfg;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

int fail(int code, const std::string& message) {
  g_last_error = message;
  return code;
}

// Maps the C++ error taxonomy onto API codes; call with the active exception.
int fail_current() {
  try {
    throw;
  } catch (const altlab::ConfigError& e) {
    return fail(ALTLAB_ERR_CONFIG, e.what());
  } catch (const altlab::PreconditionError& e) {
    return fail(ALTLAB_ERR_CONFIG, e.what());
  } catch (const altlab::IoError& e) {
    return fail(ALTLAB_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(ALTLAB_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(ALTLAB_ERR_RUNTIME, "unknown error");
  }
}

int ok() {
  g_last_error.clear();
  return ALTLAB_OK;
}

}  // namespace

extern "C" {

const char* altlab_version(void) { return "0.1.0"; }

const char* altlab_last_error(void) { return g_last_error.c_str(); }

int altlab_config_load(const char* path, altlab_config** out) {
  if (!path || !out) return fail(ALTLAB_ERR_CONFIG, "null argument");
  *out = nullptr;
  try {
    auto* handle = new altlab_config{altlab::config::load_config_file(path)};
    *out = handle;
    return ok();
  } catch (...) {
    return fail_current();
  }
}

int altlab_config_parse(const char* json_text, altlab_config** out) {
  if (!json_text || !out) return fail(ALTLAB_ERR_CONFIG, "null argument");
  *out = nullptr;
  try {
    auto* handle = new altlab_config{altlab::config::parse_config(json_text)};
    *out = handle;
    return ok();
  } catch (...) {
    return fail_current();
  }
}

void altlab_config_free(altlab_config* cfg) { delete cfg; }

int altlab_config_validate(const altlab_config* cfg) {
  if (!cfg) return fail(ALTLAB_ERR_CONFIG, "null config");
  try {
    altlab::config::validate(cfg->cfg);
    return ok();
  } catch (...) {
    return fail_current();
  }
}

int altlab_config_resolved_json(const altlab_config* cfg, char** out) {
  if (!cfg || !out) return fail(ALTLAB_ERR_CONFIG, "null argument");
  *out = nullptr;
  try {
    *out = dup_string(altlab::config::resolved_json(cfg->cfg));
    if (!*out) return fail(ALTLAB_ERR_RUNTIME, "out of memory");
    return ok();
  } catch (...) {
    return fail_current();
  }
}

void altlab_string_free(char* s) { std::free(s); }

int altlab_run(const altlab_config* cfg, char** manifest_path_out) {
  if (manifest_path_out) *manifest_path_out = nullptr;
  if (!cfg) return fail(ALTLAB_ERR_CONFIG, "null config");
  try {
    const altlab::runner::RunRecord record = altlab::runner::run_experiment(cfg->cfg);
    if (manifest_path_out) {
      *manifest_path_out = dup_string(record.manifest_path);
      if (!*manifest_path_out) return fail(ALTLAB_ERR_RUNTIME, "out of memory");
    }
    return ok();
  } catch (...) {
    return fail_current();
  }
}

int altlab_sweep(const altlab_config* cfg, char** summary_out) {
  if (summary_out) *summary_out = nullptr;
  if (!cfg) return fail(ALTLAB_ERR_CONFIG, "null config");
  try {
    const std::string table = altlab::runner::run_sweep(cfg->cfg);
    if (summary_out) {
      *summary_out = dup_string(table);
      if (!*summary_out) return fail(ALTLAB_ERR_RUNTIME, "out of memory");
    }
    return ok();
  } catch (...) {
    return fail_current();
  }
}

int altlab_summarize(const char* root_dir, char** table_out) {
  if (table_out) *table_out = nullptr;
  if (!root_dir) return fail(ALTLAB_ERR_CONFIG, "null root_dir");
  try {
    const std::string table = altlab::runner::summarize_dir(root_dir);
    if (table_out) {
      *table_out = dup_string(table);
      if (!*table_out) return fail(ALTLAB_ERR_RUNTIME, "out of memory");
    }
    return ok();
  } catch (...) {
    return fail_current();
  }
}

int altlab_reset_freq_env_steps(uint64_t update_budget, int replay_ratio, int num_networks,
                                int64_t* out) {
  if (!out) return fail(ALTLAB_ERR_CONFIG, "null out");
  try {
    *out = altlab::strategies::reset_freq_env_steps(update_budget, replay_ratio, num_networks);
    return ok();
  } catch (...) {
    return fail_current();
  }
}

int altlab_normalized_auc(const double* steps, const double* returns, int n, double* out) {
  if (!steps || !returns || !out) return fail(ALTLAB_ERR_CONFIG, "null argument");
  if (n < 0) return fail(ALTLAB_ERR_CONFIG, "negative length");
  try {
    *out = altlab::metrics::normalized_auc(std::vector<double>(steps, steps + n),
                                           std::vector<double>(returns, returns + n));
    return ok();
  } catch (...) {
    return fail_current();
  }
}

}  // extern "C"
