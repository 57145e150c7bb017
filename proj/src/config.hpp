#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "env.hpp"
#include "strategies.hpp"

namespace altlab::config {

// One JSON document describes an experiment. Unknown keys are rejected at
// every level; "strategy"/"replay_ratio" are shorthand for one-element
// "strategies"/"replay_ratios" axes (run requires both axes singular, sweep
// expands their product).
struct EnvConfig {
  std::string name;
  envs::ParamMap overrides;
  std::vector<envs::ScheduleEntry> schedule;  // non-stationarity flips
};

struct BufferShrink {
  std::int64_t at_step = 0;
  std::int64_t capacity = 0;
};

struct SacSection {
  std::vector<int> hidden{256, 256};
  int batch_size = 256;
  std::int64_t warmup_steps = 5000;
  double learning_rate = 3e-4;
  double gamma = 0.99;
  double tau = 0.005;
  double init_temperature = 1.0;
  double beta = 50.0;  // rde vote sharpness
};

struct PpoSection {
  std::vector<int> hidden{64, 64};
  int rollout_length = 2048;
  std::int64_t reset_period = 0;  // env steps; required unless baseline
  double learning_rate = 3e-4;
  int update_epochs = 10;
  int num_minibatches = 32;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_coef = 0.2;
  double vf_coef = 0.5;
  double ent_coef = 0.0;
  double max_grad_norm = 0.5;
};

struct ExperimentConfig {
  std::string name;  // defaults to "<algorithm>_<strategy>" of the first axis entry
  EnvConfig env;
  std::string algorithm;  // "sac" | "ppo"
  std::vector<strategies::Kind> strategies_axis;
  std::vector<int> replay_ratios_axis{1};  // sac only
  int num_networks = 0;                    // 0: derive from strategy (1 or 2)
  std::int64_t update_budget = 200000;     // sac only
  std::int64_t total_env_steps = 0;
  std::optional<std::int64_t> halt_resets_after;
  std::int64_t buffer_capacity = 200000;  // sac only
  std::optional<BufferShrink> buffer_shrink;
  bool parameter_matched = false;
  std::vector<std::uint64_t> seeds;
  std::int64_t eval_interval = 2500;
  int eval_episodes = 5;
  std::vector<std::int64_t> budget_steps;  // empty: quartiles of the horizon
  std::string output_dir;
  SacSection sac;
  PpoSection ppo;

  bool is_sweep() const { return strategies_axis.size() > 1 || replay_ratios_axis.size() > 1; }
  strategies::Kind strategy() const { return strategies_axis.front(); }
  int replay_ratio() const { return replay_ratios_axis.front(); }
  // networks actually instantiated for a given strategy
  int networks_for(strategies::Kind k) const;
  std::vector<std::int64_t> effective_budgets() const;
};

// Parse + full validation. ConfigError on any violation.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);  // IoError if unreadable

// Validation of axis relationships (also run by parse_config).
void validate(const ExperimentConfig& cfg);

// Canonical resolved JSON (every field explicit, keys sorted).
std::string resolved_json(const ExperimentConfig& cfg);
// SHA-1 of the compact resolved JSON.
std::string config_hash(const ExperimentConfig& cfg);

// The config for one (strategy, replay_ratio) cell of a sweep: singular axes,
// a cell-specific output subdirectory and name, N adjusted to the strategy.
ExperimentConfig sweep_cell(const ExperimentConfig& base, strategies::Kind strategy, int replay_ratio);

}  // namespace altlab::config
