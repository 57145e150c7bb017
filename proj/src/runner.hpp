#pragma once
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "env.hpp"
#include "mat.hpp"

namespace altlab::runner {

// Sub-seed streams derived from a master seed with rng::split_seed.
enum SeedStream : std::uint64_t {
  kEnvEpisodes = 0,   // episode seed base of the training env
  kAction = 1,        // exploration noise
  kUpdate = 2,        // update-time draws (SAC target noise, PPO shuffles)
  kBufferSampling = 3,
  kResets = 4,        // reset/swap reinit seed base
  kEval = 5,          // evaluation episode seed base
  kAgentInit = 6,     // agent i inits from split(split(seed, kAgentInit), i)
  kProbe = 7,         // fallback probe observations before any experience
  kMisc = 8,
};

using Policy = std::function<std::vector<double>(const std::vector<double>&)>;

// Mean return of `episodes` deterministic episodes on a fresh environment
// built from the training env's name and current parameters; the training env
// is untouched. Episode e of evaluation round `eval_index` is seeded
// split(eval_seed_base, eval_index * episodes + e).
double evaluate_policy(const envs::Environment& train_env, const Policy& policy, int episodes,
                       std::uint64_t eval_seed_base, std::int64_t eval_index);

// One line of the per-seed CSV. Eval rows carry the mean evaluation return
// and an empty event; event rows carry an empty return and the plasticity
// metrics of the agent the event acted on, measured just before it.
struct CsvRow {
  std::int64_t env_step = 0;
  std::optional<double> episodic_return;
  double avg_weight_norm = 0.0;
  double dormant_fraction = 0.0;
  double stable_rank = 0.0;
  std::string agent_tag;
  std::string event;  // "", "reset", "swap", "buffer_shrink", "halt"
};

extern const char* const kCsvHeader;
std::string csv_line(const CsvRow& row);  // std::to_chars rendering, byte-stable
std::vector<CsvRow> read_csv(const std::string& path);

// The cell's reset/swap period in env steps (0 = never).
std::int64_t cell_period(const config::ExperimentConfig& cfg);

struct SeedSummary {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  std::optional<double> normalized_auc;
  // aligned with config.effective_budgets(); empty optional = outside the curve
  std::vector<std::optional<double>> budget_returns;
  std::optional<double> worst_post_reset_dip;
  std::optional<double> final_quarter_mean;
  std::int64_t reset_events = 0;
  double wall_seconds = 0.0;
};

// Pure analysis of a finished seed's rows; also the summarize-time recompute.
SeedSummary summarize_rows(const std::vector<CsvRow>& rows, std::uint64_t seed,
                           const config::ExperimentConfig& cfg);

struct RunRecord {
  std::string manifest_path;
  std::string output_dir;
  std::vector<SeedSummary> seeds;
};

// Run every seed of a single-cell config sequentially: write per-seed CSVs
// (incrementally), plot-data curves, a final-agent checkpoint per seed, and
// manifest.json. A NumericError inside one seed marks that seed failed and
// the run continues; config/filesystem problems throw.
RunRecord run_experiment(const config::ExperimentConfig& cfg);

// Run every (strategy, replay_ratio) cell of a sweep config, then write
// <output_dir>/summary.csv. Returns the summary table text.
std::string run_sweep(const config::ExperimentConfig& cfg);

// Recompute summaries from the CSVs of every manifest.json under root
// (recursive), write <root>/summary.csv, and return the table text.
std::string summarize_dir(const std::string& root);

// Checkpoints: a JSON shape header next to a flat little-endian float64 blob.
struct CheckpointTensor {
  std::string name;
  std::vector<int> layer_sizes;  // non-empty for network tensors (nn flatten order)
  std::vector<double> values;
};

struct Checkpoint {
  std::string algorithm;
  std::vector<CheckpointTensor> tensors;
};

void write_checkpoint(const std::string& json_path, const Checkpoint& cp);
Checkpoint read_checkpoint(const std::string& json_path);

}  // namespace altlab::runner
