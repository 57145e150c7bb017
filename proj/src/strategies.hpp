#pragma once
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "env.hpp"
#include "replay.hpp"
#include "sac.hpp"

namespace altlab::strategies {

enum class Kind { Baseline, StandardReset, Rde, AltNet };
Kind kind_from_string(const std::string& s);
std::string to_string(Kind k);

// Reset frequency in environment steps for an update budget U, replay ratio
// RR and N networks: U / (RR * N). The division must be exact.
std::int64_t reset_freq_env_steps(std::uint64_t update_budget, int replay_ratio, int num_networks);

struct ScheduleConfig {
  std::uint64_t update_budget = 200000;          // gradient updates per network between resets
  int replay_ratio = 1;                          // gradient updates per env step per trainable net
  int num_networks = 1;                          // resolved per strategy
  std::optional<std::int64_t> halt_resets_after; // stop resetting/swapping past this env step
};

struct TickEvent {
  enum class Type { Reset, Swap };
  Type type = Type::Reset;
  int agent_index = 0;       // the agent whose parameters were (will be) reset
  std::uint64_t seed = 0;    // reinit seed for that agent
  std::int64_t env_step = 0;
  int new_active = 0;        // active agent index after the event
};

// Owns the strategy's agents and the reset/swap timetable.
//
// Baseline: one agent, never reset. StandardReset: one agent, fully reset
// every period. RDE: N agents, all trained every step; actions chosen by
// softmax voting over the least-recently-reset agent's critic; round-robin
// resets. AltNet: N agents, one active (acting) while all train off-policy;
// at each period boundary the active agent is reset and the next agent
// becomes active.
class Controller {
 public:
  Controller(Kind kind, std::vector<sac::SacAgent> agents, ScheduleConfig schedule,
             std::uint64_t reset_seed_base, double rde_beta = 50.0);

  Kind kind() const { return kind_; }
  int num_agents() const { return static_cast<int>(agents_.size()); }
  int active_index() const { return active_; }
  int replay_ratio() const { return schedule_.replay_ratio; }
  std::int64_t period() const { return period_; }  // 0 when the strategy never resets
  std::uint64_t resets_performed() const { return resets_; }
  std::int64_t last_reset_step(int idx) const { return last_reset_step_.at(idx); }

  sac::SacAgent& agent(int idx) { return agents_.at(idx); }
  const sac::SacAgent& agent(int idx) const { return agents_.at(idx); }

  // Every strategy trains all of its agents each step.
  std::vector<int> trainable_indices() const;

  // Training-time action (stochastic). RDE consumes rng for per-agent
  // proposals plus one softmax draw; others for the active agent's noise.
  std::vector<double> act(std::span<const double> obs, Rng& rng);

  // Evaluation policy (deterministic; rng-free).
  std::vector<double> act_deterministic(std::span<const double> obs) const;

  // The event due at `env_step`, if any. Pure: does not mutate.
  std::optional<TickEvent> due(std::int64_t env_step) const;
  // Apply an event returned by due().
  void apply(const TickEvent& ev);

  // RDE internals, exposed for tests: index whose critic votes, and the
  // softmax distribution over candidate actions' min-Q values.
  int oldest_agent() const;
  std::vector<double> vote_probabilities(const std::vector<double>& qvals) const;

 private:
  Kind kind_;
  std::vector<sac::SacAgent> agents_;
  ScheduleConfig schedule_;
  std::int64_t period_ = 0;
  std::uint64_t reset_seed_base_;
  double rde_beta_;
  int active_ = 0;
  std::uint64_t resets_ = 0;
  std::vector<std::int64_t> last_reset_step_;
};

// Largest uniform hidden width w' such that num_networks copies of a SAC
// agent with hidden layers [w', w', ...] match (within rel_tolerance) the
// parameter count of one baseline agent with the given hidden sizes.
// Throws ConfigError when no width gets inside the tolerance.
int matched_hidden_width(int obs_dim, int action_dim, const std::vector<int>& baseline_hidden,
                         int num_networks, double rel_tolerance = 0.02);

// Trainable parameters of one SAC agent (policy + twin critics; targets and
// temperature excluded).
std::size_t sac_trainable_params(int obs_dim, int action_dim, const std::vector<int>& hidden);

// Hooks the runner uses to probe plasticity right around a reset.
struct TickObserver {
  virtual ~TickObserver() = default;
  virtual void before_event(const TickEvent& ev) {}
  virtual void after_event(const TickEvent& ev) {}
};

struct LoopConfig {
  int batch_size = 256;
  std::int64_t warmup_steps = 5000;  // uniform actions, no updates
};

struct LoopState {
  std::vector<double> obs;
  std::int64_t env_step = 0;       // completed env steps
  std::int64_t episode_index = 0;  // index of the episode in progress
  std::uint64_t episode_seed_base = 0;
  double episode_return_acc = 0.0;
};

struct StepRngs {
  Rng* action = nullptr;
  Rng* update = nullptr;
  Rng* sampling = nullptr;  // replay minibatch draws
};

struct StepLog {
  double reward = 0.0;
  bool episode_end = false;
  double episode_return = 0.0;  // set when episode_end
  std::optional<TickEvent> event;
  int updates_run = 0;  // gradient updates summed over agents
};

// Begin a run: reset the env with the first episode seed.
void start_episode_stream(envs::Environment& env, LoopState& state);

// One interaction step of the shared off-policy loop: act, push, train every
// agent replay_ratio times, then process a due reset/swap (observer hooks run
// around the parameter reset). Episode boundaries reseed from the episode
// stream.
StepLog run_off_policy_step(Controller& ctrl, envs::Environment& env, replay::ReplayBuffer& buffer,
                            const LoopConfig& cfg, LoopState& state, StepRngs rngs,
                            TickObserver* observer = nullptr);

}  // namespace altlab::strategies
