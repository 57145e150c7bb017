#pragma once
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "env.hpp"
#include "nn.hpp"
#include "strategies.hpp"

namespace altlab::ppo {

// Clipped-objective PPO with GAE for continuous actions: a mean network plus
// a trainable state-independent log-std vector, and a separate value network.
struct PpoConfig {
  int obs_dim = 0;
  int action_dim = 0;
  std::vector<int> hidden{64, 64};
  std::vector<double> action_low, action_high;

  double learning_rate = 3e-4;
  double adam_epsilon = 1e-5;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_coef = 0.2;
  double vf_coef = 0.5;
  double ent_coef = 0.0;
  double max_grad_norm = 0.5;
  int update_epochs = 10;
  int num_minibatches = 32;
  // |log ratio| bound applied only by passive updates, where the behavior
  // distribution belongs to a different network.
  double passive_log_ratio_bound = 5.0;

  std::vector<int> policy_layer_sizes() const;
  std::vector<int> value_layer_sizes() const;
};

struct PpoAgent {
  PpoConfig config;
  nn::DenseNetwork policy;  // observation -> action mean (affine output)
  std::vector<double> log_std;
  nn::DenseNetwork value;  // observation -> scalar
  nn::AdamState policy_adam;
  nn::AdamVec log_std_adam;
  nn::AdamState value_adam;
  std::uint64_t init_seed = 0;
  std::int64_t updates_done = 0;  // completed update calls
};

PpoAgent make_agent(const PpoConfig& config, std::uint64_t seed);
// Reinitializes networks (log-std back to zero) and wipes optimizer state.
void full_reset(PpoAgent& agent, std::uint64_t seed);

// Mean over both networks' weight entries; log-std excluded like biases.
std::int64_t trainable_params(int obs_dim, int action_dim, const std::vector<int>& hidden);

// One on-policy batch. Actions are stored as the raw Gaussian samples the
// log-probs refer to; the environment receives the box-clipped version.
struct Rollout {
  Matrix observations;                      // T x obs_dim
  Matrix actions;                           // T x action_dim, pre-clip
  std::vector<double> behavior_log_probs;   // from the collecting agent
  std::vector<double> rewards;
  std::vector<double> values;               // V(s_t), collecting agent
  std::vector<std::uint8_t> dones;          // episode ended after step t
  std::vector<double> final_observation;    // state after the last step
  double bootstrap_value = 0.0;             // V(final_observation)
  // (env_step, return) of episodes that finished inside this rollout
  std::vector<std::pair<std::int64_t, double>> finished_episodes;

  int length() const { return observations.rows; }
};

// Diagonal-Gaussian log density of each action row under the agent's policy.
std::vector<double> gaussian_log_probs(const PpoAgent& agent, const Matrix& obs, const Matrix& actions);

// Clipped mean action (evaluation mode).
std::vector<double> act_deterministic(const PpoAgent& agent, const std::vector<double>& obs);

// Runs `steps` environment steps from the current loop state. Episode seeds
// follow the same stream convention as the off-policy loop; one normal draw
// per action dimension per step, in dimension order.
Rollout collect_rollout(const PpoAgent& agent, envs::Environment& env, int steps,
                        strategies::LoopState& state, Rng& action_rng);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + values
};

GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<std::uint8_t>& dones,
                      const std::vector<double>& values, double bootstrap_value, double gamma,
                      double lambda);
// Convenience form over the collecting agent's stored value estimates.
GaeResult compute_gae(const Rollout& rollout, double gamma, double lambda);

// Value estimates of an arbitrary agent over a rollout's states: per-step
// values plus the bootstrap at the final state. Used for passive updates,
// whose advantages must come from the passive agent's own value function.
std::pair<std::vector<double>, double> value_estimates(const PpoAgent& agent, const Rollout& rollout);

// Mean zero, unit sample standard deviation (n-1 divisor, eps 1e-8).
std::vector<double> normalize_advantages(const std::vector<double>& advantages);

// d(per-sample clipped objective)/d(ratio): -adv on the branch that follows
// the ratio, 0 where the clipped branch is strictly better.
double clipped_objective_coef(double ratio, double advantage, double clip_coef);

// One minibatch of the clipped objective: losses plus analytic gradients for
// every trainable block, before any norm clipping. Advantages arrive already
// normalized. total_loss = policy + vf_coef * value - ent_coef * entropy.
struct MinibatchEval {
  double policy_loss = 0.0;
  double value_loss = 0.0;  // 0.5 * MSE, before vf_coef
  double entropy = 0.0;
  double mean_ratio = 0.0;
  double total_loss = 0.0;
  nn::ParamGrads policy_grads;
  std::vector<double> log_std_grads;
  nn::ParamGrads value_grads;
};

MinibatchEval minibatch_loss_and_grads(const PpoAgent& agent, const Matrix& obs, const Matrix& actions,
                                       const std::vector<double>& behavior_log_probs,
                                       const std::vector<double>& normalized_advantages,
                                       const std::vector<double>& returns, bool passive);

struct PpoUpdateReport {
  double mean_policy_loss = 0.0;
  double mean_value_loss = 0.0;  // 0.5 * MSE, before vf_coef
  double mean_entropy = 0.0;
  double mean_ratio = 0.0;
  double max_grad_norm_pre_clip = 0.0;
  double max_grad_norm_post_clip = 0.0;
  int minibatches_run = 0;
};

// update_epochs sweeps of shuffled minibatches; advantages are normalized per
// minibatch; gradients are globally norm-clipped across policy, log-std and
// value parameters before one Adam step per network.
PpoUpdateReport ppo_update(PpoAgent& agent, const Rollout& rollout,
                           const std::vector<double>& advantages,
                           const std::vector<double>& returns, Rng& update_rng);

// Same machinery with ratio = exp(passive log-prob - behavior log-prob),
// log-ratio clamped to +/- passive_log_ratio_bound (no gradient when clamped).
PpoUpdateReport passive_ppo_update(PpoAgent& agent, const Rollout& rollout,
                                   const std::vector<double>& advantages,
                                   const std::vector<double>& returns, Rng& update_rng);

// Reset/swap scheduling for on-policy training. Periods are given directly in
// environment steps and events fire at the first rollout boundary at or past
// each period multiple (at most one event per boundary). RDE is rejected:
// its vote needs action-value critics.
class PpoController {
 public:
  PpoController(strategies::Kind kind, std::vector<PpoAgent> agents, std::int64_t period_env_steps,
                std::optional<std::int64_t> halt_resets_after, std::uint64_t reset_seed_base);

  strategies::Kind kind() const { return kind_; }
  std::int64_t period() const { return period_; }
  int active_index() const { return active_; }
  int num_agents() const { return static_cast<int>(agents_.size()); }
  const PpoAgent& agent(int i) const { return agents_.at(i); }
  PpoAgent& agent(int i) { return agents_.at(i); }
  const PpoAgent& active_agent() const { return agents_.at(active_); }
  PpoAgent& active_agent() { return agents_.at(active_); }
  std::int64_t last_reset_step(int i) const { return last_reset_step_.at(i); }
  std::int64_t resets_performed() const { return resets_; }

  // Call at a rollout boundary; non-empty when a period multiple was crossed.
  std::optional<strategies::TickEvent> due(std::int64_t env_step) const;
  void apply(const strategies::TickEvent& event);

 private:
  strategies::Kind kind_;
  std::vector<PpoAgent> agents_;
  std::int64_t period_ = 0;
  std::optional<std::int64_t> halt_after_;
  std::int64_t next_due_ = 0;
  int active_ = 0;
  std::int64_t resets_ = 0;
  std::vector<std::int64_t> last_reset_step_;
  std::uint64_t reset_seed_base_ = 0;
};

}  // namespace altlab::ppo
