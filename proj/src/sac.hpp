#pragma once
#include <cstdint>
#include <span>
#include <vector>

#include "nn.hpp"
#include "replay.hpp"
#include "rng.hpp"

namespace altlab::sac {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kSquashEps = 1e-6;  // tanh-correction jacobian floor

struct SacConfig {
  int obs_dim = 0;
  int action_dim = 0;
  std::vector<int> hidden{256, 256};
  std::vector<double> action_low, action_high;
  double learning_rate = 3e-4;
  double adam_epsilon = 1e-8;
  double gamma = 0.99;
  double tau = 0.005;  // Polyak step applied every update
  double initial_temperature = 1.0;
};

// Squashed-Gaussian SAC with twin critics and a learned temperature.
// Policy head outputs (mean, raw log-std) per action dim; critics score
// (obs, action) pairs. Gradients are computed in closed form.
struct SacAgent {
  SacConfig cfg;
  nn::DenseNetwork policy;  // [obs] -> [2 * action_dim]
  nn::DenseNetwork q1, q2;  // [obs + action] -> [1]
  nn::DenseNetwork q1_target, q2_target;
  nn::AdamState policy_opt, q1_opt, q2_opt;
  double log_temperature = 0.0;
  nn::AdamVec temperature_opt;
  double target_entropy = 0.0;  // defaults to -action_dim
  std::uint64_t updates_done = 0;

  double temperature() const;
};

SacAgent make_agent(const SacConfig& cfg, std::uint64_t seed);

// Reinitialize every network (targets = fresh online copies), temperature
// and all optimizer state. The agent is statistically a new make_agent draw.
void full_reset(SacAgent& agent, std::uint64_t seed);

// One action. Stochastic: a = tanh(mu + sigma * eps) * scale + shift with
// eps drawn per dim from rng; deterministic: a = tanh(mu) * scale + shift.
std::vector<double> sample_action(const SacAgent& agent, std::span<const double> obs, Rng& rng,
                                  bool deterministic = false);

// log pi of the squashed action identified by its pre-squash value u.
double action_log_prob(const SacAgent& agent, std::span<const double> obs, std::span<const double> pre_squash);

// min of the twin online critics at (obs, action).
double min_q(const SacAgent& agent, std::span<const double> obs, std::span<const double> action);

// Entropy-regularized TD targets for a batch; next-action noise is drawn
// from rng row-major (batch, then action dim).
std::vector<double> td_targets(const SacAgent& agent, const replay::Batch& batch, Rng& rng);

struct ActorEval {
  double loss = 0.0;
  nn::ParamGrads policy_grads;
  std::vector<double> log_probs;  // per batch row, at the sampled actions
};

// Policy loss mean(alpha * log pi - min Q) and its exact policy gradients,
// with the exploration noise passed in explicitly (one row per batch row).
ActorEval actor_loss_and_grads(const SacAgent& agent, const Matrix& obs, const Matrix& noise, double alpha);

// d(temperature loss)/d(log alpha) = -mean(log pi + target_entropy).
double temperature_grad(const std::vector<double>& log_probs, double target_entropy);

struct UpdateReport {
  double critic_loss = 0.0;  // mean of the two critics' MSE losses
  double actor_loss = 0.0;
  double temperature_loss = 0.0;
  double temperature = 0.0;  // after the update
  double mean_q = 0.0;       // q1 on the batch, before the update
};

// One full SAC update on a sampled batch: critics, then actor, then
// temperature, then Polyak target updates.
UpdateReport update(SacAgent& agent, const replay::Batch& batch, Rng& rng);

}  // namespace altlab::sac
