#include "ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "errors.hpp"

namespace altlab::ppo {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)

void validate_config(const PpoConfig& c) {
  if (c.obs_dim <= 0 || c.action_dim <= 0) throw ConfigError("ppo: dims must be positive");
  if (c.hidden.empty()) throw ConfigError("ppo: at least one hidden layer");
  for (int h : c.hidden)
    if (h <= 0) throw ConfigError("ppo: hidden widths must be positive");
  if (c.action_low.size() != static_cast<std::size_t>(c.action_dim) ||
      c.action_high.size() != static_cast<std::size_t>(c.action_dim))
    throw ConfigError("ppo: action bounds must match action_dim");
  for (int j = 0; j < c.action_dim; ++j) {
    if (!std::isfinite(c.action_low[j]) || !std::isfinite(c.action_high[j]) ||
        c.action_low[j] >= c.action_high[j])
      throw ConfigError("ppo: action bounds must be finite with low < high");
  }
  if (!(c.learning_rate > 0) || !(c.adam_epsilon > 0)) throw ConfigError("ppo: optimizer settings must be positive");
  if (c.gamma < 0 || c.gamma > 1 || c.gae_lambda < 0 || c.gae_lambda > 1)
    throw ConfigError("ppo: gamma and lambda must lie in [0, 1]");
  if (!(c.clip_coef > 0) || c.clip_coef >= 1) throw ConfigError("ppo: clip_coef must lie in (0, 1)");
  if (c.vf_coef < 0 || c.ent_coef < 0) throw ConfigError("ppo: loss coefficients must be non-negative");
  if (!(c.max_grad_norm > 0)) throw ConfigError("ppo: max_grad_norm must be positive");
  if (c.update_epochs <= 0 || c.num_minibatches <= 0)
    throw ConfigError("ppo: update_epochs and num_minibatches must be positive");
  if (!(c.passive_log_ratio_bound > 0)) throw ConfigError("ppo: passive_log_ratio_bound must be positive");
}

nn::AdamConfig adam_config(const PpoConfig& c) {
  nn::AdamConfig a;
  a.learning_rate = c.learning_rate;
  a.epsilon = c.adam_epsilon;
  return a;
}

// Per-row log density plus the standardized residuals z = (a - mu) / sigma.
// logp_i = sum_j(-0.5 z_ij^2 - log_std_j - 0.5 ln 2pi)
void log_probs_and_z(const PpoConfig& cfg, const std::vector<double>& log_std, const Matrix& means,
                     const Matrix& actions, std::vector<double>& logp, Matrix& z) {
  const int n = means.rows, d = cfg.action_dim;
  logp.assign(n, 0.0);
  z = Matrix(n, d);
  for (int j = 0; j < d; ++j) {
    const double inv_sigma = std::exp(-log_std[j]);
    for (int i = 0; i < n; ++i) {
      const double zij = (actions.at(i, j) - means.at(i, j)) * inv_sigma;
      z.at(i, j) = zij;
      logp[i] += -0.5 * zij * zij - log_std[j] - kHalfLog2Pi;
    }
  }
}

Matrix single_row(const std::vector<double>& v) {
  Matrix m(1, static_cast<int>(v.size()));
  m.data = v;
  return m;
}

}  // namespace

std::vector<int> PpoConfig::policy_layer_sizes() const {
  std::vector<int> sizes{obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(action_dim);
  return sizes;
}

std::vector<int> PpoConfig::value_layer_sizes() const {
  std::vector<int> sizes{obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return sizes;
}

PpoAgent make_agent(const PpoConfig& config, std::uint64_t seed) {
  validate_config(config);
  PpoAgent a;
  a.config = config;
  a.policy = nn::init_network(config.policy_layer_sizes(), split_seed(seed, 0));
  a.value = nn::init_network(config.value_layer_sizes(), split_seed(seed, 1));
  a.log_std.assign(config.action_dim, 0.0);
  const nn::AdamConfig ac = adam_config(config);
  a.policy_adam = nn::make_adam_state(a.policy, ac);
  a.value_adam = nn::make_adam_state(a.value, ac);
  a.log_std_adam = nn::make_adam_vec(a.log_std.size(), ac);
  a.init_seed = seed;
  return a;
}

void full_reset(PpoAgent& agent, std::uint64_t seed) {
  nn::reset_parameters(agent.policy, agent.policy_adam, split_seed(seed, 0));
  nn::reset_parameters(agent.value, agent.value_adam, split_seed(seed, 1));
  std::fill(agent.log_std.begin(), agent.log_std.end(), 0.0);
  agent.log_std_adam = nn::make_adam_vec(agent.log_std.size(), adam_config(agent.config));
  agent.init_seed = seed;
  agent.updates_done = 0;
}

std::int64_t trainable_params(int obs_dim, int action_dim, const std::vector<int>& hidden) {
  auto count = [](const std::vector<int>& sizes) {
    std::int64_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
      n += static_cast<std::int64_t>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
    return n;
  };
  PpoConfig c;
  c.obs_dim = obs_dim;
  c.action_dim = action_dim;
  c.hidden = hidden;
  return count(c.policy_layer_sizes()) + count(c.value_layer_sizes()) + action_dim;
}

std::vector<double> gaussian_log_probs(const PpoAgent& agent, const Matrix& obs, const Matrix& actions) {
  if (obs.rows != actions.rows) throw ShapeError("gaussian_log_probs: row mismatch");
  const nn::ForwardTrace trace = nn::forward(agent.policy, obs);
  std::vector<double> logp;
  Matrix z;
  log_probs_and_z(agent.config, agent.log_std, trace.post.back(), actions, logp, z);
  return logp;
}

std::vector<double> act_deterministic(const PpoAgent& agent, const std::vector<double>& obs) {
  const nn::ForwardTrace trace = nn::forward(agent.policy, single_row(obs));
  std::vector<double> a(agent.config.action_dim);
  for (int j = 0; j < agent.config.action_dim; ++j)
    a[j] = std::clamp(trace.post.back().at(0, j), agent.config.action_low[j], agent.config.action_high[j]);
  return a;
}

Rollout collect_rollout(const PpoAgent& agent, envs::Environment& env, int steps,
                        strategies::LoopState& state, Rng& action_rng) {
  if (steps < 1) throw PreconditionError("collect_rollout: steps must be >= 1");
  if (state.obs.empty()) throw PreconditionError("collect_rollout: call start_episode_stream first");
  const PpoConfig& cfg = agent.config;
  if (static_cast<int>(state.obs.size()) != cfg.obs_dim)
    throw ShapeError("collect_rollout: observation dim mismatch");

  Rollout r;
  r.observations = Matrix(steps, cfg.obs_dim);
  r.actions = Matrix(steps, cfg.action_dim);
  r.behavior_log_probs.resize(steps);
  r.rewards.resize(steps);
  r.values.resize(steps);
  r.dones.resize(steps);

  std::vector<double> clipped(cfg.action_dim);
  for (int t = 0; t < steps; ++t) {
    std::copy(state.obs.begin(), state.obs.end(), r.observations.row(t));
    const Matrix obs_row = single_row(state.obs);
    const nn::ForwardTrace ptrace = nn::forward(agent.policy, obs_row);
    const Matrix& mean = ptrace.post.back();
    double logp = 0.0;
    for (int j = 0; j < cfg.action_dim; ++j) {
      const double zj = action_rng.normal();
      const double aj = mean.at(0, j) + std::exp(agent.log_std[j]) * zj;
      r.actions.at(t, j) = aj;
      clipped[j] = std::clamp(aj, cfg.action_low[j], cfg.action_high[j]);
      logp += -0.5 * zj * zj - agent.log_std[j] - kHalfLog2Pi;
    }
    r.behavior_log_probs[t] = logp;
    r.values[t] = nn::forward(agent.value, obs_row).post.back().at(0, 0);

    const envs::StepResult sr = env.step(clipped);
    r.rewards[t] = sr.reward;
    state.episode_return_acc += sr.reward;
    ++state.env_step;
    const bool done = sr.terminal || sr.truncated;
    r.dones[t] = done ? 1 : 0;
    if (done) {
      r.finished_episodes.emplace_back(state.env_step, state.episode_return_acc);
      state.episode_return_acc = 0.0;
      ++state.episode_index;
      state.obs = env.reset(split_seed(state.episode_seed_base, static_cast<std::uint64_t>(state.episode_index)));
    } else {
      state.obs = sr.observation;
    }
  }
  r.final_observation = state.obs;
  r.bootstrap_value = nn::forward(agent.value, single_row(state.obs)).post.back().at(0, 0);
  return r;
}

GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<std::uint8_t>& dones,
                      const std::vector<double>& values, double bootstrap_value, double gamma,
                      double lambda) {
  const std::size_t n = rewards.size();
  if (n == 0) throw PreconditionError("compute_gae: empty rollout");
  if (dones.size() != n || values.size() != n) throw ShapeError("compute_gae: length mismatch");
  GaeResult g;
  g.advantages.resize(n);
  g.returns.resize(n);
  double lastgae = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double not_done = dones[t] ? 0.0 : 1.0;
    const double next_value = (t + 1 == n) ? bootstrap_value : values[t + 1];
    const double delta = rewards[t] + gamma * not_done * next_value - values[t];
    lastgae = delta + gamma * lambda * not_done * lastgae;
    g.advantages[t] = lastgae;
    g.returns[t] = lastgae + values[t];
  }
  return g;
}

GaeResult compute_gae(const Rollout& rollout, double gamma, double lambda) {
  return compute_gae(rollout.rewards, rollout.dones, rollout.values, rollout.bootstrap_value, gamma,
                     lambda);
}

std::pair<std::vector<double>, double> value_estimates(const PpoAgent& agent, const Rollout& rollout) {
  const nn::ForwardTrace vtrace = nn::forward(agent.value, rollout.observations);
  const Matrix& out = vtrace.post.back();
  std::vector<double> values(rollout.length());
  for (int t = 0; t < rollout.length(); ++t) values[t] = out.at(t, 0);
  const double bootstrap =
      nn::forward(agent.value, single_row(rollout.final_observation)).post.back().at(0, 0);
  return {std::move(values), bootstrap};
}

std::vector<double> normalize_advantages(const std::vector<double>& advantages) {
  const std::size_t n = advantages.size();
  if (n == 0) throw PreconditionError("normalize_advantages: empty input");
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(n);
  double var = 0.0;
  if (n >= 2) {
    for (double a : advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(n - 1);
  }
  const double denom = std::sqrt(var) + 1e-8;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (advantages[i] - mean) / denom;
  return out;
}

double clipped_objective_coef(double ratio, double advantage, double clip_coef) {
  const double clipped = std::clamp(ratio, 1.0 - clip_coef, 1.0 + clip_coef);
  const double unclipped_term = -ratio * advantage;
  const double clipped_term = -clipped * advantage;
  return unclipped_term >= clipped_term ? -advantage : 0.0;
}

MinibatchEval minibatch_loss_and_grads(const PpoAgent& agent, const Matrix& obs, const Matrix& actions,
                                       const std::vector<double>& behavior_log_probs,
                                       const std::vector<double>& normalized_advantages,
                                       const std::vector<double>& returns, bool passive) {
  const PpoConfig& cfg = agent.config;
  const int n = obs.rows, dim = cfg.action_dim;
  if (actions.rows != n || static_cast<int>(behavior_log_probs.size()) != n ||
      static_cast<int>(normalized_advantages.size()) != n || static_cast<int>(returns.size()) != n)
    throw ShapeError("minibatch_loss_and_grads: row mismatch");
  const double bound = cfg.passive_log_ratio_bound;

  MinibatchEval ev;
  ev.log_std_grads.assign(dim, 0.0);

  // policy pass
  const nn::ForwardTrace ptrace = nn::forward(agent.policy, obs);
  std::vector<double> logp;
  Matrix z;
  log_probs_and_z(cfg, agent.log_std, ptrace.post.back(), actions, logp, z);

  Matrix policy_out_grad(n, dim);
  for (int k = 0; k < n; ++k) {
    const double log_ratio = logp[k] - behavior_log_probs[k];
    if (!std::isfinite(log_ratio)) throw NumericError("ppo_update: non-finite log ratio");
    double ratio, gate;
    if (passive) {
      gate = std::abs(log_ratio) <= bound ? 1.0 : 0.0;
      ratio = std::exp(std::clamp(log_ratio, -bound, bound));
    } else {
      gate = 1.0;
      ratio = std::exp(log_ratio);
      if (!std::isfinite(ratio)) throw NumericError("ppo_update: non-finite ratio");
    }
    ev.mean_ratio += ratio / n;
    const double adv = normalized_advantages[k];
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip_coef, 1.0 + cfg.clip_coef);
    ev.policy_loss += std::max(-ratio * adv, -clipped * adv) / n;
    const double coef = clipped_objective_coef(ratio, adv, cfg.clip_coef) * ratio * gate / n;
    for (int j = 0; j < dim; ++j) {
      policy_out_grad.at(k, j) = coef * z.at(k, j) * std::exp(-agent.log_std[j]);
      ev.log_std_grads[j] += coef * (z.at(k, j) * z.at(k, j) - 1.0);
    }
  }
  // entropy: H = sum_j log_std_j + dim/2 * (1 + ln 2pi), the same for every
  // sample, so -ent_coef * H contributes -ent_coef per log-std entry
  ev.entropy = std::accumulate(agent.log_std.begin(), agent.log_std.end(), 0.0) +
               0.5 * dim * (1.0 + 2.0 * kHalfLog2Pi);
  for (int j = 0; j < dim; ++j) ev.log_std_grads[j] -= cfg.ent_coef;

  // value pass
  const nn::ForwardTrace vtrace = nn::forward(agent.value, obs);
  Matrix value_out_grad(n, 1);
  for (int k = 0; k < n; ++k) {
    const double diff = vtrace.post.back().at(k, 0) - returns[k];
    ev.value_loss += 0.5 * diff * diff / n;
    value_out_grad.at(k, 0) = cfg.vf_coef * diff / n;
  }

  ev.policy_grads = nn::backward(agent.policy, ptrace, policy_out_grad);
  ev.value_grads = nn::backward(agent.value, vtrace, value_out_grad);
  ev.total_loss = ev.policy_loss + cfg.vf_coef * ev.value_loss - cfg.ent_coef * ev.entropy;
  return ev;
}

namespace {

PpoUpdateReport update_impl(PpoAgent& agent, const Rollout& rollout,
                            const std::vector<double>& advantages, const std::vector<double>& returns,
                            Rng& update_rng, bool passive) {
  const PpoConfig& cfg = agent.config;
  const int T = rollout.length();
  if (static_cast<int>(advantages.size()) != T || static_cast<int>(returns.size()) != T)
    throw ShapeError("ppo_update: advantages/returns must match rollout length");
  if (T % cfg.num_minibatches != 0)
    throw PreconditionError("ppo_update: rollout length must divide into num_minibatches");
  const int mb_size = T / cfg.num_minibatches;
  const int dim = cfg.action_dim;

  std::vector<int> indices(T);
  for (int i = 0; i < T; ++i) indices[i] = i;

  PpoUpdateReport rep;
  Matrix mb_obs(mb_size, cfg.obs_dim), mb_actions(mb_size, dim);
  std::vector<double> mb_blogp(mb_size), mb_adv(mb_size), mb_ret(mb_size);

  for (int epoch = 0; epoch < cfg.update_epochs; ++epoch) {
    for (int i = T - 1; i > 0; --i)
      std::swap(indices[i], indices[update_rng.below(static_cast<std::uint64_t>(i) + 1)]);

    for (int b = 0; b < cfg.num_minibatches; ++b) {
      for (int k = 0; k < mb_size; ++k) {
        const int idx = indices[b * mb_size + k];
        std::copy(rollout.observations.row(idx), rollout.observations.row(idx) + cfg.obs_dim,
                  mb_obs.row(k));
        std::copy(rollout.actions.row(idx), rollout.actions.row(idx) + dim, mb_actions.row(k));
        mb_blogp[k] = rollout.behavior_log_probs[idx];
        mb_adv[k] = advantages[idx];
        mb_ret[k] = returns[idx];
      }
      MinibatchEval ev = minibatch_loss_and_grads(agent, mb_obs, mb_actions, mb_blogp,
                                                  normalize_advantages(mb_adv), mb_ret, passive);

      double sq = ev.policy_grads.squared_norm() + ev.value_grads.squared_norm();
      for (double g : ev.log_std_grads) sq += g * g;
      const double global_norm = std::sqrt(sq);
      double post_norm = global_norm;
      if (global_norm > cfg.max_grad_norm) {
        const double scale = cfg.max_grad_norm / global_norm;
        ev.policy_grads.scale(scale);
        ev.value_grads.scale(scale);
        for (double& g : ev.log_std_grads) g *= scale;
        post_norm = cfg.max_grad_norm;
      }

      nn::adam_step(agent.policy, ev.policy_grads, agent.policy_adam);
      nn::adam_step_vec(agent.log_std, ev.log_std_grads, agent.log_std_adam);
      nn::adam_step(agent.value, ev.value_grads, agent.value_adam);

      rep.mean_policy_loss += ev.policy_loss;
      rep.mean_value_loss += ev.value_loss;
      rep.mean_entropy += ev.entropy;
      rep.mean_ratio += ev.mean_ratio;
      rep.max_grad_norm_pre_clip = std::max(rep.max_grad_norm_pre_clip, global_norm);
      rep.max_grad_norm_post_clip = std::max(rep.max_grad_norm_post_clip, post_norm);
      ++rep.minibatches_run;
    }
  }
  rep.mean_policy_loss /= rep.minibatches_run;
  rep.mean_value_loss /= rep.minibatches_run;
  rep.mean_entropy /= rep.minibatches_run;
  rep.mean_ratio /= rep.minibatches_run;
  ++agent.updates_done;
  return rep;
}

}  // namespace

PpoUpdateReport ppo_update(PpoAgent& agent, const Rollout& rollout,
                           const std::vector<double>& advantages, const std::vector<double>& returns,
                           Rng& update_rng) {
  return update_impl(agent, rollout, advantages, returns, update_rng, false);
}

PpoUpdateReport passive_ppo_update(PpoAgent& agent, const Rollout& rollout,
                                   const std::vector<double>& advantages,
                                   const std::vector<double>& returns, Rng& update_rng) {
  return update_impl(agent, rollout, advantages, returns, update_rng, true);
}

PpoController::PpoController(strategies::Kind kind, std::vector<PpoAgent> agents,
                             std::int64_t period_env_steps, std::optional<std::int64_t> halt_resets_after,
                             std::uint64_t reset_seed_base)
    : kind_(kind),
      agents_(std::move(agents)),
      period_(period_env_steps),
      halt_after_(halt_resets_after),
      reset_seed_base_(reset_seed_base) {
  using strategies::Kind;
  if (kind_ == Kind::Rde)
    throw ConfigError("ppo: rde needs action-value critics and a replay buffer");
  if (agents_.empty()) throw ConfigError("ppo controller: at least one agent");
  const int n = num_agents();
  if ((kind_ == Kind::Baseline || kind_ == Kind::StandardReset) && n != 1)
    throw ConfigError("ppo controller: " + strategies::to_string(kind_) + " uses exactly one network");
  if (kind_ == Kind::AltNet && n < 2) throw ConfigError("ppo controller: altnet needs >= 2 networks");
  if (kind_ == Kind::Baseline) {
    if (period_ != 0) throw ConfigError("ppo controller: baseline takes no reset period");
  } else if (period_ <= 0) {
    throw ConfigError("ppo controller: reset period must be positive");
  }
  if (halt_after_ && *halt_after_ < 0) throw ConfigError("ppo controller: halt step must be >= 0");
  for (const PpoAgent& a : agents_) {
    if (a.config.obs_dim != agents_[0].config.obs_dim ||
        a.config.action_dim != agents_[0].config.action_dim)
      throw ConfigError("ppo controller: agents must share dimensions");
  }
  next_due_ = period_;
  last_reset_step_.assign(n, 0);
}

std::optional<strategies::TickEvent> PpoController::due(std::int64_t env_step) const {
  using strategies::TickEvent;
  if (period_ <= 0 || env_step < next_due_) return std::nullopt;
  if (halt_after_ && next_due_ > *halt_after_) return std::nullopt;
  TickEvent ev;
  ev.env_step = env_step;
  ev.seed = split_seed(reset_seed_base_, static_cast<std::uint64_t>(resets_));
  if (kind_ == strategies::Kind::AltNet) {
    ev.type = TickEvent::Type::Swap;
    ev.agent_index = active_;
    ev.new_active = (active_ + 1) % num_agents();
  } else {
    ev.type = TickEvent::Type::Reset;
    ev.agent_index = 0;
    ev.new_active = 0;
  }
  return ev;
}

void PpoController::apply(const strategies::TickEvent& event) {
  full_reset(agents_.at(event.agent_index), event.seed);
  last_reset_step_.at(event.agent_index) = event.env_step;
  active_ = event.new_active;
  ++resets_;
  // one event per rollout boundary; skip to the first multiple past it
  next_due_ = (event.env_step / period_ + 1) * period_;
}

}  // namespace altlab::ppo
