#include "strategies.hpp"

#include <algorithm>
#include <cmath>

namespace altlab::strategies {

Kind kind_from_string(const std::string& s) {
  if (s == "baseline") return Kind::Baseline;
  if (s == "standard_reset") return Kind::StandardReset;
  if (s == "rde") return Kind::Rde;
  if (s == "altnet") return Kind::AltNet;
  throw ConfigError("unknown strategy '" + s + "'");
}

std::string to_string(Kind k) {
  switch (k) {
    case Kind::Baseline: return "baseline";
    case Kind::StandardReset: return "standard_reset";
    case Kind::Rde: return "rde";
    case Kind::AltNet: return "altnet";
  }
  return "?";
}

std::int64_t reset_freq_env_steps(std::uint64_t update_budget, int replay_ratio, int num_networks) {
  if (update_budget == 0) throw ConfigError("reset frequency: update_budget must be positive");
  if (replay_ratio <= 0) throw ConfigError("reset frequency: replay_ratio must be positive");
  if (num_networks <= 0) throw ConfigError("reset frequency: num_networks must be positive");
  const std::uint64_t denom = static_cast<std::uint64_t>(replay_ratio) * static_cast<std::uint64_t>(num_networks);
  if (update_budget % denom != 0)
    throw ConfigError("reset frequency: update_budget " + std::to_string(update_budget) +
                      " is not divisible by replay_ratio * num_networks = " + std::to_string(denom));
  return static_cast<std::int64_t>(update_budget / denom);
}

Controller::Controller(Kind kind, std::vector<sac::SacAgent> agents, ScheduleConfig schedule,
                       std::uint64_t reset_seed_base, double rde_beta)
    : kind_(kind),
      agents_(std::move(agents)),
      schedule_(schedule),
      reset_seed_base_(reset_seed_base),
      rde_beta_(rde_beta) {
  const int n = num_agents();
  if (n == 0) throw ConfigError("controller: needs at least one agent");
  if (n != schedule_.num_networks) throw ConfigError("controller: agent count differs from num_networks");
  switch (kind_) {
    case Kind::Baseline:
    case Kind::StandardReset:
      if (n != 1) throw ConfigError("controller: " + to_string(kind_) + " uses exactly one network");
      break;
    case Kind::Rde:
    case Kind::AltNet:
      if (n < 2) throw ConfigError("controller: " + to_string(kind_) + " needs at least two networks");
      break;
  }
  for (int i = 1; i < n; ++i)
    if (agents_[i].cfg.obs_dim != agents_[0].cfg.obs_dim || agents_[i].cfg.action_dim != agents_[0].cfg.action_dim)
      throw ConfigError("controller: agents must share observation/action dims");
  if (rde_beta_ < 0.0) throw ConfigError("controller: rde beta must be non-negative");
  period_ = kind_ == Kind::Baseline ? 0 : reset_freq_env_steps(schedule_.update_budget, schedule_.replay_ratio, n);
  last_reset_step_.assign(n, 0);
}

std::vector<int> Controller::trainable_indices() const {
  std::vector<int> ix(agents_.size());
  for (std::size_t i = 0; i < ix.size(); ++i) ix[i] = static_cast<int>(i);
  return ix;
}

int Controller::oldest_agent() const {
  int best = 0;
  for (int i = 1; i < num_agents(); ++i)
    if (last_reset_step_[i] < last_reset_step_[best]) best = i;  // ties keep the lower index
  return best;
}

std::vector<double> Controller::vote_probabilities(const std::vector<double>& qvals) const {
  if (qvals.empty()) throw PreconditionError("vote_probabilities: no candidates");
  const double m = *std::max_element(qvals.begin(), qvals.end());
  std::vector<double> p(qvals.size());
  double z = 0.0;
  for (std::size_t i = 0; i < qvals.size(); ++i) {
    p[i] = std::exp(rde_beta_ * (qvals[i] - m));
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

std::vector<double> Controller::act(std::span<const double> obs, Rng& rng) {
  switch (kind_) {
    case Kind::Baseline:
    case Kind::StandardReset:
      return sac::sample_action(agents_[0], obs, rng, false);
    case Kind::AltNet:
      return sac::sample_action(agents_[active_], obs, rng, false);
    case Kind::Rde:
      break;
  }
  // RDE: each agent proposes; the least-recently-reset agent's critic votes.
  const int n = num_agents();
  std::vector<std::vector<double>> proposals(n);
  for (int i = 0; i < n; ++i) proposals[i] = sac::sample_action(agents_[i], obs, rng, false);
  const sac::SacAgent& judge = agents_[oldest_agent()];
  std::vector<double> q(n);
  for (int i = 0; i < n; ++i) q[i] = sac::min_q(judge, obs, proposals[i]);
  const std::vector<double> p = vote_probabilities(q);
  const double u = rng.uniform01();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += p[i];
    if (u < acc) return proposals[i];
  }
  return proposals[n - 1];  // u landed on accumulated rounding slack
}

namespace {
// deterministic sampling never draws; a shared dummy engine satisfies the API
Rng& null_rng() {
  static Rng r(0);
  return r;
}
}  // namespace

std::vector<double> Controller::act_deterministic(std::span<const double> obs) const {
  switch (kind_) {
    case Kind::Baseline:
    case Kind::StandardReset:
      return sac::sample_action(agents_[0], obs, null_rng(), true);
    case Kind::AltNet:
      return sac::sample_action(agents_[active_], obs, null_rng(), true);
    case Kind::Rde:
      break;
  }
  const int n = num_agents();
  std::vector<std::vector<double>> proposals(n);
  for (int i = 0; i < n; ++i) proposals[i] = sac::sample_action(agents_[i], obs, null_rng(), true);
  const sac::SacAgent& judge = agents_[oldest_agent()];
  int best = 0;
  double best_q = sac::min_q(judge, obs, proposals[0]);
  for (int i = 1; i < n; ++i) {
    const double qi = sac::min_q(judge, obs, proposals[i]);
    if (qi > best_q) {
      best_q = qi;
      best = i;
    }
  }
  return proposals[best];
}

std::optional<TickEvent> Controller::due(std::int64_t env_step) const {
  if (period_ <= 0) return std::nullopt;
  if (env_step <= 0 || env_step % period_ != 0) return std::nullopt;
  if (schedule_.halt_resets_after && env_step > *schedule_.halt_resets_after) return std::nullopt;
  TickEvent ev;
  ev.env_step = env_step;
  ev.seed = split_seed(reset_seed_base_, resets_);
  switch (kind_) {
    case Kind::StandardReset:
      ev.type = TickEvent::Type::Reset;
      ev.agent_index = 0;
      ev.new_active = 0;
      break;
    case Kind::Rde:
      ev.type = TickEvent::Type::Reset;
      ev.agent_index = static_cast<int>(resets_ % static_cast<std::uint64_t>(num_agents()));
      ev.new_active = active_;
      break;
    case Kind::AltNet:
      // the active net retires: reset it, promote the next in the rotation
      ev.type = TickEvent::Type::Swap;
      ev.agent_index = active_;
      ev.new_active = (active_ + 1) % num_agents();
      break;
    case Kind::Baseline:
      return std::nullopt;
  }
  return ev;
}

void Controller::apply(const TickEvent& ev) {
  if (ev.agent_index < 0 || ev.agent_index >= num_agents())
    throw PreconditionError("controller apply: agent index out of range");
  sac::full_reset(agents_[ev.agent_index], ev.seed);
  last_reset_step_[ev.agent_index] = ev.env_step;
  active_ = ev.new_active;
  ++resets_;
}

std::size_t sac_trainable_params(int obs_dim, int action_dim, const std::vector<int>& hidden) {
  if (obs_dim <= 0 || action_dim <= 0 || hidden.empty())
    throw ConfigError("sac_trainable_params: bad architecture");
  auto count = [](const std::vector<int>& sizes) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
      n += static_cast<std::size_t>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
    return n;
  };
  std::vector<int> pol{obs_dim};
  pol.insert(pol.end(), hidden.begin(), hidden.end());
  pol.push_back(2 * action_dim);
  std::vector<int> cri{obs_dim + action_dim};
  cri.insert(cri.end(), hidden.begin(), hidden.end());
  cri.push_back(1);
  return count(pol) + 2 * count(cri);
}

int matched_hidden_width(int obs_dim, int action_dim, const std::vector<int>& baseline_hidden,
                         int num_networks, double rel_tolerance) {
  if (num_networks < 2) throw ConfigError("matched_hidden_width: needs at least two networks");
  const std::size_t target = sac_trainable_params(obs_dim, action_dim, baseline_hidden);
  const int depth = static_cast<int>(baseline_hidden.size());
  const int w_max = *std::max_element(baseline_hidden.begin(), baseline_hidden.end());
  int best_w = 1;
  double best_rel = 1e300;
  for (int w = 1; w <= w_max; ++w) {
    const std::vector<int> hidden(depth, w);
    const double total = static_cast<double>(num_networks) *
                         static_cast<double>(sac_trainable_params(obs_dim, action_dim, hidden));
    const double rel = std::abs(total - static_cast<double>(target)) / static_cast<double>(target);
    if (rel < best_rel) {
      best_rel = rel;
      best_w = w;
    }
  }
  if (best_rel > rel_tolerance)
    throw ConfigError("matched_hidden_width: best width " + std::to_string(best_w) + " misses the target by " +
                      std::to_string(best_rel * 100.0) + "% (tolerance " +
                      std::to_string(rel_tolerance * 100.0) + "%)");
  return best_w;
}

void start_episode_stream(envs::Environment& env, LoopState& state) {
  state.episode_index = 0;
  state.episode_return_acc = 0.0;
  state.obs = env.reset(split_seed(state.episode_seed_base, 0));
}

StepLog run_off_policy_step(Controller& ctrl, envs::Environment& env, replay::ReplayBuffer& buffer,
                            const LoopConfig& cfg, LoopState& state, StepRngs rngs, TickObserver* observer) {
  if (state.obs.empty()) throw PreconditionError("run_off_policy_step: call start_episode_stream first");
  if (!rngs.action || !rngs.update || !rngs.sampling)
    throw PreconditionError("run_off_policy_step: all rng streams are required");
  const envs::EnvSpec& spec = env.spec();

  std::vector<double> action;
  if (state.env_step < cfg.warmup_steps) {
    action.resize(spec.action_dim);
    for (int k = 0; k < spec.action_dim; ++k)
      action[k] = rngs.action->uniform(spec.action_low[k], spec.action_high[k]);
  } else {
    action = ctrl.act(state.obs, *rngs.action);
  }

  const envs::StepResult res = env.step(action);
  state.env_step += 1;

  replay::Transition tr;
  tr.obs = state.obs;
  tr.action = action;
  tr.reward = res.reward;
  tr.next_obs = res.observation;
  tr.terminal = res.terminal;  // truncation bootstraps, so it is stored alive
  buffer.push(tr);

  StepLog log;
  log.reward = res.reward;
  state.episode_return_acc += res.reward;
  if (res.terminal || res.truncated) {
    log.episode_end = true;
    log.episode_return = state.episode_return_acc;
    state.episode_return_acc = 0.0;
    state.episode_index += 1;
    state.obs = env.reset(split_seed(state.episode_seed_base, static_cast<std::uint64_t>(state.episode_index)));
  } else {
    state.obs = res.observation;
  }

  if (state.env_step > cfg.warmup_steps && buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
    for (const int idx : ctrl.trainable_indices()) {
      for (int r = 0; r < ctrl.replay_ratio(); ++r) {
        const replay::Batch batch = buffer.sample(cfg.batch_size, *rngs.sampling);
        sac::update(ctrl.agent(idx), batch, *rngs.update);
        ++log.updates_run;
      }
    }
  }

  // strategy tick closes the step, so a boundary eval sees the post-event nets
  if (auto ev = ctrl.due(state.env_step)) {
    if (observer) observer->before_event(*ev);
    ctrl.apply(*ev);
    if (observer) observer->after_event(*ev);
    log.event = ev;
  }
  return log;
}

}  // namespace altlab::strategies
