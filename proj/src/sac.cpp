#include "sac.hpp"

#include <cmath>

#include "errors.hpp"

namespace altlab::sac {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)

void validate_config(const SacConfig& cfg) {
  if (cfg.obs_dim <= 0 || cfg.action_dim <= 0) throw ConfigError("sac: obs_dim and action_dim must be positive");
  if (cfg.hidden.empty()) throw ConfigError("sac: at least one hidden layer required");
  if (static_cast<int>(cfg.action_low.size()) != cfg.action_dim ||
      static_cast<int>(cfg.action_high.size()) != cfg.action_dim)
    throw ConfigError("sac: action bounds must match action_dim");
  for (int k = 0; k < cfg.action_dim; ++k)
    if (!(cfg.action_low[k] < cfg.action_high[k])) throw ConfigError("sac: action_low must be below action_high");
  if (cfg.gamma < 0.0 || cfg.gamma >= 1.0) throw ConfigError("sac: gamma must be in [0, 1)");
  if (cfg.tau <= 0.0 || cfg.tau > 1.0) throw ConfigError("sac: tau must be in (0, 1]");
  if (cfg.initial_temperature <= 0.0) throw ConfigError("sac: initial_temperature must be positive");
  if (cfg.learning_rate <= 0.0) throw ConfigError("sac: learning_rate must be positive");
}

std::vector<int> policy_sizes(const SacConfig& cfg) {
  std::vector<int> s{cfg.obs_dim};
  s.insert(s.end(), cfg.hidden.begin(), cfg.hidden.end());
  s.push_back(2 * cfg.action_dim);
  return s;
}

std::vector<int> critic_sizes(const SacConfig& cfg) {
  std::vector<int> s{cfg.obs_dim + cfg.action_dim};
  s.insert(s.end(), cfg.hidden.begin(), cfg.hidden.end());
  s.push_back(1);
  return s;
}

Matrix concat_cols(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, a.cols + b.cols);
  for (int i = 0; i < a.rows; ++i) {
    double* dst = out.row(i);
    const double* ra = a.row(i);
    for (int j = 0; j < a.cols; ++j) dst[j] = ra[j];
    const double* rb = b.row(i);
    for (int j = 0; j < b.cols; ++j) dst[a.cols + j] = rb[j];
  }
  return out;
}

inline double scale_of(const SacConfig& cfg, int k) { return 0.5 * (cfg.action_high[k] - cfg.action_low[k]); }
inline double shift_of(const SacConfig& cfg, int k) { return 0.5 * (cfg.action_high[k] + cfg.action_low[k]); }

void check_obs(const SacConfig& cfg, std::span<const double> obs, const char* who) {
  if (static_cast<int>(obs.size()) != cfg.obs_dim) throw ShapeError(std::string(who) + ": obs dim mismatch");
}
}  // namespace

double SacAgent::temperature() const { return std::exp(log_temperature); }

SacAgent make_agent(const SacConfig& cfg, std::uint64_t seed) {
  validate_config(cfg);
  SacAgent a;
  a.cfg = cfg;
  a.policy = nn::init_network(policy_sizes(cfg), split_seed(seed, 0));
  a.q1 = nn::init_network(critic_sizes(cfg), split_seed(seed, 1));
  a.q2 = nn::init_network(critic_sizes(cfg), split_seed(seed, 2));
  a.q1_target = a.q1;
  a.q2_target = a.q2;
  const nn::AdamConfig oc{cfg.learning_rate, 0.9, 0.999, cfg.adam_epsilon};
  a.policy_opt = nn::make_adam_state(a.policy, oc);
  a.q1_opt = nn::make_adam_state(a.q1, oc);
  a.q2_opt = nn::make_adam_state(a.q2, oc);
  a.log_temperature = std::log(cfg.initial_temperature);
  a.temperature_opt = nn::make_adam_vec(1, oc);
  a.target_entropy = -static_cast<double>(cfg.action_dim);
  a.updates_done = 0;
  return a;
}

void full_reset(SacAgent& agent, std::uint64_t seed) {
  nn::reset_parameters(agent.policy, agent.policy_opt, split_seed(seed, 0));
  nn::reset_parameters(agent.q1, agent.q1_opt, split_seed(seed, 1));
  nn::reset_parameters(agent.q2, agent.q2_opt, split_seed(seed, 2));
  agent.q1_target = agent.q1;
  agent.q2_target = agent.q2;
  agent.log_temperature = std::log(agent.cfg.initial_temperature);
  agent.temperature_opt = nn::make_adam_vec(1, agent.temperature_opt.cfg);
  agent.updates_done = 0;
}

std::vector<double> sample_action(const SacAgent& agent, std::span<const double> obs, Rng& rng,
                                  bool deterministic) {
  const auto& cfg = agent.cfg;
  check_obs(cfg, obs, "sample_action");
  Matrix in(1, cfg.obs_dim);
  for (int j = 0; j < cfg.obs_dim; ++j) in.at(0, j) = obs[j];
  const nn::ForwardTrace tr = nn::forward(agent.policy, in);
  const double* head = tr.output().row(0);
  std::vector<double> a(cfg.action_dim);
  for (int k = 0; k < cfg.action_dim; ++k) {
    double u = head[k];
    if (!deterministic) {
      const double sigma = std::exp(std::clamp(head[cfg.action_dim + k], kLogStdMin, kLogStdMax));
      u += sigma * rng.normal();
    }
    a[k] = std::tanh(u) * scale_of(cfg, k) + shift_of(cfg, k);
  }
  return a;
}

double action_log_prob(const SacAgent& agent, std::span<const double> obs, std::span<const double> pre_squash) {
  const auto& cfg = agent.cfg;
  check_obs(cfg, obs, "action_log_prob");
  if (static_cast<int>(pre_squash.size()) != cfg.action_dim)
    throw ShapeError("action_log_prob: pre_squash dim mismatch");
  Matrix in(1, cfg.obs_dim);
  for (int j = 0; j < cfg.obs_dim; ++j) in.at(0, j) = obs[j];
  const nn::ForwardTrace tr = nn::forward(agent.policy, in);
  const double* head = tr.output().row(0);
  double logp = 0.0;
  for (int k = 0; k < cfg.action_dim; ++k) {
    const double mu = head[k];
    const double log_std = std::clamp(head[cfg.action_dim + k], kLogStdMin, kLogStdMax);
    const double sigma = std::exp(log_std);
    const double z = (pre_squash[k] - mu) / sigma;
    const double t = std::tanh(pre_squash[k]);
    logp += -kHalfLog2Pi - log_std - 0.5 * z * z;
    logp -= std::log(1.0 - t * t + kSquashEps);
    logp -= std::log(scale_of(cfg, k));
  }
  return logp;
}

double min_q(const SacAgent& agent, std::span<const double> obs, std::span<const double> action) {
  const auto& cfg = agent.cfg;
  check_obs(cfg, obs, "min_q");
  if (static_cast<int>(action.size()) != cfg.action_dim) throw ShapeError("min_q: action dim mismatch");
  Matrix in(1, cfg.obs_dim + cfg.action_dim);
  for (int j = 0; j < cfg.obs_dim; ++j) in.at(0, j) = obs[j];
  for (int k = 0; k < cfg.action_dim; ++k) in.at(0, cfg.obs_dim + k) = action[k];
  const double v1 = nn::forward(agent.q1, in).output().at(0, 0);
  const double v2 = nn::forward(agent.q2, in).output().at(0, 0);
  return std::min(v1, v2);
}

std::vector<double> td_targets(const SacAgent& agent, const replay::Batch& batch, Rng& rng) {
  const auto& cfg = agent.cfg;
  if (batch.obs.cols != cfg.obs_dim || batch.actions.cols != cfg.action_dim)
    throw ShapeError("td_targets: batch dims mismatch");
  const int b_sz = batch.size();
  const int adim = cfg.action_dim;
  const double alpha = agent.temperature();

  const nn::ForwardTrace ptr = nn::forward(agent.policy, batch.next_obs);
  Matrix next_actions(b_sz, adim);
  std::vector<double> next_logp(b_sz, 0.0);
  for (int b = 0; b < b_sz; ++b) {
    const double* head = ptr.output().row(b);
    for (int k = 0; k < adim; ++k) {  // noise drawn row-major: batch, then dim
      const double mu = head[k];
      const double log_std = std::clamp(head[adim + k], kLogStdMin, kLogStdMax);
      const double sigma = std::exp(log_std);
      const double eps = rng.normal();
      const double u = mu + sigma * eps;
      const double t = std::tanh(u);
      next_actions.at(b, k) = t * scale_of(cfg, k) + shift_of(cfg, k);
      next_logp[b] += -kHalfLog2Pi - log_std - 0.5 * eps * eps;
      next_logp[b] -= std::log(1.0 - t * t + kSquashEps);
      next_logp[b] -= std::log(scale_of(cfg, k));
    }
  }

  const Matrix xq = concat_cols(batch.next_obs, next_actions);
  const nn::ForwardTrace t1 = nn::forward(agent.q1_target, xq);
  const nn::ForwardTrace t2 = nn::forward(agent.q2_target, xq);
  std::vector<double> y(b_sz);
  for (int b = 0; b < b_sz; ++b) {
    const double qmin = std::min(t1.output().at(b, 0), t2.output().at(b, 0));
    const double mask = batch.terminals[b] ? 0.0 : 1.0;
    y[b] = batch.rewards[b] + cfg.gamma * mask * (qmin - alpha * next_logp[b]);
  }
  return y;
}

ActorEval actor_loss_and_grads(const SacAgent& agent, const Matrix& obs, const Matrix& noise, double alpha) {
  const auto& cfg = agent.cfg;
  if (obs.cols != cfg.obs_dim) throw ShapeError("actor_loss_and_grads: obs dim mismatch");
  if (noise.rows != obs.rows || noise.cols != cfg.action_dim)
    throw ShapeError("actor_loss_and_grads: noise shape mismatch");
  const int b_sz = obs.rows;
  const int adim = cfg.action_dim;

  const nn::ForwardTrace ptr = nn::forward(agent.policy, obs);
  Matrix actions(b_sz, adim);
  Matrix tanh_u(b_sz, adim), sigmas(b_sz, adim);
  std::vector<std::uint8_t> gate(static_cast<std::size_t>(b_sz) * adim);
  std::vector<double> logp(b_sz, 0.0);
  for (int b = 0; b < b_sz; ++b) {
    const double* head = ptr.output().row(b);
    for (int k = 0; k < adim; ++k) {
      const double mu = head[k];
      const double raw = head[adim + k];
      const bool in_range = raw > kLogStdMin && raw < kLogStdMax;
      const double log_std = std::clamp(raw, kLogStdMin, kLogStdMax);
      const double sigma = std::exp(log_std);
      const double eps = noise.at(b, k);
      const double u = mu + sigma * eps;
      const double t = std::tanh(u);
      actions.at(b, k) = t * scale_of(cfg, k) + shift_of(cfg, k);
      tanh_u.at(b, k) = t;
      sigmas.at(b, k) = sigma;
      gate[static_cast<std::size_t>(b) * adim + k] = in_range ? 1 : 0;
      logp[b] += -kHalfLog2Pi - log_std - 0.5 * eps * eps;
      logp[b] -= std::log(1.0 - t * t + kSquashEps);
      logp[b] -= std::log(scale_of(cfg, k));
    }
  }

  const Matrix xq = concat_cols(obs, actions);
  const nn::ForwardTrace t1 = nn::forward(agent.q1, xq);
  const nn::ForwardTrace t2 = nn::forward(agent.q2, xq);

  double loss = 0.0;
  Matrix gq1(b_sz, 1), gq2(b_sz, 1);
  const double inv_b = 1.0 / b_sz;
  for (int b = 0; b < b_sz; ++b) {
    const double v1 = t1.output().at(b, 0);
    const double v2 = t2.output().at(b, 0);
    const double qmin = std::min(v1, v2);
    loss += inv_b * (alpha * logp[b] - qmin);
    // only the minimizing critic feeds gradient back into the action
    if (v1 <= v2) gq1.at(b, 0) = -inv_b;
    else gq2.at(b, 0) = -inv_b;
  }

  const Matrix dx1 = nn::backward_input(agent.q1, t1, gq1);
  const Matrix dx2 = nn::backward_input(agent.q2, t2, gq2);

  Matrix head_grad(b_sz, 2 * adim);
  for (int b = 0; b < b_sz; ++b) {
    for (int k = 0; k < adim; ++k) {
      const double t = tanh_u.at(b, k);
      const double one_m_t2 = 1.0 - t * t;
      const double dlogp_dmu = 2.0 * t * one_m_t2 / (one_m_t2 + kSquashEps);
      const double da = dx1.at(b, cfg.obs_dim + k) + dx2.at(b, cfg.obs_dim + k);
      const double da_dmu = scale_of(cfg, k) * one_m_t2;
      head_grad.at(b, k) = alpha * inv_b * dlogp_dmu + da * da_dmu;
      if (gate[static_cast<std::size_t>(b) * adim + k]) {
        const double se = sigmas.at(b, k) * noise.at(b, k);  // du/d(log_std)
        head_grad.at(b, adim + k) = alpha * inv_b * (-1.0 + dlogp_dmu * se) + da * da_dmu * se;
      }  // clamped log-std: zero gradient
    }
  }

  ActorEval out;
  out.loss = loss;
  out.policy_grads = nn::backward(agent.policy, ptr, head_grad);
  out.log_probs = std::move(logp);
  return out;
}

double temperature_grad(const std::vector<double>& log_probs, double target_entropy) {
  if (log_probs.empty()) throw PreconditionError("temperature_grad: empty log_probs");
  double m = 0.0;
  for (double lp : log_probs) m += lp + target_entropy;
  return -m / static_cast<double>(log_probs.size());
}

UpdateReport update(SacAgent& agent, const replay::Batch& batch, Rng& rng) {
  const auto& cfg = agent.cfg;
  if (batch.size() <= 0) throw PreconditionError("sac update: empty batch");
  if (batch.obs.cols != cfg.obs_dim || batch.actions.cols != cfg.action_dim ||
      batch.next_obs.cols != cfg.obs_dim)
    throw ShapeError("sac update: batch dims mismatch");
  const int b_sz = batch.size();
  const double alpha = agent.temperature();
  UpdateReport rep;

  // 1) critics toward the entropy-regularized TD targets
  const std::vector<double> y = td_targets(agent, batch, rng);
  const Matrix xq = concat_cols(batch.obs, batch.actions);
  const double inv_b = 1.0 / b_sz;
  double mean_q = 0.0;
  double closses[2];
  nn::DenseNetwork* critics[2] = {&agent.q1, &agent.q2};
  nn::AdamState* copts[2] = {&agent.q1_opt, &agent.q2_opt};
  for (int c = 0; c < 2; ++c) {
    const nn::ForwardTrace tr = nn::forward(*critics[c], xq);
    Matrix g(b_sz, 1);
    double loss = 0.0;
    for (int b = 0; b < b_sz; ++b) {
      const double diff = tr.output().at(b, 0) - y[b];
      loss += inv_b * diff * diff;
      g.at(b, 0) = 2.0 * inv_b * diff;
      if (c == 0) mean_q += inv_b * tr.output().at(b, 0);
    }
    closses[c] = loss;
    nn::ParamGrads pg = nn::backward(*critics[c], tr, g);
    nn::adam_step(*critics[c], pg, *copts[c]);
  }
  rep.critic_loss = 0.5 * (closses[0] + closses[1]);
  rep.mean_q = mean_q;

  // 2) actor on fresh exploration noise
  Matrix noise(b_sz, cfg.action_dim);
  for (int b = 0; b < b_sz; ++b)
    for (int k = 0; k < cfg.action_dim; ++k) noise.at(b, k) = rng.normal();
  ActorEval ae = actor_loss_and_grads(agent, batch.obs, noise, alpha);
  nn::adam_step(agent.policy, ae.policy_grads, agent.policy_opt);
  rep.actor_loss = ae.loss;

  // 3) temperature on the actor step's log-probs
  const double tgrad = temperature_grad(ae.log_probs, agent.target_entropy);
  rep.temperature_loss = agent.log_temperature * tgrad;  // -log_alpha * mean(logp + H̄)
  std::vector<double> theta{agent.log_temperature};
  const std::vector<double> tg{tgrad};
  nn::adam_step_vec(theta, tg, agent.temperature_opt);
  agent.log_temperature = theta[0];
  rep.temperature = agent.temperature();

  // 4) Polyak target tracking (the only way targets ever move)
  nn::polyak_update(agent.q1_target, agent.q1, cfg.tau);
  nn::polyak_update(agent.q2_target, agent.q2, cfg.tau);

  ++agent.updates_done;
  return rep;
}

}  // namespace altlab::sac
