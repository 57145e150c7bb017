#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"
#include "sha1.hpp"

namespace altlab::config {

using nlohmann::json;

namespace {

void expect_keys(const json& obj, const std::string& ctx, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(ctx + ": expected an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ConfigError(ctx + ": unknown key \"" + key + "\"");
}

const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

std::string get_string(const json& j, const std::string& ctx) {
  if (!j.is_string()) throw ConfigError(ctx + ": expected a string");
  return j.get<std::string>();
}

std::int64_t get_int(const json& j, const std::string& ctx) {
  if (!j.is_number_integer()) throw ConfigError(ctx + ": expected an integer");
  return j.get<std::int64_t>();
}

double get_number(const json& j, const std::string& ctx) {
  if (!j.is_number()) throw ConfigError(ctx + ": expected a number");
  return j.get<double>();
}

bool get_bool(const json& j, const std::string& ctx) {
  if (!j.is_boolean()) throw ConfigError(ctx + ": expected a boolean");
  return j.get<bool>();
}

std::vector<int> get_int_list(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.empty()) throw ConfigError(ctx + ": expected a non-empty array");
  std::vector<int> out;
  for (const auto& e : j) out.push_back(static_cast<int>(get_int(e, ctx + " entry")));
  return out;
}

envs::ParamMap get_param_map(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + ": expected an object of numbers");
  envs::ParamMap out;
  for (const auto& [key, value] : j.items()) out[key] = get_number(value, ctx + "." + key);
  return out;
}

EnvConfig parse_env(const json& j) {
  expect_keys(j, "env", {"name", "overrides", "schedule"});
  EnvConfig e;
  const json* name = find(j, "name");
  if (!name) throw ConfigError("env.name is required");
  e.name = get_string(*name, "env.name");
  if (const json* ov = find(j, "overrides")) e.overrides = get_param_map(*ov, "env.overrides");
  if (const json* sched = find(j, "schedule")) {
    if (!sched->is_array()) throw ConfigError("env.schedule: expected an array");
    for (const auto& entry : *sched) {
      expect_keys(entry, "env.schedule entry", {"step", "overrides"});
      const json* step = find(entry, "step");
      const json* ov = find(entry, "overrides");
      if (!step || !ov) throw ConfigError("env.schedule entry needs step and overrides");
      envs::ScheduleEntry se;
      se.step = get_int(*step, "env.schedule.step");
      se.overrides = get_param_map(*ov, "env.schedule.overrides");
      e.schedule.push_back(std::move(se));
    }
  }
  return e;
}

SacSection parse_sac(const json& j) {
  expect_keys(j, "sac",
              {"hidden", "batch_size", "warmup_steps", "learning_rate", "gamma", "tau",
               "init_temperature", "beta"});
  SacSection s;
  if (const json* v = find(j, "hidden")) s.hidden = get_int_list(*v, "sac.hidden");
  if (const json* v = find(j, "batch_size")) s.batch_size = static_cast<int>(get_int(*v, "sac.batch_size"));
  if (const json* v = find(j, "warmup_steps")) s.warmup_steps = get_int(*v, "sac.warmup_steps");
  if (const json* v = find(j, "learning_rate")) s.learning_rate = get_number(*v, "sac.learning_rate");
  if (const json* v = find(j, "gamma")) s.gamma = get_number(*v, "sac.gamma");
  if (const json* v = find(j, "tau")) s.tau = get_number(*v, "sac.tau");
  if (const json* v = find(j, "init_temperature")) s.init_temperature = get_number(*v, "sac.init_temperature");
  if (const json* v = find(j, "beta")) s.beta = get_number(*v, "sac.beta");
  return s;
}

PpoSection parse_ppo(const json& j) {
  expect_keys(j, "ppo",
              {"hidden", "rollout_length", "reset_period", "learning_rate", "update_epochs",
               "num_minibatches", "gamma", "gae_lambda", "clip_coef", "vf_coef", "ent_coef",
               "max_grad_norm"});
  PpoSection p;
  if (const json* v = find(j, "hidden")) p.hidden = get_int_list(*v, "ppo.hidden");
  if (const json* v = find(j, "rollout_length")) p.rollout_length = static_cast<int>(get_int(*v, "ppo.rollout_length"));
  if (const json* v = find(j, "reset_period")) p.reset_period = get_int(*v, "ppo.reset_period");
  if (const json* v = find(j, "learning_rate")) p.learning_rate = get_number(*v, "ppo.learning_rate");
  if (const json* v = find(j, "update_epochs")) p.update_epochs = static_cast<int>(get_int(*v, "ppo.update_epochs"));
  if (const json* v = find(j, "num_minibatches")) p.num_minibatches = static_cast<int>(get_int(*v, "ppo.num_minibatches"));
  if (const json* v = find(j, "gamma")) p.gamma = get_number(*v, "ppo.gamma");
  if (const json* v = find(j, "gae_lambda")) p.gae_lambda = get_number(*v, "ppo.gae_lambda");
  if (const json* v = find(j, "clip_coef")) p.clip_coef = get_number(*v, "ppo.clip_coef");
  if (const json* v = find(j, "vf_coef")) p.vf_coef = get_number(*v, "ppo.vf_coef");
  if (const json* v = find(j, "ent_coef")) p.ent_coef = get_number(*v, "ppo.ent_coef");
  if (const json* v = find(j, "max_grad_norm")) p.max_grad_norm = get_number(*v, "ppo.max_grad_norm");
  return p;
}

}  // namespace

int ExperimentConfig::networks_for(strategies::Kind k) const {
  using strategies::Kind;
  if (k == Kind::Baseline || k == Kind::StandardReset) return 1;  // forced
  return num_networks == 0 ? 2 : num_networks;
}

std::vector<std::int64_t> ExperimentConfig::effective_budgets() const {
  if (!budget_steps.empty()) return budget_steps;
  if (total_env_steps <= 0) return {};
  return {total_env_steps / 4, total_env_steps / 2, 3 * total_env_steps / 4, total_env_steps};
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  expect_keys(j, "config",
              {"name", "env", "algorithm", "strategy", "strategies", "replay_ratio", "replay_ratios",
               "num_networks", "update_budget", "total_env_steps", "halt_resets_after",
               "buffer_capacity", "buffer_shrink", "parameter_matched", "seeds", "eval_interval",
               "eval_episodes", "budget_steps", "output_dir", "sac", "ppo"});

  ExperimentConfig c;
  const json* env = find(j, "env");
  if (!env) throw ConfigError("env is required");
  c.env = parse_env(*env);

  const json* algo = find(j, "algorithm");
  if (!algo) throw ConfigError("algorithm is required");
  c.algorithm = get_string(*algo, "algorithm");
  if (c.algorithm != "sac" && c.algorithm != "ppo")
    throw ConfigError("algorithm must be \"sac\" or \"ppo\"");

  const json* strat = find(j, "strategy");
  const json* strats = find(j, "strategies");
  if (!!strat == !!strats) throw ConfigError("give exactly one of strategy / strategies");
  if (strat) {
    c.strategies_axis = {strategies::kind_from_string(get_string(*strat, "strategy"))};
  } else {
    if (!strats->is_array() || strats->empty())
      throw ConfigError("strategies: expected a non-empty array");
    for (const auto& s : *strats)
      c.strategies_axis.push_back(strategies::kind_from_string(get_string(s, "strategies entry")));
    std::set<strategies::Kind> uniq(c.strategies_axis.begin(), c.strategies_axis.end());
    if (uniq.size() != c.strategies_axis.size()) throw ConfigError("strategies: duplicate entries");
  }

  const json* rr = find(j, "replay_ratio");
  const json* rrs = find(j, "replay_ratios");
  if (rr && rrs) throw ConfigError("give at most one of replay_ratio / replay_ratios");
  if (c.algorithm == "ppo" && (rr || rrs))
    throw ConfigError("replay ratios apply to sac only");
  if (rr) c.replay_ratios_axis = {static_cast<int>(get_int(*rr, "replay_ratio"))};
  if (rrs) {
    c.replay_ratios_axis = get_int_list(*rrs, "replay_ratios");
    std::set<int> uniq(c.replay_ratios_axis.begin(), c.replay_ratios_axis.end());
    if (uniq.size() != c.replay_ratios_axis.size()) throw ConfigError("replay_ratios: duplicate entries");
  }

  if (const json* v = find(j, "name")) c.name = get_string(*v, "name");
  if (const json* v = find(j, "num_networks")) c.num_networks = static_cast<int>(get_int(*v, "num_networks"));
  if (const json* v = find(j, "update_budget")) {
    if (c.algorithm == "ppo") throw ConfigError("update_budget applies to sac only (ppo uses ppo.reset_period)");
    c.update_budget = get_int(*v, "update_budget");
  }
  const json* total = find(j, "total_env_steps");
  if (!total) throw ConfigError("total_env_steps is required");
  c.total_env_steps = get_int(*total, "total_env_steps");
  if (const json* v = find(j, "halt_resets_after")) c.halt_resets_after = get_int(*v, "halt_resets_after");
  if (const json* v = find(j, "buffer_capacity")) {
    if (c.algorithm == "ppo") throw ConfigError("buffer_capacity applies to sac only");
    c.buffer_capacity = get_int(*v, "buffer_capacity");
  }
  if (const json* v = find(j, "buffer_shrink")) {
    if (c.algorithm == "ppo") throw ConfigError("buffer_shrink applies to sac only");
    expect_keys(*v, "buffer_shrink", {"at_step", "capacity"});
    const json* at = find(*v, "at_step");
    const json* cap = find(*v, "capacity");
    if (!at || !cap) throw ConfigError("buffer_shrink needs at_step and capacity");
    c.buffer_shrink = BufferShrink{get_int(*at, "buffer_shrink.at_step"), get_int(*cap, "buffer_shrink.capacity")};
  }
  if (const json* v = find(j, "parameter_matched")) c.parameter_matched = get_bool(*v, "parameter_matched");

  const json* seeds = find(j, "seeds");
  if (!seeds) throw ConfigError("seeds is required");
  if (!seeds->is_array() || seeds->empty()) throw ConfigError("seeds: expected a non-empty array");
  for (const auto& s : *seeds) {
    const std::int64_t v = get_int(s, "seeds entry");
    if (v < 0) throw ConfigError("seeds must be non-negative");
    c.seeds.push_back(static_cast<std::uint64_t>(v));
  }
  std::set<std::uint64_t> uniq_seeds(c.seeds.begin(), c.seeds.end());
  if (uniq_seeds.size() != c.seeds.size()) throw ConfigError("seeds: duplicate entries");

  if (const json* v = find(j, "eval_interval")) c.eval_interval = get_int(*v, "eval_interval");
  if (const json* v = find(j, "eval_episodes")) c.eval_episodes = static_cast<int>(get_int(*v, "eval_episodes"));
  if (const json* v = find(j, "budget_steps")) {
    if (!v->is_array() || v->empty()) throw ConfigError("budget_steps: expected a non-empty array");
    for (const auto& b : *v) c.budget_steps.push_back(get_int(b, "budget_steps entry"));
  }

  const json* out = find(j, "output_dir");
  if (!out) throw ConfigError("output_dir is required");
  c.output_dir = get_string(*out, "output_dir");
  if (c.output_dir.empty()) throw ConfigError("output_dir must not be empty");

  if (const json* v = find(j, "sac")) {
    if (c.algorithm != "sac") throw ConfigError("sac section given but algorithm is not sac");
    c.sac = parse_sac(*v);
  }
  if (const json* v = find(j, "ppo")) {
    if (c.algorithm != "ppo") throw ConfigError("ppo section given but algorithm is not ppo");
    c.ppo = parse_ppo(*v);
  }
  if (c.name.empty())
    c.name = c.algorithm + "_" + (c.is_sweep() ? std::string("sweep") : strategies::to_string(c.strategy()));

  validate(c);
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate(const ExperimentConfig& c) {
  using strategies::Kind;
  if (c.total_env_steps < 0) throw ConfigError("total_env_steps must be >= 0");
  if (c.eval_interval < 1) throw ConfigError("eval_interval must be >= 1");
  if (c.eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (c.halt_resets_after && *c.halt_resets_after < 0)
    throw ConfigError("halt_resets_after must be >= 0");
  for (std::int64_t b : c.budget_steps)
    if (b < 1 || b > c.total_env_steps)
      throw ConfigError("budget_steps entries must lie in [1, total_env_steps]");

  // the environment must be constructible, including every schedule entry
  if (c.env.schedule.empty())
    (void)envs::make_env(c.env.name, c.env.overrides);
  else
    (void)envs::make_nonstationary(c.env.name, c.env.overrides, c.env.schedule);

  if (c.num_networks < 0) throw ConfigError("num_networks must be positive");
  for (Kind k : c.strategies_axis) {
    const int n = c.networks_for(k);
    if ((k == Kind::Rde || k == Kind::AltNet) && n < 2)
      throw ConfigError(strategies::to_string(k) + " needs num_networks >= 2");
  }

  if (c.algorithm == "sac") {
    const SacSection& s = c.sac;
    if (s.hidden.empty()) throw ConfigError("sac.hidden must not be empty");
    for (int h : s.hidden)
      if (h < 1) throw ConfigError("sac.hidden widths must be positive");
    if (s.batch_size < 1) throw ConfigError("sac.batch_size must be >= 1");
    if (s.warmup_steps < 0) throw ConfigError("sac.warmup_steps must be >= 0");
    if (!(s.learning_rate > 0)) throw ConfigError("sac.learning_rate must be positive");
    if (s.gamma < 0 || s.gamma > 1) throw ConfigError("sac.gamma must lie in [0, 1]");
    if (!(s.tau > 0) || s.tau > 1) throw ConfigError("sac.tau must lie in (0, 1]");
    if (!(s.init_temperature > 0)) throw ConfigError("sac.init_temperature must be positive");
    if (s.beta < 0) throw ConfigError("sac.beta must be >= 0");
    if (c.update_budget < 1) throw ConfigError("update_budget must be >= 1");
    if (c.buffer_capacity < s.batch_size)
      throw ConfigError("buffer_capacity must be >= sac.batch_size");
    if (c.buffer_shrink) {
      if (c.buffer_shrink->at_step < 1) throw ConfigError("buffer_shrink.at_step must be >= 1");
      if (c.buffer_shrink->capacity < s.batch_size)
        throw ConfigError("buffer_shrink.capacity must be >= sac.batch_size");
    }
    for (int rr : c.replay_ratios_axis) {
      if (rr < 1) throw ConfigError("replay_ratio must be >= 1");
      for (Kind k : c.strategies_axis)
        if (k != Kind::Baseline)
          (void)strategies::reset_freq_env_steps(static_cast<std::uint64_t>(c.update_budget), rr,
                                                 c.networks_for(k));
    }
  } else {
    const PpoSection& p = c.ppo;
    if (c.parameter_matched) throw ConfigError("parameter_matched applies to sac only");
    if (c.buffer_shrink) throw ConfigError("buffer_shrink applies to sac only");
    if (p.hidden.empty()) throw ConfigError("ppo.hidden must not be empty");
    for (int h : p.hidden)
      if (h < 1) throw ConfigError("ppo.hidden widths must be positive");
    if (p.rollout_length < 1) throw ConfigError("ppo.rollout_length must be >= 1");
    if (p.update_epochs < 1 || p.num_minibatches < 1)
      throw ConfigError("ppo.update_epochs and ppo.num_minibatches must be >= 1");
    if (p.rollout_length % p.num_minibatches != 0)
      throw ConfigError("ppo.rollout_length must divide into ppo.num_minibatches");
    if (c.total_env_steps % p.rollout_length != 0)
      throw ConfigError("total_env_steps must be a multiple of ppo.rollout_length");
    if (!(p.learning_rate > 0)) throw ConfigError("ppo.learning_rate must be positive");
    if (p.gamma < 0 || p.gamma > 1 || p.gae_lambda < 0 || p.gae_lambda > 1)
      throw ConfigError("ppo.gamma and ppo.gae_lambda must lie in [0, 1]");
    if (!(p.clip_coef > 0) || p.clip_coef >= 1) throw ConfigError("ppo.clip_coef must lie in (0, 1)");
    if (p.vf_coef < 0 || p.ent_coef < 0) throw ConfigError("ppo loss coefficients must be >= 0");
    if (!(p.max_grad_norm > 0)) throw ConfigError("ppo.max_grad_norm must be positive");
    for (Kind k : c.strategies_axis) {
      if (k == Kind::Rde) throw ConfigError("rde requires algorithm sac");
      if (k != Kind::Baseline && p.reset_period < 1)
        throw ConfigError("ppo.reset_period must be >= 1 for reset strategies");
    }
  }

  if (c.parameter_matched) {
    // must be solvable for every cell; throws with the best width otherwise
    const auto e = envs::make_env(c.env.name, c.env.overrides);
    for (Kind k : c.strategies_axis)
      (void)strategies::matched_hidden_width(e->spec().observation_dim, e->spec().action_dim,
                                             c.sac.hidden, c.networks_for(k));
  }
}

namespace {

json env_to_json(const EnvConfig& e) {
  json j;
  j["name"] = e.name;
  j["overrides"] = json::object();
  for (const auto& [k, v] : e.overrides) j["overrides"][k] = v;
  j["schedule"] = json::array();
  for (const auto& s : e.schedule) {
    json entry;
    entry["step"] = s.step;
    entry["overrides"] = json::object();
    for (const auto& [k, v] : s.overrides) entry["overrides"][k] = v;
    j["schedule"].push_back(entry);
  }
  return j;
}

}  // namespace

std::string resolved_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["env"] = env_to_json(c.env);
  j["algorithm"] = c.algorithm;
  j["strategies"] = json::array();
  for (const auto k : c.strategies_axis) j["strategies"].push_back(strategies::to_string(k));
  j["num_networks"] = c.is_sweep() ? c.num_networks : c.networks_for(c.strategy());
  j["total_env_steps"] = c.total_env_steps;
  if (c.halt_resets_after) j["halt_resets_after"] = *c.halt_resets_after;
  j["seeds"] = c.seeds;
  j["eval_interval"] = c.eval_interval;
  j["eval_episodes"] = c.eval_episodes;
  j["budget_steps"] = c.effective_budgets();
  j["output_dir"] = c.output_dir;
  if (c.algorithm == "sac") {
    j["replay_ratios"] = c.replay_ratios_axis;
    j["update_budget"] = c.update_budget;
    j["buffer_capacity"] = c.buffer_capacity;
    if (c.buffer_shrink) {
      j["buffer_shrink"]["at_step"] = c.buffer_shrink->at_step;
      j["buffer_shrink"]["capacity"] = c.buffer_shrink->capacity;
    }
    j["parameter_matched"] = c.parameter_matched;
    json s;
    s["hidden"] = c.sac.hidden;
    s["batch_size"] = c.sac.batch_size;
    s["warmup_steps"] = c.sac.warmup_steps;
    s["learning_rate"] = c.sac.learning_rate;
    s["gamma"] = c.sac.gamma;
    s["tau"] = c.sac.tau;
    s["init_temperature"] = c.sac.init_temperature;
    s["beta"] = c.sac.beta;
    j["sac"] = s;
  } else {
    json p;
    p["hidden"] = c.ppo.hidden;
    p["rollout_length"] = c.ppo.rollout_length;
    p["reset_period"] = c.ppo.reset_period;
    p["learning_rate"] = c.ppo.learning_rate;
    p["update_epochs"] = c.ppo.update_epochs;
    p["num_minibatches"] = c.ppo.num_minibatches;
    p["gamma"] = c.ppo.gamma;
    p["gae_lambda"] = c.ppo.gae_lambda;
    p["clip_coef"] = c.ppo.clip_coef;
    p["vf_coef"] = c.ppo.vf_coef;
    p["ent_coef"] = c.ppo.ent_coef;
    p["max_grad_norm"] = c.ppo.max_grad_norm;
    j["ppo"] = p;
  }
  return j.dump(2);
}

std::string config_hash(const ExperimentConfig& c) {
  const std::string compact = json::parse(resolved_json(c)).dump();
  return sha1_hex(compact);
}

ExperimentConfig sweep_cell(const ExperimentConfig& base, strategies::Kind strategy, int replay_ratio) {
  ExperimentConfig cell = base;
  cell.strategies_axis = {strategy};
  cell.replay_ratios_axis = {replay_ratio};
  cell.num_networks = base.networks_for(strategy);
  std::string tag = strategies::to_string(strategy);
  if (base.algorithm == "sac") tag += "_rr" + std::to_string(replay_ratio);
  cell.name = base.algorithm + "_" + tag;
  cell.output_dir = base.output_dir + "/" + tag;
  validate(cell);
  return cell;
}

}  // namespace altlab::config
