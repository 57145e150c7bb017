#include "runner.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"
#include "plasticity.hpp"
#include "ppo.hpp"
#include "replay.hpp"
#include "rng.hpp"
#include "sac.hpp"
#include "strategies.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian float64; add byte swapping for this platform");

namespace altlab::runner {

namespace fs = std::filesystem;
using nlohmann::json;
using strategies::Kind;

namespace {

constexpr int kProbeSize = 256;
constexpr double kDormantTau = 0.025;
constexpr int kDipPreWindowEvals = 5;

std::string fmt(double v) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string fmt(std::int64_t v) {
  std::array<char, 24> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_double(const std::string& s, const std::string& ctx) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw IoError(ctx + ": bad number \"" + s + "\"");
  return v;
}

std::int64_t parse_int(const std::string& s, const std::string& ctx) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw IoError(ctx + ": bad integer \"" + s + "\"");
  return v;
}

}  // namespace

const char* const kCsvHeader = "env_step,episodic_return,avg_weight_norm,dormant_fraction,stable_rank,agent_tag,event";

std::string csv_line(const CsvRow& row) {
  std::string line = fmt(row.env_step);
  line += ',';
  if (row.episodic_return) line += fmt(*row.episodic_return);
  line += ',';
  line += fmt(row.avg_weight_norm);
  line += ',';
  line += fmt(row.dormant_fraction);
  line += ',';
  line += fmt(row.stable_rank);
  line += ',';
  line += row.agent_tag;
  line += ',';
  line += row.event;
  return line;
}

std::vector<CsvRow> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read csv: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty csv: " + path);
  if (line != kCsvHeader) throw IoError("unexpected csv header in " + path);
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        cells.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (cells.size() != 7) throw IoError("malformed csv row in " + path + ": " + line);
    CsvRow r;
    r.env_step = parse_int(cells[0], path);
    if (!cells[1].empty()) r.episodic_return = parse_double(cells[1], path);
    r.avg_weight_norm = parse_double(cells[2], path);
    r.dormant_fraction = parse_double(cells[3], path);
    r.stable_rank = parse_double(cells[4], path);
    r.agent_tag = cells[5];
    r.event = cells[6];
    rows.push_back(std::move(r));
  }
  return rows;
}

double evaluate_policy(const envs::Environment& train_env, const Policy& policy, int episodes,
                       std::uint64_t eval_seed_base, std::int64_t eval_index) {
  if (episodes < 1) throw PreconditionError("evaluate_policy: episodes must be >= 1");
  const auto env = envs::make_env(train_env.name(), train_env.current_params());
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t ep_seed =
        split_seed(eval_seed_base, static_cast<std::uint64_t>(eval_index) * episodes + e);
    std::vector<double> obs = env->reset(ep_seed);
    double ret = 0.0;
    while (true) {
      const envs::StepResult sr = env->step(policy(obs));
      ret += sr.reward;
      obs = sr.observation;
      if (sr.terminal || sr.truncated) break;
    }
    total += ret;
  }
  return total / episodes;
}

std::int64_t cell_period(const config::ExperimentConfig& cfg) {
  const Kind k = cfg.strategy();
  if (k == Kind::Baseline) return 0;
  if (cfg.algorithm == "ppo") return cfg.ppo.reset_period;
  return strategies::reset_freq_env_steps(static_cast<std::uint64_t>(cfg.update_budget),
                                          cfg.replay_ratio(), cfg.networks_for(k));
}

SeedSummary summarize_rows(const std::vector<CsvRow>& rows, std::uint64_t seed,
                           const config::ExperimentConfig& cfg) {
  SeedSummary s;
  s.seed = seed;

  std::vector<double> eval_steps, eval_returns;
  for (const CsvRow& r : rows) {
    if (r.event.empty() && r.episodic_return) {
      eval_steps.push_back(static_cast<double>(r.env_step));
      eval_returns.push_back(*r.episodic_return);
    }
    if (r.event == "reset" || r.event == "swap") ++s.reset_events;
  }
  if (eval_steps.empty()) return s;  // nothing measurable

  if (eval_steps.size() >= 2) s.normalized_auc = metrics::normalized_auc(eval_steps, eval_returns);

  for (std::int64_t b : cfg.effective_budgets()) {
    const double bd = static_cast<double>(b);
    if (bd >= eval_steps.front() && bd <= eval_steps.back())
      s.budget_returns.push_back(metrics::returns_at_budgets(eval_steps, eval_returns, {bd}).front());
    else
      s.budget_returns.push_back(std::nullopt);
  }

  double quarter_sum = 0.0;
  int quarter_n = 0;
  for (std::size_t i = 0; i < eval_steps.size(); ++i) {
    if (4.0 * eval_steps[i] > 3.0 * static_cast<double>(cfg.total_env_steps)) {
      quarter_sum += eval_returns[i];
      ++quarter_n;
    }
  }
  if (quarter_n > 0) s.final_quarter_mean = quarter_sum / quarter_n;

  const std::int64_t period = cell_period(cfg);
  double worst = 0.0;
  if (period > 0) {
    const std::int64_t window = std::max<std::int64_t>(1, period / 10);
    for (const CsvRow& r : rows) {
      if (r.event != "reset" && r.event != "swap") continue;
      double pre_sum = 0.0;
      int pre_n = 0;
      for (std::size_t i = eval_steps.size(); i-- > 0;) {
        if (eval_steps[i] < static_cast<double>(r.env_step)) {
          pre_sum += eval_returns[i];
          if (++pre_n == kDipPreWindowEvals) break;
        }
      }
      if (pre_n == 0) continue;
      const double pre = pre_sum / pre_n;
      double lowest = 0.0;
      bool have_post = false;
      for (std::size_t i = 0; i < eval_steps.size(); ++i) {
        if (eval_steps[i] >= static_cast<double>(r.env_step) &&
            eval_steps[i] <= static_cast<double>(r.env_step + window)) {
          lowest = have_post ? std::min(lowest, eval_returns[i]) : eval_returns[i];
          have_post = true;
        }
      }
      if (!have_post) continue;
      worst = std::max(worst, (pre - lowest) / std::max(pre, 1.0));
    }
  }
  s.worst_post_reset_dip = worst;
  return s;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kCheckpointFormat = "altlab-checkpoint-v1";

Checkpoint sac_checkpoint(const sac::SacAgent& a) {
  Checkpoint cp;
  cp.algorithm = "sac";
  const auto add_net = [&](const char* name, const nn::DenseNetwork& n) {
    cp.tensors.push_back({name, n.layer_sizes, nn::flatten_params(n)});
  };
  add_net("policy", a.policy);
  add_net("q1", a.q1);
  add_net("q2", a.q2);
  add_net("q1_target", a.q1_target);
  add_net("q2_target", a.q2_target);
  cp.tensors.push_back({"log_temperature", {}, {a.log_temperature}});
  return cp;
}

Checkpoint ppo_checkpoint(const ppo::PpoAgent& a) {
  Checkpoint cp;
  cp.algorithm = "ppo";
  cp.tensors.push_back({"policy", a.policy.layer_sizes, nn::flatten_params(a.policy)});
  cp.tensors.push_back({"log_std", {}, a.log_std});
  cp.tensors.push_back({"value", a.value.layer_sizes, nn::flatten_params(a.value)});
  return cp;
}

}  // namespace

void write_checkpoint(const std::string& json_path, const Checkpoint& cp) {
  const fs::path jpath(json_path);
  const fs::path bpath = fs::path(jpath).replace_extension(".bin");

  json header;
  header["format"] = kCheckpointFormat;
  header["algorithm"] = cp.algorithm;
  header["data_file"] = bpath.filename().string();
  header["tensors"] = json::array();
  std::int64_t offset = 0;
  for (const CheckpointTensor& t : cp.tensors) {
    json tj;
    tj["name"] = t.name;
    tj["layer_sizes"] = t.layer_sizes;
    tj["offset"] = offset;
    tj["count"] = static_cast<std::int64_t>(t.values.size());
    header["tensors"].push_back(tj);
    offset += static_cast<std::int64_t>(t.values.size());
  }

  std::ofstream bin(bpath, std::ios::binary);
  if (!bin) throw IoError("cannot write checkpoint data: " + bpath.string());
  for (const CheckpointTensor& t : cp.tensors)
    bin.write(reinterpret_cast<const char*>(t.values.data()),
              static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  if (!bin) throw IoError("short write to " + bpath.string());
  bin.close();

  std::ofstream out(jpath, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint header: " + json_path);
  out << header.dump(2) << '\n';
}

Checkpoint read_checkpoint(const std::string& json_path) {
  std::ifstream in(json_path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint header: " + json_path);
  json header;
  try {
    in >> header;
  } catch (const json::exception& e) {
    throw IoError("bad checkpoint header " + json_path + ": " + e.what());
  }
  if (header.value("format", "") != kCheckpointFormat)
    throw IoError("unknown checkpoint format in " + json_path);

  Checkpoint cp;
  cp.algorithm = header.at("algorithm").get<std::string>();
  const fs::path bpath = fs::path(json_path).parent_path() / header.at("data_file").get<std::string>();
  std::ifstream bin(bpath, std::ios::binary);
  if (!bin) throw IoError("cannot read checkpoint data: " + bpath.string());
  for (const json& tj : header.at("tensors")) {
    CheckpointTensor t;
    t.name = tj.at("name").get<std::string>();
    t.layer_sizes = tj.at("layer_sizes").get<std::vector<int>>();
    const std::int64_t offset = tj.at("offset").get<std::int64_t>();
    const std::int64_t count = tj.at("count").get<std::int64_t>();
    if (offset < 0 || count < 0) throw IoError("bad tensor extent in " + json_path);
    t.values.resize(static_cast<std::size_t>(count));
    bin.seekg(offset * static_cast<std::int64_t>(sizeof(double)));
    bin.read(reinterpret_cast<char*>(t.values.data()),
             static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    if (!bin) throw IoError("checkpoint data truncated: " + bpath.string());
    cp.tensors.push_back(std::move(t));
  }
  return cp;
}

// ---------------------------------------------------------------------------
// Per-seed training loops

namespace {

std::unique_ptr<envs::Environment> build_env(const config::ExperimentConfig& cfg) {
  if (cfg.env.schedule.empty()) return envs::make_env(cfg.env.name, cfg.env.overrides);
  return envs::make_nonstationary(cfg.env.name, cfg.env.overrides, cfg.env.schedule);
}

// Probe used before any experience exists: initial observations of a fresh
// reset stream.
Matrix reset_probe(const envs::Environment& train_env, std::uint64_t probe_seed) {
  const auto env = envs::make_env(train_env.name(), train_env.current_params());
  Matrix probe(kProbeSize, train_env.spec().observation_dim);
  for (int i = 0; i < kProbeSize; ++i) {
    const std::vector<double> obs = env->reset(split_seed(probe_seed, i));
    std::copy(obs.begin(), obs.end(), probe.row(i));
  }
  return probe;
}

Matrix tail_rows(const Matrix& m, int k) {
  const int n = std::min(m.rows, k);
  Matrix out(n, m.cols);
  for (int i = 0; i < n; ++i)
    std::copy(m.row(m.rows - n + i), m.row(m.rows - n + i) + m.cols, out.row(i));
  return out;
}

struct MetricTriple {
  double weight_norm = 0.0;
  double dormant = 0.0;
  double srank = 0.0;
};

MetricTriple policy_metrics(const nn::DenseNetwork& policy, const Matrix& probe) {
  MetricTriple m;
  m.weight_norm = metrics::avg_weight_norm(policy);
  m.dormant = metrics::dormant_fraction(policy, probe, kDormantTau);
  m.srank = metrics::stable_rank_per_layer(policy, probe).back();
  return m;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot write csv: " + path);
    out_ << kCsvHeader << '\n';
  }
  void emit(CsvRow row) {
    out_ << csv_line(row) << '\n';
    rows_.push_back(std::move(row));
  }
  const std::vector<CsvRow>& rows() const { return rows_; }

 private:
  std::ofstream out_;
  std::vector<CsvRow> rows_;
};

std::string agent_tag(int index) { return "agent" + std::to_string(index); }

// Captures the plasticity metrics of the agent a reset/swap is about to act
// on, measured on the current probe.
struct PreEventProbe final : strategies::TickObserver {
  std::function<MetricTriple(int)> measure;
  MetricTriple pre;
  void before_event(const strategies::TickEvent& ev) override { pre = measure(ev.agent_index); }
};

std::vector<CsvRow> run_seed_sac(const config::ExperimentConfig& cfg, std::uint64_t seed,
                                 const fs::path& seed_dir) {
  const auto env = build_env(cfg);
  const envs::EnvSpec spec = env->spec();
  const Kind kind = cfg.strategy();
  const int n_agents = cfg.networks_for(kind);

  std::vector<int> hidden = cfg.sac.hidden;
  if (cfg.parameter_matched && n_agents > 1) {
    const int w = strategies::matched_hidden_width(spec.observation_dim, spec.action_dim,
                                                   cfg.sac.hidden, n_agents);
    hidden.assign(hidden.size(), w);
  }

  sac::SacConfig sc;
  sc.obs_dim = spec.observation_dim;
  sc.action_dim = spec.action_dim;
  sc.hidden = hidden;
  sc.action_low = spec.action_low;
  sc.action_high = spec.action_high;
  sc.learning_rate = cfg.sac.learning_rate;
  sc.gamma = cfg.sac.gamma;
  sc.tau = cfg.sac.tau;
  sc.initial_temperature = cfg.sac.init_temperature;

  const std::uint64_t agent_base = split_seed(seed, kAgentInit);
  std::vector<sac::SacAgent> agents;
  agents.reserve(n_agents);
  for (int i = 0; i < n_agents; ++i) agents.push_back(sac::make_agent(sc, split_seed(agent_base, i)));

  strategies::ScheduleConfig sched;
  sched.update_budget = static_cast<std::uint64_t>(cfg.update_budget);
  sched.replay_ratio = cfg.replay_ratio();
  sched.num_networks = n_agents;
  sched.halt_resets_after = cfg.halt_resets_after;
  strategies::Controller ctrl(kind, std::move(agents), sched, split_seed(seed, kResets), cfg.sac.beta);

  replay::ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity), spec.observation_dim,
                              spec.action_dim);
  strategies::LoopConfig lc;
  lc.batch_size = cfg.sac.batch_size;
  lc.warmup_steps = cfg.sac.warmup_steps;
  strategies::LoopState ls;
  ls.episode_seed_base = split_seed(seed, kEnvEpisodes);
  strategies::start_episode_stream(*env, ls);

  Rng action_rng(split_seed(seed, kAction));
  Rng update_rng(split_seed(seed, kUpdate));
  Rng sampling_rng(split_seed(seed, kBufferSampling));
  strategies::StepRngs rngs{&action_rng, &update_rng, &sampling_rng};

  CsvWriter csv((seed_dir / "metrics.csv").string());
  const Matrix initial_probe = reset_probe(*env, split_seed(seed, kProbe));
  const auto probe = [&]() -> Matrix {
    return buffer.size() > 0 ? buffer.recent_observations(kProbeSize) : initial_probe;
  };
  // metrics describe the acting policy: the active agent, or for RDE the
  // agent whose critic currently votes
  const auto metric_index = [&]() {
    return ctrl.kind() == Kind::Rde ? ctrl.oldest_agent() : ctrl.active_index();
  };

  std::int64_t eval_count = 0;
  const auto do_eval = [&](std::int64_t at_step) {
    const double ret = evaluate_policy(
        *env, [&](const std::vector<double>& o) { return ctrl.act_deterministic(o); },
        cfg.eval_episodes, split_seed(seed, kEval), eval_count++);
    const int mi = metric_index();
    const MetricTriple m = policy_metrics(ctrl.agent(mi).policy, probe());
    csv.emit({at_step, ret, m.weight_norm, m.dormant, m.srank, agent_tag(mi), ""});
  };
  do_eval(0);

  PreEventProbe observer;
  observer.measure = [&](int idx) { return policy_metrics(ctrl.agent(idx).policy, probe()); };

  for (std::int64_t t = 1; t <= cfg.total_env_steps; ++t) {
    const strategies::StepLog log = strategies::run_off_policy_step(ctrl, *env, buffer, lc, ls, rngs, &observer);
    if (log.event) {
      const strategies::TickEvent& ev = *log.event;
      csv.emit({ev.env_step, std::nullopt, observer.pre.weight_norm, observer.pre.dormant,
                observer.pre.srank, agent_tag(ev.agent_index),
                ev.type == strategies::TickEvent::Type::Swap ? "swap" : "reset"});
    }
    if (cfg.buffer_shrink && t == cfg.buffer_shrink->at_step) {
      buffer.set_capacity(static_cast<std::size_t>(cfg.buffer_shrink->capacity));
      const MetricTriple m = policy_metrics(ctrl.agent(metric_index()).policy, probe());
      csv.emit({t, std::nullopt, m.weight_norm, m.dormant, m.srank, "buffer", "buffer_shrink"});
    }
    if (cfg.halt_resets_after && t == *cfg.halt_resets_after) {
      const int mi = metric_index();
      const MetricTriple m = policy_metrics(ctrl.agent(mi).policy, probe());
      csv.emit({t, std::nullopt, m.weight_norm, m.dormant, m.srank, agent_tag(mi), "halt"});
    }
    if (t % cfg.eval_interval == 0 || t == cfg.total_env_steps) do_eval(t);
  }

  write_checkpoint((seed_dir / "checkpoint.json").string(),
                   sac_checkpoint(ctrl.agent(ctrl.active_index())));
  return csv.rows();
}

std::vector<CsvRow> run_seed_ppo(const config::ExperimentConfig& cfg, std::uint64_t seed,
                                 const fs::path& seed_dir) {
  const auto env = build_env(cfg);
  const envs::EnvSpec spec = env->spec();
  const Kind kind = cfg.strategy();
  const int n_agents = cfg.networks_for(kind);

  ppo::PpoConfig pc;
  pc.obs_dim = spec.observation_dim;
  pc.action_dim = spec.action_dim;
  pc.hidden = cfg.ppo.hidden;
  pc.action_low = spec.action_low;
  pc.action_high = spec.action_high;
  pc.learning_rate = cfg.ppo.learning_rate;
  pc.gamma = cfg.ppo.gamma;
  pc.gae_lambda = cfg.ppo.gae_lambda;
  pc.clip_coef = cfg.ppo.clip_coef;
  pc.vf_coef = cfg.ppo.vf_coef;
  pc.ent_coef = cfg.ppo.ent_coef;
  pc.max_grad_norm = cfg.ppo.max_grad_norm;
  pc.update_epochs = cfg.ppo.update_epochs;
  pc.num_minibatches = cfg.ppo.num_minibatches;

  const std::uint64_t agent_base = split_seed(seed, kAgentInit);
  std::vector<ppo::PpoAgent> agents;
  agents.reserve(n_agents);
  for (int i = 0; i < n_agents; ++i) agents.push_back(ppo::make_agent(pc, split_seed(agent_base, i)));

  const std::int64_t period = kind == Kind::Baseline ? 0 : cfg.ppo.reset_period;
  ppo::PpoController ctrl(kind, std::move(agents), period, cfg.halt_resets_after,
                          split_seed(seed, kResets));

  strategies::LoopState ls;
  ls.episode_seed_base = split_seed(seed, kEnvEpisodes);
  strategies::start_episode_stream(*env, ls);
  Rng action_rng(split_seed(seed, kAction));
  Rng update_rng(split_seed(seed, kUpdate));

  CsvWriter csv((seed_dir / "metrics.csv").string());
  const Matrix initial_probe = reset_probe(*env, split_seed(seed, kProbe));
  Matrix recent_probe;
  const auto probe = [&]() -> const Matrix& {
    return recent_probe.rows > 0 ? recent_probe : initial_probe;
  };

  std::int64_t eval_count = 0;
  const auto eval_row = [&](std::int64_t at_step) -> CsvRow {
    const double ret = evaluate_policy(
        *env, [&](const std::vector<double>& o) { return ppo::act_deterministic(ctrl.active_agent(), o); },
        cfg.eval_episodes, split_seed(seed, kEval), eval_count++);
    const MetricTriple m = policy_metrics(ctrl.active_agent().policy, probe());
    return {at_step, ret, m.weight_norm, m.dormant, m.srank, agent_tag(ctrl.active_index()), ""};
  };
  csv.emit(eval_row(0));

  const std::int64_t iterations = cfg.total_env_steps / cfg.ppo.rollout_length;
  std::int64_t next_grid = cfg.eval_interval;
  std::int64_t prev_boundary = 0;
  for (std::int64_t it = 0; it < iterations; ++it) {
    const ppo::Rollout rollout =
        ppo::collect_rollout(ctrl.active_agent(), *env, cfg.ppo.rollout_length, ls, action_rng);
    recent_probe = tail_rows(rollout.observations, kProbeSize);

    const ppo::GaeResult gae = ppo::compute_gae(rollout, pc.gamma, pc.gae_lambda);
    ppo::ppo_update(ctrl.active_agent(), rollout, gae.advantages, gae.returns, update_rng);
    for (int i = 0; i < ctrl.num_agents(); ++i) {
      if (i == ctrl.active_index()) continue;
      const auto [values, bootstrap] = ppo::value_estimates(ctrl.agent(i), rollout);
      const ppo::GaeResult g =
          ppo::compute_gae(rollout.rewards, rollout.dones, values, bootstrap, pc.gamma, pc.gae_lambda);
      ppo::passive_ppo_update(ctrl.agent(i), rollout, g.advantages, g.returns, update_rng);
    }

    const std::int64_t boundary = ls.env_step;
    std::vector<CsvRow> pending;
    if (const auto ev = ctrl.due(boundary)) {
      const MetricTriple m = policy_metrics(ctrl.agent(ev->agent_index).policy, probe());
      ctrl.apply(*ev);
      pending.push_back({ev->env_step, std::nullopt, m.weight_norm, m.dormant, m.srank,
                         agent_tag(ev->agent_index),
                         ev->type == strategies::TickEvent::Type::Swap ? "swap" : "reset"});
    }
    if (cfg.halt_resets_after && prev_boundary < *cfg.halt_resets_after &&
        *cfg.halt_resets_after <= boundary) {
      const MetricTriple m = policy_metrics(ctrl.active_agent().policy, probe());
      pending.push_back({*cfg.halt_resets_after, std::nullopt, m.weight_norm, m.dormant, m.srank,
                         agent_tag(ctrl.active_index()), "halt"});
    }
    while (next_grid <= boundary) {
      pending.push_back(eval_row(next_grid));
      next_grid += cfg.eval_interval;
    }
    if (boundary == cfg.total_env_steps && cfg.total_env_steps % cfg.eval_interval != 0)
      pending.push_back(eval_row(cfg.total_env_steps));
    std::stable_sort(pending.begin(), pending.end(),
                     [](const CsvRow& a, const CsvRow& b) { return a.env_step < b.env_step; });
    for (CsvRow& r : pending) csv.emit(std::move(r));
    prev_boundary = boundary;
  }

  write_checkpoint((seed_dir / "checkpoint.json").string(), ppo_checkpoint(ctrl.active_agent()));
  return csv.rows();
}

void write_curves(const fs::path& curves_dir, const std::vector<CsvRow>& rows) {
  fs::create_directories(curves_dir);
  const std::array<std::pair<const char*, double CsvRow::*>, 3> metric_curves{{
      {"avg_weight_norm.dat", &CsvRow::avg_weight_norm},
      {"dormant_fraction.dat", &CsvRow::dormant_fraction},
      {"stable_rank.dat", &CsvRow::stable_rank},
  }};
  std::ofstream ret(curves_dir / "episodic_return.dat", std::ios::binary);
  for (const CsvRow& r : rows)
    if (r.event.empty() && r.episodic_return)
      ret << fmt(r.env_step) << ' ' << fmt(*r.episodic_return) << '\n';
  for (const auto& [name, member] : metric_curves) {
    std::ofstream out(curves_dir / name, std::ios::binary);
    for (const CsvRow& r : rows)
      if (r.event.empty() && r.episodic_return) out << fmt(r.env_step) << ' ' << fmt(r.*member) << '\n';
  }
}

json summary_to_json(const SeedSummary& s, const std::vector<std::int64_t>& budgets) {
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["normalized_auc"] = opt(s.normalized_auc);
  j["budget_returns"] = json::array();
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    json b;
    b["step"] = budgets[i];
    b["return"] = i < s.budget_returns.size() ? opt(s.budget_returns[i]) : json(nullptr);
    j["budget_returns"].push_back(b);
  }
  j["worst_post_reset_dip"] = opt(s.worst_post_reset_dip);
  j["final_quarter_mean"] = opt(s.final_quarter_mean);
  j["reset_events"] = s.reset_events;
  return j;
}

std::optional<double> median_of(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json metric_definitions() {
  json m;
  m["dormant_tau"] = kDormantTau;
  m["probe_observations"] = kProbeSize;
  m["weight_norm"] = "rms over weight-matrix entries of the policy network; biases excluded";
  m["dormant_fraction"] = "share of hidden units with layer-normalized mean |activation| <= tau on the probe";
  m["stable_rank"] = "squared Frobenius over squared spectral norm of the last hidden layer's probe activations";
  m["probe_source"] =
      "recent experience (replay buffer / last rollout); a fresh reset stream before any experience exists";
  m["event_row_metrics"] = "measured on the event's agent just before its parameters were reset";
  m["dip_pre_event_window_evals"] = kDipPreWindowEvals;
  m["dip_post_window"] = "evals within 10% of the reset period (at least 1 step) after the event";
  m["smoothing_window_evals"] = kDipPreWindowEvals;
  return m;
}

}  // namespace

RunRecord run_experiment(const config::ExperimentConfig& cfg) {
  if (cfg.is_sweep())
    throw ConfigError("config spans multiple (strategy, replay_ratio) cells; use sweep");
  config::validate(cfg);

  const fs::path out_dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  {
    const fs::path probe_file = out_dir / ".write_probe";
    std::ofstream probe(probe_file, std::ios::binary);
    if (!probe) throw IoError("output directory not writable: " + cfg.output_dir);
    probe.close();
    fs::remove(probe_file, ec);
  }

  RunRecord record;
  record.output_dir = cfg.output_dir;
  json seeds_json = json::array();
  double wall_total = 0.0;
  const std::vector<std::int64_t> budgets = cfg.effective_budgets();

  for (const std::uint64_t seed : cfg.seeds) {
    const fs::path seed_dir = out_dir / ("seed_" + std::to_string(seed));
    fs::create_directories(seed_dir);

    SeedSummary summary;
    std::vector<CsvRow> rows;
    bool have_checkpoint = false;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      rows = cfg.algorithm == "sac" ? run_seed_sac(cfg, seed, seed_dir)
                                    : run_seed_ppo(cfg, seed, seed_dir);
      summary = summarize_rows(rows, seed, cfg);
      have_checkpoint = true;
    } catch (const NumericError& e) {
      summary.seed = seed;
      summary.failed = true;
      summary.failure = e.what();
    }
    summary.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    wall_total += summary.wall_seconds;
    if (!summary.failed) write_curves(seed_dir / "curves", rows);

    json sj;
    sj["seed"] = seed;
    sj["csv"] = (seed_dir.filename() / "metrics.csv").string();
    sj["checkpoint"] = have_checkpoint ? json((seed_dir.filename() / "checkpoint.json").string())
                                       : json(nullptr);
    sj["failed"] = summary.failed;
    sj["failure"] = summary.failure;
    sj["wall_seconds"] = summary.wall_seconds;
    sj["summary"] = summary_to_json(summary, budgets);
    seeds_json.push_back(sj);
    record.seeds.push_back(std::move(summary));
  }

  json manifest;
  manifest["format"] = "altlab-manifest-v1";
  manifest["name"] = cfg.name;
  manifest["config"] = json::parse(config::resolved_json(cfg));
  manifest["config_hash"] = config::config_hash(cfg);
  manifest["algorithm"] = cfg.algorithm;
  manifest["strategy"] = strategies::to_string(cfg.strategy());
  manifest["replay_ratio"] = cfg.replay_ratio();
  manifest["num_networks"] = cfg.networks_for(cfg.strategy());
  manifest["period_env_steps"] = cell_period(cfg);
  if (cfg.parameter_matched && cfg.networks_for(cfg.strategy()) > 1 && cfg.algorithm == "sac") {
    const auto env = build_env(cfg);
    manifest["matched_hidden_width"] = strategies::matched_hidden_width(
        env->spec().observation_dim, env->spec().action_dim, cfg.sac.hidden,
        cfg.networks_for(cfg.strategy()));
  }
  manifest["metric_definitions"] = metric_definitions();
  manifest["csv_header"] = kCsvHeader;
  manifest["seeds"] = seeds_json;

  json agg;
  std::vector<double> aucs, dips, quarters;
  int failed = 0;
  for (const SeedSummary& s : record.seeds) {
    if (s.failed) {
      ++failed;
      continue;
    }
    if (s.normalized_auc) aucs.push_back(*s.normalized_auc);
    if (s.worst_post_reset_dip) dips.push_back(*s.worst_post_reset_dip);
    if (s.final_quarter_mean) quarters.push_back(*s.final_quarter_mean);
  }
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  agg["median_normalized_auc"] = opt(median_of(aucs));
  agg["median_worst_post_reset_dip"] = opt(median_of(dips));
  agg["median_final_quarter_mean"] = opt(median_of(quarters));
  json med_budgets = json::array();
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    std::vector<double> vals;
    for (const SeedSummary& s : record.seeds)
      if (!s.failed && i < s.budget_returns.size() && s.budget_returns[i])
        vals.push_back(*s.budget_returns[i]);
    json b;
    b["step"] = budgets[i];
    b["return"] = opt(median_of(vals));
    med_budgets.push_back(b);
  }
  agg["median_budget_returns"] = med_budgets;
  agg["seeds_failed"] = failed;
  agg["wall_seconds_total"] = wall_total;
  manifest["summary"] = agg;

  const fs::path manifest_path = out_dir / "manifest.json";
  std::ofstream mf(manifest_path, std::ios::binary);
  if (!mf) throw IoError("cannot write manifest: " + manifest_path.string());
  mf << manifest.dump(2) << '\n';
  record.manifest_path = manifest_path.string();
  return record;
}

// ---------------------------------------------------------------------------
// Sweep and summarize

namespace {

struct TableRow {
  std::string name, algorithm, strategy;
  int replay_ratio = 0;
  int num_networks = 0;
  int strategy_order = 0;
  std::size_t n_seeds = 0;
  int failed = 0;
  std::optional<double> auc, final_quarter, worst_dip;
  std::map<std::int64_t, std::optional<double>> budget_medians;
};

std::string render_table(std::vector<TableRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const TableRow& a, const TableRow& b) {
    if (a.strategy_order != b.strategy_order) return a.strategy_order < b.strategy_order;
    if (a.replay_ratio != b.replay_ratio) return a.replay_ratio < b.replay_ratio;
    return a.name < b.name;
  });
  std::vector<std::int64_t> budget_columns;
  for (const TableRow& r : rows)
    for (const auto& [step, _] : r.budget_medians) budget_columns.push_back(step);
  std::sort(budget_columns.begin(), budget_columns.end());
  budget_columns.erase(std::unique(budget_columns.begin(), budget_columns.end()),
                       budget_columns.end());

  std::ostringstream out;
  out << "name,algorithm,strategy,replay_ratio,num_networks,seeds,failed_seeds,"
         "median_normalized_auc,median_final_quarter_mean,median_worst_post_reset_dip";
  for (const std::int64_t b : budget_columns) out << ",return@" << b;
  out << '\n';
  const auto cell = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
  for (const TableRow& r : rows) {
    out << r.name << ',' << r.algorithm << ',' << r.strategy << ',' << r.replay_ratio << ','
        << r.num_networks << ',' << r.n_seeds << ',' << r.failed << ',' << cell(r.auc) << ','
        << cell(r.final_quarter) << ',' << cell(r.worst_dip);
    for (const std::int64_t b : budget_columns) {
      out << ',';
      const auto it = r.budget_medians.find(b);
      if (it != r.budget_medians.end()) out << cell(it->second);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace

std::string run_sweep(const config::ExperimentConfig& cfg) {
  for (const Kind k : cfg.strategies_axis)
    for (const int rr : cfg.replay_ratios_axis)
      (void)config::sweep_cell(cfg, k, rr);  // validate every cell up front
  for (const Kind k : cfg.strategies_axis)
    for (const int rr : cfg.replay_ratios_axis) run_experiment(config::sweep_cell(cfg, k, rr));
  return summarize_dir(cfg.output_dir);
}

std::string summarize_dir(const std::string& root) {
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root);
  std::vector<fs::path> manifests;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file() && entry.path().filename() == "manifest.json")
      manifests.push_back(entry.path());
  std::sort(manifests.begin(), manifests.end());
  if (manifests.empty()) throw IoError("no manifest.json under " + root);

  std::vector<TableRow> rows;
  for (const fs::path& mpath : manifests) {
    std::ifstream in(mpath, std::ios::binary);
    if (!in) throw IoError("cannot read " + mpath.string());
    json manifest;
    try {
      in >> manifest;
    } catch (const json::exception& e) {
      throw IoError("bad manifest " + mpath.string() + ": " + e.what());
    }
    const config::ExperimentConfig cfg = config::parse_config(manifest.at("config").dump());
    const std::vector<std::int64_t> budgets = cfg.effective_budgets();

    TableRow row;
    row.name = manifest.at("name").get<std::string>();
    row.algorithm = cfg.algorithm;
    row.strategy = strategies::to_string(cfg.strategy());
    row.replay_ratio = cfg.replay_ratio();
    row.num_networks = cfg.networks_for(cfg.strategy());
    row.strategy_order = static_cast<int>(cfg.strategy());

    std::vector<double> aucs, dips, quarters;
    std::vector<std::vector<double>> budget_vals(budgets.size());
    for (const json& sj : manifest.at("seeds")) {
      ++row.n_seeds;
      if (sj.at("failed").get<bool>()) {
        ++row.failed;
        continue;
      }
      const fs::path csv_path = mpath.parent_path() / sj.at("csv").get<std::string>();
      const SeedSummary s =
          summarize_rows(read_csv(csv_path.string()), sj.at("seed").get<std::uint64_t>(), cfg);
      if (s.normalized_auc) aucs.push_back(*s.normalized_auc);
      if (s.worst_post_reset_dip) dips.push_back(*s.worst_post_reset_dip);
      if (s.final_quarter_mean) quarters.push_back(*s.final_quarter_mean);
      for (std::size_t i = 0; i < budgets.size() && i < s.budget_returns.size(); ++i)
        if (s.budget_returns[i]) budget_vals[i].push_back(*s.budget_returns[i]);
    }
    row.auc = median_of(aucs);
    row.worst_dip = median_of(dips);
    row.final_quarter = median_of(quarters);
    for (std::size_t i = 0; i < budgets.size(); ++i)
      row.budget_medians[budgets[i]] = median_of(budget_vals[i]);
    rows.push_back(std::move(row));
  }

  const std::string table = render_table(std::move(rows));
  std::ofstream out(fs::path(root) / "summary.csv", std::ios::binary);
  if (!out) throw IoError("cannot write summary.csv under " + root);
  out << table;
  return table;
}

}  // namespace altlab::runner
