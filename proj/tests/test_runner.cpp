#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "config.hpp"
#include "env.hpp"
#include "errors.hpp"
#include "plasticity.hpp"
#include "rng.hpp"
#include "runner.hpp"
#include "strategies.hpp"

using namespace altlab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("runner_test_tmp") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all("runner_test_tmp"); }
};

config::ExperimentConfig tiny_sac_config(const std::string& out_dir, const std::string& extra = "") {
  // period = 400 / (1 * 2) = 200 -> events at 200, 400, 600
  const std::string text = R"({
    "env": {"name": "pendulum"},
    "algorithm": "sac",
    "strategy": "altnet",
    "update_budget": 400,
    "total_env_steps": 600,
    "eval_interval": 200,
    "eval_episodes": 2,
    "seeds": [1, 2],
    "buffer_capacity": 1000,
    "sac": {"hidden": [8, 8], "batch_size": 16, "warmup_steps": 50},
    "output_dir": ")" + out_dir + "\"" + extra + "}";
  return config::parse_config(text);
}

}  // namespace

TEST_CASE("evaluate_policy matches the passive-pendulum closed form") {
  // pinned hanging start: theta = pi (a passive equilibrium), zero velocity
  const double pi = std::numbers::pi;
  const envs::ParamMap overrides{{"init_theta_low", pi},
                                 {"init_theta_high", pi},
                                 {"init_theta_dot_low", 0.0},
                                 {"init_theta_dot_high", 0.0}};
  const auto env = envs::make_env("pendulum", overrides);
  const runner::Policy zero_torque = [](const std::vector<double>&) { return std::vector<double>{0.0}; };

  const double ret = runner::evaluate_policy(*env, zero_torque, 1, 99, 0);
  // cost is theta^2 per step while it hangs; 200 steps
  CHECK(ret == doctest::Approx(-200.0 * pi * pi).epsilon(1e-9));

  // independent closed-loop re-simulation of the documented dynamics
  double theta = pi, theta_dot = 0.0, expected = 0.0;
  for (int t = 0; t < 200; ++t) {
    auto wrap = [](double a) {
      double x = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
      if (x < 0) x += 2.0 * std::numbers::pi;
      return x - std::numbers::pi;
    };
    expected -= wrap(theta) * wrap(theta) + 0.1 * theta_dot * theta_dot;
    theta_dot += (3.0 * 10.0 / 2.0 * std::sin(theta)) * 0.05;
    theta_dot = std::clamp(theta_dot, -8.0, 8.0);
    theta += theta_dot * 0.05;
  }
  CHECK(ret == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("evaluate_policy episode seeds are stable across episode counts") {
  const auto env = envs::make_env("pendulum");
  const runner::Policy zero = [](const std::vector<double>&) { return std::vector<double>{0.0}; };

  // episode e of round i is seeded split(base, i * episodes + e): with one
  // episode per round, round 0 equals the first episode of a 5-episode round
  const double one = runner::evaluate_policy(*env, zero, 1, 7, 0);
  double five_first = 0.0;
  {
    const auto probe_env = envs::make_env("pendulum");
    std::vector<double> obs = probe_env->reset(split_seed(7, 0));
    while (true) {
      const auto sr = probe_env->step({0.0});
      five_first += sr.reward;
      obs = sr.observation;
      if (sr.terminal || sr.truncated) break;
    }
  }
  CHECK(one == five_first);
  CHECK(runner::evaluate_policy(*env, zero, 5, 7, 0) != one);  // means over 5 random starts differ
}

TEST_CASE("evaluate_policy leaves training state untouched") {
  const auto env = envs::make_env("pendulum");
  const auto twin = envs::make_env("pendulum");
  std::vector<double> obs_a = env->reset(42);
  std::vector<double> obs_b = twin->reset(42);
  for (int i = 0; i < 3; ++i) {
    obs_a = env->step({0.5}).observation;
    obs_b = twin->step({0.5}).observation;
  }
  const runner::Policy zero = [](const std::vector<double>&) { return std::vector<double>{0.0}; };
  (void)runner::evaluate_policy(*env, zero, 3, 5, 0);
  // same continuation after evaluation as the untouched twin
  for (int i = 0; i < 5; ++i) {
    obs_a = env->step({-0.25}).observation;
    obs_b = twin->step({-0.25}).observation;
    CHECK(obs_a == obs_b);
  }
}

TEST_CASE("cell_period covers both algorithms") {
  TempDir tmp("period");
  const auto sac_cfg = tiny_sac_config((tmp.path / "a").string());
  CHECK(runner::cell_period(sac_cfg) == 200);

  config::ExperimentConfig baseline = sac_cfg;
  baseline.strategies_axis = {strategies::Kind::Baseline};
  CHECK(runner::cell_period(baseline) == 0);

  const auto ppo_cfg = config::parse_config(R"({
    "env": {"name": "pendulum"},
    "algorithm": "ppo",
    "strategy": "standard_reset",
    "total_env_steps": 1024,
    "seeds": [1],
    "output_dir": "x",
    "ppo": {"rollout_length": 128, "num_minibatches": 4, "reset_period": 300}
  })");
  CHECK(runner::cell_period(ppo_cfg) == 300);
}

TEST_CASE("csv lines round-trip through read_csv") {
  TempDir tmp("csv");
  const std::vector<runner::CsvRow> rows{
      {0, -1234.5678901234567, 0.812345, 0.0, 7.25, "agent0", ""},
      {200, std::nullopt, 1e-17, 0.5, 2.0, "agent1", "swap"},
      {300, std::nullopt, 0.25, 0.03125, 1.0, "buffer", "buffer_shrink"},
      {600, -0.0, 3.0, 1.0, 0.0, "agent0", "halt"},
  };
  const fs::path p = tmp.path / "t.csv";
  {
    std::ofstream out(p, std::ios::binary);
    out << runner::kCsvHeader << '\n';
    for (const auto& r : rows) out << runner::csv_line(r) << '\n';
  }
  const auto back = runner::read_csv(p.string());
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].env_step == rows[i].env_step);
    CHECK(back[i].episodic_return.has_value() == rows[i].episodic_return.has_value());
    if (rows[i].episodic_return) CHECK(*back[i].episodic_return == *rows[i].episodic_return);
    CHECK(back[i].avg_weight_norm == rows[i].avg_weight_norm);
    CHECK(back[i].dormant_fraction == rows[i].dormant_fraction);
    CHECK(back[i].stable_rank == rows[i].stable_rank);
    CHECK(back[i].agent_tag == rows[i].agent_tag);
    CHECK(back[i].event == rows[i].event);
  }
  CHECK_THROWS_AS(runner::read_csv((tmp.path / "missing.csv").string()), IoError);
}

TEST_CASE("summarize_rows reproduces hand-computed statistics") {
  // period 200/(1*2) = 100, window = 10
  const auto cfg = config::parse_config(R"({
    "env": {"name": "pendulum"},
    "algorithm": "sac",
    "strategy": "altnet",
    "update_budget": 200,
    "total_env_steps": 100,
    "eval_interval": 10,
    "seeds": [1],
    "buffer_capacity": 16,
    "sac": {"batch_size": 4},
    "output_dir": "x"
  })");
  REQUIRE(runner::cell_period(cfg) == 100);

  std::vector<runner::CsvRow> rows;
  // returns ramp 0,1,...,10 at steps 0,10,...,100 with a dip to 2 at step 60
  for (int i = 0; i <= 10; ++i) {
    double r = static_cast<double>(i);
    if (i == 6) r = 2.0;
    rows.push_back({i * 10, r, 1.0, 0.0, 1.0, "agent0", ""});
  }
  rows.push_back({55, std::nullopt, 2.0, 0.5, 1.0, "agent0", "swap"});

  const auto s = runner::summarize_rows(rows, 9, cfg);
  CHECK(s.seed == 9);
  CHECK(!s.failed);
  CHECK(s.reset_events == 1);

  // trapezoid AUC by hand: sum of 10-wide trapezoids / 100
  double area = 0.0;
  const double returns[11] = {0, 1, 2, 3, 4, 5, 2, 7, 8, 9, 10};
  for (int i = 0; i < 10; ++i) area += 0.5 * (returns[i] + returns[i + 1]) * 10.0;
  REQUIRE(s.normalized_auc.has_value());
  CHECK(*s.normalized_auc == doctest::Approx(area / 100.0).epsilon(1e-12));

  // budgets default to quartiles 25/50/75/100
  REQUIRE(s.budget_returns.size() == 4);
  CHECK(*s.budget_returns[0] == doctest::Approx(2.5));   // halfway 20 -> 30
  CHECK(*s.budget_returns[1] == doctest::Approx(5.0));
  CHECK(*s.budget_returns[2] == doctest::Approx(7.5));   // halfway 70 -> 80, past the dip
  CHECK(*s.budget_returns[3] == doctest::Approx(10.0));

  // dip at the swap: pre = mean(evals at 10..50) = 3, window [55,65] -> min 2
  REQUIRE(s.worst_post_reset_dip.has_value());
  CHECK(*s.worst_post_reset_dip == doctest::Approx((3.0 - 2.0) / 3.0).epsilon(1e-12));

  // final quarter: steps > 75 -> evals at 80, 90, 100
  REQUIRE(s.final_quarter_mean.has_value());
  CHECK(*s.final_quarter_mean == doctest::Approx((8.0 + 9.0 + 10.0) / 3.0));

  // degenerate: single eval point -> nothing computable
  const auto empty = runner::summarize_rows({{0, 1.0, 0, 0, 0, "agent0", ""}}, 1, cfg);
  CHECK(!empty.normalized_auc.has_value());
  CHECK(empty.worst_post_reset_dip.has_value());  // defined (no events) = 0
  CHECK(*empty.worst_post_reset_dip == 0.0);
}

TEST_CASE("checkpoints round-trip bitwise") {
  TempDir tmp("ckpt");
  runner::Checkpoint cp;
  cp.algorithm = "sac";
  cp.tensors.push_back({"policy", {3, 8, 2}, {1.0, -2.5, 3.25e-17, 0.0, -0.0, 5.0}});
  cp.tensors.push_back({"log_temperature", {}, {-0.6931471805599453}});
  const std::string jpath = (tmp.path / "checkpoint.json").string();
  runner::write_checkpoint(jpath, cp);
  const runner::Checkpoint back = runner::read_checkpoint(jpath);
  CHECK(back.algorithm == "sac");
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.tensors[0].name == "policy");
  CHECK(back.tensors[0].layer_sizes == std::vector<int>{3, 8, 2});
  CHECK(back.tensors[0].values == cp.tensors[0].values);
  CHECK(back.tensors[1].layer_sizes.empty());
  CHECK(back.tensors[1].values == cp.tensors[1].values);
  CHECK_THROWS_AS(runner::read_checkpoint((tmp.path / "nope.json").string()), IoError);
}

TEST_CASE("sac run: outputs, event counts, determinism, summarize identity") {
  TempDir tmp("sacrun");
  const std::string extra = R"(, "buffer_shrink": {"at_step": 300, "capacity": 32})";
  const auto cfg = tiny_sac_config((tmp.path / "run1").string(), extra);
  const runner::RunRecord rec = runner::run_experiment(cfg);

  REQUIRE(rec.seeds.size() == 2);
  for (const auto& s : rec.seeds) CHECK(!s.failed);

  const json manifest = json::parse(slurp(rec.manifest_path));
  CHECK(manifest.at("format") == "altlab-manifest-v1");
  CHECK(manifest.at("period_env_steps") == 200);
  CHECK(manifest.at("config_hash") == config::config_hash(cfg));
  // manifest config round-trips through the parser
  const auto reparsed = config::parse_config(manifest.at("config").dump());
  CHECK(config::resolved_json(reparsed) == config::resolved_json(cfg));

  for (const std::uint64_t seed : {1ull, 2ull}) {
    const fs::path seed_dir = fs::path(rec.output_dir) / ("seed_" + std::to_string(seed));
    const auto rows = runner::read_csv((seed_dir / "metrics.csv").string());

    // floor(600/200) = 3 swap events, one buffer_shrink, evals at 0,200,400,600
    int swaps = 0, shrinks = 0, evals = 0;
    for (const auto& r : rows) {
      if (r.event == "swap") ++swaps;
      if (r.event == "buffer_shrink") ++shrinks;
      if (r.event.empty()) ++evals;
      if (r.event == "buffer_shrink") CHECK(r.agent_tag == "buffer");
      if (!r.event.empty()) CHECK(!r.episodic_return.has_value());
    }
    CHECK(swaps == 3);
    CHECK(shrinks == 1);
    CHECK(evals == 4);
    CHECK(std::is_sorted(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      return a.env_step < b.env_step;
    }));
    // swap alternates the acting agent: agent0 retires first, then agent1
    std::vector<std::string> swap_tags;
    for (const auto& r : rows)
      if (r.event == "swap") swap_tags.push_back(r.agent_tag);
    CHECK(swap_tags == std::vector<std::string>{"agent0", "agent1", "agent0"});

    // the run's stored summary equals a recompute from the CSV alone
    const auto recompute = runner::summarize_rows(rows, seed, cfg);
    for (const json& sj : manifest.at("seeds")) {
      if (sj.at("seed") != seed) continue;
      CHECK(sj.at("summary").at("normalized_auc").get<double>() ==
            doctest::Approx(*recompute.normalized_auc).epsilon(1e-15));
      CHECK(sj.at("summary").at("reset_events") == recompute.reset_events);
    }

    // checkpoint holds the final active agent's networks
    const auto cp = runner::read_checkpoint((seed_dir / "checkpoint.json").string());
    CHECK(cp.algorithm == "sac");
    REQUIRE(cp.tensors.size() == 6);
    CHECK(cp.tensors[0].name == "policy");
    CHECK(cp.tensors[0].layer_sizes == std::vector<int>{3, 8, 8, 2});
    for (const auto& t : cp.tensors)
      for (double v : t.values) CHECK(std::isfinite(v));

    // plot data exists and matches the eval curve length
    const std::string dat = slurp(seed_dir / "curves" / "episodic_return.dat");
    CHECK(std::count(dat.begin(), dat.end(), '\n') == evals);
  }

  // rerun -> byte-identical CSVs
  config::ExperimentConfig cfg2 = cfg;
  cfg2.output_dir = (tmp.path / "run2").string();
  runner::run_experiment(cfg2);
  for (const std::uint64_t seed : {1ull, 2ull}) {
    const std::string a = slurp(fs::path(cfg.output_dir) / ("seed_" + std::to_string(seed)) / "metrics.csv");
    const std::string b = slurp(fs::path(cfg2.output_dir) / ("seed_" + std::to_string(seed)) / "metrics.csv");
    CHECK(a == b);
    CHECK(!a.empty());
  }

  // summarize over the directory reproduces the manifest's median AUC
  const std::string table = runner::summarize_dir(tmp.path.string());
  CHECK(table.find("sac_altnet") != std::string::npos);
  CHECK(fs::exists(tmp.path / "summary.csv"));
  const double med = manifest.at("summary").at("median_normalized_auc").get<double>();
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), med);
  CHECK(table.find("," + std::string(buf.data(), res.ptr) + ",") != std::string::npos);
}

TEST_CASE("sac standard_reset honors halt and logs a halt row") {
  TempDir tmp("halt");
  const auto cfg = config::parse_config(R"({
    "env": {"name": "pendulum"},
    "algorithm": "sac",
    "strategy": "standard_reset",
    "update_budget": 200,
    "total_env_steps": 600,
    "halt_resets_after": 250,
    "eval_interval": 300,
    "eval_episodes": 1,
    "seeds": [3],
    "buffer_capacity": 1000,
    "sac": {"hidden": [8], "batch_size": 16, "warmup_steps": 50},
    "output_dir": ")" + (tmp.path / "halt_run").string() + R"("
  })");
  REQUIRE(runner::cell_period(cfg) == 200);
  runner::run_experiment(cfg);
  const auto rows = runner::read_csv((tmp.path / "halt_run" / "seed_3" / "metrics.csv").string());
  int resets = 0, halts = 0;
  for (const auto& r : rows) {
    if (r.event == "reset") {
      ++resets;
      CHECK(r.env_step == 200);  // 400 and 600 are suppressed by the halt
    }
    if (r.event == "halt") {
      ++halts;
      CHECK(r.env_step == 250);
    }
  }
  CHECK(resets == 1);
  CHECK(halts == 1);
}

TEST_CASE("ppo run: events at rollout boundaries, determinism") {
  TempDir tmp("pporun");
  const auto make_cfg = [&](const std::string& dir) {
    return config::parse_config(R"({
      "env": {"name": "pendulum"},
      "algorithm": "ppo",
      "strategy": "altnet",
      "total_env_steps": 512,
      "eval_interval": 128,
      "eval_episodes": 1,
      "seeds": [5],
      "ppo": {"hidden": [8, 8], "rollout_length": 128, "num_minibatches": 4,
               "update_epochs": 2, "reset_period": 256},
      "output_dir": ")" + dir + R"("
    })");
  };
  const auto cfg = make_cfg((tmp.path / "p1").string());
  const runner::RunRecord rec = runner::run_experiment(cfg);
  REQUIRE(rec.seeds.size() == 1);
  CHECK(!rec.seeds[0].failed);

  const auto rows = runner::read_csv((tmp.path / "p1" / "seed_5" / "metrics.csv").string());
  std::vector<std::int64_t> swap_steps;
  int evals = 0;
  for (const auto& r : rows) {
    if (r.event == "swap") swap_steps.push_back(r.env_step);
    if (r.event.empty()) ++evals;
  }
  CHECK(swap_steps == std::vector<std::int64_t>{256, 512});  // floor(512/256) = 2
  CHECK(evals == 5);  // 0, 128, 256, 384, 512
  CHECK(rows.front().env_step == 0);

  const auto cp = runner::read_checkpoint((tmp.path / "p1" / "seed_5" / "checkpoint.json").string());
  CHECK(cp.algorithm == "ppo");
  REQUIRE(cp.tensors.size() == 3);
  CHECK(cp.tensors[1].name == "log_std");
  CHECK(cp.tensors[1].values.size() == 1);

  runner::run_experiment(make_cfg((tmp.path / "p2").string()));
  CHECK(slurp(tmp.path / "p1" / "seed_5" / "metrics.csv") ==
        slurp(tmp.path / "p2" / "seed_5" / "metrics.csv"));
}

TEST_CASE("run_experiment rejects sweeps and unwritable directories") {
  TempDir tmp("errors");
  auto sweep = tiny_sac_config((tmp.path / "s").string());
  sweep.strategies_axis = {strategies::Kind::Baseline, strategies::Kind::AltNet};
  CHECK_THROWS_AS(runner::run_experiment(sweep), ConfigError);

  // a plain file where the output tree should go
  const fs::path block = tmp.path / "blocked";
  std::ofstream(block, std::ios::binary) << "x";
  auto cfg = tiny_sac_config((block / "run").string());
  CHECK_THROWS_AS(runner::run_experiment(cfg), IoError);

  CHECK_THROWS_AS(runner::summarize_dir((tmp.path / "empty_missing").string()), IoError);
}
