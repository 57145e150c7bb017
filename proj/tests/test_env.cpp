#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "env.hpp"

using namespace altlab;
using namespace altlab::envs;

namespace {
constexpr double kPi = 3.14159265358979323846;

// Kolmogorov-Smirnov distance of a sample against a uniform CDF on [lo, hi].
double ks_uniform(std::vector<double> xs, double lo, double hi) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = (xs[i] - lo) / (hi - lo);
    d = std::max(d, std::max(std::abs((i + 1) / n - f), std::abs(f - i / n)));
  }
  return d;
}

ParamMap pinned_state(double theta, double theta_dot) {
  return {{"init_theta_low", theta},
          {"init_theta_high", theta},
          {"init_theta_dot_low", theta_dot},
          {"init_theta_dot_high", theta_dot}};
}
}  // namespace

TEST_CASE("wrap_angle lands in (-pi, pi]") {
  CHECK(wrap_angle(0.0) == doctest::Approx(0.0));
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));  // open at -pi
  CHECK(wrap_angle(3 * kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(2 * kPi + 0.3) == doctest::Approx(0.3));
  CHECK(wrap_angle(-2 * kPi - 0.3) == doctest::Approx(-0.3));
  for (double t = -20.0; t < 20.0; t += 0.37) {
    const double w = wrap_angle(t);
    CHECK(w > -kPi - 1e-15);
    CHECK(w <= kPi + 1e-15);
    CHECK(std::abs(std::sin(w) - std::sin(t)) < 1e-12);
    CHECK(std::abs(std::cos(w) - std::cos(t)) < 1e-12);
  }
}

TEST_CASE("pendulum: one step matches the hand-integrated dynamics") {
  auto env = make_env("pendulum", pinned_state(1.0, 0.5));
  const auto obs0 = env->reset(7);
  CHECK(obs0[0] == doctest::Approx(std::cos(1.0)));
  CHECK(obs0[1] == doctest::Approx(std::sin(1.0)));
  CHECK(obs0[2] == doctest::Approx(0.5));

  const double a = 0.7;
  const auto r = env->step({a});

  // independent integration: defaults g=10, m=1, l=1, dt=0.05
  const double theta = 1.0, theta_dot = 0.5;
  const double expected_reward = -(wrap_angle(theta) * wrap_angle(theta) + 0.1 * theta_dot * theta_dot + 0.001 * a * a);
  const double acc = 3.0 * 10.0 / 2.0 * std::sin(theta) + 3.0 * a;
  const double new_dot = theta_dot + acc * 0.05;
  const double new_theta = theta + new_dot * 0.05;

  CHECK(r.reward == doctest::Approx(expected_reward).epsilon(1e-12));
  CHECK(r.observation[0] == doctest::Approx(std::cos(new_theta)).epsilon(1e-12));
  CHECK(r.observation[1] == doctest::Approx(std::sin(new_theta)).epsilon(1e-12));
  CHECK(r.observation[2] == doctest::Approx(new_dot).epsilon(1e-12));
  CHECK_FALSE(r.terminal);
  CHECK_FALSE(r.truncated);
}

TEST_CASE("pendulum: reward at (pi, 0) with zero torque is -pi^2") {
  auto env = make_env("pendulum", pinned_state(kPi, 0.0));
  env->reset(1);
  const auto r = env->step({0.0});
  CHECK(r.reward == doctest::Approx(-kPi * kPi).epsilon(1e-12));
}

TEST_CASE("pendulum: hanging at the stable equilibrium yields -200*pi^2 per episode") {
  auto env = make_env("pendulum", pinned_state(kPi, 0.0));
  env->reset(3);
  double total = 0.0;
  int steps = 0;
  for (;;) {
    const auto r = env->step({0.0});
    total += r.reward;
    ++steps;
    CHECK_FALSE(r.terminal);
    if (r.truncated) break;
  }
  CHECK(steps == 200);
  CHECK(total == doctest::Approx(-200.0 * kPi * kPi).epsilon(1e-6));
}

TEST_CASE("pendulum: episodes truncate at max_episode_steps and never terminate") {
  auto env = make_env("pendulum", {{"max_episode_steps", 37.0}});
  env->reset(9);
  for (int i = 1; i <= 37; ++i) {
    const auto r = env->step({0.3});
    CHECK_FALSE(r.terminal);
    CHECK(r.truncated == (i == 37));
  }
}

TEST_CASE("pendulum: out-of-range actions are clamped and counted") {
  auto a = make_env("pendulum", pinned_state(0.4, -0.2));
  auto b = make_env("pendulum", pinned_state(0.4, -0.2));
  a->reset(5);
  b->reset(5);
  const auto ra = a->step({5.0});
  const auto rb = b->step({2.0});
  CHECK(ra.reward == rb.reward);  // cost uses the clamped torque
  CHECK(ra.observation == rb.observation);
  CHECK(a->clamp_count() == 1);
  CHECK(b->clamp_count() == 0);
  a->step({-100.0});
  CHECK(a->clamp_count() == 2);
  a->step({0.0});
  CHECK(a->clamp_count() == 2);
}

TEST_CASE("pendulum: angular velocity saturates at max_speed") {
  auto env = make_env("pendulum", pinned_state(kPi / 2, 0.0));
  env->reset(1);
  for (int i = 0; i < 200; ++i) {
    const auto r = env->step({2.0});
    CHECK(std::abs(r.observation[2]) <= 8.0 + 1e-12);
    if (r.truncated) break;
  }
}

TEST_CASE("pendulum: non-finite or mis-shaped actions are rejected") {
  auto env = make_env("pendulum");
  env->reset(1);
  CHECK_THROWS_AS(env->step({std::nan("")}), NumericError);
  CHECK_THROWS_AS(env->step({0.1, 0.2}), ShapeError);
}

TEST_CASE("pendulum: reset distribution matches the configured uniform ranges") {
  auto env = make_env("pendulum");
  std::vector<double> thetas, dots;
  for (int i = 0; i < 1000; ++i) {
    const auto obs = env->reset(split_seed(123, i));
    thetas.push_back(std::atan2(obs[1], obs[0]));
    dots.push_back(obs[2]);
  }
  // KS test at alpha ~ 0.01: critical value 1.628/sqrt(n)
  const double crit = 1.628 / std::sqrt(1000.0);
  CHECK(ks_uniform(thetas, -kPi, kPi) < crit);
  CHECK(ks_uniform(dots, -1.0, 1.0) < crit);
  CHECK(*std::min_element(dots.begin(), dots.end()) >= -1.0);
  CHECK(*std::max_element(dots.begin(), dots.end()) <= 1.0);
}

TEST_CASE("pendulum: same seed gives bitwise-identical trajectories") {
  auto a = make_env("pendulum");
  auto b = make_env("pendulum");
  auto oa = a->reset(42);
  auto ob = b->reset(42);
  CHECK(oa == ob);
  for (int i = 0; i < 50; ++i) {
    const double act = std::sin(0.1 * i);
    const auto ra = a->step({act});
    const auto rb = b->step({act});
    CHECK(ra.observation == rb.observation);
    CHECK(ra.reward == rb.reward);
  }
}

TEST_CASE("pendulum: overrides change the dynamics and bad keys throw") {
  auto heavy = make_env("pendulum", [] {
    auto m = pinned_state(1.0, 0.0);
    m["gravity"] = 14.0;
    return m;
  }());
  auto normal = make_env("pendulum", pinned_state(1.0, 0.0));
  heavy->reset(1);
  normal->reset(1);
  const auto rh = heavy->step({0.0});
  const auto rn = normal->step({0.0});
  CHECK(rh.observation[2] != rn.observation[2]);
  CHECK(rh.observation[2] == doctest::Approx(3.0 * 14.0 / 2.0 * std::sin(1.0) * 0.05).epsilon(1e-12));

  CHECK_THROWS_AS(make_env("pendulum", {{"gravty", 14.0}}), ConfigError);
  CHECK_THROWS_AS(make_env("nope"), ConfigError);
  CHECK_THROWS_AS(make_env("pendulum", {{"mass", -1.0}}), ConfigError);
}

TEST_CASE("reacher: scripted controller reaches the goal and is rewarded") {
  auto env = make_env("reacher");
  auto obs = env->reset(11);
  REQUIRE(obs.size() == 6);
  bool reached = false;
  double last_reward = 0.0;
  for (int t = 0; t < 200; ++t) {
    // steer along the goal offset, braking with velocity
    const double ax = std::clamp(2.0 * obs[4] - 1.5 * obs[2], -1.0, 1.0);
    const double ay = std::clamp(2.0 * obs[5] - 1.5 * obs[3], -1.0, 1.0);
    const auto r = env->step({ax, ay});
    obs = r.observation;
    last_reward = r.reward;
    if (r.terminal) {
      reached = true;
      break;
    }
    CHECK(r.reward < 0.0);  // living cost until success
  }
  CHECK(reached);
  CHECK(last_reward == doctest::Approx(10.0));
}

TEST_CASE("reacher: stays inside the arena and counts clamped actions") {
  auto env = make_env("reacher");
  env->reset(3);
  for (int t = 0; t < 200; ++t) {
    const auto r = env->step({37.0, -42.0});
    CHECK(std::abs(r.observation[0]) <= 1.5 + 1e-12);
    CHECK(std::abs(r.observation[1]) <= 1.5 + 1e-12);
    if (r.terminal || r.truncated) break;
  }
  CHECK(env->clamp_count() >= 2);
}

TEST_CASE("reacher: deterministic per seed, truncates at the horizon when idle") {
  auto a = make_env("reacher");
  auto b = make_env("reacher");
  CHECK(a->reset(99) == b->reset(99));
  for (int i = 0; i < 20; ++i) {
    const auto ra = a->step({0.1, -0.1});
    const auto rb = b->step({0.1, -0.1});
    CHECK(ra.observation == rb.observation);
  }

  auto idle = make_env("reacher");
  idle->reset(4);
  int steps = 0;
  for (;;) {
    const auto r = idle->step({0.0, 0.0});
    ++steps;
    if (r.truncated || r.terminal) {
      CHECK(r.truncated);
      break;
    }
  }
  CHECK(steps == 200);
}

TEST_CASE("non-stationary wrapper: overrides land at the next episode boundary") {
  std::vector<ScheduleEntry> sched{{10, {{"gravity", 14.0}}}};
  auto env = make_nonstationary("pendulum", pinned_state(1.0, 0.0), sched);
  CHECK(env->current_params().at("gravity") == 10.0);

  // episode 1 crosses the threshold mid-episode; dynamics must not change
  auto plain10 = make_env("pendulum", pinned_state(1.0, 0.0));
  env->reset(1);
  plain10->reset(1);
  for (int i = 0; i < 15; ++i) {
    const auto r = env->step({0.2});
    const auto rp = plain10->step({0.2});
    CHECK(r.observation == rp.observation);
  }
  CHECK(env->current_params().at("gravity") == 10.0);

  // next reset applies the override (global steps 15 >= 10)
  auto heavy = make_env("pendulum", [] {
    auto m = pinned_state(1.0, 0.0);
    m["gravity"] = 14.0;
    return m;
  }());
  env->reset(2);
  CHECK(env->current_params().at("gravity") == 14.0);
  heavy->reset(2);
  for (int i = 0; i < 10; ++i) {
    const auto r = env->step({-0.1});
    const auto rh = heavy->step({-0.1});
    CHECK(r.observation == rh.observation);
  }
}

TEST_CASE("non-stationary wrapper: a frozen policy's mean return shifts after the flip") {
  std::vector<ScheduleEntry> sched{{600, {{"gravity", 14.0}, {"length", 1.3}}}};
  auto env = make_nonstationary("pendulum", {}, sched);
  auto episode_return = [&](std::uint64_t seed) {
    env->reset(seed);
    double total = 0.0;
    for (;;) {
      const auto r = env->step({1.0});
      total += r.reward;
      if (r.truncated) return total;
    }
  };
  double pre = 0.0, post = 0.0;
  for (int e = 0; e < 3; ++e) pre += episode_return(1000 + e) / 3.0;   // 600 steps, all pre-flip
  for (int e = 0; e < 3; ++e) post += episode_return(1000 + e) / 3.0;  // same seeds, post-flip
  CHECK(std::abs(pre - post) > 1e-3);
}

TEST_CASE("non-stationary wrapper: schedule validates overrides eagerly") {
  std::vector<ScheduleEntry> bad{{10, {{"not_a_knob", 1.0}}}};
  CHECK_THROWS_AS(make_nonstationary("pendulum", {}, bad), ConfigError);
}
