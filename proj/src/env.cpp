#include "env.hpp"

#include <algorithm>
#include <cmath>

namespace altlab::envs {

namespace {
constexpr double kPi = 3.14159265358979323846;

ParamMap merged(const ParamMap& defaults, const ParamMap& overrides, const std::string& env_name) {
  ParamMap out = defaults;
  for (const auto& [k, v] : overrides) {
    auto it = out.find(k);
    if (it == out.end()) throw ConfigError("unknown override '" + k + "' for env '" + env_name + "'");
    if (!std::isfinite(v)) throw ConfigError("override '" + k + "' for env '" + env_name + "' is not finite");
    it->second = v;
  }
  return out;
}

void check_action(const std::vector<double>& a, const EnvSpec& spec, const char* env) {
  if (static_cast<int>(a.size()) != spec.action_dim)
    throw ShapeError(std::string(env) + ": action dimension mismatch");
  for (double v : a)
    if (!std::isfinite(v)) throw NumericError(std::string(env) + ": non-finite action");
}
}  // namespace

double wrap_angle(double theta) {
  double t = std::fmod(theta + kPi, 2.0 * kPi);
  if (t <= 0.0) t += 2.0 * kPi;
  return t - kPi;
}

// ---------------------------------------------------------------------------
// Pendulum: classic torque-limited swing-up. State (theta, theta_dot) with
// theta = 0 upright; observation (cos theta, sin theta, theta_dot).
// Reward is evaluated on the pre-step state and the commanded torque.

class PendulumEnv final : public Environment {
 public:
  explicit PendulumEnv(const ParamMap& overrides) : params_(merged(defaults(), overrides, "pendulum")) {
    spec_.observation_dim = 3;
    spec_.action_dim = 1;
    const double mt = p("max_torque");
    if (mt <= 0) throw ConfigError("pendulum: max_torque must be positive");
    spec_.action_low = {-mt};
    spec_.action_high = {mt};
    spec_.max_episode_steps = static_cast<int>(p("max_episode_steps"));
    if (spec_.max_episode_steps <= 0) throw ConfigError("pendulum: max_episode_steps must be positive");
    if (p("mass") <= 0 || p("length") <= 0 || p("dt") <= 0)
      throw ConfigError("pendulum: mass, length and dt must be positive");
  }

  static ParamMap defaults() {
    return {{"gravity", 10.0},
            {"mass", 1.0},
            {"length", 1.0},
            {"dt", 0.05},
            {"max_torque", 2.0},
            {"torque_scale", 1.0},
            {"max_speed", 8.0},
            {"init_theta_low", -kPi},
            {"init_theta_high", kPi},
            {"init_theta_dot_low", -1.0},
            {"init_theta_dot_high", 1.0},
            {"max_episode_steps", 200.0}};
  }

  const EnvSpec& spec() const override { return spec_; }
  std::string name() const override { return "pendulum"; }
  ParamMap current_params() const override { return params_; }

  std::vector<double> reset(std::uint64_t seed) override {
    Rng rng(seed);
    theta_ = rng.uniform(p("init_theta_low"), p("init_theta_high"));
    theta_dot_ = rng.uniform(p("init_theta_dot_low"), p("init_theta_dot_high"));
    steps_ = 0;
    return observation();
  }

  StepResult step(const std::vector<double>& action) override {
    check_action(action, spec_, "pendulum");
    double a = action[0];
    if (a < spec_.action_low[0]) {
      a = spec_.action_low[0];
      ++clamp_count_;
    } else if (a > spec_.action_high[0]) {
      a = spec_.action_high[0];
      ++clamp_count_;
    }

    const double g = p("gravity"), m = p("mass"), l = p("length"), dt = p("dt");
    const double cost = wrap_angle(theta_) * wrap_angle(theta_) + 0.1 * theta_dot_ * theta_dot_ + 0.001 * a * a;

    // semi-implicit Euler on the rigid-rod dynamics
    const double torque = p("torque_scale") * a;
    const double theta_acc = 3.0 * g / (2.0 * l) * std::sin(theta_) + 3.0 / (m * l * l) * torque;
    theta_dot_ += theta_acc * dt;
    theta_dot_ = std::clamp(theta_dot_, -p("max_speed"), p("max_speed"));
    theta_ += theta_dot_ * dt;

    StepResult r;
    r.reward = -cost;
    ++steps_;
    r.truncated = steps_ >= spec_.max_episode_steps;
    r.terminal = false;  // swing-up never terminates early
    r.observation = observation();
    return r;
  }

 private:
  double p(const char* k) const { return params_.at(k); }
  std::vector<double> observation() const { return {std::cos(theta_), std::sin(theta_), theta_dot_}; }

  ParamMap params_;
  EnvSpec spec_;
  double theta_ = 0.0, theta_dot_ = 0.0;
  int steps_ = 0;
};

// ---------------------------------------------------------------------------
// Reacher: 2-D point mass steering toward a per-episode goal. Sparse-ish
// reward: success bonus inside the goal radius (which terminates), otherwise
// a living cost plus a mild distance shaping term.

class ReacherEnv final : public Environment {
 public:
  explicit ReacherEnv(const ParamMap& overrides) : params_(merged(defaults(), overrides, "reacher")) {
    spec_.observation_dim = 6;
    spec_.action_dim = 2;
    spec_.action_low = {-1.0, -1.0};
    spec_.action_high = {1.0, 1.0};
    spec_.max_episode_steps = static_cast<int>(p("max_episode_steps"));
    if (spec_.max_episode_steps <= 0) throw ConfigError("reacher: max_episode_steps must be positive");
    if (p("dt") <= 0 || p("goal_radius") <= 0) throw ConfigError("reacher: dt and goal_radius must be positive");
    if (p("drag") < 0 || p("drag") >= 1) throw ConfigError("reacher: drag must be in [0, 1)");
  }

  static ParamMap defaults() {
    return {{"dt", 0.1},
            {"drag", 0.05},
            {"accel_scale", 1.0},
            {"goal_radius", 0.1},
            {"arena_half_extent", 1.5},
            {"init_pos_half_extent", 0.2},
            {"goal_dist_low", 0.5},
            {"goal_dist_high", 0.9},
            {"success_reward", 10.0},
            {"step_cost", 0.05},
            {"dist_cost", 0.1},
            {"max_episode_steps", 200.0}};
  }

  const EnvSpec& spec() const override { return spec_; }
  std::string name() const override { return "reacher"; }
  ParamMap current_params() const override { return params_; }

  std::vector<double> reset(std::uint64_t seed) override {
    Rng rng(seed);
    const double ih = p("init_pos_half_extent");
    px_ = rng.uniform(-ih, ih);
    py_ = rng.uniform(-ih, ih);
    vx_ = vy_ = 0.0;
    const double gd = rng.uniform(p("goal_dist_low"), p("goal_dist_high"));
    const double ga = rng.uniform(-kPi, kPi);
    gx_ = gd * std::cos(ga);
    gy_ = gd * std::sin(ga);
    steps_ = 0;
    return observation();
  }

  StepResult step(const std::vector<double>& action) override {
    check_action(action, spec_, "reacher");
    double ax = action[0], ay = action[1];
    if (ax < -1.0 || ax > 1.0) {
      ax = std::clamp(ax, -1.0, 1.0);
      ++clamp_count_;
    }
    if (ay < -1.0 || ay > 1.0) {
      ay = std::clamp(ay, -1.0, 1.0);
      ++clamp_count_;
    }

    const double dt = p("dt"), drag = p("drag"), sc = p("accel_scale"), half = p("arena_half_extent");
    vx_ = (1.0 - drag) * vx_ + sc * ax * dt;
    vy_ = (1.0 - drag) * vy_ + sc * ay * dt;
    px_ += vx_ * dt;
    py_ += vy_ * dt;
    if (px_ < -half || px_ > half) {
      px_ = std::clamp(px_, -half, half);
      vx_ = 0.0;
    }
    if (py_ < -half || py_ > half) {
      py_ = std::clamp(py_, -half, half);
      vy_ = 0.0;
    }

    const double dist = std::hypot(gx_ - px_, gy_ - py_);
    const bool reached = dist < p("goal_radius");
    StepResult r;
    r.reward = reached ? p("success_reward") : -(p("step_cost") + p("dist_cost") * dist);
    r.terminal = reached;
    ++steps_;
    r.truncated = !reached && steps_ >= spec_.max_episode_steps;
    r.observation = observation();
    return r;
  }

 private:
  double p(const char* k) const { return params_.at(k); }
  std::vector<double> observation() const { return {px_, py_, vx_, vy_, gx_ - px_, gy_ - py_}; }

  ParamMap params_;
  EnvSpec spec_;
  double px_ = 0, py_ = 0, vx_ = 0, vy_ = 0, gx_ = 0, gy_ = 0;
  int steps_ = 0;
};

std::unique_ptr<Environment> make_env(const std::string& name, const ParamMap& overrides) {
  if (name == "pendulum") return std::make_unique<PendulumEnv>(overrides);
  if (name == "reacher") return std::make_unique<ReacherEnv>(overrides);
  throw ConfigError("unknown environment '" + name + "'");
}

// ---------------------------------------------------------------------------

class NonStationaryEnv final : public Environment {
 public:
  NonStationaryEnv(std::string base_name, ParamMap base_overrides, std::vector<ScheduleEntry> schedule)
      : base_name_(std::move(base_name)), base_overrides_(std::move(base_overrides)), schedule_(std::move(schedule)) {
    std::stable_sort(schedule_.begin(), schedule_.end(),
                     [](const ScheduleEntry& a, const ScheduleEntry& b) { return a.step < b.step; });
    for (const auto& e : schedule_)
      if (e.step < 0) throw ConfigError("schedule step must be non-negative");
    effective_ = base_overrides_;
    inner_ = make_env(base_name_, effective_);  // also validates override keys for every entry
    for (const auto& e : schedule_) (void)make_env(base_name_, merged_overrides(e.step));
  }

  const EnvSpec& spec() const override { return inner_->spec(); }
  std::string name() const override { return base_name_; }
  ParamMap current_params() const override { return inner_->current_params(); }

  std::vector<double> reset(std::uint64_t seed) override {
    ParamMap want = merged_overrides(global_steps_);
    if (want != effective_) {
      carried_clamps_ += inner_->clamp_count();
      effective_ = std::move(want);
      inner_ = make_env(base_name_, effective_);
    }
    return inner_->reset(seed);
  }

  StepResult step(const std::vector<double>& action) override {
    StepResult r = inner_->step(action);
    ++global_steps_;
    return r;
  }

  std::int64_t clamp_count() const override { return carried_clamps_ + inner_->clamp_count(); }

 private:
  // base overrides plus every schedule entry already passed at `steps`
  ParamMap merged_overrides(std::int64_t steps) const {
    ParamMap out = base_overrides_;
    for (const auto& e : schedule_) {
      if (e.step > steps) break;
      for (const auto& [k, v] : e.overrides) out[k] = v;
    }
    return out;
  }

  std::string base_name_;
  ParamMap base_overrides_;
  std::vector<ScheduleEntry> schedule_;
  ParamMap effective_;
  std::unique_ptr<Environment> inner_;
  std::int64_t global_steps_ = 0;
  std::int64_t carried_clamps_ = 0;
};

std::unique_ptr<Environment> make_nonstationary(const std::string& base_name, const ParamMap& base_overrides,
                                                std::vector<ScheduleEntry> schedule) {
  return std::make_unique<NonStationaryEnv>(base_name, base_overrides, std::move(schedule));
}

}  // namespace altlab::envs
