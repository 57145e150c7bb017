#pragma once
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace altlab::envs {

struct EnvSpec {
  int observation_dim = 0;
  int action_dim = 0;
  std::vector<double> action_low, action_high;
  int max_episode_steps = 0;
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool terminal = false;   // true end of the MDP
  bool truncated = false;  // time-limit cut, not a terminal state
};

using ParamMap = std::map<std::string, double>;

// Episodic continuous-control environment. Actions outside the box are
// clamped (and counted); observations are always finite.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual StepResult step(const std::vector<double>& action) = 0;
  virtual std::string name() const = 0;
  // Physical parameters as currently in effect (base values merged with any
  // overrides). Enough to construct an equivalent fresh instance.
  virtual ParamMap current_params() const = 0;
  virtual std::int64_t clamp_count() const { return clamp_count_; }

 protected:
  std::int64_t clamp_count_ = 0;
};

// Known names: "pendulum", "reacher". Unknown names or unknown override keys
// raise ConfigError.
std::unique_ptr<Environment> make_env(const std::string& name, const ParamMap& overrides = {});

struct ScheduleEntry {
  std::int64_t step = 0;  // global env-step threshold
  ParamMap overrides;
};

// Non-stationarity wrapper: counts global steps across episodes; once a
// schedule threshold is passed, its overrides take effect at the next
// episode reset (mid-episode dynamics never change).
std::unique_ptr<Environment> make_nonstationary(const std::string& base_name, const ParamMap& base_overrides,
                                                std::vector<ScheduleEntry> schedule);

// Angle wrapped to (-pi, pi].
double wrap_angle(double theta);

}  // namespace altlab::envs
