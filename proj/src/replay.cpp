#include "replay.hpp"

#include <cmath>
#include <cstring>

namespace altlab::replay {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_dim, int action_dim)
    : capacity_(capacity), obs_dim_(obs_dim), action_dim_(action_dim) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
  if (obs_dim <= 0 || action_dim <= 0) throw ConfigError("replay buffer dims must be positive");
  obs_.resize(capacity * obs_dim);
  next_obs_.resize(capacity * obs_dim);
  actions_.resize(capacity * action_dim);
  rewards_.resize(capacity);
  terminals_.resize(capacity);
}

void ReplayBuffer::push(const Transition& t) {
  if (static_cast<int>(t.obs.size()) != obs_dim_ || static_cast<int>(t.next_obs.size()) != obs_dim_ ||
      static_cast<int>(t.action.size()) != action_dim_)
    throw ShapeError("replay push: transition field dims mismatch");
  for (double v : t.obs)
    if (!std::isfinite(v)) throw NumericError("replay push: non-finite obs");
  for (double v : t.next_obs)
    if (!std::isfinite(v)) throw NumericError("replay push: non-finite next_obs");
  for (double v : t.action)
    if (!std::isfinite(v)) throw NumericError("replay push: non-finite action");
  if (!std::isfinite(t.reward)) throw NumericError("replay push: non-finite reward");

  std::size_t slot;
  if (count_ < capacity_) {
    slot = physical(count_);
    ++count_;
  } else {  // full: overwrite the oldest
    slot = start_;
    start_ = (start_ + 1) % capacity_;
  }
  std::memcpy(&obs_[slot * obs_dim_], t.obs.data(), sizeof(double) * obs_dim_);
  std::memcpy(&next_obs_[slot * obs_dim_], t.next_obs.data(), sizeof(double) * obs_dim_);
  std::memcpy(&actions_[slot * action_dim_], t.action.data(), sizeof(double) * action_dim_);
  rewards_[slot] = t.reward;
  terminals_[slot] = t.terminal ? 1 : 0;
  ++total_pushed_;
}

Batch ReplayBuffer::sample(int batch_size, Rng& rng) const {
  if (batch_size <= 0) throw PreconditionError("replay sample: batch_size must be positive");
  if (static_cast<std::size_t>(batch_size) > count_)
    throw PreconditionError("replay sample: buffer holds fewer items than batch_size");
  Batch b;
  b.obs = Matrix(batch_size, obs_dim_);
  b.next_obs = Matrix(batch_size, obs_dim_);
  b.actions = Matrix(batch_size, action_dim_);
  b.rewards.resize(batch_size);
  b.terminals.resize(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    const std::size_t slot = physical(rng.below(count_));
    std::memcpy(b.obs.row(i), &obs_[slot * obs_dim_], sizeof(double) * obs_dim_);
    std::memcpy(b.next_obs.row(i), &next_obs_[slot * obs_dim_], sizeof(double) * obs_dim_);
    std::memcpy(b.actions.row(i), &actions_[slot * action_dim_], sizeof(double) * action_dim_);
    b.rewards[i] = rewards_[slot];
    b.terminals[i] = terminals_[slot];
  }
  return b;
}

void ReplayBuffer::set_capacity(std::size_t new_capacity) {
  if (new_capacity == 0) throw ConfigError("replay set_capacity: capacity must be positive");
  if (new_capacity == capacity_) return;
  const std::size_t keep = std::min(count_, new_capacity);
  const std::size_t drop = count_ - keep;  // oldest items beyond the new capacity

  std::vector<double> obs(new_capacity * obs_dim_), next(new_capacity * obs_dim_);
  std::vector<double> act(new_capacity * action_dim_), rew(new_capacity);
  std::vector<std::uint8_t> term(new_capacity);
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t slot = physical(drop + i);
    std::memcpy(&obs[i * obs_dim_], &obs_[slot * obs_dim_], sizeof(double) * obs_dim_);
    std::memcpy(&next[i * obs_dim_], &next_obs_[slot * obs_dim_], sizeof(double) * obs_dim_);
    std::memcpy(&act[i * action_dim_], &actions_[slot * action_dim_], sizeof(double) * action_dim_);
    rew[i] = rewards_[slot];
    term[i] = terminals_[slot];
  }
  obs_ = std::move(obs);
  next_obs_ = std::move(next);
  actions_ = std::move(act);
  rewards_ = std::move(rew);
  terminals_ = std::move(term);
  capacity_ = new_capacity;
  start_ = 0;
  count_ = keep;
}

Matrix ReplayBuffer::recent_observations(int k) const {
  if (k < 1) throw PreconditionError("recent_observations: k must be >= 1");
  if (count_ == 0) throw PreconditionError("recent_observations: buffer is empty");
  const std::size_t n = std::min(static_cast<std::size_t>(k), count_);
  Matrix probe(static_cast<int>(n), obs_dim_);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = physical(count_ - n + i);
    std::copy(obs_.begin() + p * obs_dim_, obs_.begin() + (p + 1) * obs_dim_, probe.row(static_cast<int>(i)));
  }
  return probe;
}

std::vector<Transition> ReplayBuffer::contents() const {
  std::vector<Transition> out;
  out.reserve(count_);
  for (std::size_t i = 0; i < count_; ++i) {
    const std::size_t slot = physical(i);
    Transition t;
    t.obs.assign(&obs_[slot * obs_dim_], &obs_[slot * obs_dim_] + obs_dim_);
    t.next_obs.assign(&next_obs_[slot * obs_dim_], &next_obs_[slot * obs_dim_] + obs_dim_);
    t.action.assign(&actions_[slot * action_dim_], &actions_[slot * action_dim_] + action_dim_);
    t.reward = rewards_[slot];
    t.terminal = terminals_[slot] != 0;
    out.push_back(std::move(t));
  }
  return out;
}

std::uint64_t ReplayBuffer::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t i = 0; i < count_; ++i) {
    const std::size_t slot = physical(i);
    mix(&obs_[slot * obs_dim_], sizeof(double) * obs_dim_);
    mix(&actions_[slot * action_dim_], sizeof(double) * action_dim_);
    mix(&rewards_[slot], sizeof(double));
    mix(&next_obs_[slot * obs_dim_], sizeof(double) * obs_dim_);
    const unsigned char t = terminals_[slot];
    mix(&t, 1);
  }
  return h;
}

}  // namespace altlab::replay
